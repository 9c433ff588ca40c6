"""Domain types, physical closed forms, and admissibility checks.

Everything here is shared by the stationary and transient solvers: the
uniform grid on (0, 1), the doping profile and boundary data, the scenario
bundle, and the handful of scalar formulas (boundary strength, sound gap,
density box bounds, specific enthalpy) that the solvers and their tests
evaluate directly.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform mesh on (0, 1) with n_cells + 1 nodes."""

    n_cells: int
    dx: float = field(init=False)
    nodes: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.n_cells < 2:
            raise ValueError(f"n_cells must be >= 2, got {self.n_cells}")
        object.__setattr__(self, "dx", 1.0 / self.n_cells)
        object.__setattr__(self, "nodes", np.linspace(0.0, 1.0, self.n_cells + 1))

    @property
    def n_nodes(self):
        return self.n_cells + 1


def grid_for_samples(f):
    """Reconstruct the (unique) unit-interval grid a sample vector lives on."""
    return Grid(len(np.asarray(f)) - 1)


@dataclass(frozen=True)
class DopingProfile:
    """Node samples of the background doping D(x); must be strictly positive."""

    samples: np.ndarray
    sup_norm: float = field(init=False)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", samples)
        if samples.min() <= 0.0:
            raise ValueError("doping profile must be strictly positive")
        object.__setattr__(self, "sup_norm", float(np.abs(samples).max()))

    @classmethod
    def from_callable(cls, grid, fn):
        return cls(np.asarray([fn(x) for x in grid.nodes], dtype=float))

    @classmethod
    def flat(cls, grid, level):
        return cls(np.full(grid.n_nodes, float(level)))


@dataclass(frozen=True)
class BoundaryData:
    """Ohmic-contact boundary values; densities and temperatures positive."""

    n_l: float
    n_r: float
    theta_l: float
    theta_r: float
    phi_r: float = 0.0

    def __post_init__(self):
        for name in ("n_l", "n_r", "theta_l", "theta_r"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def w_l(self):
        return float(np.sqrt(self.n_l))

    @property
    def w_r(self):
        return float(np.sqrt(self.n_r))


@dataclass(frozen=True)
class ScenarioParams:
    """Everything that fixes one physical problem instance.

    eps is the scaled Planck constant in [0, 1]; eps = 0 selects the
    classical hydrodynamic limit model.  theta_L is the lattice temperature.
    """

    grid: Grid
    doping: DopingProfile
    bd: BoundaryData
    eps: float
    theta_L: float

    def __post_init__(self):
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError(f"eps must lie in [0, 1], got {self.eps}")
        if self.theta_L <= 0.0:
            raise ValueError(f"theta_L must be positive, got {self.theta_L}")
        if len(self.doping.samples) != self.grid.n_nodes:
            raise ValueError("doping samples do not match the grid")


@dataclass(frozen=True)
class FieldState:
    """Nodal samples of (n, j, theta, phi).  Admissibility is checked
    explicitly via check_admissible, not enforced by construction."""

    n: np.ndarray
    j: np.ndarray
    theta: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(a, dtype=float) for a in (self.n, self.j, self.theta, self.phi)]
        lengths = {len(a) for a in arrays}
        if len(lengths) != 1:
            raise ValueError(f"field lengths differ: {[len(a) for a in arrays]}")
        for name, a in zip(("n", "j", "theta", "phi"), arrays):
            object.__setattr__(self, name, a)


@dataclass(frozen=True)
class AdmissibilityReport:
    min_density: float
    min_temperature: float
    min_sound_gap: float

    @property
    def admissible(self):
        return self.min_density > 0.0 and self.min_temperature > 0.0 and self.min_sound_gap > 0.0


def boundary_strength(bd, theta_L):
    """Strength of the boundary data,
    |n_l - n_r| + |theta_l - theta_L| + |theta_r - theta_L| + |phi_r|.

    This is the smallness parameter every solver regime check refers to.
    """
    return (
        abs(bd.n_l - bd.n_r)
        + abs(bd.theta_l - theta_L)
        + abs(bd.theta_r - theta_L)
        + abs(bd.phi_r)
    )


def sound_gap(n, j, theta):
    """Subsonic margin theta - j^2/n^2; positive in the subsonic regime.

    Works elementwise on arrays as well as on scalars.
    """
    n = np.asarray(n, dtype=float)
    if np.any(n <= 0.0):
        raise ValueError("density must be positive in sound_gap")
    out = np.asarray(theta, dtype=float) - (np.asarray(j, dtype=float) / n) ** 2
    return float(out) if out.ndim == 0 else out


def check_admissible(state):
    """Nodewise minima of density, temperature and sound gap."""
    n = np.asarray(state.n, dtype=float)
    theta = np.asarray(state.theta, dtype=float)
    min_n = float(n.min())
    min_theta = float(theta.min())
    if min_n <= 0.0:
        return AdmissibilityReport(min_n, min_theta, -np.inf)
    gap = sound_gap(n, state.j, theta)
    return AdmissibilityReport(min_n, min_theta, float(np.min(gap)))


def density_bounds(n_l, theta_L, d_sup):
    """A-priori box [b, B] for sqrt(density) of subsonic stationary states:

        B = (3/2) sqrt(n_l) exp(2 d_sup / theta_L)
        b = (1/2) sqrt(n_l) exp(-(B^2 + 2 d_sup) / theta_L)

    d_sup is the sup norm of the doping profile; d_sup = 0 only makes sense
    as a degenerate test input and still yields b < B.
    """
    if n_l <= 0.0 or theta_L <= 0.0 or d_sup < 0.0:
        raise ValueError("density_bounds needs n_l > 0, theta_L > 0, d_sup >= 0")
    B = 1.5 * np.sqrt(n_l) * np.exp(2.0 * d_sup / theta_L)
    b = 0.5 * np.sqrt(n_l) * np.exp(-(B**2 + 2.0 * d_sup) / theta_L)
    return float(b), float(B)


def enthalpy_F(a1, a2, a3):
    """Specific enthalpy a2^2/(2 a1^2) + a3 + a3 ln a1 (a1 is a density)."""
    a1 = np.asarray(a1, dtype=float)
    if np.any(a1 <= 0.0):
        raise ValueError("first argument of enthalpy_F must be positive")
    out = np.asarray(a2, dtype=float) ** 2 / (2.0 * a1**2) + a3 + a3 * np.log(a1)
    return float(out) if out.ndim == 0 else out
