"""Norms, energies, decay-rate fits and semi-classical convergence measures.

These turn the qualitative stability and limit statements into checkable
numbers: discrete Sobolev norms of perturbations (with the Planck-weighted
third/fourth-difference terms), the relative-entropy energy functional, an
exponential fit of decaying series, and composite errors between solutions
at different eps.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import fd
from .model import grid_for_samples


@dataclass(frozen=True)
class NormSpec:
    """Which discrete norm to take: Sobolev order in {0,..,3}, optionally a
    positive node weight.  eps_weighted marks the perturbation-norm variant
    that appends the Planck-weighted high-derivative terms; that variant
    needs the full field triple, so it lives in perturbation_norm."""

    order: int = 0
    eps_weighted: bool = False
    weight: np.ndarray | None = None

    def __post_init__(self):
        if self.order not in (0, 1, 2, 3):
            raise ValueError(f"norm order must be in 0..3, got {self.order}")
        if self.weight is not None:
            weight = np.asarray(self.weight, dtype=float)
            if weight.min() <= 0.0:
                raise ValueError("norm weight must be positive nodewise")
            object.__setattr__(self, "weight", weight)


_DERIVS = (lambda f, dx: f, fd.d1, fd.d2, fd.d3)


def _sobolev(f, dx, order, weight=None):
    total = 0.0
    for k in range(order + 1):
        total += fd.l2_norm(_DERIVS[k](f, dx), dx, weight) ** 2
    return math.sqrt(total)


def discrete_norm(f, grid, spec):
    """Trapezoid-weighted discrete Sobolev norm of one sample vector."""
    f = np.asarray(f, dtype=float)
    if len(f) != grid.n_nodes:
        raise ValueError(f"{len(f)} samples on a {grid.n_nodes}-node grid")
    if spec.eps_weighted:
        raise ValueError("eps-weighted norms act on field triples; use perturbation_norm")
    if spec.weight is not None and len(spec.weight) != grid.n_nodes:
        raise ValueError("weight length does not match the grid")
    return _sobolev(f, grid.dx, spec.order, spec.weight)


def perturbation_norm(state, anchor, eps):
    """Stability functional: H^2 norm of (w - w~, j - J~, theta - theta~)
    plus || (eps d3(w-w~), eps d3(j-J~), eps^2 d4(w-w~)) ||."""
    if len(state.w) != len(anchor.w):
        raise ValueError("state and anchor live on different grids")
    dx = grid_for_samples(state.w).dx
    dw = state.w - anchor.w
    dj = state.j - np.full_like(state.j, anchor.J)
    dtheta = state.theta - anchor.theta
    h2 = math.sqrt(sum(_sobolev(f, dx, 2) ** 2 for f in (dw, dj, dtheta)))
    weighted = quantum_weighted_norm(state, anchor, eps)
    return h2 + weighted


def quantum_weighted_norm(state, anchor, eps):
    """The Planck-weighted part of the perturbation norm alone."""
    dx = grid_for_samples(state.w).dx
    dw = state.w - anchor.w
    dj = state.j - np.full_like(state.j, anchor.J)
    if eps == 0.0:
        return 0.0
    return math.sqrt(
        fd.l2_norm(eps * fd.d3(dw, dx), dx) ** 2
        + fd.l2_norm(eps * fd.d3(dj, dx), dx) ** 2
        + fd.l2_norm(eps**2 * fd.d4(dw, dx), dx) ** 2
    )


def entropy_psi(s):
    """Convex entropy weight s - 1 - ln s; non-negative, zero only at 1."""
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0.0):
        raise ValueError("entropy_psi needs positive arguments")
    out = s - 1.0 - np.log(s)
    return float(out) if out.ndim == 0 else out


def energy_xi(state, anchor, eps, alpha=0.01):
    """Relative-entropy energy of a transient state about a stationary
    anchor: kinetic, entropy, quantum-gradient, electric and thermal parts
    minus the small cross coupling alpha (j/w^2 - J~/w~^2) phi-hat_x."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if len(state.w) != len(anchor.w):
        raise ValueError("state and anchor live on different grids")
    w, j, theta = state.w, state.j, state.theta
    if w.min() <= 0.0 or theta.min() <= 0.0 or anchor.w.min() <= 0.0:
        raise ValueError("energy_xi needs admissible state and anchor")
    dx = grid_for_samples(w).dx

    dj = j - anchor.J
    dtheta = theta - anchor.theta
    dphi_x = fd.d1(state.phi - anchor.phi, dx)
    dw_x = fd.d1(w - anchor.w, dx)

    integrand = (
        dj**2 / (2.0 * w**2)
        + anchor.theta * w**2 * entropy_psi(anchor.w**2 / w**2)
        + eps**2 * dw_x**2
        + 0.5 * dphi_x**2
        + (3.0 * w**2 / (4.0 * anchor.theta)) * dtheta**2
        - alpha * (j / w**2 - anchor.J / anchor.w**2) * dphi_x
    )
    return float(fd.trapezoid(integrand, dx))


@dataclass(frozen=True)
class DecayFit:
    gamma: float
    amplitude: float
    r_squared: float
    window: tuple[float, float]


def fit_decay_rate(times, values, window):
    """Least-squares exponential fit value ~ amplitude * exp(-gamma t) over
    the given time window; returns the rate and the fit quality."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0.0):
        raise ValueError("decay fitting needs positive values")
    t0, t1 = window
    mask = (times >= t0) & (times <= t1)
    if mask.sum() < 3:
        raise ValueError(f"window [{t0}, {t1}] contains {int(mask.sum())} points; need >= 3")
    t = times[mask]
    y = np.log(values[mask])
    slope, intercept = np.polyfit(t, y, 1)
    fit = slope * t + intercept
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return DecayFit(
        gamma=float(-slope),
        amplitude=float(np.exp(intercept)),
        r_squared=float(r2),
        window=(float(t0), float(t1)),
    )


@dataclass(frozen=True)
class ConvergenceStudy:
    """Errors of a quantity against a decreasing sequence of eps values."""

    eps_values: tuple
    errors: tuple

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_values)
        err = tuple(float(e) for e in self.errors)
        if len(eps) != len(err):
            raise ValueError("eps_values and errors must have equal length")
        if any(e <= 0.0 for e in eps) or any(b <= a for a, b in zip(eps[1:], eps)):
            raise ValueError("eps_values must be strictly decreasing and positive")
        if any(e < 0.0 for e in err):
            raise ValueError("errors must be non-negative")
        object.__setattr__(self, "eps_values", eps)
        object.__setattr__(self, "errors", err)

    @property
    def slope(self):
        return convergence_slope(self)


def convergence_slope(study):
    """Least-squares slope of log(error) against log(eps); +inf marks the
    degenerate all-errors-zero case."""
    if len(study.eps_values) < 3:
        raise ValueError("need at least 3 eps values for a slope")
    if any(e == 0.0 for e in study.errors):
        return math.inf
    slope, _ = np.polyfit(np.log(study.eps_values), np.log(study.errors), 1)
    return float(slope)


def semiclassical_error(a, b, kind):
    """Composite norm separating a quantum solution from its eps = 0 twin.

    stationary: |n|_H1 + |J| + |theta|_H2 + |phi|_H3 of the differences;
    transient:  combined H1 of (n, j, theta) differences + H3 of phi.
    Densities are compared as n = w^2.
    """
    if len(a.w) != len(b.w):
        raise ValueError("states live on different grids")
    dx = grid_for_samples(a.w).dx
    dn = a.n - b.n
    dtheta = a.theta - b.theta
    dphi = a.phi - b.phi
    if kind == "stationary":
        if getattr(b, "eps", None) != 0.0:
            raise ValueError("second argument must be the eps = 0 stationary state")
        return (
            _sobolev(dn, dx, 1)
            + abs(a.J - b.J)
            + _sobolev(dtheta, dx, 2)
            + _sobolev(dphi, dx, 3)
        )
    if kind == "transient":
        dj = a.j - b.j
        fields = math.sqrt(
            _sobolev(dn, dx, 1) ** 2
            + _sobolev(dj, dx, 1) ** 2
            + _sobolev(dtheta, dx, 1) ** 2
        )
        return fields + _sobolev(dphi, dx, 3)
    raise ValueError(f"kind must be 'stationary' or 'transient', got {kind!r}")


def crossover_time(eps, gamma3):
    """Time -ln(eps) / (4 gamma3) splitting the short-horizon exponential
    error bound from the long-time stationary-difference bound."""
    if not 0.0 < eps < 1.0:
        raise ValueError("crossover_time needs eps in (0, 1)")
    if gamma3 <= 0.0:
        raise ValueError("gamma3 must be positive")
    return -math.log(eps) / (4.0 * gamma3)
