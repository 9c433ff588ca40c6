"""Time integration of the initial-boundary value problem in sqrt-density
variables, for both the quantum model (eps > 0) and its eps = 0 limit.

Unknowns per time level are w = sqrt(n) and theta at interior nodes and the
current density j at every node; the potential is eliminated through the
explicit Poisson representation.  Dirichlet data pin w and theta at the
contacts.  The quantum stencils close with ghost nodes that transcribe the
boundary conditions: w_{-1} = 2 w_0 - w_1 (vanishing second difference) and
j_{-1} = j_1 (vanishing first difference, which continuity forces at a
contact with fixed density).  The current at the contact nodes evolves by
the momentum equation itself, evaluated there with one-sided stencils; a
first-difference extrapolation row would be redundant with the interior
continuity rows in steady state and leaves the discrete stationary current
undetermined.

The default scheme is backward Euler solved by Newton with a sparse
finite-difference Jacobian; the potential coupling is refreshed every
residual evaluation but kept frozen inside the Jacobian.  The alternative
scheme performs frozen-coefficient linear sweeps (one per step by default),
whose fully-iterated fixed point coincides with the Newton solution.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import csc_matrix
from scipy.sparse.linalg import splu

from .exceptions import (
    FqhdError,
    IterationLimitError,
    SupersonicRegimeError,
    VacuumError,
)
from .model import FieldState, check_admissible
from .poisson import potential_from_density
from .stationary import SolverSettings, StationaryState

log = logging.getLogger(__name__)

VACUUM_FLOOR = 1e-8

# Coefficient of the fourth-difference current coupling in the stepper's
# interior momentum rows.  Centered first differences decouple the even and
# odd node sublattices of j, which would leave the discrete stationary
# current with a spurious O(dx^2) sublattice split; the term
# c dx^2 (D4 j) pins the sublattices together, is O(dx^2) consistent, and
# vanishes identically on constant currents.
CURRENT_COUPLING = 0.25


@dataclass(frozen=True)
class TransientState:
    """Time-stamped nodal fields (w = sqrt(density), j, theta, phi)."""

    t: float
    w: np.ndarray
    j: np.ndarray
    theta: np.ndarray
    phi: np.ndarray

    @property
    def n(self):
        return self.w**2

    def as_field_state(self):
        return FieldState(self.n, self.j, self.theta, self.phi)


@dataclass(frozen=True)
class StepperConfig:
    """Time-stepping controls.  dt = None picks the conservative default
    min(0.25 dx, 0.5 dx^2 / max(eps, dx)); every preset overrides it."""

    dt: float | None = None
    scheme: str = "implicit_newton"
    t_end: float = 1.0
    snapshot_stride: int = 1
    picard_sweeps: int = 1
    picard_tol: float = 1e-12
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        if self.dt is not None and self.dt <= 0.0:
            raise ValueError("dt must be positive when given")
        if self.t_end < 0.0:
            raise ValueError("t_end must be non-negative")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        if self.scheme not in ("implicit_newton", "picard_frozen"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.picard_sweeps < 1:
            raise ValueError("picard_sweeps must be >= 1")

    def resolve_dt(self, params):
        if self.dt is not None:
            return self.dt
        dx = params.grid.dx
        return min(0.25 * dx, 0.5 * dx**2 / max(params.eps, dx))


# ---------------------------------------------------------------------------
# compatibility of initial data

@dataclass(frozen=True)
class CompatibilityReport:
    """Per-condition booleans with the measured defect magnitudes."""

    density_trace: tuple[bool, float]
    temperature_trace: tuple[bool, float]
    flux_gradient: tuple[bool, float]
    density_curvature: tuple[bool, float]
    admissibility: tuple[bool, float]

    @property
    def compatible(self):
        return all(
            ok for ok, _ in (
                self.density_trace,
                self.temperature_trace,
                self.flux_gradient,
                self.density_curvature,
                self.admissibility,
            )
        )


def check_compatibility(initial, params, trace_tol=1e-10, deriv_tol=None):
    """Verify the initial data against the boundary data: matching density
    and temperature traces, vanishing one-sided j_x and w_xx at both
    contacts, and nodewise admissibility.

    The derivative conditions can only hold to discretization accuracy, so
    their default tolerance scales with dx^2.
    """
    grid = params.grid
    bd = params.bd
    dx = grid.dx
    if deriv_tol is None:
        deriv_tol = 25.0 * dx**2

    w, j, theta = initial.w, initial.j, initial.theta
    dens_defect = max(abs(w[0] - bd.w_l), abs(w[-1] - bd.w_r))
    temp_defect = max(abs(theta[0] - bd.theta_l), abs(theta[-1] - bd.theta_r))
    jx_defect = max(
        abs(-3.0 * j[0] + 4.0 * j[1] - j[2]),
        abs(3.0 * j[-1] - 4.0 * j[-2] + j[-3]),
    ) / (2.0 * dx)
    # one-sided five-point second difference (third-order) so that smooth
    # quartic tails of compatible data do not register as defects
    wxx_defect = max(
        abs(35.0 * w[0] - 104.0 * w[1] + 114.0 * w[2] - 56.0 * w[3] + 11.0 * w[4]),
        abs(35.0 * w[-1] - 104.0 * w[-2] + 114.0 * w[-3] - 56.0 * w[-4] + 11.0 * w[-5]),
    ) / (12.0 * dx**2)

    report = check_admissible(initial.as_field_state())
    min_margin = min(report.min_density, report.min_temperature, report.min_sound_gap)

    return CompatibilityReport(
        density_trace=(dens_defect <= trace_tol, dens_defect),
        temperature_trace=(temp_defect <= trace_tol, temp_defect),
        flux_gradient=(jx_defect <= deriv_tol, jx_defect),
        density_curvature=(wxx_defect <= deriv_tol, wxx_defect),
        admissibility=(report.admissible, min_margin),
    )


# ---------------------------------------------------------------------------
# PDE residuals (shared by the steppers and the verification oracle)

def _ghost_w(w):
    return 2.0 * w[0] - w[1], 2.0 * w[-1] - w[-2]


def _pde_residuals(w, j, theta, phi, wdot, jdot, thetadot, params):
    """Interior-node residuals of the three evolution equations."""
    dx = params.grid.dx
    eps = params.eps
    theta_L = params.theta_L

    wm1, wp1 = _ghost_w(w)
    jm1, jp1 = j[1], j[-2]

    # Bohm curvature ratio; exactly zero at the contacts by the ghost choice
    f = np.zeros_like(w)
    f[1:-1] = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / dx**2 / w[1:-1]

    ve = np.empty(len(w) + 2)
    ve[1:-1] = j / w**2
    ve[0] = jm1 / wm1**2
    ve[-1] = jp1 / wp1**2
    v = ve[1:-1]

    cont = 2.0 * w[1:-1] * wdot[1:-1] + (j[2:] - j[:-2]) / (2.0 * dx)

    S = theta[1:-1] - (j[1:-1] / w[1:-1] ** 2) ** 2
    mom = (
        jdot[1:-1]
        + 2.0 * S * w[1:-1] * (w[2:] - w[:-2]) / (2.0 * dx)
        + (2.0 * j[1:-1] / w[1:-1] ** 2) * (j[2:] - j[:-2]) / (2.0 * dx)
        + w[1:-1] ** 2 * (theta[2:] - theta[:-2]) / (2.0 * dx)
        - w[1:-1] ** 2 * (phi[2:] - phi[:-2]) / (2.0 * dx)
        + j[1:-1]
    )
    if eps > 0.0:
        mom = mom - eps**2 * w[1:-1] ** 2 * (f[2:] - f[:-2]) / (2.0 * dx)

    ener = (
        w[1:-1] ** 2 * thetadot[1:-1]
        + j[1:-1] * (theta[2:] - theta[:-2]) / (2.0 * dx)
        + (2.0 / 3.0) * w[1:-1] ** 2 * theta[1:-1] * (v[2:] - v[:-2]) / (2.0 * dx)
        - (2.0 / 3.0) * (theta[2:] - 2.0 * theta[1:-1] + theta[:-2]) / dx**2
        - (1.0 / 3.0) * j[1:-1] ** 2 / w[1:-1] ** 2
        + w[1:-1] ** 2 * (theta[1:-1] - theta_L)
    )
    if eps > 0.0:
        m = w**2 * (ve[2:] - 2.0 * ve[1:-1] + ve[:-2]) / dx**2
        ener = ener - (eps**2 / 3.0) * (m[2:] - m[:-2]) / (2.0 * dx)

    return cont, mom, ener


def _current_coupling_rows(j, dx):
    """Sublattice-coupling term for the stepper's momentum rows: zero at the
    two interior nodes next to the contacts, c dx^2 D4 j elsewhere."""
    out = np.zeros(len(j) - 2)
    out[1:-1] = CURRENT_COUPLING * (
        j[4:] - 4.0 * j[3:-1] + 6.0 * j[2:-2] - 4.0 * j[1:-3] + j[:-4]
    ) / dx**2
    return out


@dataclass(frozen=True)
class ResidualTriple:
    """Interior-node residuals of (continuity, momentum, energy)."""

    continuity: np.ndarray
    momentum: np.ndarray
    energy: np.ndarray

    @property
    def max_abs(self):
        return float(
            max(
                np.abs(self.continuity).max(),
                np.abs(self.momentum).max(),
                np.abs(self.energy).max(),
            )
        )


def fqhd_residual(state, time_derivs, params):
    """Nodewise defects of the evolution system at a state with prescribed
    time derivatives (w_t, j_t, theta_t).  With eps = 0 the quantum stencils
    drop out and this is the residual of the limit model."""
    if np.min(state.w) <= 0.0:
        raise VacuumError("non-positive sqrt-density in fqhd_residual")
    wdot, jdot, thetadot = (np.asarray(a, dtype=float) for a in time_derivs)
    cont, mom, ener = _pde_residuals(
        state.w, state.j, state.theta, state.phi, wdot, jdot, thetadot, params
    )
    return ResidualTriple(cont, mom, ener)


# ---------------------------------------------------------------------------
# packing and the sparse stencil pattern for finite-difference Jacobians

def _pack(w, j, theta):
    return np.concatenate([w[1:-1], j, theta[1:-1]])


def _unpack(x, params):
    bd = params.bd
    m = params.grid.n_nodes
    w = np.empty(m)
    w[0], w[-1] = bd.w_l, bd.w_r
    w[1:-1] = x[: m - 2]
    j = x[m - 2 : 2 * m - 2].copy()
    theta = np.empty(m)
    theta[0], theta[-1] = bd.theta_l, bd.theta_r
    theta[1:-1] = x[2 * m - 2 :]
    return w, j, theta


_STENCIL_REACH = 3
_COLOR_STRIDE = 2 * _STENCIL_REACH + 1

_pattern_cache = {}


def _stencil_pattern(n_cells):
    """Column groups and per-column row supports for the coupled system.

    Every residual row at node i depends only on unknowns within three
    nodes of i (after ghost substitution; the boundary momentum rows reach
    that far through their one-sided dispersive stencil), so columns of the
    same field spaced seven nodes apart can be probed simultaneously.
    """
    if n_cells in _pattern_cache:
        return _pattern_cache[n_cells]
    m = n_cells + 1
    interior = np.arange(1, n_cells)
    col_node = np.concatenate([interior, np.arange(m), interior])
    col_field = np.concatenate(
        [np.zeros(n_cells - 1, int), np.ones(m, int), np.full(n_cells - 1, 2, int)]
    )
    row_node = np.concatenate([interior, np.arange(m), interior])

    col_rows = [
        np.nonzero(np.abs(row_node - node) <= _STENCIL_REACH)[0] for node in col_node
    ]
    groups = []
    for f in range(3):
        for r in range(_COLOR_STRIDE):
            cols = np.nonzero((col_field == f) & (col_node % _COLOR_STRIDE == r))[0]
            if len(cols) == 0:
                continue
            entry_rows = np.concatenate([col_rows[c] for c in cols])
            entry_cols = np.concatenate([np.full(len(col_rows[c]), c) for c in cols])
            entry_local = np.concatenate(
                [np.full(len(col_rows[c]), k) for k, c in enumerate(cols)]
            )
            groups.append((cols, entry_rows, entry_cols, entry_local))
    _pattern_cache[n_cells] = (len(col_node), groups)
    return _pattern_cache[n_cells]


def _colored_matrix(res_fn, x0, r0, n_cells, fd_step=None):
    """Assemble the sparse Jacobian of res_fn at x0 by grouped differencing.

    With fd_step = None the probe step is 1 (exact for affine residuals);
    otherwise a scaled forward-difference step is used per column.
    """
    size, groups = _stencil_pattern(n_cells)
    rows, cols, vals = [], [], []
    for gcols, entry_rows, entry_cols, entry_local in groups:
        if fd_step is None:
            h = np.ones(len(gcols))
        else:
            h = fd_step * np.maximum(1.0, np.abs(x0[gcols]))
        xp = x0.copy()
        xp[gcols] += h
        dr = res_fn(xp) - r0
        rows.append(entry_rows)
        cols.append(entry_cols)
        vals.append(dr[entry_rows] / h[entry_local])
    return csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(size, size),
    )


# ---------------------------------------------------------------------------
# backward-Euler residual and Newton solve

def _boundary_momentum(w, j, theta, phi, jdot, params):
    """Momentum balance at the two contact nodes.

    The ghost values make j_x vanish there, so the advection-of-current
    term drops; w_x comes from the curvature ghost, theta_x and phi_x from
    one-sided second-order stencils, and the dispersive flux gradient from
    a one-sided stencil on the curvature ratio (which is zero at the node
    itself).
    """
    dx = params.grid.dx
    eps = params.eps
    rows = []
    for sign, b, i1, i2, i3 in ((+1, 0, 1, 2, 3), (-1, -1, -2, -3, -4)):
        S = theta[b] - (j[b] / w[b] ** 2) ** 2
        w_x = sign * (w[i1] - w[b]) / dx  # ghost-centered, exact under w_xx = 0
        theta_x = sign * (-3.0 * theta[b] + 4.0 * theta[i1] - theta[i2]) / (2.0 * dx)
        phi_x = sign * (-3.0 * phi[b] + 4.0 * phi[i1] - phi[i2]) / (2.0 * dx)
        row = (
            jdot[b]
            + 2.0 * S * w[b] * w_x
            + w[b] ** 2 * theta_x
            - w[b] ** 2 * phi_x
            + j[b]
        )
        if eps > 0.0:
            f1 = (w[i2] - 2.0 * w[i1] + w[b]) / dx**2 / w[i1]
            f2 = (w[i3] - 2.0 * w[i2] + w[i1]) / dx**2 / w[i2]
            f_x = sign * (4.0 * f1 - f2) / (2.0 * dx)  # one-sided with f(b) = 0
            row = row - eps**2 * w[b] ** 2 * f_x
        rows.append(row)
    return rows[0], rows[1]


def _be_residual(x, old, inv_dt, params, phi):
    """Backward-Euler residual with a prescribed (frozen) potential."""
    w, j, theta = _unpack(x, params)
    if inv_dt:
        wdot = (w - old[0]) * inv_dt
        jdot = (j - old[1]) * inv_dt
        thetadot = (theta - old[2]) * inv_dt
    else:
        wdot = jdot = thetadot = np.zeros_like(w)
    cont, mom, ener = _pde_residuals(w, j, theta, phi, wdot, jdot, thetadot, params)
    mom = mom + _current_coupling_rows(j, params.grid.dx)
    left, right = _boundary_momentum(w, j, theta, phi, jdot, params)
    return np.concatenate([cont, [left], mom, [right], ener])


def _potential(w, params):
    return potential_from_density(w**2, params.doping, params.bd.phi_r, params.grid)


def _solve_implicit_system(x0, old, inv_dt, params, settings):
    """Newton with live potential in the residual and frozen potential in
    the Jacobian; returns the solved unknown vector."""
    n_cells = params.grid.n_cells
    x = x0.copy()

    def full_residual(xc):
        w = _unpack(xc, params)[0]
        if w.min() < VACUUM_FLOOR:
            return None, None
        phi = _potential(w, params)
        return _be_residual(xc, old, inv_dt, params, phi), phi

    r, phi = full_residual(x)
    if r is None:
        raise VacuumError("initial state below the vacuum floor")
    lu = None
    norm = np.abs(r).max()
    for it in range(settings.newton_max_iter):
        if norm <= settings.newton_tol:
            return x
        fresh = lu is None
        if fresh:
            frozen_phi = phi
            jac = _colored_matrix(
                lambda xp: _be_residual(xp, old, inv_dt, params, frozen_phi),
                x,
                r,
                n_cells,
                fd_step=1e-7,
            )
            lu = splu(jac)
        dx_vec = lu.solve(-r)
        scale = settings.damping
        accepted = False
        for _ in range(30):
            r_t, phi_t = full_residual(x + scale * dx_vec)
            if r_t is not None and np.abs(r_t).max() < norm:
                x = x + scale * dx_vec
                new_norm = np.abs(r_t).max()
                # refresh the Jacobian unless convergence is clearly fast
                if new_norm > 0.2 * norm:
                    lu = None
                r, phi, norm = r_t, phi_t, new_norm
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            if fresh:
                # even a fresh Jacobian yields no descent: the residual has
                # stalled, typically at the roundoff floor of the 1/dx^3
                # dispersive stencils when the tolerance is set below it
                raise IterationLimitError(
                    f"implicit step stalled at residual {norm:.3e} "
                    f"(tolerance {settings.newton_tol:.1e})"
                )
            lu = None  # retry the iteration with a fresh Jacobian
        log.debug("implicit newton it=%d residual=%.3e", it, norm)
    raise IterationLimitError(
        f"implicit step did not reach {settings.newton_tol:.1e} in "
        f"{settings.newton_max_iter} iterations (residual {norm:.3e})"
    )


def _checked_state(t, w, j, theta, params):
    if w.min() < VACUUM_FLOOR:
        raise VacuumError(f"density floor reached (min w = {w.min():.3e})")
    phi = _potential(w, params)
    state = TransientState(t=t, w=w, j=j, theta=theta, phi=phi)
    report = check_admissible(state.as_field_state())
    if report.min_temperature <= 0.0 or report.min_sound_gap <= 0.0:
        raise SupersonicRegimeError(
            f"admissibility lost after step: min theta = {report.min_temperature:.3e}, "
            f"min sound gap = {report.min_sound_gap:.3e}"
        )
    return state


def step_implicit(state, params, cfg):
    """One backward-Euler step solved by Newton on the coupled system."""
    dt = cfg.resolve_dt(params)
    old = (state.w, state.j, state.theta)
    x = _solve_implicit_system(_pack(*old), old, 1.0 / dt, params, cfg.solver)
    w, j, theta = _unpack(x, params)
    return _checked_state(state.t + dt, w, j, theta, params)


# ---------------------------------------------------------------------------
# frozen-coefficient (Picard) stepping

def _picard_residual(x, frozen, old, inv_dt, params):
    """Residual of the linearized step: coefficients, the dispersive energy
    flux, the momentum relaxation and the potential are all evaluated at the
    frozen state; the remaining occurrences are the new unknowns."""
    wc, jc, thc, phic = frozen
    w, j, theta = _unpack(x, params)
    dx = params.grid.dx
    eps = params.eps
    theta_L = params.theta_L

    wdot = (w - old[0]) * inv_dt
    jdot = (j - old[1]) * inv_dt
    thetadot = (theta - old[2]) * inv_dt

    wcm1, wcp1 = _ghost_w(wc)
    vce = np.empty(len(wc) + 2)
    vce[1:-1] = jc / wc**2
    vce[0] = jc[1] / wcm1**2
    vce[-1] = jc[-2] / wcp1**2
    vc = vce[1:-1]

    Sc = thc - (jc / wc**2) ** 2

    cont = 2.0 * wc[1:-1] * wdot[1:-1] + (j[2:] - j[:-2]) / (2.0 * dx)

    f_lin = np.zeros_like(w)
    f_lin[1:-1] = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / dx**2 / wc[1:-1]
    mom = (
        jdot[1:-1]
        + 2.0 * Sc[1:-1] * wc[1:-1] * (w[2:] - w[:-2]) / (2.0 * dx)
        + (2.0 * jc[1:-1] / wc[1:-1] ** 2) * (j[2:] - j[:-2]) / (2.0 * dx)
        + wc[1:-1] ** 2 * (theta[2:] - theta[:-2]) / (2.0 * dx)
        - wc[1:-1] ** 2 * (phic[2:] - phic[:-2]) / (2.0 * dx)
        + jc[1:-1]
    )
    if eps > 0.0:
        mom = mom - eps**2 * wc[1:-1] ** 2 * (f_lin[2:] - f_lin[:-2]) / (2.0 * dx)

    ener = (
        wc[1:-1] ** 2 * thetadot[1:-1]
        + jc[1:-1] * (theta[2:] - theta[:-2]) / (2.0 * dx)
        + (2.0 / 3.0) * wc[1:-1] ** 2 * (vc[2:] - vc[:-2]) / (2.0 * dx) * theta[1:-1]
        - (2.0 / 3.0) * (theta[2:] - 2.0 * theta[1:-1] + theta[:-2]) / dx**2
        - (1.0 / 3.0) * jc[1:-1] ** 2 / wc[1:-1] ** 2
        + wc[1:-1] ** 2 * (theta[1:-1] - theta_L)
    )
    if eps > 0.0:
        mc = wc**2 * (vce[2:] - 2.0 * vce[1:-1] + vce[:-2]) / dx**2
        ener = ener - (eps**2 / 3.0) * (mc[2:] - mc[:-2]) / (2.0 * dx)

    mom = mom + _current_coupling_rows(j, dx)

    rows = []
    for sign, b, i1, i2, i3 in ((+1, 0, 1, 2, 3), (-1, -1, -2, -3, -4)):
        w_x = sign * (w[i1] - w[b]) / dx
        theta_x = sign * (-3.0 * theta[b] + 4.0 * theta[i1] - theta[i2]) / (2.0 * dx)
        phi_x = sign * (-3.0 * phic[b] + 4.0 * phic[i1] - phic[i2]) / (2.0 * dx)
        row = (
            jdot[b]
            + 2.0 * Sc[b] * wc[b] * w_x
            + wc[b] ** 2 * theta_x
            - wc[b] ** 2 * phi_x
            + jc[b]
        )
        if eps > 0.0:
            f1 = (w[i2] - 2.0 * w[i1] + w[b]) / dx**2 / wc[i1]
            f2 = (w[i3] - 2.0 * w[i2] + w[i1]) / dx**2 / wc[i2]
            row = row - eps**2 * wc[b] ** 2 * sign * (4.0 * f1 - f2) / (2.0 * dx)
        rows.append(row)
    return np.concatenate([cont, [rows[0]], mom, [rows[1]], ener])


def step_picard(state, params, cfg):
    """One time step by frozen-coefficient sweeps.

    Each sweep solves the linear system obtained by evaluating all
    coefficients (and the dispersive flux, momentum relaxation and
    potential) at the previous sweep's state.  The default single sweep is
    the classic semi-implicit scheme and agrees with the Newton step to
    O(dt^2); iterating the sweeps to a tight tolerance recovers the Newton
    fixed point.
    """
    dt = cfg.resolve_dt(params)
    inv_dt = 1.0 / dt
    old = (state.w, state.j, state.theta)
    n_cells = params.grid.n_cells

    frozen = (state.w, state.j, state.theta, state.phi)
    x = _pack(*old)
    for sweep in range(cfg.picard_sweeps):
        r = _picard_residual(x, frozen, old, inv_dt, params)
        mat = _colored_matrix(
            lambda xp: _picard_residual(xp, frozen, old, inv_dt, params),
            x,
            r,
            n_cells,
            fd_step=None,
        )
        x_new = x - splu(mat).solve(r)
        update = np.abs(x_new - x).max()
        x = x_new
        w, j, theta = _unpack(x, params)
        if w.min() < VACUUM_FLOOR:
            raise VacuumError(f"density floor reached (min w = {w.min():.3e})")
        frozen = (w, j, theta, _potential(w, params))
        if update <= cfg.picard_tol:
            break
        log.debug("picard sweep=%d update=%.3e", sweep, update)
    w, j, theta = _unpack(x, params)
    return _checked_state(state.t + dt, w, j, theta, params)


# ---------------------------------------------------------------------------
# trajectories

@dataclass
class Trajectory:
    times: np.ndarray
    snapshots: list
    series: dict
    final: TransientState
    steps: int
    failed: bool = False
    error: str | None = None


def run_transient(initial, params, cfg, observer=None):
    """Integrate from the initial state until t_end, collecting snapshots
    every snapshot_stride steps and per-step observer values.

    Solver failures do not raise; the partial trajectory is returned with
    the failure recorded.
    """
    report = check_compatibility(initial, params)
    ok_adm, margin = report.admissibility
    if not ok_adm:
        raise ValueError(f"initial data not admissible (margin {margin:.3e})")
    ok_n, dn = report.density_trace
    ok_t, dt_ = report.temperature_trace
    if not (ok_n and ok_t):
        raise ValueError(
            f"initial data violates the boundary traces (density defect {dn:.3e}, "
            f"temperature defect {dt_:.3e})"
        )
    if not report.compatible:
        log.warning("initial data only weakly compatible: %s", report)

    dt = cfg.resolve_dt(params)
    step_fn = step_implicit if cfg.scheme == "implicit_newton" else step_picard
    n_steps = max(0, int(round(cfg.t_end / dt)))
    if abs(n_steps * dt - cfg.t_end) > 1e-9 * max(1.0, cfg.t_end):
        n_steps = int(np.ceil(cfg.t_end / dt - 1e-12))

    state = initial
    times = [state.t]
    series = {}

    def observe(s):
        if observer is None:
            return
        for key, val in observer(s).items():
            series.setdefault(key, []).append(float(val))

    observe(state)
    snapshots = []
    failed = False
    error = None
    steps_done = 0
    for step in range(1, n_steps + 1):
        remaining = cfg.t_end - state.t
        step_cfg = cfg if remaining >= dt - 1e-12 else replace(cfg, dt=remaining)
        try:
            state = step_fn(state, params, step_cfg)
        except FqhdError as exc:
            failed = True
            error = f"{type(exc).__name__}: {exc}"
            log.error("transient run aborted at t=%.4f: %s", state.t, error)
            break
        steps_done = step
        times.append(state.t)
        observe(state)
        if step % cfg.snapshot_stride == 0:
            snapshots.append(state)

    return Trajectory(
        times=np.asarray(times),
        snapshots=snapshots,
        series={k: np.asarray(v) for k, v in series.items()},
        final=state,
        steps=steps_done,
        failed=failed,
        error=error,
    )


# ---------------------------------------------------------------------------
# stationary anchors and compatible perturbations

def transient_from_stationary(anchor, params, t=0.0):
    return TransientState(
        t=t,
        w=anchor.w.copy(),
        j=np.full_like(anchor.w, anchor.J),
        theta=anchor.theta.copy(),
        phi=anchor.phi.copy(),
    )


def polish_stationary(anchor, params, settings=None):
    """Refine a stationary state into the exact fixed point of the discrete
    stepper (the steady version of the backward-Euler system).  The two
    differ by spatial discretization error; decay diagnostics measure
    against the polished anchor so their floor is the solver tolerance."""
    settings = settings or SolverSettings()
    w0 = anchor.w
    old = (w0, np.full_like(w0, anchor.J), anchor.theta)
    x = _solve_implicit_system(_pack(*old), old, 0.0, params, settings)
    w, j, theta = _unpack(x, params)
    spread = np.ptp(j)
    if spread > 1e-6:
        log.warning("polished stationary current not constant (spread %.3e)", spread)
    return StationaryState(
        w=w,
        J=float(j.mean()),
        theta=theta,
        phi=_potential(w, params),
        eps=params.eps,
    )


def density_bump_shape(x):
    """Perturbation profile for w: vanishing value, slope and curvature at
    both contacts (x^3 (1-x)^3, normalized to unit sup)."""
    return 64.0 * x**3 * (1.0 - x) ** 3


def flux_bump_shape(x):
    """Perturbation profile for j and theta: vanishing value and slope at
    both contacts (x^2 (1-x)^2, normalized to unit sup)."""
    return 16.0 * x**2 * (1.0 - x) ** 2


def perturbed_from_stationary(anchor, params, amplitude):
    """Initial data: stationary anchor plus compatibility-preserving bumps
    of the given sup-norm amplitude on w, j and theta."""
    x = params.grid.nodes
    w = anchor.w + amplitude * density_bump_shape(x)
    j = np.full_like(w, anchor.J) + amplitude * flux_bump_shape(x)
    theta = anchor.theta + amplitude * flux_bump_shape(x)
    return TransientState(
        t=0.0, w=w, j=j, theta=theta, phi=_potential(w, params)
    )


def affine_initial_state(params, j0=0.0):
    """Compatible initial data independent of eps: affine w and theta
    interpolants of the boundary data and a constant current."""
    x = params.grid.nodes
    bd = params.bd
    w = bd.w_l * (1.0 - x) + bd.w_r * x
    theta = bd.theta_l * (1.0 - x) + bd.theta_r * x
    j = np.full_like(w, j0)
    return TransientState(t=0.0, w=w, j=j, theta=theta, phi=_potential(w, params))
