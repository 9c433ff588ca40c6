"""Stationary subsonic states of the quantum hydrodynamic model.

The solver follows the constructive route: transform to sqrt-density
variables, integrate the momentum equation once (the vanishing second
derivative of sqrt(n) at the contacts makes the integration constant
explicit), which leaves

  (P1)  eps^2 u_xx = h(u, q),        u(0) = w_l, u(1) = w_r
  (P2)  a linear nonlocal equation for the temperature Q,
        Q(0) = theta_l, Q(1) = theta_r

plus closed forms for the constant current J and the potential.  A fixed
point of q -> Q (solving P1 then P2) is a stationary state.  The eps = 0
limit runs the same pipeline with P1 collapsed to a nodewise algebraic
equation and the dispersive source dropped.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from . import fd
from .exceptions import (
    IterationLimitError,
    LinearSolveError,
    OutOfRegimeError,
    SupersonicRegimeError,
)
from .model import FieldState, check_admissible, density_bounds, enthalpy_F
from .poisson import PotentialMethod, potential_from_density, residual_from_arrays

log = logging.getLogger(__name__)

# loosened-box factors of the truncation problem: beta = b/2, alpha = 2B
TRUNCATION_LOWER_FACTOR = 0.5
TRUNCATION_UPPER_FACTOR = 2.0


@dataclass(frozen=True)
class StationaryState:
    """Stationary solution in sqrt-density form: density = w**2, constant
    current J, temperature and potential samples, and the eps it was
    computed at."""

    w: np.ndarray
    J: float
    theta: np.ndarray
    phi: np.ndarray
    eps: float

    @property
    def n(self):
        return self.w**2


@dataclass(frozen=True)
class SolverSettings:
    newton_tol: float = 1e-10
    newton_max_iter: int = 60
    fp_tol: float = 1e-8
    fp_max_iter: int = 200
    damping: float = 1.0

    def __post_init__(self):
        if self.newton_tol <= 0.0 or self.fp_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.newton_max_iter < 1 or self.fp_max_iter < 1:
            raise ValueError("iteration caps must be >= 1")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")


def boundary_bias(bd):
    """Constant term of the current-voltage relation,
    phi_r - theta_r + theta_l - theta_r ln(n_r) + theta_l ln(n_l)."""
    return (
        bd.phi_r
        - bd.theta_r
        + bd.theta_l
        - bd.theta_r * np.log(bd.n_r)
        + bd.theta_l * np.log(bd.n_l)
    )


def _theta_weighted_log_integral(w, theta, dx):
    """int_0^1 theta_x ln(w^2) dx with centered differences for theta_x."""
    return fd.trapezoid(fd.d1(theta, dx) * np.log(w**2), dx)


def K_functional(w, theta, params):
    """Denominator of the closed-form current; raises SupersonicRegimeError
    when the discriminant of the current-voltage quadratic is negative."""
    w = np.asarray(w, dtype=float)
    if w.min() <= 0.0:
        raise ValueError("w must be positive in K_functional")
    dx = params.grid.dx
    inv_density = fd.trapezoid(w**-2, dx)
    drive = boundary_bias(params.bd) + _theta_weighted_log_integral(w, theta, dx)
    disc = inv_density**2 + 2.0 * drive * (params.bd.n_r**-2 - params.bd.n_l**-2)
    if disc < 0.0:
        raise SupersonicRegimeError(
            f"current-voltage discriminant negative ({disc:.3e}); boundary data "
            "too strong for the subsonic branch"
        )
    return float(inv_density + np.sqrt(disc))


def current_J(w, theta, params):
    """Constant stationary current density from the closed form
    J = 2 (bias + int theta_x ln w^2) / K."""
    dx = params.grid.dx
    drive = boundary_bias(params.bd) + _theta_weighted_log_integral(w, theta, dx)
    return 2.0 * drive / K_functional(w, theta, params)


def cvr_residual(J, w, theta, params):
    """Defect of the current-voltage relation at a trial current J."""
    w = np.asarray(w, dtype=float)
    bd = params.bd
    dx = params.grid.dx
    return float(
        enthalpy_F(bd.n_r, J, bd.theta_r)
        - enthalpy_F(bd.n_l, J, bd.theta_l)
        - bd.phi_r
        - _theta_weighted_log_integral(w, theta, dx)
        + J * fd.trapezoid(w**-2, dx)
    )


def rhs_h(u, q, J, phi, params):
    """Source of the integrated momentum equation.

    h_i = u_i [ F(u_i^2, J, q_i) - F(n_l, J, theta_l) - phi_i
                - int_0^{x_i} q_x ln(u^2) dy + J int_0^{x_i} u^-2 dy ],
    with cumulative trapezoid quadrature for the running integrals.
    Exactly zero at x = 0 whenever u(0)^2 = n_l and q(0) = theta_l.
    """
    u = np.asarray(u, dtype=float)
    q = np.asarray(q, dtype=float)
    if u.min() <= 0.0 or q.min() <= 0.0:
        raise ValueError("u and q must be positive in rhs_h")
    bd = params.bd
    dx = params.grid.dx
    running_log = fd.cumulative_trapezoid(fd.d1(q, dx) * np.log(u**2), dx)
    running_inv = fd.cumulative_trapezoid(u**-2, dx)
    bracket = (
        enthalpy_F(u**2, J, q)
        - enthalpy_F(bd.n_l, J, bd.theta_l)
        - np.asarray(phi, dtype=float)
        - running_log
        + J * running_inv
    )
    return u * bracket


def rhs_g(u, q, J, eps, grid):
    """Dispersive source of the temperature equation,
    -J^2/(3u^2) + (eps^2 J / 3)(12 u_x^3/u^3 - 14 u_x u_xx/u^2 + 2 u_xxx/u).

    q is part of the operation contract but the source itself only involves
    u and the current.  Third derivatives fall back to one-sided stencils at
    the endpoints.
    """
    u = np.asarray(u, dtype=float)
    if u.min() <= 0.0:
        raise ValueError("u must be positive in rhs_g")
    if eps < 0.0:
        raise ValueError("eps must be non-negative")
    g = -J**2 / (3.0 * u**2)
    if eps > 0.0 and J != 0.0:
        dx = grid.dx
        ux = fd.d1(u, dx)
        uxx = fd.d2(u, dx)
        uxxx = fd.d3(u, dx)
        g = g + (eps**2 * J / 3.0) * (
            12.0 * ux**3 / u**3 - 14.0 * ux * uxx / u**2 + 2.0 * uxxx / u
        )
    return g


def _truncation_box(params):
    b, B = density_bounds(params.bd.n_l, params.theta_L, params.doping.sup_norm)
    return b, B, TRUNCATION_LOWER_FACTOR * b, TRUNCATION_UPPER_FACTOR * B


def _p1_residual(u, q, params):
    """Interior defect eps^2 D2 u - h(u_trunc, q) with live nonlocal terms."""
    _, _, beta, alpha = _truncation_box(params)
    uc = np.clip(u, beta, alpha)
    J = current_J(uc, q, params)
    phi = potential_from_density(uc**2, params.doping, params.bd.phi_r, params.grid)
    h = rhs_h(uc, q, J, phi, params)
    dx = params.grid.dx
    lap = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / dx**2
    return params.eps**2 * lap - h[1:-1], h, uc, J


def solve_P1(q, params, settings):
    """Solve the truncated sqrt-density problem for a frozen temperature q.

    Damped Newton on eps^2 D2 u = h(u, q); the nonlocal pieces of h (the
    current, the potential and the running integrals) are refreshed every
    iteration but not linearized, which keeps the correction tridiagonal.
    With eps = 0 the equation is algebraic in u and solved nodewise instead.
    Raises OutOfRegimeError if the truncation is still active at the end.
    """
    q = np.asarray(q, dtype=float)
    if q.min() <= 0.0:
        raise ValueError("q must be positive in solve_P1")
    if params.eps == 0.0:
        return _solve_p1_limit(q, params, settings)

    grid = params.grid
    dx = grid.dx
    bd = params.bd
    _, _, beta, alpha = _truncation_box(params)
    u = bd.w_l * (1.0 - grid.nodes) + bd.w_r * grid.nodes

    resid, h, uc, J = _p1_residual(u, q, params)
    converged = False
    for it in range(settings.newton_max_iter):
        res_norm = np.abs(resid).max()
        if res_norm <= settings.newton_tol:
            converged = True
            break
        # local derivative of h through the truncated argument; zero where
        # the clip is active
        bracket = h[1:-1] / uc[1:-1]
        dFdu = -2.0 * J**2 / uc[1:-1] ** 5 + 2.0 * q[1:-1] / uc[1:-1]
        dh = bracket + uc[1:-1] * dFdu
        dh[(u[1:-1] < beta) | (u[1:-1] > alpha)] = 0.0

        n_int = grid.n_nodes - 2
        band = np.zeros((3, n_int))
        band[0, 1:] = params.eps**2 / dx**2
        band[1, :] = -2.0 * params.eps**2 / dx**2 - dh
        band[2, :-1] = params.eps**2 / dx**2
        try:
            du = solve_banded((1, 1), band, -resid)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
            raise LinearSolveError(f"P1 Newton system singular: {exc}") from exc

        scale = settings.damping
        for _ in range(40):
            trial = u.copy()
            trial[1:-1] += scale * du
            t_resid, t_h, t_uc, t_J = _p1_residual(trial, q, params)
            if np.abs(t_resid).max() < res_norm:
                u, resid, h, uc, J = trial, t_resid, t_h, t_uc, t_J
                break
            scale *= 0.5
        else:
            # no decrease found; take the smallest step and let the cap decide
            u[1:-1] += scale * du
            resid, h, uc, J = _p1_residual(u, q, params)
        log.debug("P1 newton it=%d residual=%.3e", it, np.abs(resid).max())

    if not converged:
        raise IterationLimitError(
            f"P1 Newton did not reach {settings.newton_tol:.1e} in "
            f"{settings.newton_max_iter} iterations (residual {np.abs(resid).max():.3e})"
        )
    if u.min() < beta - 1e-12 or u.max() > alpha + 1e-12:
        raise OutOfRegimeError(
            "truncation still active at P1 convergence; boundary data outside "
            "the small-strength regime"
        )
    return u


def _solve_p1_limit(q, params, settings):
    """eps = 0 version of P1: h(u, q) = 0 solved nodewise under the same
    truncation, with the nonlocal terms iterated to convergence."""
    grid = params.grid
    bd = params.bd
    dx = grid.dx
    _, _, beta, alpha = _truncation_box(params)
    u = bd.w_l * (1.0 - grid.nodes) + bd.w_r * grid.nodes

    for _ in range(settings.newton_max_iter):
        uc = np.clip(u, beta, alpha)
        J = current_J(uc, q, params)
        phi = potential_from_density(uc**2, params.doping, bd.phi_r, grid)
        running_log = fd.cumulative_trapezoid(fd.d1(q, dx) * np.log(uc**2), dx)
        running_inv = fd.cumulative_trapezoid(uc**-2, dx)
        target = (
            enthalpy_F(bd.n_l, J, bd.theta_l) + phi + running_log - J * running_inv
        )

        # nodewise Newton in y = u^2:  J^2/(2y^2) + q + q ln y = target
        y = uc**2
        for _ in range(60):
            res = J**2 / (2.0 * y**2) + q + q * np.log(y) - target
            slope = -(J**2) / y**3 + q / y
            if np.any(slope <= 0.0):
                raise OutOfRegimeError(
                    "nodewise enthalpy equation lost monotonicity (supersonic "
                    "branch reached in the eps = 0 stationary solve)"
                )
            y = np.clip(y - res / slope, beta**2, alpha**2)
            if np.abs(res).max() <= 0.01 * settings.newton_tol:
                break

        u_new = np.sqrt(y)
        u_new[0] = bd.w_l
        u_new[-1] = bd.w_r
        u = u_new
        h = rhs_h(
            np.clip(u, beta, alpha),
            q,
            current_J(np.clip(u, beta, alpha), q, params),
            potential_from_density(np.clip(u, beta, alpha) ** 2, params.doping, bd.phi_r, grid),
            params,
        )
        if np.abs(h).max() <= settings.newton_tol:
            break
    else:
        raise IterationLimitError(
            "eps = 0 nodewise solve did not converge within the iteration cap"
        )
    if u.min() < beta - 1e-12 or u.max() > alpha + 1e-12:
        raise OutOfRegimeError("truncation active in the eps = 0 stationary solve")
    return u


def _quadrature_functional(log_u2, grid):
    """Dense vector c with c . Q = int_0^1 Q_x ln(u^2) dx (trapezoid in x,
    the same one-sided first-difference stencils as fd.d1)."""
    dx = grid.dx
    wl = fd.trapezoid_weights(grid.n_nodes, dx) * log_u2
    c = np.zeros(grid.n_nodes)
    c[2:] += wl[1:-1] / (2.0 * dx)
    c[:-2] -= wl[1:-1] / (2.0 * dx)
    c[0] += -3.0 * wl[0] / (2.0 * dx)
    c[1] += 4.0 * wl[0] / (2.0 * dx)
    c[2] += -wl[0] / (2.0 * dx)
    c[-1] += 3.0 * wl[-1] / (2.0 * dx)
    c[-2] += -4.0 * wl[-1] / (2.0 * dx)
    c[-3] += wl[-1] / (2.0 * dx)
    return c


def solve_P2(u, q, params, settings):
    """Solve the linear temperature problem for given (u, q).

    The equation couples Q to itself through the scalar int Q_x ln u^2 (the
    current functional evaluated at the unknown temperature); that rank-one
    coupling is solved exactly with a Sherman-Morrison step around the
    tridiagonal core rather than lagged.
    """
    u = np.asarray(u, dtype=float)
    q = np.asarray(q, dtype=float)
    if u.min() <= 0.0:
        raise ValueError("u must be positive in solve_P2")
    grid = params.grid
    bd = params.bd
    dx = grid.dx
    theta_L = params.theta_L

    J = current_J(u, q, params)
    K = K_functional(u, q, params)
    bias = boundary_bias(bd)
    log_u2 = np.log(u**2)
    L1 = fd.d1(log_u2, dx)
    g = rhs_g(u, q, J, params.eps, grid)

    c_full = _quadrature_functional(log_u2, grid)
    v_full = (4.0 * theta_L / (3.0 * K)) * L1

    n_int = grid.n_nodes - 2
    upper = np.full(n_int, (2.0 / 3.0) / dx**2 - J / (2.0 * dx))
    lower = np.full(n_int, (2.0 / 3.0) / dx**2 + J / (2.0 * dx))
    main = -(4.0 / 3.0) / dx**2 + (2.0 / 3.0) * J * L1[1:-1] - u[1:-1] ** 2

    bias_eff = bias + c_full[0] * bd.theta_l + c_full[-1] * bd.theta_r
    r = (
        g[1:-1]
        + (2.0 / 3.0) * J * L1[1:-1] * theta_L
        - u[1:-1] ** 2 * theta_L
        - v_full[1:-1] * bias_eff
    )
    r[0] -= lower[0] * bd.theta_l
    r[-1] -= upper[-1] * bd.theta_r

    band = np.zeros((3, n_int))
    band[0, 1:] = upper[:-1]
    band[1, :] = main
    band[2, :-1] = lower[1:]

    c_int = c_full[1:-1]
    v_int = v_full[1:-1]
    try:
        y1 = solve_banded((1, 1), band, r)
        y2 = solve_banded((1, 1), band, v_int)
    except np.linalg.LinAlgError as exc:
        raise LinearSolveError(f"P2 tridiagonal solve failed: {exc}") from exc
    denom = 1.0 + c_int @ y2
    if abs(denom) < 1e-14:
        raise LinearSolveError("P2 bordered system is singular (rank-one denominator ~ 0)")
    Q_int = y1 - (c_int @ y1) / denom * y2

    Q = np.empty(grid.n_nodes)
    Q[0] = bd.theta_l
    Q[-1] = bd.theta_r
    Q[1:-1] = Q_int
    return Q


def p2_residual(Q, u, q, params):
    """Max interior defect of the temperature equation at a trial Q."""
    grid = params.grid
    dx = grid.dx
    theta_L = params.theta_L
    J = current_J(u, q, params)
    K = K_functional(u, q, params)
    log_u2 = np.log(u**2)
    L1 = fd.d1(log_u2, dx)
    g = rhs_g(u, q, J, params.eps, grid)
    J_star = 2.0 * (boundary_bias(params.bd) + fd.trapezoid(fd.d1(Q, dx) * log_u2, dx)) / K
    lap = (Q[2:] - 2.0 * Q[1:-1] + Q[:-2]) / dx**2
    dQ = (Q[2:] - Q[:-2]) / (2.0 * dx)
    res = (
        (2.0 / 3.0) * lap
        - J * dQ
        + (2.0 / 3.0) * J_star * L1[1:-1] * theta_L
        + (2.0 / 3.0) * J * L1[1:-1] * (Q[1:-1] - theta_L)
        - u[1:-1] ** 2 * (Q[1:-1] - theta_L)
        - g[1:-1]
    )
    return float(np.abs(res).max())


def bohm_boundary_defect(w, grid):
    """One-sided second differences of w at the two contacts.

    The integrated-momentum reformulation builds the vanishing-curvature
    contact condition into the equations rather than imposing it on P1, so
    converged states satisfy it only implicitly; this measures the defect
    (second order in dx for resolved states)."""
    w = np.asarray(w, dtype=float)
    dx = grid.dx
    left = (35.0 * w[0] - 104.0 * w[1] + 114.0 * w[2] - 56.0 * w[3] + 11.0 * w[4]) / (
        12.0 * dx**2
    )
    right = (35.0 * w[-1] - 104.0 * w[-2] + 114.0 * w[-3] - 56.0 * w[-4] + 11.0 * w[-5]) / (
        12.0 * dx**2
    )
    return float(left), float(right)


def _h1_norm(f, dx):
    return float(np.sqrt(fd.l2_norm(f, dx) ** 2 + fd.l2_norm(fd.d1(f, dx), dx) ** 2))


def _fixed_point(params, settings, stats=None):
    grid = params.grid
    bd = params.bd
    q = bd.theta_l * (1.0 - grid.nodes) + bd.theta_r * grid.nodes

    converged = False
    iterations = 0
    for it in range(settings.fp_max_iter):
        iterations = it + 1
        u = solve_P1(q, params, settings)
        Q = solve_P2(u, q, params, settings)
        diff = _h1_norm(Q - q, grid.dx)
        log.debug("fixed point it=%d |Q-q|_H1=%.3e", it, diff)
        q = q + settings.damping * (Q - q)
        if diff <= settings.fp_tol:
            converged = True
            break
    if not converged:
        raise IterationLimitError(
            f"stationary fixed point did not reach {settings.fp_tol:.1e} in "
            f"{settings.fp_max_iter} iterations"
        )

    # one refresh pass so the reported state is self-consistent to within
    # the fixed-point contraction times fp_tol
    u = solve_P1(q, params, settings)
    Q = solve_P2(u, q, params, settings)
    J = current_J(u, Q, params)
    phi = potential_from_density(
        u**2, params.doping, bd.phi_r, grid, PotentialMethod.GREEN_KERNEL
    )
    state = StationaryState(w=u, J=float(J), theta=Q, phi=phi, eps=params.eps)
    defect = bohm_boundary_defect(u, grid)
    log.debug("contact curvature defect: %.3e / %.3e", *defect)
    if stats is not None:
        stats["iterations"] = iterations
        stats["curvature_defect"] = max(abs(defect[0]), abs(defect[1]))
    _validate_regime(state, params)
    return state


def _validate_regime(state, params):
    report = check_admissible(
        FieldState(state.n, np.full_like(state.w, state.J), state.theta, state.phi)
    )
    if not report.admissible:
        raise OutOfRegimeError(f"stationary state not admissible: {report}")
    b, B, _, _ = _truncation_box(params)
    if state.w.min() < b - 1e-10 or state.w.max() > B + 1e-10:
        raise OutOfRegimeError(
            f"sqrt-density left the a-priori box [{b:.3e}, {B:.3e}]"
        )
    lo, hi = 0.5 * params.theta_L, 1.5 * params.theta_L
    if state.theta.min() < lo - 1e-10 or state.theta.max() > hi + 1e-10:
        raise OutOfRegimeError(
            f"temperature left [{lo}, {hi}]: "
            f"range [{state.theta.min():.6f}, {state.theta.max():.6f}]"
        )


def solve_stationary(params, settings=None, stats=None):
    """Stationary state of the quantum model (eps > 0) by fixed-point
    iteration on the temperature, starting from the affine interpolant of
    the boundary temperatures."""
    if params.eps <= 0.0:
        raise ValueError("solve_stationary needs eps > 0; use solve_stationary_limit")
    return _fixed_point(params, settings or SolverSettings(), stats)


def solve_stationary_limit(params, settings=None, stats=None):
    """Stationary state of the eps = 0 limit model (same pipeline, algebraic
    momentum balance, no dispersive temperature source)."""
    if params.eps != 0.0:
        raise ValueError("solve_stationary_limit needs eps == 0")
    return _fixed_point(params, settings or SolverSettings(), stats)


@dataclass(frozen=True)
class StationaryResidual:
    momentum: float
    energy: float
    current: float
    poisson: float

    @property
    def total(self):
        return max(self.momentum, self.energy, self.current, self.poisson)


def stationary_residual(state, params):
    """Defects of the full discrete stationary system at a given state:
    integrated momentum, temperature equation, current-voltage relation and
    Poisson equation."""
    grid = params.grid
    dx = grid.dx
    h = rhs_h(state.w, state.theta, state.J, state.phi, params)
    if state.eps > 0.0:
        lap = (state.w[2:] - 2.0 * state.w[1:-1] + state.w[:-2]) / dx**2
        momentum = float(np.abs(state.eps**2 * lap - h[1:-1]).max())
    else:
        momentum = float(np.abs(h).max())
    energy = p2_residual(state.theta, state.w, state.theta, params)
    current = abs(cvr_residual(state.J, state.w, state.theta, params))
    poisson = residual_from_arrays(state.phi, state.n, params.doping, grid)
    return StationaryResidual(momentum, energy, current, poisson)
