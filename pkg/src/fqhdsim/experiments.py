"""Experiment configuration, orchestration and the four preset studies.

A JSON config selects one experiment kind:

* stationary               - one stationary solve plus residual checks,
* transient_decay          - perturb a stationary state, integrate, fit the
                             exponential decay of the perturbation norm,
* semiclassical_stationary - stationary solves over an eps sweep against
                             the eps = 0 limit, with the convergence slope,
* semiclassical_transient  - quantum and limit trajectories co-run from
                             identical data; error at a fixed horizon over
                             the sweep and the sup error over the run.

parse_config validates strictly (unknown keys are rejected, errors name the
offending field) and fills documented defaults.
"""

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import outputs
from .diagnostics import (
    ConvergenceStudy,
    energy_xi,
    fit_decay_rate,
    perturbation_norm,
    quantum_weighted_norm,
    semiclassical_error,
)
from .exceptions import FqhdError
from .model import BoundaryData, DopingProfile, Grid, ScenarioParams, boundary_strength
from .stationary import (
    SolverSettings,
    solve_stationary,
    solve_stationary_limit,
    stationary_residual,
)
from .transient import (
    StepperConfig,
    affine_initial_state,
    perturbed_from_stationary,
    polish_stationary,
    run_transient,
    step_implicit,
    step_picard,
)

log = logging.getLogger(__name__)

KINDS = (
    "stationary",
    "transient_decay",
    "semiclassical_stationary",
    "semiclassical_transient",
)

DECAY_WINDOW_FRACTION = 0.2
TRANSIENT_HORIZON = 1.0


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


@dataclass(frozen=True)
class DopingPreset:
    """Built-in doping shapes: 'flat' at a constant level, or 'npn' dropping
    smoothly from high to low between junctions at x = 0.25 and 0.75."""

    tag: str
    low: float
    high: float
    junction_width: float = 0.1

    def __post_init__(self):
        if self.tag not in ("flat", "npn"):
            raise ConfigError(f"doping.tag must be 'flat' or 'npn', got {self.tag!r}")
        if not 0.0 < self.low <= self.high:
            raise ConfigError("doping requires 0 < low <= high")
        if not 0.0 < self.junction_width < 0.25:
            raise ConfigError("doping.junction_width must lie in (0, 0.25)")

    def profile(self, grid):
        if self.tag == "flat":
            return DopingProfile.flat(grid, self.high)
        s = self.junction_width / 4.0
        x = grid.nodes
        ramp = 0.5 * (np.tanh((x - 0.25) / s) - np.tanh((x - 0.75) / s))
        return DopingProfile(self.high - (self.high - self.low) * ramp)


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    scenario: ScenarioParams
    stepper: StepperConfig
    solver: SolverSettings
    sweep: tuple | None = None
    output_dir: Path | None = None
    perturbation_amplitude: float = 0.01
    alpha: float = 0.01
    config: dict = field(default_factory=dict, repr=False)

    def to_config(self):
        """Canonical serializable form (parse -> serialize -> parse is
        idempotent)."""
        return json.loads(json.dumps(self.config))


def _take(mapping, context, known):
    unknown = set(mapping) - set(known)
    if unknown:
        name = sorted(unknown)[0]
        where = f"{context}.{name}" if context else name
        raise ConfigError(f"unknown config field '{where}'")


def _number(raw, context, name, default=None, minimum=None, positive=False):
    if name not in raw:
        if default is None:
            raise ConfigError(f"missing config field '{context}{name}'")
        return default
    value = raw[name]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"config field '{context}{name}' must be a number")
    value = float(value)
    if positive and value <= 0.0:
        raise ConfigError(f"config field '{context}{name}' must be positive")
    if minimum is not None and value < minimum:
        raise ConfigError(f"config field '{context}{name}' must be >= {minimum}")
    return value


def _parse_scenario(raw):
    _take(raw, "scenario", {"n_cells", "eps", "theta_L", "boundary", "doping"})
    n_cells = int(_number(raw, "scenario.", "n_cells", default=200, minimum=4))
    eps = _number(raw, "scenario.", "eps", default=0.25)
    if not 0.0 <= eps <= 1.0:
        raise ConfigError("config field 'scenario.eps' must lie in [0, 1]")
    theta_L = _number(raw, "scenario.", "theta_L", default=1.0, positive=True)

    braw = raw.get("boundary", {})
    _take(braw, "scenario.boundary", {"n_l", "n_r", "theta_l", "theta_r", "phi_r"})
    bd = BoundaryData(
        n_l=_number(braw, "scenario.boundary.", "n_l", default=1.0, positive=True),
        n_r=_number(braw, "scenario.boundary.", "n_r", default=1.0, positive=True),
        theta_l=_number(braw, "scenario.boundary.", "theta_l", default=theta_L, positive=True),
        theta_r=_number(braw, "scenario.boundary.", "theta_r", default=theta_L, positive=True),
        phi_r=_number(braw, "scenario.boundary.", "phi_r", default=0.0),
    )

    draw = raw.get("doping", {"tag": "flat", "level": bd.n_l})
    tag = draw.get("tag")
    if tag == "flat":
        _take(draw, "scenario.doping", {"tag", "level"})
        level = _number(draw, "scenario.doping.", "level", default=bd.n_l, positive=True)
        preset = DopingPreset("flat", level, level)
    elif tag == "npn":
        _take(draw, "scenario.doping", {"tag", "low", "high", "junction_width"})
        preset = DopingPreset(
            "npn",
            low=_number(draw, "scenario.doping.", "low", positive=True),
            high=_number(draw, "scenario.doping.", "high", positive=True),
            junction_width=_number(
                draw, "scenario.doping.", "junction_width", default=0.1, positive=True
            ),
        )
    else:
        raise ConfigError("config field 'scenario.doping.tag' must be 'flat' or 'npn'")

    grid = Grid(n_cells)
    params = ScenarioParams(
        grid=grid, doping=preset.profile(grid), bd=bd, eps=eps, theta_L=theta_L
    )
    return params, preset


def parse_config(text):
    """Parse and validate a JSON experiment description."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config is not valid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _take(
        raw,
        "",
        {
            "kind",
            "scenario",
            "sweep",
            "stepper",
            "solver",
            "output_dir",
            "perturbation_amplitude",
            "alpha",
        },
    )
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"config field 'kind' must be one of {KINDS}, got {kind!r}")

    params, preset = _parse_scenario(raw.get("scenario", {}))

    sweep = raw.get("sweep")
    if kind.startswith("semiclassical"):
        if not sweep:
            raise ConfigError(f"config field 'sweep' is required for kind '{kind}'")
        if len(sweep) < 3:
            raise ConfigError("config field 'sweep' needs at least 3 values for a slope")
    if sweep is not None:
        if not isinstance(sweep, list) or any(
            isinstance(e, bool) or not isinstance(e, (int, float)) for e in sweep
        ):
            raise ConfigError("config field 'sweep' must be a list of numbers")
        sweep = tuple(float(e) for e in sweep)
        if any(e <= 0.0 or e > 1.0 for e in sweep):
            raise ConfigError("config field 'sweep' values must lie in (0, 1]")
        if any(b >= a for a, b in zip(sweep, sweep[1:])):
            raise ConfigError("config field 'sweep' must be strictly decreasing")

    sraw = raw.get("solver", {})
    _take(sraw, "solver", {"newton_tol", "newton_max_iter", "fp_tol", "fp_max_iter", "damping"})
    solver = SolverSettings(
        newton_tol=_number(sraw, "solver.", "newton_tol", default=1e-10, positive=True),
        newton_max_iter=int(
            _number(sraw, "solver.", "newton_max_iter", default=60, minimum=1)
        ),
        fp_tol=_number(sraw, "solver.", "fp_tol", default=1e-8, positive=True),
        fp_max_iter=int(_number(sraw, "solver.", "fp_max_iter", default=200, minimum=1)),
        damping=_number(sraw, "solver.", "damping", default=1.0, positive=True),
    )

    traw = raw.get("stepper", {})
    _take(
        traw,
        "stepper",
        {"dt", "scheme", "t_end", "snapshot_stride", "picard_sweeps", "picard_tol"},
    )
    scheme = traw.get("scheme", "implicit_newton")
    if scheme not in ("implicit_newton", "picard_frozen"):
        raise ConfigError(
            "config field 'stepper.scheme' must be 'implicit_newton' or 'picard_frozen'"
        )
    dt = traw.get("dt")
    if dt is not None:
        dt = _number(traw, "stepper.", "dt", positive=True)
    stepper = StepperConfig(
        dt=dt,
        scheme=scheme,
        t_end=_number(traw, "stepper.", "t_end", default=1.0, minimum=0.0),
        snapshot_stride=int(
            _number(traw, "stepper.", "snapshot_stride", default=1, minimum=1)
        ),
        picard_sweeps=int(_number(traw, "stepper.", "picard_sweeps", default=1, minimum=1)),
        picard_tol=_number(traw, "stepper.", "picard_tol", default=1e-12, minimum=0.0),
        solver=solver,
    )

    amplitude = _number(raw, "", "perturbation_amplitude", default=0.01)
    alpha = _number(raw, "", "alpha", default=0.01, positive=True)
    output_dir = raw.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        raise ConfigError("config field 'output_dir' must be a string path")

    canonical = {
        "kind": kind,
        "scenario": {
            "n_cells": params.grid.n_cells,
            "eps": params.eps,
            "theta_L": params.theta_L,
            "boundary": {
                "n_l": params.bd.n_l,
                "n_r": params.bd.n_r,
                "theta_l": params.bd.theta_l,
                "theta_r": params.bd.theta_r,
                "phi_r": params.bd.phi_r,
            },
            "doping": (
                {"tag": "flat", "level": preset.high}
                if preset.tag == "flat"
                else {
                    "tag": "npn",
                    "low": preset.low,
                    "high": preset.high,
                    "junction_width": preset.junction_width,
                }
            ),
        },
        "sweep": list(sweep) if sweep is not None else None,
        "stepper": {
            "dt": stepper.dt,
            "scheme": stepper.scheme,
            "t_end": stepper.t_end,
            "snapshot_stride": stepper.snapshot_stride,
            "picard_sweeps": stepper.picard_sweeps,
            "picard_tol": stepper.picard_tol,
        },
        "solver": asdict(solver),
        "output_dir": output_dir,
        "perturbation_amplitude": amplitude,
        "alpha": alpha,
    }
    return ExperimentSpec(
        kind=kind,
        scenario=params,
        stepper=stepper,
        solver=solver,
        sweep=sweep,
        output_dir=Path(output_dir) if output_dir else None,
        perturbation_amplitude=amplitude,
        alpha=alpha,
        config=canonical,
    )


@dataclass
class RunSummary:
    converged: bool
    iterations: int
    residual: float
    fitted_rates: dict
    wall_time: float
    kind: str
    delta: float
    error: str | None = None

    def to_dict(self):
        return asdict(self)


def boundary_data_for_strength(delta, theta_L=1.0, n_l=1.0):
    """Boundary data with total strength delta, spread evenly over the four
    contributions (density jump, two temperature offsets, applied bias)."""
    if delta < 0.0:
        raise ValueError("delta must be non-negative")
    quarter = delta / 4.0
    return BoundaryData(
        n_l=n_l,
        n_r=n_l - quarter,
        theta_l=theta_L + quarter,
        theta_r=theta_L - quarter,
        phi_r=quarter,
    )


def _solve_anchor(params, settings, stats=None):
    if params.eps == 0.0:
        return solve_stationary_limit(params, settings, stats)
    return solve_stationary(params, settings, stats)


def _with_eps(params, eps):
    return ScenarioParams(
        grid=params.grid,
        doping=params.doping,
        bd=params.bd,
        eps=eps,
        theta_L=params.theta_L,
    )


def run_experiment(spec, threads=1):
    """Execute one experiment, write its outputs (when an output directory
    is configured) and return the run summary.  Solver failures are captured
    into the summary instead of raised."""
    t_start = time.perf_counter()
    delta = boundary_strength(spec.scenario.bd, spec.scenario.theta_L)
    summary = RunSummary(
        converged=False,
        iterations=0,
        residual=float("nan"),
        fitted_rates={},
        wall_time=0.0,
        kind=spec.kind,
        delta=delta,
    )
    artifacts = {}
    try:
        runner = {
            "stationary": _run_stationary,
            "transient_decay": _run_transient_decay,
            "semiclassical_stationary": _run_semiclassical_stationary,
            "semiclassical_transient": _run_semiclassical_transient,
        }[spec.kind]
        runner(spec, summary, artifacts, threads)
    except FqhdError as exc:
        summary.error = f"{type(exc).__name__}: {exc}"
        summary.converged = False
        log.error("experiment failed: %s", summary.error)
    summary.wall_time = time.perf_counter() - t_start
    if spec.output_dir is not None:
        write_outputs(summary, artifacts, spec.output_dir)
    return summary


def _run_stationary(spec, summary, artifacts, threads):
    stats = {}
    state = _solve_anchor(spec.scenario, spec.solver, stats)
    resid = stationary_residual(state, spec.scenario)
    summary.converged = True
    summary.iterations = stats.get("iterations", 0)
    summary.residual = resid.total
    summary.fitted_rates = {
        "J": state.J,
        "residual_momentum": resid.momentum,
        "residual_energy": resid.energy,
        "residual_current": resid.current,
        "residual_poisson": resid.poisson,
    }
    artifacts["stationary"] = state


def _decay_observer(anchor, eps, alpha):
    def observe(state):
        return {
            "perturbation_norm": perturbation_norm(state, anchor, eps),
            "energy_xi": energy_xi(state, anchor, eps, alpha),
            "quantum_norm": quantum_weighted_norm(state, anchor, eps),
        }

    return observe


def _run_transient_decay(spec, summary, artifacts, threads):
    params = spec.scenario
    stats = {}
    anchor = polish_stationary(_solve_anchor(params, spec.solver, stats), params, spec.solver)
    initial = perturbed_from_stationary(anchor, params, spec.perturbation_amplitude)
    traj = run_transient(
        initial, params, spec.stepper, observer=_decay_observer(anchor, params.eps, spec.alpha)
    )
    summary.iterations = traj.steps
    if traj.failed:
        summary.error = traj.error
        summary.converged = False
    else:
        window = (DECAY_WINDOW_FRACTION * spec.stepper.t_end, spec.stepper.t_end)
        fit = fit_decay_rate(traj.times, traj.series["perturbation_norm"], window)
        summary.converged = fit.gamma > 0.0
        summary.residual = float(traj.series["perturbation_norm"][-1])
        summary.fitted_rates = {
            "gamma": fit.gamma,
            "amplitude": fit.amplitude,
            "r_squared": fit.r_squared,
            "window_start": fit.window[0],
            "window_end": fit.window[1],
        }
        if params.eps > 0.0:
            qfit = fit_decay_rate(traj.times, traj.series["quantum_norm"], window)
            summary.fitted_rates["gamma_quantum_terms"] = qfit.gamma
            summary.fitted_rates["r_squared_quantum_terms"] = qfit.r_squared
    artifacts["trajectory"] = traj
    artifacts["anchor"] = anchor


def _run_semiclassical_stationary(spec, summary, artifacts, threads):
    params = spec.scenario
    limit = solve_stationary_limit(_with_eps(params, 0.0), spec.solver)

    def solve_one(eps):
        return solve_stationary(_with_eps(params, eps), spec.solver)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            states = list(pool.map(solve_one, spec.sweep))
    else:
        states = [solve_one(eps) for eps in spec.sweep]

    errors = [semiclassical_error(s, limit, "stationary") for s in states]
    study = ConvergenceStudy(spec.sweep, errors)
    summary.converged = True
    summary.iterations = len(spec.sweep)
    summary.residual = errors[-1]
    summary.fitted_rates = {"slope": study.slope}
    artifacts["study"] = study
    artifacts["states"] = dict(zip(spec.sweep, states))
    artifacts["limit"] = limit


def _co_run_errors(spec, eps):
    """Integrate the quantum and limit systems from identical affine data on
    the shared time ladder; returns (times, error series)."""
    params_q = _with_eps(spec.scenario, eps)
    params_0 = _with_eps(spec.scenario, 0.0)
    state_q = affine_initial_state(params_q)
    state_0 = affine_initial_state(params_0)
    step = step_implicit if spec.stepper.scheme == "implicit_newton" else step_picard
    dt = spec.stepper.resolve_dt(params_q)
    cfg = StepperConfig(
        dt=dt,
        scheme=spec.stepper.scheme,
        t_end=spec.stepper.t_end,
        snapshot_stride=spec.stepper.snapshot_stride,
        picard_sweeps=spec.stepper.picard_sweeps,
        picard_tol=spec.stepper.picard_tol,
        solver=spec.solver,
    )
    n_steps = int(round(cfg.t_end / dt))
    times = [0.0]
    errors = [semiclassical_error(state_q, state_0, "transient")]
    for _ in range(n_steps):
        state_q = step(state_q, params_q, cfg)
        state_0 = step(state_0, params_0, cfg)
        times.append(state_q.t)
        errors.append(semiclassical_error(state_q, state_0, "transient"))
    return np.asarray(times), np.asarray(errors)


def _run_semiclassical_transient(spec, summary, artifacts, threads):
    if spec.stepper.t_end < TRANSIENT_HORIZON:
        raise ConfigError(
            f"stepper.t_end must cover the comparison horizon {TRANSIENT_HORIZON}"
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda e: _co_run_errors(spec, e), spec.sweep))
    else:
        results = [_co_run_errors(spec, eps) for eps in spec.sweep]

    horizon_errors = []
    sup_errors = []
    series = {}
    for eps, (times, errors) in zip(spec.sweep, results):
        idx = int(np.argmin(np.abs(times - TRANSIENT_HORIZON)))
        horizon_errors.append(float(errors[idx]))
        sup_errors.append(float(errors.max()))
        series[eps] = (times, errors)

    study = ConvergenceStudy(spec.sweep, horizon_errors)
    monotone = all(a > b for a, b in zip(sup_errors, sup_errors[1:]))
    summary.converged = True
    summary.iterations = len(spec.sweep)
    summary.residual = horizon_errors[-1]
    summary.fitted_rates = {
        "slope_at_horizon": study.slope,
        "horizon": TRANSIENT_HORIZON,
        "sup_errors": dict(zip(map(str, spec.sweep), sup_errors)),
        "sup_monotone_in_eps": monotone,
    }
    artifacts["study"] = study
    artifacts["error_series"] = series


def write_outputs(summary, artifacts, output_dir):
    """Serialize a run: summary.json always, plus whatever field tables,
    series and convergence data the experiment produced."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [outputs.write_summary(out / "summary.json", summary.to_dict())]

    if "stationary" in artifacts:
        state = artifacts["stationary"]
        x = np.linspace(0.0, 1.0, len(state.w))
        written.append(
            outputs.write_fields_csv(
                out / "fields_stationary.csv",
                x,
                state.n,
                np.full_like(state.w, state.J),
                state.theta,
                state.phi,
            )
        )
    if "trajectory" in artifacts:
        traj = artifacts["trajectory"]
        series = {
            "perturbation_norm": traj.series["perturbation_norm"],
            "energy_xi": traj.series["energy_xi"],
        }
        written.append(outputs.write_series_csv(out / "series.csv", traj.times, series))
        for snap in traj.snapshots:
            x = np.linspace(0.0, 1.0, len(snap.w))
            written.append(
                outputs.write_fields_csv(
                    out / f"fields_{snap.t:.6f}.csv", x, snap.n, snap.j, snap.theta, snap.phi
                )
            )
    if "study" in artifacts:
        study = artifacts["study"]
        written.append(
            outputs.write_convergence_csv(out / "convergence.csv", study.eps_values, study.errors)
        )
    if "states" in artifacts:
        for eps, state in artifacts["states"].items():
            x = np.linspace(0.0, 1.0, len(state.w))
            written.append(
                outputs.write_fields_csv(
                    out / f"fields_eps_{eps:g}.csv",
                    x,
                    state.n,
                    np.full_like(state.w, state.J),
                    state.theta,
                    state.phi,
                )
            )
    if "limit" in artifacts:
        state = artifacts["limit"]
        x = np.linspace(0.0, 1.0, len(state.w))
        written.append(
            outputs.write_fields_csv(
                out / "fields_eps_0.csv",
                x,
                state.n,
                np.full_like(state.w, state.J),
                state.theta,
                state.phi,
            )
        )
    if "error_series" in artifacts:
        for eps, (times, errors) in artifacts["error_series"].items():
            written.append(
                outputs.write_series_csv(
                    out / f"series_eps_{eps:g}.csv", times, {"error": errors}
                )
            )
    if "anchor" in artifacts:
        state = artifacts["anchor"]
        x = np.linspace(0.0, 1.0, len(state.w))
        written.append(
            outputs.write_fields_csv(
                out / "fields_anchor.csv",
                x,
                state.n,
                np.full_like(state.w, state.J),
                state.theta,
                state.phi,
            )
        )
    return written
