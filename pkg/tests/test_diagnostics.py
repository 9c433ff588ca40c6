import math

import numpy as np
import pytest

from fqhdsim import (
    ConvergenceStudy,
    Grid,
    NormSpec,
    StationaryState,
    TransientState,
    convergence_slope,
    crossover_time,
    discrete_norm,
    energy_xi,
    entropy_psi,
    fit_decay_rate,
    perturbation_norm,
    semiclassical_error,
)


def make_stationary(w, J, theta, phi, eps=0.25):
    return StationaryState(w=np.asarray(w, float), J=float(J),
                           theta=np.asarray(theta, float), phi=np.asarray(phi, float),
                           eps=eps)


def make_transient(w, j, theta, phi, t=0.0):
    return TransientState(t=t, w=np.asarray(w, float), j=np.asarray(j, float),
                          theta=np.asarray(theta, float), phi=np.asarray(phi, float))


# ---------------------------------------------------------------------------
# discrete norms

def test_norm_zero():
    g = Grid(50)
    assert discrete_norm(np.zeros(g.n_nodes), g, NormSpec(order=0)) == 0.0


def test_norm_sine_l2():
    g = Grid(400)
    f = np.sin(np.pi * g.nodes)
    assert discrete_norm(f, g, NormSpec(order=0)) == pytest.approx(1 / math.sqrt(2), abs=1e-4)


def test_norm_sine_h1():
    g = Grid(400)
    f = np.sin(np.pi * g.nodes)
    expected = math.sqrt((1 + math.pi**2) / 2)
    assert discrete_norm(f, g, NormSpec(order=1)) == pytest.approx(expected, abs=1e-3)


def test_norm_is_a_norm():
    rng = np.random.default_rng(0)
    g = Grid(64)
    for order in (0, 1, 2, 3):
        spec = NormSpec(order=order)
        for _ in range(25):
            f = rng.normal(size=g.n_nodes)
            h = rng.normal(size=g.n_nodes)
            c = rng.uniform(-3.0, 3.0)
            nf = discrete_norm(f, g, spec)
            assert discrete_norm(c * f, g, spec) == pytest.approx(abs(c) * nf, rel=1e-12)
            assert discrete_norm(f + h, g, spec) <= nf + discrete_norm(h, g, spec) + 1e-12


def test_weighted_norm():
    g = Grid(100)
    weight = 2.0 * np.ones(g.n_nodes)
    f = np.sin(np.pi * g.nodes)
    ratio = discrete_norm(f, g, NormSpec(order=0, weight=weight)) / discrete_norm(
        f, g, NormSpec(order=0)
    )
    assert ratio == pytest.approx(math.sqrt(2.0), rel=1e-12)
    with pytest.raises(ValueError):
        NormSpec(order=0, weight=np.zeros(g.n_nodes))
    with pytest.raises(ValueError):
        NormSpec(order=5)


def test_eps_weighted_flag_rejected_for_scalar_fields():
    g = Grid(20)
    with pytest.raises(ValueError):
        discrete_norm(np.ones(g.n_nodes), g, NormSpec(order=2, eps_weighted=True))


# ---------------------------------------------------------------------------
# perturbation norm

def _anchored_pair(n_cells=100, amp=0.0, eps=0.25):
    g = Grid(n_cells)
    x = g.nodes
    w = 1.0 + 0.05 * np.sin(np.pi * x)
    theta = 1.0 + 0.02 * np.sin(2 * np.pi * x)
    phi = 0.1 * x * (1 - x)
    anchor = make_stationary(w, 0.02, theta, phi, eps=eps)
    bump = amp * x**2 * (1 - x) ** 2 * 16.0
    state = make_transient(w + bump, 0.02 + bump, theta + bump, phi)
    return state, anchor, g


def test_perturbation_norm_zero_iff_equal():
    state, anchor, _ = _anchored_pair(amp=0.0)
    assert perturbation_norm(state, anchor, 0.25) == 0.0
    state2, anchor2, _ = _anchored_pair(amp=1e-3)
    assert perturbation_norm(state2, anchor2, 0.25) > 0.0


def test_perturbation_norm_eps_zero_is_h2():
    # with eps = 0 the Planck-weighted terms vanish and only the combined H2
    # norm of the field differences remains
    state, anchor, g = _anchored_pair(amp=1e-3)
    from fqhdsim import fd

    dx = g.dx
    total = 0.0
    for f in (state.w - anchor.w, state.j - anchor.J, state.theta - anchor.theta):
        total += fd.l2_norm(f, dx) ** 2
        total += fd.l2_norm(fd.d1(f, dx), dx) ** 2
        total += fd.l2_norm(fd.d2(f, dx), dx) ** 2
    assert perturbation_norm(state, anchor, 0.0) == pytest.approx(math.sqrt(total), rel=1e-12)


def test_perturbation_norm_near_linearity():
    vals = {}
    for amp in (1e-3, 2e-3):
        state, anchor, _ = _anchored_pair(amp=amp)
        vals[amp] = perturbation_norm(state, anchor, 0.25)
    assert vals[2e-3] / vals[1e-3] == pytest.approx(2.0, rel=1e-2)


def test_perturbation_norm_grid_mismatch():
    state, _, _ = _anchored_pair(n_cells=100)
    _, anchor2, _ = _anchored_pair(n_cells=50)
    with pytest.raises(ValueError):
        perturbation_norm(state, anchor2, 0.25)


# ---------------------------------------------------------------------------
# entropy weight and energy functional

def test_entropy_values():
    assert entropy_psi(1.0) == 0.0
    assert entropy_psi(2.0) == pytest.approx(1.0 - math.log(2.0), rel=1e-14)
    assert entropy_psi(0.5) == pytest.approx(math.log(2.0) - 0.5, rel=1e-14)
    with pytest.raises(ValueError):
        entropy_psi(0.0)


def test_entropy_convexity():
    rng = np.random.default_rng(4)
    for _ in range(300):
        s, t = rng.uniform(0.05, 5.0, 2)
        dpsi = 1.0 - 1.0 / t
        assert entropy_psi(s) >= entropy_psi(t) + dpsi * (s - t) - 1e-12


def test_energy_zero_at_anchor():
    state, anchor, _ = _anchored_pair(amp=0.0)
    assert energy_xi(state, anchor, 0.25, 0.01) == pytest.approx(0.0, abs=1e-15)


def test_energy_positive_and_equivalent_for_small_perturbations():
    from fqhdsim import fd

    rng = np.random.default_rng(8)
    g = Grid(100)
    x = g.nodes
    anchor = make_stationary(np.ones_like(x), 0.0, np.ones_like(x), np.zeros_like(x))
    ratios = []
    for _ in range(50):
        amp = 10 ** rng.uniform(-4, -2)
        dw = amp * rng.normal() * np.sin(np.pi * x)
        dj = amp * rng.normal() * np.cos(np.pi * x)
        dth = amp * rng.normal() * np.sin(2 * np.pi * x)
        state = make_transient(1.0 + dw, dj, 1.0 + dth, np.zeros_like(x))
        xi = energy_xi(state, anchor, 0.25, alpha=0.01)
        assert xi > 0.0
        M = (
            fd.l2_norm(dw, g.dx) ** 2
            + fd.l2_norm(dj, g.dx) ** 2
            + fd.l2_norm(dth, g.dx) ** 2
            + fd.l2_norm(0.25 * fd.d1(dw, g.dx), g.dx) ** 2
        )
        ratios.append(xi / M)
    assert max(ratios) / min(ratios) < 10.0


def test_energy_validation():
    state, anchor, _ = _anchored_pair()
    with pytest.raises(ValueError):
        energy_xi(state, anchor, 0.25, alpha=1.5)
    bad = make_transient(-state.w, state.j, state.theta, state.phi)
    with pytest.raises(ValueError):
        energy_xi(bad, anchor, 0.25, 0.01)


# ---------------------------------------------------------------------------
# decay fitting

def test_fit_exact_exponential():
    t = np.linspace(0.0, 10.0, 201)
    fit = fit_decay_rate(t, np.exp(-2.0 * t), (0.0, 10.0))
    assert fit.gamma == pytest.approx(2.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.amplitude == pytest.approx(1.0, rel=1e-10)


def test_fit_noisy_exponential():
    t = np.linspace(0.0, 20.0, 401)
    values = 3.0 * np.exp(-0.7 * t) * (1.0 + 0.01 * np.sin(t))
    fit = fit_decay_rate(t, values, (2.0, 20.0))
    assert fit.gamma == pytest.approx(0.7, abs=0.02)
    assert fit.r_squared >= 0.99


def test_fit_constant_series():
    t = np.linspace(0.0, 5.0, 50)
    fit = fit_decay_rate(t, np.full_like(t, 3.0), (0.0, 5.0))
    assert fit.gamma == pytest.approx(0.0, abs=1e-13)
    assert fit.r_squared == 1.0


def test_fit_window_validation():
    t = np.linspace(0.0, 1.0, 11)
    with pytest.raises(ValueError):
        fit_decay_rate(t, np.exp(-t), (2.0, 3.0))
    with pytest.raises(ValueError):
        fit_decay_rate(t, np.zeros_like(t), (0.0, 1.0))


# ---------------------------------------------------------------------------
# convergence studies

def test_slope_exact_powers():
    eps = (0.4, 0.2, 0.1, 0.05)
    assert convergence_slope(ConvergenceStudy(eps, eps)) == pytest.approx(1.0, abs=1e-12)
    roots = tuple(math.sqrt(e) for e in eps)
    assert convergence_slope(ConvergenceStudy(eps, roots)) == pytest.approx(0.5, abs=1e-12)


def test_slope_degenerate_zero_errors():
    study = ConvergenceStudy((0.4, 0.2, 0.1), (0.0, 0.0, 0.0))
    assert convergence_slope(study) == math.inf


def test_study_validation():
    with pytest.raises(ValueError):
        ConvergenceStudy((0.1, 0.2), (1.0, 1.0))  # not decreasing
    with pytest.raises(ValueError):
        ConvergenceStudy((0.2, 0.1), (1.0,))
    study = ConvergenceStudy((0.4, 0.2, 0.1), (0.4, 0.2, 0.1))
    assert study.slope == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# semiclassical errors

def test_semiclassical_identical_states():
    x = Grid(50).nodes
    a = make_stationary(1 + 0.1 * x, 0.05, 1 + 0.1 * x, x, eps=0.2)
    b = make_stationary(1 + 0.1 * x, 0.05, 1 + 0.1 * x, x, eps=0.0)
    assert semiclassical_error(a, b, "stationary") == 0.0
    ta = make_transient(1 + 0.1 * x, 0.05 * x, 1 + 0.1 * x, x)
    assert semiclassical_error(ta, ta, "transient") == 0.0


def test_semiclassical_requires_limit_state():
    x = Grid(50).nodes
    a = make_stationary(np.ones_like(x), 0.0, np.ones_like(x), np.zeros_like(x), eps=0.2)
    b = make_stationary(np.ones_like(x), 0.0, np.ones_like(x), np.zeros_like(x), eps=0.1)
    with pytest.raises(ValueError):
        semiclassical_error(a, b, "stationary")
    with pytest.raises(ValueError):
        semiclassical_error(a, b, "nonsense")


def test_semiclassical_norm_symmetry():
    rng = np.random.default_rng(12)
    g = Grid(50)
    x = g.nodes
    for _ in range(20):
        w1 = 1 + 0.1 * rng.normal() * np.sin(np.pi * x)
        w2 = 1 + 0.1 * rng.normal() * np.sin(np.pi * x)
        t1 = 1 + 0.05 * rng.normal() * np.sin(2 * np.pi * x)
        t2 = 1 + 0.05 * rng.normal() * np.sin(2 * np.pi * x)
        j1, j2 = rng.normal(size=2) * 0.1
        a = make_stationary(w1, j1, t1, x * 0.1, eps=0.2)
        b = make_stationary(w2, j2, t2, x * 0.2, eps=0.0)
        a_swapped = make_stationary(w2, j2, t2, x * 0.2, eps=0.2)
        b_swapped = make_stationary(w1, j1, t1, x * 0.1, eps=0.0)
        assert semiclassical_error(a, b, "stationary") == pytest.approx(
            semiclassical_error(a_swapped, b_swapped, "stationary"), rel=1e-12
        )


def test_crossover_time():
    assert crossover_time(math.exp(-4.0), 1.0) == pytest.approx(1.0, rel=1e-12)
    assert crossover_time(0.01, 0.5) > crossover_time(0.1, 0.5)
    with pytest.raises(ValueError):
        crossover_time(1.5, 1.0)
    with pytest.raises(ValueError):
        crossover_time(0.5, 0.0)
