import numpy as np
import pytest

from fqhdsim import (
    AdmissibilityReport,
    BoundaryData,
    DopingProfile,
    FieldState,
    Grid,
    ScenarioParams,
    boundary_strength,
    check_admissible,
    density_bounds,
    enthalpy_F,
    sound_gap,
)


def test_grid_basics():
    g = Grid(200)
    assert g.dx == pytest.approx(1.0 / 200, abs=0)
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 1.0
    assert np.all(np.diff(g.nodes) > 0)
    assert g.dx * g.n_cells == pytest.approx(1.0, rel=1e-15)
    with pytest.raises(ValueError):
        Grid(1)


def test_doping_profile_positivity():
    g = Grid(10)
    with pytest.raises(ValueError):
        DopingProfile(np.linspace(-0.1, 1.0, g.n_nodes))
    prof = DopingProfile.flat(g, 1.3)
    assert prof.sup_norm == pytest.approx(1.3)


def test_boundary_data_validation():
    with pytest.raises(ValueError):
        BoundaryData(n_l=0.0, n_r=1.0, theta_l=1.0, theta_r=1.0)
    # negative applied bias is allowed; only densities/temperatures must be positive
    bd = BoundaryData(1.0, 1.0, 1.0, 1.0, phi_r=-0.3)
    assert bd.phi_r == -0.3


def test_scenario_params_validation():
    g = Grid(10)
    d = DopingProfile.flat(g, 1.0)
    bd = BoundaryData(1.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        ScenarioParams(g, d, bd, eps=-0.1, theta_L=1.0)
    with pytest.raises(ValueError):
        ScenarioParams(g, d, bd, eps=1.5, theta_L=1.0)
    with pytest.raises(ValueError):
        ScenarioParams(g, d, bd, eps=0.5, theta_L=0.0)


def test_boundary_strength_values():
    assert boundary_strength(BoundaryData(1, 1, 1, 1, 0.0), 1.0) == 0.0
    bd = BoundaryData(1.1, 1.0, 1.05, 0.95, 0.2)
    assert boundary_strength(bd, 1.0) == pytest.approx(0.4, abs=1e-15)
    assert boundary_strength(BoundaryData(1, 1, 1, 1, -0.3), 1.0) == pytest.approx(0.3)


def test_boundary_strength_swap_symmetry():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n_l, n_r = rng.uniform(0.5, 2.0, 2)
        t_l, t_r = rng.uniform(0.5, 2.0, 2)
        theta_L = rng.uniform(0.5, 2.0)
        a = boundary_strength(BoundaryData(n_l, n_r, t_l, t_r, 0.0), theta_L)
        b = boundary_strength(BoundaryData(n_r, n_l, t_r, t_l, 0.0), theta_L)
        assert a == pytest.approx(b, rel=1e-14)


def test_sound_gap_values():
    assert sound_gap(1, 0, 1) == pytest.approx(1.0)
    assert sound_gap(1, 1, 1) == pytest.approx(0.0)
    assert sound_gap(4, 2, 1) == pytest.approx(0.75)
    with pytest.raises(ValueError):
        sound_gap(0.0, 1.0, 1.0)


def test_sound_gap_scale_invariance():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = rng.uniform(0.1, 5.0)
        j = rng.uniform(-2.0, 2.0)
        theta = rng.uniform(0.1, 3.0)
        c = rng.uniform(0.1, 10.0)
        assert sound_gap(c * n, c * j, theta) == pytest.approx(
            sound_gap(n, j, theta), rel=1e-12, abs=1e-12
        )


def _state(n, j, theta):
    n = np.asarray(n, dtype=float)
    return FieldState(n, np.broadcast_to(j, n.shape).astype(float),
                      np.broadcast_to(theta, n.shape).astype(float), np.zeros_like(n))


def test_check_admissible():
    m = 11
    ones = np.ones(m)
    rep = check_admissible(_state(ones, 0.0, 1.0))
    assert rep.admissible
    assert (rep.min_density, rep.min_temperature, rep.min_sound_gap) == (1.0, 1.0, 1.0)

    rep = check_admissible(_state(ones, 2.0, 1.0))
    assert not rep.admissible
    assert rep.min_sound_gap == pytest.approx(-3.0)

    n = ones.copy()
    n[5] = 0.0
    assert not check_admissible(_state(n, 0.0, 1.0)).admissible


def test_check_admissible_monotone_in_theta():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = rng.uniform(0.2, 2.0, 21)
        j = rng.uniform(-1.0, 1.0, 21)
        theta = rng.uniform(0.1, 2.0, 21)
        bump = rng.uniform(0.0, 1.0, 21)
        before = check_admissible(_state(n, j, theta))
        after = check_admissible(_state(n, j, theta + bump))
        if before.admissible:
            assert after.admissible


def test_density_bounds_frozen_values():
    b, B = density_bounds(1.0, 1.0, 0.0)
    assert B == pytest.approx(1.5, abs=0)
    assert b == pytest.approx(0.5 * np.exp(-2.25), rel=1e-14)  # 0.052699612...

    b, B = density_bounds(1.0, 1.0, 1.0)
    assert B == pytest.approx(1.5 * np.e**2, rel=1e-14)  # 11.0835841...
    assert b == pytest.approx(0.5 * np.exp(-((1.5 * np.e**2) ** 2 + 2.0)), rel=1e-12)

    b, B = density_bounds(4.0, 2.0, 0.0)
    assert B == pytest.approx(3.0, abs=0)
    assert b == pytest.approx(np.exp(-4.5), rel=1e-14)  # 0.011108996...


def test_density_bounds_ordering_property():
    rng = np.random.default_rng(5)
    for _ in range(200):
        n_l = rng.uniform(0.05, 10.0)
        theta_L = rng.uniform(0.05, 5.0)
        d_sup = rng.uniform(0.0, 3.0)
        b, B = density_bounds(n_l, theta_L, d_sup)
        # the lower bound decays double-exponentially in d_sup/theta_L and
        # underflows to 0.0 outside the representable range
        if (B**2 + 2.0 * d_sup) / theta_L < 700.0:
            assert 0.0 < b < B
        else:
            assert 0.0 <= b < B
    with pytest.raises(ValueError):
        density_bounds(-1.0, 1.0, 0.0)


def test_enthalpy_values():
    assert enthalpy_F(1.0, 0.0, 1.0) == pytest.approx(1.0)
    assert enthalpy_F(4.0, 2.0, 1.0) == pytest.approx(2.5112943611198906, rel=1e-14)
    assert enthalpy_F(1.0, 1.0, 0.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        enthalpy_F(0.0, 1.0, 1.0)


def test_admissibility_report_flag():
    assert AdmissibilityReport(1.0, 1.0, 0.5).admissible
    assert not AdmissibilityReport(1.0, 1.0, 0.0).admissible
    assert not AdmissibilityReport(-1.0, 1.0, 1.0).admissible
