import numpy as np
import pytest

from fqhdsim import (
    DopingProfile,
    FieldState,
    Grid,
    PotentialMethod,
    green_kernel,
    poisson_residual,
    potential_from_density,
)

METHODS = (PotentialMethod.GREEN_KERNEL, PotentialMethod.DOUBLE_INTEGRAL)


def test_green_kernel_values():
    assert green_kernel(0.25, 0.75) == pytest.approx(-0.0625, abs=0)
    assert green_kernel(0.5, 0.5) == pytest.approx(-0.25, abs=0)
    for y in (0.0, 0.3, 1.0):
        assert green_kernel(0.0, y) == 0.0
    with pytest.raises(ValueError):
        green_kernel(1.2, 0.5)


def test_green_kernel_symmetry_and_sign():
    rng = np.random.default_rng(1)
    for _ in range(200):
        x, y = rng.uniform(0.0, 1.0, 2)
        assert green_kernel(x, y) == pytest.approx(green_kernel(y, x), abs=1e-15)
        assert green_kernel(x, y) <= 0.0


def test_constant_excess_density():
    # rho - D = 1 gives the parabola x^2/2 - x/2 for phi_r = 0
    g = Grid(200)
    doping = DopingProfile.flat(g, 1.0)
    rho = np.full(g.n_nodes, 2.0)
    for method in METHODS:
        phi = potential_from_density(rho, doping, 0.0, g, method)
        mid = g.n_cells // 2
        assert phi[mid] == pytest.approx(-0.125, abs=1e-10)
        exact = g.nodes**2 / 2 - g.nodes / 2
        assert np.abs(phi - exact).max() < 1e-10


def test_matching_density_is_linear():
    g = Grid(64)
    doping = DopingProfile.from_callable(g, lambda x: 1.0 + 0.3 * np.sin(2 * np.pi * x))
    for method in METHODS:
        phi = potential_from_density(doping.samples, doping, 1.0, g, method)
        assert np.abs(phi - g.nodes).max() < 1e-13


def test_boundary_exactness_any_input():
    rng = np.random.default_rng(9)
    g = Grid(50)
    doping = DopingProfile.flat(g, 1.0)
    for _ in range(20):
        rho = rng.uniform(0.3, 2.5, g.n_nodes)
        phi_r = rng.uniform(-1.0, 1.0)
        for method in METHODS:
            phi = potential_from_density(rho, doping, phi_r, g, method)
            assert phi[0] == 0.0
            assert phi[-1] == phi_r


def test_method_equivalence_order2():
    for n_cells in (100, 200):
        g = Grid(n_cells)
        doping = DopingProfile.flat(g, 1.0)
        rho = 1.0 + 0.8 * np.sin(2 * np.pi * g.nodes) + 0.2 * g.nodes**3
        a = potential_from_density(rho, doping, 0.3, g, PotentialMethod.GREEN_KERNEL)
        b = potential_from_density(rho, doping, 0.3, g, PotentialMethod.DOUBLE_INTEGRAL)
        assert np.abs(a - b).max() <= 5.0 * g.dx**2


def test_kernel_form_satisfies_discrete_poisson_exactly():
    g = Grid(128)
    doping = DopingProfile.flat(g, 1.0)
    rho = 1.0 + 0.5 * np.sin(3 * np.pi * g.nodes)
    phi = potential_from_density(rho, doping, 0.2, g, PotentialMethod.GREEN_KERNEL)
    state = FieldState(rho, np.zeros_like(rho), np.ones_like(rho), phi)
    assert poisson_residual(state, doping, g) < 1e-10


def test_double_integral_residual_second_order():
    residuals = []
    for n_cells in (100, 200, 400):
        g = Grid(n_cells)
        doping = DopingProfile.flat(g, 1.0)
        rho = 1.0 + np.sin(2 * np.pi * g.nodes)
        phi = potential_from_density(rho, doping, 0.0, g, PotentialMethod.DOUBLE_INTEGRAL)
        state = FieldState(rho, np.zeros_like(rho), np.ones_like(rho), phi)
        residuals.append(poisson_residual(state, doping, g))
    ratios = [residuals[i] / residuals[i + 1] for i in range(2)]
    for r in ratios:
        assert 3.5 <= r <= 4.5


def test_zero_everything():
    g = Grid(30)
    doping = DopingProfile.flat(g, 1.0)
    state = FieldState(doping.samples, np.zeros(g.n_nodes), np.ones(g.n_nodes), np.zeros(g.n_nodes))
    assert poisson_residual(state, doping, g) == 0.0


def test_shape_mismatch():
    g = Grid(30)
    doping = DopingProfile.flat(g, 1.0)
    with pytest.raises(ValueError):
        potential_from_density(np.ones(7), doping, 0.0, g)
