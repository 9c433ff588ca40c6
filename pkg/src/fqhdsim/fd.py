"""Finite-difference and quadrature helpers on the uniform node grid.

All derivative operators are second-order centered in the interior with
one-sided stencils of the same derivative order at the endpoints.  Repeated
application (d3 = d1 of d2, d4 = d2 of d2) keeps second-order interior
accuracy, which is all the diagnostics require.
"""

import numpy as np


def d1(f, dx):
    """First derivative, centered interior / one-sided second-order ends."""
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * dx)
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dx)
    out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * dx)
    return out


def d2(f, dx):
    """Second derivative, 3-point interior / 4-point one-sided ends."""
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / dx**2
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / dx**2
    out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / dx**2
    return out


def d3(f, dx):
    return d1(d2(f, dx), dx)


def d4(f, dx):
    return d2(d2(f, dx), dx)


def trapezoid_weights(n_nodes, dx):
    """Composite-trapezoid quadrature weights on the node grid."""
    w = np.full(n_nodes, dx)
    w[0] = w[-1] = 0.5 * dx
    return w


def trapezoid(f, dx):
    """Integral of node samples over [0, 1] by the composite trapezoid rule."""
    f = np.asarray(f, dtype=float)
    return dx * (0.5 * f[0] + f[1:-1].sum() + 0.5 * f[-1])


def cumulative_trapezoid(f, dx):
    """Running integral x -> int_0^x f, sampled at the nodes (starts at 0)."""
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    out[0] = 0.0
    np.cumsum(0.5 * dx * (f[1:] + f[:-1]), out=out[1:])
    return out


def l2_norm(f, dx, weight=None):
    """Trapezoid-weighted discrete L2 norm, optionally with a node weight."""
    f = np.asarray(f, dtype=float)
    g = f * f if weight is None else np.asarray(weight, dtype=float) * f * f
    return float(np.sqrt(trapezoid(g, dx)))
