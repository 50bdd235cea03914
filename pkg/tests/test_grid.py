from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaugeweave.errors import GridTooCoarse, OpenBoundaryUnsupported, PathOffGrid
from gaugeweave.grid import (ParameterGrid, PathContour, ScalarField, VectorField,
                             check_momentum_hermitian, curl_2d, grad_scalar, line_integral,
                             momentum_matrix, translation_matrix)


def field(grid, fn):
    c = grid.coords()
    return ScalarField(grid, fn(*[c[..., m] for m in range(grid.n_dims)]).astype(complex))


def vfield(grid, *fns):
    c = grid.coords()
    comps = [fn(*[c[..., m] for m in range(grid.n_dims)]) for fn in fns]
    return VectorField(grid, np.stack(comps, axis=-1).astype(complex))


def test_grid_rejects_bad_spacing():
    with pytest.raises(ValueError):
        ParameterGrid((3,), (0.0,), (0.0,), ("open",))


def test_gradient_of_constant_and_linear():
    g = ParameterGrid.from_bounds([0, 0], [1, 2], [11, 7])
    assert np.max(np.abs(grad_scalar(field(g, lambda x, y: 0 * x + 3)).components)) == 0
    G = grad_scalar(field(g, lambda x, y: x)).components
    assert np.max(np.abs(G[..., 0] - 1)) <= 1e-10
    assert np.max(np.abs(G[..., 1])) <= 1e-10


def test_gradient_of_sine_periodic():
    g = ParameterGrid.from_bounds([0], [2 * np.pi], [629], "periodic")
    h = g.spacings[0]
    assert h == pytest.approx(0.01, rel=2e-3)
    G = grad_scalar(field(g, np.sin)).components[..., 0]
    assert np.max(np.abs(G - np.cos(g.axis(0)))) <= 2e-5


def test_gradient_too_coarse():
    g = ParameterGrid.from_bounds([0], [1], [2])
    with pytest.raises(GridTooCoarse):
        grad_scalar(field(g, lambda x: x))


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_gradient_exact_on_quadratics(a, b, c, d, e):
    g = ParameterGrid.from_bounds([-1, 0], [1, 1], [9, 6])
    f = field(g, lambda x, y: a * x * x + b * x * y + c * y * y + d * x + e)
    G = grad_scalar(f).components
    x, y = g.coords()[..., 0], g.coords()[..., 1]
    scale = 1 + abs(a) + abs(b) + abs(c) + abs(d)
    assert np.max(np.abs(G[..., 0] - (2 * a * x + b * y + d))) <= 1e-10 * scale
    assert np.max(np.abs(G[..., 1] - (b * x + 2 * c * y))) <= 1e-10 * scale


def test_translation_examples():
    g = ParameterGrid.from_bounds([0], [1], [4], "periodic")
    np.testing.assert_array_equal(translation_matrix(g, 0, 0), np.eye(4))
    psi = np.arange(4.0)
    np.testing.assert_array_equal(translation_matrix(g, 0, 1) @ psi, [3, 0, 1, 2])
    big = ParameterGrid.from_bounds([0, 0], [1, 1], [5, 3], "periodic")
    for m in range(2):
        np.testing.assert_array_equal(translation_matrix(big, m, 1) @ translation_matrix(big, m, -1),
                                      np.eye(15))


def test_translation_requires_periodic():
    g = ParameterGrid.from_bounds([0], [1], [4])
    with pytest.raises(OpenBoundaryUnsupported):
        translation_matrix(g, 0, 1)
    with pytest.raises(OpenBoundaryUnsupported):
        check_momentum_hermitian(g)


def test_momentum_plane_wave_eigenvalue():
    n, k = 64, 3
    g = ParameterGrid.from_bounds([0], [2 * np.pi], [n], "periodic")
    h = g.spacings[0]
    P = momentum_matrix(g, 0)
    psi = np.exp(1j * k * g.axis(0))
    np.testing.assert_allclose(P @ psi, np.sin(k * h) / h * psi, atol=1e-12)
    assert np.max(np.abs(P - P.conj().T)) == 0
    assert np.max(np.abs(P @ np.ones(n))) == 0


def test_hermiticity_report():
    g = ParameterGrid.from_bounds([0], [2 * np.pi], [64], "periodic")
    rep = check_momentum_hermitian(g, n_random=100, seed=1)
    assert rep.exact
    assert max(rep.inner_product_defect) <= 1e-12


def test_line_integral_examples():
    g = ParameterGrid.from_bounds([0], [2], [201])
    path = PathContour.from_indices(g, [[i] for i in range(201)])
    zero = VectorField(g, np.zeros((201, 1), complex))
    assert line_integral(zero, path) == 0
    F = grad_scalar(field(g, lambda x: x ** 2))
    assert abs(line_integral(F, path) - 4) <= 1e-6


def test_line_integral_rejects_jumps():
    g = ParameterGrid.from_bounds([0], [2], [21])
    F = VectorField(g, np.ones((21, 1), complex))
    with pytest.raises(PathOffGrid):
        line_integral(F, PathContour(np.array([[0.0], [0.5]])))
    with pytest.raises(PathOffGrid):
        line_integral(F, PathContour(np.array([[0.0], [2.5]])))


def square_loop_indices(n0, n1, lo, hi):
    idx = [(i, lo) for i in range(lo, hi)] + [(hi, j) for j in range(lo, hi)]
    idx += [(i, hi) for i in range(hi, lo, -1)] + [(lo, j) for j in range(hi, lo - 1, -1)]
    return idx


def test_closed_loop_of_gradient_shrinks_with_h():
    errs = []
    for n in (41, 81, 161):
        g = ParameterGrid.from_bounds([-1, -1], [1, 1], [n, n])
        F = grad_scalar(field(g, lambda x, y: np.sin(2 * x) * np.cos(3 * y) + x * y * y))
        q = (n - 1) // 4
        path = PathContour.from_indices(g, square_loop_indices(n, n, q, 3 * q), closed=True)
        errs.append(abs(line_integral(F, path)))
    assert errs[2] < errs[1] < errs[0]
    assert errs[1] / errs[2] > 3.5


def test_curl_examples():
    g = ParameterGrid.from_bounds([-1, -1], [1, 1], [201, 201])
    assert np.max(np.abs(curl_2d(grad_scalar(field(g, lambda x, y: np.sin(x) * np.exp(y)))).values)) <= 1e-8
    rot = vfield(g, lambda x, y: -y, lambda x, y: x)
    assert np.max(np.abs(curl_2d(rot).values - 2)) <= 1e-10


def test_vortex_curl_and_circulation():
    g = ParameterGrid.from_bounds([-2, -2], [2, 2], [401, 401])
    r2 = lambda x, y: x * x + y * y
    with np.errstate(divide="ignore", invalid="ignore"):
        F = vfield(g, lambda x, y: -y / r2(x, y), lambda x, y: x / r2(x, y))
        B = curl_2d(F).values
    c = g.coords()
    rad = np.hypot(c[..., 0], c[..., 1])
    # stencil error grows like h^2 / r^4; at h = 0.01 it is 3e-3 by r = 0.5
    away = (rad > 1.0) & (rad < 1.9)
    assert np.max(np.abs(B[away])) <= 5e-4
    t = np.linspace(0, 2 * np.pi, 4001)
    pts = np.stack([np.cos(t), np.sin(t)], axis=1)
    vals = np.stack([-pts[:, 1], pts[:, 0]], axis=1)
    from gaugeweave.grid import trapezoid_path
    assert abs(trapezoid_path(vals, pts) - 2 * np.pi) <= 1e-3


def test_scalar_field_shape_checked():
    g = ParameterGrid.from_bounds([0], [1], [4])
    with pytest.raises(ValueError):
        ScalarField(g, np.zeros(5))
