from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaugeweave import geometry as geo
from gaugeweave import models
from gaugeweave.errors import DegenerateBand, NonHermitianInput, VanishingOverlap
from gaugeweave.grid import ParameterGrid, PathContour, VectorField


def azimuth_loop(grid, theta_index=None):
    """Closed loop along the periodic last axis."""
    if grid.n_dims == 1:
        idx = [[j] for j in range(grid.points[0])] + [[0]]
    else:
        idx = [[theta_index, j] for j in range(grid.points[1])] + [[theta_index, 0]]
    return PathContour.from_indices(grid, idx, closed=True)


def ring_bundle(theta, steps):
    grid = ParameterGrid.from_bounds([0.0], [2 * np.pi], [steps], "periodic")
    return geo.build_bundle(lambda p: models.spin_half_sphere((theta, p[0])), grid)


def test_diagonal_builder_constant_states(diag_bundle):
    b = diag_bundle
    R = b.grid.axis(0)
    np.testing.assert_allclose(b.energies, np.stack([-R, R], axis=1))
    np.testing.assert_array_equal(b.states[:, :, 0], np.tile([0, 1], (31, 1)))
    np.testing.assert_array_equal(b.states[:, :, 1], np.tile([1, 0], (31, 1)))
    assert np.all(geo.berry_connection(b, 0).components == 0)
    path = PathContour.from_indices(b.grid, [[i] for i in range(31)] + [[i] for i in range(30, -1, -1)],
                                    closed=True)
    assert geo.berry_phase_wilson(b, 0, path) == 0.0


@pytest.mark.parametrize("sign", [1, -1])
def test_spin_half_spectrum(sign):
    grid = ParameterGrid.from_bounds([0.5, 0.5, 0.5], [1.5, 1.2, 1.0], [4, 3, 3])
    b = geo.build_bundle(lambda R: sign * models.spin_half(R), grid)
    norm = np.linalg.norm(grid.coords(), axis=-1)
    np.testing.assert_allclose(b.energies[..., 0], -norm, atol=1e-12)
    np.testing.assert_allclose(b.energies[..., 1], norm, atol=1e-12)


def test_crossing_raises_degenerate():
    grid = ParameterGrid.from_bounds([-1.0], [1.0], [21])
    with pytest.raises(DegenerateBand) as info:
        geo.build_bundle(models.diag_two_level, grid)
    assert info.value.point == (10,)


def test_non_hermitian_builder():
    grid = ParameterGrid.from_bounds([0.0], [1.0], [5])
    with pytest.raises(NonHermitianInput):
        geo.build_bundle(lambda R: np.array([[0, 1], [0, 0]]), grid)


def test_connection_is_real(sphere_bundle):
    A = geo.berry_connection(sphere_bundle, 0).components
    assert np.max(np.abs(A.imag)) <= 1e-8


def test_lower_band_matches_closed_form(sphere_bundle):
    c = sphere_bundle.grid.coords()
    u = models.spin_half_lower_state(c[..., 0], c[..., 1])
    ov = np.abs(np.sum(np.conj(u) * sphere_bundle.band(0), axis=-1))
    np.testing.assert_allclose(ov, 1, atol=1e-12)


def test_equator_phase_at_400_steps():
    b = ring_bundle(np.pi / 2, 400)
    loop = azimuth_loop(b.grid)
    line = geo.berry_phase_line(geo.berry_connection(b, 0), loop)
    assert geo.phase_distance(line, -np.pi) <= 1e-3
    rev = geo.berry_phase_line(geo.berry_connection(b, 0), loop.reversed())
    assert geo.phase_distance(rev, -line) <= 1e-12


@pytest.mark.parametrize("theta", [np.pi / 6, np.pi / 3])
def test_line_phase_at_400_steps(theta):
    b = ring_bundle(theta, 400)
    line = geo.berry_phase_line(geo.berry_connection(b, 0), azimuth_loop(b.grid))
    assert geo.phase_distance(line, -np.pi * (1 - np.cos(theta))) <= 1e-4


@pytest.mark.parametrize("theta", [np.pi / 6, np.pi / 3, np.pi / 2])
def test_wilson_oracle_converges(theta):
    b = ring_bundle(theta, 10_000)
    wil = geo.berry_phase_wilson(b, 0, azimuth_loop(b.grid))
    assert geo.phase_distance(wil, -np.pi * (1 - np.cos(theta))) <= 1e-6


def test_line_wilson_gap_shrinks_with_h():
    gaps = []
    for steps in (100, 200, 400):
        b = ring_bundle(np.pi / 3, steps)
        loop = azimuth_loop(b.grid)
        line = geo.berry_phase_line(geo.berry_connection(b, 0), loop)
        gaps.append(geo.phase_distance(line, geo.berry_phase_wilson(b, 0, loop)))
    assert gaps[0] > gaps[1] > gaps[2]


def test_zero_connection_line_phase(diag_bundle):
    path = PathContour.from_indices(diag_bundle.grid, [[i] for i in range(31)])
    assert geo.berry_phase_line(geo.berry_connection(diag_bundle, 1), path) == 0


def test_wilson_vanishing_overlap():
    kets = np.array([[1, 0], [0, 1], [1, 0]], dtype=complex)
    with pytest.raises(VanishingOverlap):
        geo.overlap_phase(kets, closed=True)


def test_gauge_zero_returns_same_bundle(sphere_bundle):
    G = geo.GaugeFunction(sphere_bundle.grid, np.zeros(sphere_bundle.grid.shape + (2,)))
    assert geo.apply_gauge(sphere_bundle, G) is sphere_bundle


def test_constant_gauge_keeps_connection(sphere_bundle):
    G = geo.GaugeFunction.single_band(sphere_bundle.grid, 2, 0, 0.7)
    A0 = geo.berry_connection(sphere_bundle, 0).components
    A1 = geo.berry_connection(geo.apply_gauge(sphere_bundle, G), 0).components
    assert np.max(np.abs(A1 - A0)) <= 1e-10


def test_linear_gauge_shifts_connection(patch_bundle):
    grid = patch_bundle.grid
    G = geo.GaugeFunction.single_band(grid, 2, 0, grid.coords()[..., 0])
    A0 = geo.berry_connection(patch_bundle, 0).components
    A1 = geo.berry_connection(geo.apply_gauge(patch_bundle, G), 0).components
    shift = A1 - A0
    assert np.max(np.abs(shift[..., 0] + 1)) <= 1e-8
    assert np.max(np.abs(shift[..., 1])) <= 1e-8


def test_gauge_preserves_energies_and_orthonormality(sphere_bundle):
    G = geo.random_gauge(sphere_bundle.grid, 2, np.random.default_rng(0))
    g = geo.apply_gauge(sphere_bundle, G)
    assert np.array_equal(g.energies, sphere_bundle.energies)
    gram = np.einsum("...dm,...dn->...mn", np.conj(g.states), g.states)
    assert np.max(np.abs(gram - np.eye(2))) <= 1e-14


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_gauge_covariance_property(sphere_bundle, seed):
    rng = np.random.default_rng(seed)
    G = geo.random_gauge(sphere_bundle.grid, 2, rng)
    g = geo.apply_gauge(sphere_bundle, G)
    A0 = geo.berry_connection(sphere_bundle, 0).components
    A1 = geo.berry_connection(g, 0).components
    assert np.max(np.abs(A1 - (A0 - G.gradient()[..., 0]))) <= 1e-8
    B0 = geo.berry_curvature(sphere_bundle, 0).plane().values
    B1 = geo.berry_curvature(g, 0).plane().values
    assert np.max(np.abs(B1 - B0)) <= 1e-8
    P0 = geo.berry_curvature(sphere_bundle, 0, "plaquette").plane().values
    P1 = geo.berry_curvature(g, 0, "plaquette").plane().values
    assert np.max(np.abs(P1 - P0)) <= 1e-10


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_wilson_invariant_under_point_phases(seed):
    b = ring_bundle(np.pi / 3, 200)
    loop = azimuth_loop(b.grid)
    ref = geo.berry_phase_wilson(b, 0, loop)
    rng = np.random.default_rng(seed)
    # arbitrary (non-smooth) phases per point
    zeta = rng.uniform(-np.pi, np.pi, size=(200, 2))
    g = geo.apply_gauge(b, geo.GaugeFunction(b.grid, zeta))
    assert abs(geo.berry_phase_wilson(g, 0, loop) - ref) <= 1e-12


def test_curvature_methods_agree(patch_bundle):
    curl = geo.berry_curvature(patch_bundle, 0, "curl").plane().values
    plaq = geo.berry_curvature(patch_bundle, 0, "plaquette").plane().values
    centre = 0.25 * (curl[:-1, :-1] + curl[1:, :-1] + curl[:-1, 1:] + curl[1:, 1:])
    assert np.max(np.abs(centre - plaq)) <= 1e-4
    theta = patch_bundle.grid.coords()[..., 0]
    # half the solid-angle density, negative for the lower band
    assert np.max(np.abs(curl[2:-2, 2:-2] + 0.5 * np.sin(theta[2:-2, 2:-2]))) <= 1e-4
    assert np.max(np.abs(curl.imag)) <= 1e-8


def test_constant_states_zero_curvature():
    grid = ParameterGrid.from_bounds([0.5, 0.0], [2.0, 1.0], [11, 9])
    b = geo.build_bundle(models.diag_two_level, grid)
    assert np.all(geo.berry_curvature(b, 0).plane().values == 0)
    assert np.all(geo.berry_curvature(b, 0, "plaquette").plane().values == 0)


def test_chern_number_sphere():
    grid = ParameterGrid.from_bounds([0.0, 0.0], [np.pi, 2 * np.pi], [41, 40], ("open", "periodic"))
    b = geo.build_bundle(models.spin_half_sphere, grid, bands=[])
    total, chern = geo.chern_number(b, 0)
    assert abs(total + 2 * np.pi) <= 1e-9
    assert chern == pytest.approx(-1, abs=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.integers(12, 40), st.integers(12, 40))
def test_chern_quantised_on_any_sphere_grid(nt, nphi):
    grid = ParameterGrid.from_bounds([0.0, 0.0], [np.pi, 2 * np.pi], [nt, nphi], ("open", "periodic"))
    b = geo.build_bundle(models.spin_half_sphere, grid, bands=[])
    total, _ = geo.chern_number(b, 0)
    assert abs(total / (2 * np.pi) - round(total / (2 * np.pi))) <= 1e-10


def test_wrap_phase_range():
    assert geo.wrap_phase(np.pi) == pytest.approx(np.pi)
    assert geo.wrap_phase(-np.pi) == pytest.approx(np.pi)
    assert geo.wrap_phase(3 * np.pi / 2) == pytest.approx(-np.pi / 2)


def test_stitching_removes_sign_flips():
    grid = ParameterGrid.from_bounds([0.0], [np.pi], [50])
    # eigenvectors of a rotating real field: the gauge fix alone would flip signs
    builder = lambda p: np.cos(p[0]) * models.SIGMA_Z + np.sin(p[0]) * models.SIGMA_X + 0.1 * np.eye(2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        b = geo.build_bundle(builder, grid)
    ov = np.sum(np.conj(b.states[:-1, :, 0]) * b.states[1:, :, 0], axis=-1)
    assert np.all(ov.real > 0.9)
