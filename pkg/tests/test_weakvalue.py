from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaugeweave import adiabatic as ad
from gaugeweave import aharonov_bohm as ab
from gaugeweave import geometry as geo
from gaugeweave import models
from gaugeweave import weakvalue as wv
from gaugeweave.errors import (NodeMasked, ParameterStateUndefined, PostSelectionOrthogonal)
from gaugeweave.grid import ParameterGrid


def random_bra(rng, d=2):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def unmasked_max(a, mask):
    return float(np.max(np.abs(a[~mask])))


def test_self_equals_connection_for_band_post_selection(sphere_bundle):
    dec = wv.decompose(sphere_bundle, 0, wv.CustomField.from_band(sphere_bundle, 0))
    A = geo.connection_array(sphere_bundle, 0)
    assert np.max(np.abs(dec.a_self.components - A)) <= 1e-8
    assert np.max(np.abs(dec.a_mutual.components)) <= 1e-8


def test_constant_states_give_zero_fields(diag_bundle):
    dec = wv.decompose(diag_bundle, 0, wv.FixedBra([0.3, 1.0]))
    assert np.all(dec.a_self.components == 0)
    assert np.all(dec.a_mutual.components == 0)


def test_two_level_has_single_component(sphere_bundle):
    _, comps = wv.a_mutual(sphere_bundle, 0, wv.FixedBra([1, 0]))
    assert list(comps) == [1]
    assert comps[1].kind == "mutual_component" and comps[1].other == 1


def test_fixed_bra_against_closed_form_spinor(patch_bundle):
    # lower band (cos t/2, sin t/2 e^{i p}): <e1|u> = cos t/2 gives
    # A_self = (-i/2 tan t/2, 0), A_n = (0, -sin^2 t/2)
    grid = patch_bundle.grid
    t = grid.coords()[..., 0]
    dec = wv.decompose(patch_bundle, 0, wv.FixedBra([1, 0]))
    a_s = dec.a_self.components
    assert np.max(np.abs(a_s[..., 0] + 0.5j * np.tan(t / 2))) <= 1e-5
    # only the one-sided edge stencils leave a residue here
    assert np.max(np.abs(a_s[..., 1])) <= 1e-6
    a_mp = dec.a_mutual.components
    assert np.max(np.abs(a_mp[..., 0] - 0.5j * np.tan(t / 2))) <= 1e-5
    # azimuthal stencil error is sin^2(t/2) (1 - sin h / h), about h^2 / 6, doubled at open edges
    assert np.max(np.abs(a_mp[..., 1] + np.sin(t / 2) ** 2)) <= 2e-5


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_closure_property(sphere_bundle, seed):
    dec = wv.decompose(sphere_bundle, 0, wv.FixedBra(random_bra(np.random.default_rng(seed))))
    A = geo.connection_array(sphere_bundle, 0)
    assert unmasked_max(dec.total - A, dec.mask) <= 1e-8
    comp_sum = sum(c.components for c in dec.a_mutual_components.values())
    assert unmasked_max(comp_sum - dec.a_mutual.components, dec.mask) <= 1e-10


def test_closure_parameter_state(sphere_bundle):
    dec = wv.decompose(sphere_bundle, 1, wv.ParameterState.fixed(1))
    A = geo.connection_array(sphere_bundle, 1)
    assert unmasked_max(dec.total - A, dec.mask) <= 1e-8


def test_orthogonal_post_selection_raises():
    grid = ParameterGrid.from_bounds([0.5], [2.0], [7])
    b = geo.build_bundle(models.diag_two_level, grid)
    # band 0 is e2 everywhere
    with pytest.raises(PostSelectionOrthogonal):
        wv.decompose(b, 0, wv.FixedBra([1, 0]))


def test_mask_marks_node_points():
    grid = ParameterGrid.from_bounds([0.0, 0.0], [np.pi / 2, 1.0], [11, 5], ("open", "open"))
    b = geo.build_bundle(models.spin_half_sphere, grid)
    # <e2|u_0> = sin(theta/2) vanishes on the theta = 0 row
    dec = wv.decompose(b, 0, wv.FixedBra([0, 1]))
    assert np.all(dec.mask[0]) and not np.any(dec.mask[1:])
    assert np.all(np.isnan(dec.a_self.components[0]))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_gauge_splitting_property(sphere_bundle, seed):
    rng = np.random.default_rng(seed)
    G = geo.random_gauge(sphere_bundle.grid, 2, rng)
    rep = wv.gauge_covariance_test(sphere_bundle, 0, wv.FixedBra(random_bra(rng)), G)
    assert rep.passed, rep


def test_identity_gauge_is_bitwise_exact(sphere_bundle):
    G = geo.GaugeFunction(sphere_bundle.grid, np.zeros(sphere_bundle.grid.shape + (2,)))
    rep = wv.gauge_covariance_test(sphere_bundle, 0, wv.FixedBra([1, 1j]), G)
    assert rep.self_shift_defect == 0 and rep.mutual_defect == 0 and rep.max_component_defect == 0


def test_linear_gauge_shifts_only_self(patch_bundle):
    grid = patch_bundle.grid
    G = geo.GaugeFunction.single_band(grid, 2, 0, grid.coords()[..., 0])
    phi = wv.FixedBra([1, 0.5])
    before = wv.decompose(patch_bundle, 0, phi)
    after = wv.decompose(geo.apply_gauge(patch_bundle, G), 0, phi)
    shift = after.a_self.components - before.a_self.components
    assert np.max(np.abs(shift[..., 0] + 1)) <= 1e-8
    assert np.max(np.abs(shift[..., 1])) <= 1e-8
    assert np.max(np.abs(after.a_mutual.components - before.a_mutual.components)) <= 1e-8


def test_bra_phase_gauge_covariance(sphere_bundle):
    # only the bra moves: the split must not change at all
    rng = np.random.default_rng(5)
    grid = sphere_bundle.grid
    G = geo.GaugeFunction(grid, np.zeros(grid.shape + (2,)), geo.smooth_random_field(grid, rng))
    rep = wv.gauge_covariance_test(sphere_bundle, 0, wv.FixedBra([1, 0]), G)
    assert rep.passed


def small_well(n_interior=101):
    bundle, xs = ab.moving_well_bundle(1.0, n_interior=n_interior, n_bands=3)
    return bundle, xs


@pytest.mark.parametrize("band", [0, 1, 2])
def test_position_path_matches_general_path(band):
    bundle, xs = small_well()
    centre = len(xs) // 2
    for k in (centre - 20, centre + 7):
        probe = wv.ParameterState.fixed(k)
        direct = wv.a_mutual_position(bundle, band, probe).components
        general = wv.a_mutual(bundle, band, probe)[0].components
        ok = np.isfinite(direct)
        assert np.max(np.abs(direct[ok] - general[ok])) <= 1e-10


def test_position_path_single_band_is_zero():
    grid = ParameterGrid.from_bounds([0.0], [1.0], [5])
    b = geo.build_bundle(lambda R: np.array([[R[0]]]), grid)
    out = wv.a_mutual_position(b, 0, wv.ParameterState.fixed(0)).components
    assert np.all(out == 0)


def test_position_path_errors():
    bundle, xs = small_well()
    with pytest.raises(ParameterStateUndefined):
        wv.a_mutual_position(bundle, 0, wv.FixedBra(np.ones(bundle.dim)))
    with pytest.raises(ParameterStateUndefined):
        wv.a_mutual_position(bundle, 0, wv.ParameterState.fixed(bundle.dim))
    # outside sites are decoupled, so band 0 vanishes there
    with pytest.raises(NodeMasked):
        wv.a_mutual_position(bundle, 0, wv.ParameterState.fixed(0))


def test_tracking_probe_gradient():
    grid = ParameterGrid.from_bounds([0.0], [2.0], [3])
    b = geo.build_bundle(lambda R: np.diag(np.arange(6.0)) + R[0] * 0, grid)
    probe = wv.ParameterState.tracking(grid, [2, 3, 4], strides=[1], position_spacing=[0.5])
    g = probe.bra_gradients(b)
    np.testing.assert_array_equal(g[1, 0], [0, 0, -1, 0, 1, 0])
    with pytest.raises(ParameterStateUndefined):
        wv.ParameterState.tracking(grid, [0, 1, 5], [1], [0.5]).bra_gradients(b)


def test_curvature_sourcing_fixed_bra(patch_bundle):
    cd = wv.curvature_decompose(patch_bundle, 0, wv.FixedBra([1, 0]))
    keep = ~cd.mask
    assert np.max(np.abs(cd.b_self.plane().values[keep])) <= 1e-6
    assert np.nanmax(cd.zero_condition_residual[(0, 1)].values) <= 1e-6
    B = geo.berry_curvature(patch_bundle, 0).plane().values
    assert np.max(np.abs(cd.b_mutual.plane().values - B)[keep]) <= 1e-6


def test_curvature_component_additivity(patch_bundle):
    cd = wv.curvature_decompose(patch_bundle, 0, wv.FixedBra([1, 0.2j]))
    keep = ~cd.mask
    total = sum(c["curl"][(0, 1)].values for c in cd.components.values())
    assert np.max(np.abs(total - cd.b_mutual.plane().values)[keep]) <= 1e-10


def test_product_rule_form_matches_curl():
    grid = ParameterGrid.from_bounds([0.9, 0.0], [1.0, 0.1], [41, 41], "open")
    b = geo.build_bundle(models.spin_half_sphere, grid)
    cd = wv.curvature_decompose(b, 0, wv.FixedBra([1, 0]))
    keep = ~cd.mask
    comp = cd.components[1]
    route = comp["curl"][(0, 1)].values
    assert np.max(np.abs(comp["product_rule"][(0, 1)].values - route)[keep]) <= 1e-5
    # the minus-sign variant is off by a finite amount, not round-off
    assert np.max(np.abs(comp["printed"][(0, 1)].values - route)[keep]) > 0.1


def test_rate_independent_of_post_selection():
    theta = np.pi / 3
    h = 0.01
    grid = ParameterGrid((9, 128), (h, 2 * np.pi / 128), (theta - 4 * h, 0.0), ("open", "periodic"))
    b = geo.build_bundle(models.spin_half_sphere, grid)
    path = ad.cone_path(theta, 0.1, 1, 500)
    r_band = wv.gamma_rate_weak(b, 0, wv.CustomField.from_band(b, 0), path)
    r_e1 = wv.gamma_rate_weak(b, 0, wv.FixedBra([1, 0]), path)
    r_berry = wv.gamma_rate_berry(b, 0, path)
    assert np.max(np.abs(r_band - r_e1)) <= 1e-6
    assert np.max(np.abs(r_berry - r_e1)) <= 1e-6
    # rate = omega * A_phi = -omega sin^2(theta/2)
    assert np.max(np.abs(r_e1 + 0.1 * np.sin(theta / 2) ** 2)) <= 1e-4


def test_rate_zero_for_constant_states(diag_bundle):
    samples = np.linspace(0.6, 1.9, 50)[:, None]
    assert np.all(wv.gamma_rate_weak(diag_bundle, 0, wv.FixedBra([0, 1]), samples, dt=0.1) == 0)
