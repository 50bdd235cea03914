from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaugeweave import adiabatic as ad
from gaugeweave import geometry as geo
from gaugeweave import models
from gaugeweave import weakvalue as wv
from gaugeweave.errors import NonAdiabatic, StepTooLarge
from gaugeweave.grid import ParameterGrid

THETA = np.pi / 3


def still_path(T=1.0, steps=100):
    return ad.TimePath(np.zeros((steps + 1, 1)), T / steps)


def test_time_path_validation():
    with pytest.raises(ValueError):
        ad.TimePath(np.zeros((1, 1)), 0.1)
    with pytest.raises(ValueError):
        ad.TimePath(np.zeros((3, 1)), 0.0)
    with pytest.raises(ValueError):
        ad.TimePath(np.array([[0.0], [1.0]]), 0.1, closed=True)
    p = ad.cone_path(THETA, 1.0, loops=2, steps_per_loop=40)
    assert p.closed and p.samples.shape == (81, 2)
    assert p.total_time == pytest.approx(4 * np.pi)


def test_constant_hamiltonian_phase():
    res = ad.evolve_tdse(lambda R: models.SIGMA_Z, still_path(1.0, 10), [1, 0], 1e-4)
    assert abs(res.states[-1, 0] - np.exp(-1j)) <= 1e-8
    assert np.max(np.abs(res.geometric_phase)) <= 1e-8
    assert res.band == 1
    np.testing.assert_allclose(res.dynamical_phase, -res.energies[:, 1] * res.times, atol=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_unitarity_for_any_start(seed):
    rng = np.random.default_rng(seed)
    H = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    H = H + H.conj().T
    psi0 = rng.normal(size=3) + 1j * rng.normal(size=3)
    res = ad.evolve_tdse(lambda R: H, still_path(2.0, 50), psi0, 0.01)
    assert res.norm_defect <= 1e-10
    assert np.all((res.leakage >= 0) & (res.leakage <= 1))


def test_psi0_is_normalised():
    res = ad.evolve_tdse(lambda R: models.SIGMA_Z, still_path(), [3, 0], 0.01)
    assert abs(np.linalg.norm(res.states[0]) - 1) <= 1e-15


def test_dt_sub_larger_than_step_rejected():
    with pytest.raises(ValueError):
        ad.evolve_tdse(lambda R: models.SIGMA_Z, still_path(1.0, 10), [1, 0], 0.5)


def test_coarse_sampling_raises_step_too_large():
    # the level spikes between samples, so the sampled energies miss 3 pi per interval
    path = ad.TimePath.from_function(lambda t: np.array([1.0 + 6 * np.pi * np.sin(np.pi * t) ** 2]), 3.0, 3)
    with pytest.raises(StepTooLarge):
        ad.evolve_tdse(models.diag_two_level, path, [0, 1], 0.001)


def test_leakage_quadratic_in_speed():
    psi0 = models.spin_half_lower_state(THETA, 0.0)
    speeds = [0.2, 0.1, 0.05]
    leaks = [ad.evolve_tdse(models.spin_half_sphere, ad.cone_path(THETA, w, 1, 400), psi0, 0.05).max_leakage
             for w in speeds]
    assert 1.8 <= ad.leakage_slope(speeds, leaks) <= 2.2


@pytest.fixture(scope="module")
def slow_runs():
    psi0 = models.spin_half_lower_state(THETA, 0.0)
    one = ad.evolve_tdse(models.spin_half_sphere, ad.cone_path(THETA, 0.005, 1, 2000), psi0, 0.1)
    two = ad.evolve_tdse(models.spin_half_sphere, ad.cone_path(THETA, 0.005, 2, 2000), psi0, 0.1)
    return one, two


def test_slow_loop_geometric_phase(slow_runs):
    one, _ = slow_runs
    assert one.max_leakage < 1e-4
    assert geo.phase_distance(one.geometric_phase[-1], -np.pi / 2) <= 1e-2


def test_two_loops_add(slow_runs):
    one, two = slow_runs
    assert geo.phase_distance(two.geometric_phase[-1], 2 * one.geometric_phase[-1]) <= 2e-2


def test_extract_phases_uses_bundle_builder(slow_runs):
    one, _ = slow_runs
    grid = ParameterGrid((9, 64), (0.01, 2 * np.pi / 64), (THETA - 0.04, 0.0), ("open", "periodic"))
    b = geo.build_bundle(models.spin_half_sphere, grid)
    ph = ad.extract_phases(one, b, 0)
    np.testing.assert_allclose(ph.geometric, one.geometric_phase, atol=1e-12)
    np.testing.assert_allclose(ph.dynamical, one.dynamical_phase, atol=1e-9)


def test_rate_along_path(slow_runs):
    one, _ = slow_runs
    grid = ParameterGrid((9, 256), (0.01, 2 * np.pi / 256), (THETA - 0.04, 0.0), ("open", "periodic"))
    b = geo.build_bundle(models.spin_half_sphere, grid)
    r_e1 = ad.verify_rate_along_path(one, b, 0, wv.FixedBra([1, 0]))
    r_band = ad.verify_rate_along_path(one, b, 0, wv.CustomField.from_band(b, 0))
    assert r_e1.max_deviation <= 1e-3
    assert np.max(np.abs(r_e1.weak_rate - r_band.weak_rate)) <= 1e-6


def test_non_adiabatic_run_rejected():
    psi0 = models.spin_half_lower_state(THETA, 0.0)
    fast = ad.evolve_tdse(models.spin_half_sphere, ad.cone_path(THETA, 3.0, 1, 400), psi0, 0.001)
    assert fast.max_leakage >= 0.1
    with pytest.raises(NonAdiabatic):
        ad.extract_phases(fast)


def test_constant_states_zero_rates():
    grid = ParameterGrid.from_bounds([0.5], [2.0], [31])
    b = geo.build_bundle(models.diag_two_level, grid)
    path = ad.TimePath.from_function(lambda t: np.array([1.0 + 0.5 * np.sin(t)]), 2.0, 200)
    res = ad.evolve_tdse(models.diag_two_level, path, [0, 1], 0.01)
    rep = ad.verify_rate_along_path(res, b, 0, wv.FixedBra([0.2, 1]))
    assert np.max(np.abs(rep.weak_rate)) == 0
    # only the trapezoid error of the sampled dynamical phase is left, O(dt^2)
    assert np.max(np.abs(rep.simulated_rate)) <= 1e-5
