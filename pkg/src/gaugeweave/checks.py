"""Named numerical checks shared by the command line suites and the tests.

Every check is a function ``(rng, tol_scale) -> CheckResult``.  A check may
measure several quantities; each lands in ``details`` with its own
tolerance and the check passes only if all of them do.  Reports carry no
timings so identical seeds give identical bytes.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import __version__
from . import adiabatic as ad
from . import aharonov_bohm as ab
from . import geometry as geo
from . import models
from . import weakvalue as wv
from .export import config_hash
from .grid import ParameterGrid, PathContour, check_momentum_hermitian, trapezoid_path


@dataclass
class Measurement:
    value: float
    tolerance: float
    # "le": value <= tolerance; "ge": value >= tolerance; "true": boolean in value
    relation: str = "le"

    @property
    def passed(self) -> bool:
        if self.relation == "le":
            return bool(np.isfinite(self.value) and self.value <= self.tolerance)
        if self.relation == "ge":
            return bool(np.isfinite(self.value) and self.value >= self.tolerance)
        return bool(self.value)

    def as_dict(self) -> dict:
        return {"value": self.value, "tolerance": self.tolerance, "relation": self.relation,
                "passed": self.passed}


@dataclass
class CheckResult:
    """Outcome of one named check; ``value``/``tolerance`` repeat the headline entry."""

    name: str
    value: float
    tolerance: float
    passed: bool
    details: dict = field(default_factory=dict)
    notes: str = ""
    # physical quantity behind the headline deviation, when one exists
    measured: float | None = None

    def as_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "tolerance": self.tolerance,
                "passed": self.passed, "measured": self.measured, "details": self.details,
                "notes": self.notes}

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: value={self.value:.3e} tolerance={self.tolerance:.3e}"


def _result(name: str, measurements: dict, headline: str, notes: str = "",
            extra: dict | None = None) -> CheckResult:
    details = {k: m.as_dict() for k, m in measurements.items()}
    if extra:
        details.update(extra)
    ok = all(m.passed for m in measurements.values())
    h = measurements[headline]
    return CheckResult(name, float(h.value), float(h.tolerance), ok, details, notes)


# -- shared fixtures --------------------------------------------------------------------

def sphere_patch(points: int = 64) -> ParameterGrid:
    """Northern cap band ``theta in [0.15, 1.45]`` times the full azimuth."""
    return ParameterGrid.from_bounds([0.15, 0.0], [1.45, 2 * np.pi], [points, points],
                                     ("open", "periodic"))


def full_sphere(n_theta: int = 41, n_phi: int = 40) -> ParameterGrid:
    return ParameterGrid.from_bounds([0.0, 0.0], [np.pi, 2 * np.pi], [n_theta, n_phi],
                                     ("open", "periodic"))


def random_bra(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def azimuthal_bundle(theta: float, steps: int) -> geo.EigenBundle:
    """Spin-1/2 lower band on the azimuthal circle at ``theta`` (1D periodic grid)."""
    grid = ParameterGrid.from_bounds([0.0], [2 * np.pi], [steps], "periodic")
    return geo.build_bundle(lambda p: models.spin_half_sphere((theta, p[0])), grid)


def azimuthal_loop(grid: ParameterGrid) -> PathContour:
    n = grid.points[0]
    return PathContour.from_indices(grid, [[j] for j in list(range(n)) + [0]], closed=True)


def berry_phase_error(theta: float, steps: int) -> tuple[float, float]:
    """(|line - exact|, |line - overlap product|) on one azimuthal loop."""
    b = azimuthal_bundle(theta, steps)
    loop = azimuthal_loop(b.grid)
    line = geo.berry_phase_line(geo.berry_connection(b, 0), loop)
    wil = geo.berry_phase_wilson(b, 0, loop)
    exact = -np.pi * (1 - np.cos(theta))
    return geo.phase_distance(line, exact), geo.phase_distance(line, wil)


# -- checks ------------------------------------------------------------------------------

def check_closure(rng, tol_scale=1.0) -> CheckResult:
    b = geo.build_bundle(models.spin_half_sphere, sphere_patch())
    A = geo.connection_array(b, 0)
    worst = 0.0
    for _ in range(20):
        dec = wv.decompose(b, 0, wv.FixedBra(random_bra(rng, 2)))
        keep = ~dec.mask
        worst = max(worst, float(np.max(np.abs(dec.total - A)[keep])))
    m = {"closure": Measurement(worst, 1e-8 * tol_scale)}
    return _result("closure", m, "closure")


def check_gauge_splitting(rng, tol_scale=1.0) -> CheckResult:
    grid = sphere_patch()
    b = geo.build_bundle(models.spin_half_sphere, grid)
    s = mp = comp = 0.0
    for _ in range(20):
        G = geo.random_gauge(grid, b.band_count, rng)
        rep = wv.gauge_covariance_test(b, 0, wv.FixedBra(random_bra(rng, 2)), G)
        s = max(s, rep.self_shift_defect)
        mp = max(mp, rep.mutual_defect)
        comp = max(comp, rep.max_component_defect)
    tol = 1e-8 * tol_scale
    m = {"self_shift": Measurement(s, tol), "mutual_invariance": Measurement(mp, tol),
         "component_invariance": Measurement(comp, tol)}
    worst = max(m, key=lambda k: m[k].value)
    return _result("gauge_splitting", m, worst)


def check_prepost_degeneracy(rng, tol_scale=1.0) -> CheckResult:
    b = geo.build_bundle(models.spin_half_sphere, sphere_patch())
    dec = wv.decompose(b, 0, wv.CustomField.from_band(b, 0))
    val = float(np.nanmax(np.abs(dec.a_mutual.components)))
    return _result("prepost_degeneracy", {"max_mutual": Measurement(val, 1e-8 * tol_scale)},
                   "max_mutual")


def check_momentum_hermiticity(rng, tol_scale=1.0) -> CheckResult:
    g1 = ParameterGrid.from_bounds([0.0], [2 * np.pi], [64], "periodic")
    g2 = ParameterGrid.from_bounds([0.0, 0.0], [1.0, 2.0], [8, 6], "periodic")
    seed = int(rng.integers(2 ** 31))
    r1 = check_momentum_hermitian(g1, n_random=100, seed=seed)
    r2 = check_momentum_hermitian(g2)
    m = {"translation_unitarity": Measurement(max(r1.unitary_defect + r2.unitary_defect), 0.0),
         "momentum_asymmetry": Measurement(max(r1.max_asymmetry + r2.max_asymmetry), 0.0),
         "inner_product": Measurement(max(r1.inner_product_defect), 1e-12 * tol_scale)}
    return _result("momentum_hermiticity", m, "inner_product")


def check_berry_phase_oracle(rng, tol_scale=1.0) -> CheckResult:
    m, extra = {}, {}
    worst_exact = worst_wil = 0.0
    for theta in (np.pi / 6, np.pi / 3, np.pi / 2):
        e1, w1 = berry_phase_error(theta, 1000)
        e2, _ = berry_phase_error(theta, 2000)
        worst_exact, worst_wil = max(worst_exact, e1), max(worst_wil, w1)
        key = f"theta={theta:.6f}"
        extra[key] = {"exact_error_1000": e1, "wilson_gap_1000": w1, "exact_error_2000": e2}
        m[f"refines_{key}"] = Measurement(bool(e2 < e1), True, "true")
    m["exact"] = Measurement(worst_exact, 1e-3 * tol_scale)
    m["wilson"] = Measurement(worst_wil, 1e-3 * tol_scale)
    return _result("berry_phase_oracle", m, "exact", extra=extra)


def check_curvature_sourcing(rng, tol_scale=1.0) -> CheckResult:
    grid = ParameterGrid.from_bounds([0.3, 0.0], [1.3, 1.0], [101, 101], "open")
    b = geo.build_bundle(models.spin_half_sphere, grid)
    plaq = geo.berry_curvature(b, 0, "plaquette").plane().values
    m = {}
    for label, phi in (("fixed_bra", wv.FixedBra([1.0, 0.0])),
                       ("parameter_state", wv.ParameterState.fixed(0))):
        cd = wv.curvature_decompose(b, 0, phi)
        keep = ~cd.mask
        bs = float(np.max(np.abs(cd.b_self.plane().values[keep])))
        bm = cd.b_mutual.plane().values
        # compare at cell centres where the plaquette curvature lives
        centre = 0.25 * (bm[:-1, :-1] + bm[1:, :-1] + bm[:-1, 1:] + bm[1:, 1:])
        ck = keep[:-1, :-1] & keep[1:, :-1] & keep[:-1, 1:] & keep[1:, 1:]
        gap = float(np.max(np.abs(centre - plaq)[ck]))
        res = float(np.nanmax(cd.zero_condition_residual[(0, 1)].values))
        m[f"{label}_b_self"] = Measurement(bs, 1e-6 * tol_scale)
        m[f"{label}_b_mutual_vs_plaquette"] = Measurement(gap, 1e-4 * tol_scale)
        m[f"{label}_zero_condition"] = Measurement(res, 1e-6 * tol_scale)
    # a generic bra makes <phi|u> depend on both axes; its B_self is then
    # second-order stencil error, so measure that it shrinks as h^2
    bra = random_bra(rng, 2)
    generic = []
    for points in (51, 101):
        g = ParameterGrid.from_bounds([0.3, 0.0], [1.3, 1.0], [points, points], "open")
        cd = wv.curvature_decompose(geo.build_bundle(models.spin_half_sphere, g), 0, wv.FixedBra(bra))
        generic.append(float(np.max(np.abs(cd.b_self.plane().values[~cd.mask]))))
    order = float(np.log2(generic[0] / generic[1]))
    m["generic_bra_b_self_order"] = Measurement(order, 1.8, "ge")
    sphere = geo.build_bundle(models.spin_half_sphere, full_sphere(), bands=[])
    total, _ = geo.chern_number(sphere, 0)
    m["chern_sum"] = Measurement(abs(total + 2 * np.pi), 1e-9 * tol_scale)
    return _result("curvature_sourcing", m, "fixed_bra_b_mutual_vs_plaquette",
                   extra={"chern_flux": total, "generic_bra_b_self": generic[1]})


def check_mutual_curvature_closed_form(rng, tol_scale=1.0) -> CheckResult:
    grid = ParameterGrid.from_bounds([0.9, 0.0], [1.0, 0.1], [41, 41], "open")
    b = geo.build_bundle(models.spin_half_sphere, grid)
    cd = wv.curvature_decompose(b, 0, wv.FixedBra([1.0, 0.0]))
    keep = ~cd.mask
    comp = cd.components[1]
    route = comp["curl"][(0, 1)].values
    printed = float(np.max(np.abs(comp["printed"][(0, 1)].values - route)[keep]))
    product = float(np.max(np.abs(comp["product_rule"][(0, 1)].values - route)[keep]))
    m = {"printed_vs_curl": Measurement(printed, 1e-6 * tol_scale)}
    notes = ("printed closed form disagrees with the curl of the mutual term"
             if printed > 1e-6 * tol_scale else "")
    return _result("mutual_curvature_closed_form", m, "printed_vs_curl", notes,
                   extra={"product_rule_vs_curl": product})


def check_adiabatic_theorem(rng, tol_scale=1.0) -> CheckResult:
    theta = np.pi / 3
    psi0 = models.spin_half_lower_state(theta, 0.0)
    speeds = [0.2, 0.1, 0.05, 0.02]
    leaks = []
    for om in speeds:
        r = ad.evolve_tdse(models.spin_half_sphere, ad.cone_path(theta, om, 1, 400), psi0, 0.05)
        leaks.append(r.max_leakage)
    slope = ad.leakage_slope(speeds, leaks)
    slow = ad.evolve_tdse(models.spin_half_sphere, ad.cone_path(theta, 0.005, 1, 2000), psi0, 0.1)
    gamma_err = geo.phase_distance(slow.geometric_phase[-1], -np.pi / 2)
    m = {"leakage_slope": Measurement(abs(slope - 2.0), 0.2 * tol_scale),
         "slow_leakage": Measurement(slow.max_leakage, 1e-4 * tol_scale),
         "geometric_phase": Measurement(gamma_err, 1e-2 * tol_scale),
         "norm": Measurement(max(slow.norm_defect, 0.0), 1e-8 * tol_scale)}
    return _result("adiabatic_theorem", m, "geometric_phase",
                   extra={"slope": slope, "leakages": leaks, "speeds": speeds,
                          "gamma_T": float(slow.geometric_phase[-1])})


def check_rate_totality(rng, tol_scale=1.0) -> CheckResult:
    theta = np.pi / 3
    h = 0.01
    grid = ParameterGrid((9, 256), (h, 2 * np.pi / 256), (theta - 4 * h, 0.0), ("open", "periodic"))
    b = geo.build_bundle(models.spin_half_sphere, grid)
    path = ad.cone_path(theta, 0.005, 1, 2000)
    u_ref = models.spin_half_lower_state(theta, path.samples[:, 1])
    while True:
        bra = random_bra(rng, 2)
        if np.min(np.abs(u_ref @ np.conj(bra))) > 0.1:
            break
    posts = {"band": wv.CustomField.from_band(b, 0), "e1": wv.FixedBra([1.0, 0.0]),
             "random": wv.FixedBra(bra)}
    rates = {k: wv.gamma_rate_weak(b, 0, p, path) for k, p in posts.items()}
    keys = list(rates)
    pair = max(float(np.max(np.abs(rates[a] - rates[c])))
               for i, a in enumerate(keys) for c in keys[i + 1:])
    integral = float(np.trapezoid(rates["e1"], dx=path.dt))
    loop = PathContour(np.stack([np.full(4001, theta), np.linspace(0, 2 * np.pi, 4001)], axis=1),
                       closed=True)
    wil = geo.overlap_phase(b.states_at(loop.points)[..., 0], True)
    evo = ad.evolve_tdse(models.spin_half_sphere, path, models.spin_half_lower_state(theta, 0.0), 0.1)
    sim = ad.verify_rate_along_path(evo, b, 0, posts["e1"])
    m = {"pairwise": Measurement(pair, 1e-6 * tol_scale),
         "loop_integral": Measurement(geo.phase_distance(integral, wil), 1e-3 * tol_scale),
         "simulated_rate": Measurement(sim.max_deviation, 1e-3 * tol_scale)}
    return _result("rate_totality", m, "pairwise",
                   extra={"integral": integral, "wilson": wil})


AB_FLUXES = (0.5, 1.5, 3.2)
AB_WIDTH = 0.6


def ab_well_state(modes=(0, 0), width: float = AB_WIDTH) -> ab.ProductState:
    states = ab.bound_states_1d(width, max(modes) + 1)
    return ab.ProductState(tuple(states[k] for k in modes))


def check_ab_phase(rng, tol_scale=1.0, fluxes=AB_FLUXES) -> CheckResult:
    state = ab_well_state()
    loops = {"circle": ab.circle_loop((0.0, 0.0), 1.5, 1000),
             "square": ab.square_loop((0.0, 0.0), 1.5, 1000)}
    outside = ab.circle_loop((3.0, 0.0), 0.8, 1000)
    worst_in = worst_out = worst_self = worst_field = 0.0
    extra = {}
    measured = None
    for flux in fluxes:
        s = ab.SolenoidConfig(float(flux))
        well = ab.MovingWell(state, s)
        for name, loop in loops.items():
            val = ab.loop_berry_phase(well, loop)
            worst_in = max(worst_in, geo.phase_distance(val, s.phase))
            extra[f"flux={flux}_{name}"] = val
            if measured is None:
                measured = val
            # probe riding with the well: the mutual part is constant along the loop
            probe = loop + np.array([0.05, -0.03])
            a_self = ab.a_s_ab(state, s, loop, probe)
            self_phase = float(np.real(trapezoid_path(a_self, loop)))
            worst_self = max(worst_self, abs(self_phase - val))
        sub = loops["circle"][::50]
        worst_field = max(worst_field, float(np.max(np.abs(
            well.connection(sub) - s.coupling * ab.vector_potential(sub, s)))))
        v_out = ab.loop_berry_phase(well, outside)
        worst_out = max(worst_out, abs(v_out))
        extra[f"flux={flux}_outside"] = v_out
    m = {"enclosing": Measurement(worst_in, 1e-3 * tol_scale),
         "non_enclosing": Measurement(worst_out, 1e-4 * tol_scale),
         "self_sources_phase": Measurement(worst_self, 1e-3 * tol_scale),
         "connection_vs_potential": Measurement(worst_field, 1e-4 * tol_scale)}
    res = _result("ab_phase", m, "enclosing", extra=extra)
    res.measured = measured
    return res


def _segment(a, b, n):
    t = np.linspace(0.0, 1.0, n + 1)[:, None]
    return (1 - t) * np.asarray(a, dtype=float) + t * np.asarray(b, dtype=float)


def check_mutual_locality(rng, tol_scale=1.0) -> CheckResult:
    state = ab_well_state()
    R0 = np.array([1.5, 0.0])
    r0 = R0 + np.array([0.05, 0.02])
    tol = 1e-6 * tol_scale
    closed_R = ab.contour_gamma_mp_quadrature("vary_R_fixed_r", ab.circle_loop(R0, 0.1, 2000),
                                              state, r0)
    closed_r = ab.contour_gamma_mp_quadrature("vary_r_fixed_R", ab.circle_loop(R0, 0.15, 2000),
                                              state, R0)
    # open paths between fixed endpoints
    start, end = R0 + np.array([-0.08, -0.05]), R0 + np.array([0.07, 0.06])
    corner = np.array([end[0], start[1]])
    straight = _segment(start, end, 4000)
    dogleg = np.vstack([_segment(start, corner, 2000), _segment(corner, end, 2000)[1:]])
    path_gap = resample = 0.0
    for kind, anchor in (("vary_R_fixed_r", r0), ("vary_r_fixed_R", R0)):
        q1 = ab.contour_gamma_mp_quadrature(kind, straight, state, anchor)
        q2 = ab.contour_gamma_mp_quadrature(kind, dogleg, state, anchor)
        ref = ab.contour_gamma_mp(kind, straight, state, anchor)
        path_gap = max(path_gap, abs(q1 - q2), abs(q1 - ref), abs(q2 - ref))
        coarse = _segment(start, end, 1000)
        base = ab.contour_gamma_mp_quadrature(kind, coarse, state, anchor)
        for factor in (2, 4):
            fine = _segment(start, end, 1000 * factor)
            resample = max(resample, abs(ab.contour_gamma_mp_quadrature(kind, fine, state, anchor) - base))
    m = {"closed_vary_R": Measurement(abs(closed_R), tol),
         "closed_vary_r": Measurement(abs(closed_r), tol),
         "path_independence": Measurement(path_gap, tol),
         "resampling": Measurement(resample, tol)}
    worst = max(m, key=lambda k: m[k].value)
    return _result("mutual_locality", m, worst)


def check_well_profiles(rng, tol_scale=1.0) -> CheckResult:
    w = 1.0
    t0 = ab.profile_table(0, w)
    t2 = ab.profile_table(2, w)
    keep = ~t0.masked
    tan = -(np.pi / w) * np.tan(np.pi * t0.x / w)
    tan_err = float(np.max(np.abs(t0.a_im[keep] - tan[keep])))
    nodes = ab.analytic_node_positions(2, w)
    centres = np.array([c for _, _, c in t2.windows])
    if centres.size == nodes.size:
        node_err = float(np.max(np.abs(np.sort(centres) - nodes)))
    else:
        node_err = float("inf")
    m = {"real_part": Measurement(max(t0.max_real, t2.max_real), 1e-8 * tol_scale),
         "mode2_windows": Measurement(len(t2.windows) == 2, True, "true"),
         "mode0_windows": Measurement(len(t0.windows) == 0, True, "true"),
         "mode2_node_position": Measurement(node_err, 1e-3 * w * tol_scale),
         "mode0_tan_oracle": Measurement(tan_err, 1e-6 * tol_scale)}
    return _result("well_profiles", m, "mode0_tan_oracle",
                   extra={"mode2_windows": t2.windows})


CheckFn = Callable[..., CheckResult]

SUITES: dict[str, tuple[str, ...]] = {
    "gauge": ("closure", "gauge_splitting", "prepost_degeneracy", "momentum_hermiticity",
              "berry_phase_oracle"),
    "curvature": ("curvature_sourcing", "mutual_curvature_closed_form"),
    "adiabatic": ("adiabatic_theorem", "rate_totality"),
    "ab": ("ab_phase", "mutual_locality", "well_profiles"),
}

CHECKS: dict[str, CheckFn] = {
    "closure": check_closure,
    "gauge_splitting": check_gauge_splitting,
    "prepost_degeneracy": check_prepost_degeneracy,
    "berry_phase_oracle": check_berry_phase_oracle,
    "curvature_sourcing": check_curvature_sourcing,
    "mutual_curvature_closed_form": check_mutual_curvature_closed_form,
    "momentum_hermiticity": check_momentum_hermiticity,
    "adiabatic_theorem": check_adiabatic_theorem,
    "rate_totality": check_rate_totality,
    "ab_phase": check_ab_phase,
    "mutual_locality": check_mutual_locality,
    "well_profiles": check_well_profiles,
}


def suite_checks(suite: str) -> tuple[str, ...]:
    if suite == "all":
        names = []
        for key in ("gauge", "curvature", "adiabatic", "ab"):
            names.extend(SUITES[key])
        return tuple(names) + ("reproducibility",)
    if suite not in SUITES:
        raise KeyError(f"unknown suite {suite!r}; choose from {sorted(SUITES) + ['all']}")
    return SUITES[suite]


def _rng_for(seed: int, name: str) -> np.random.Generator:
    # per-check stream keyed by name, independent of execution order
    key = [ord(c) for c in name]
    return np.random.default_rng(np.random.SeedSequence([seed] + key))


def run_check(name: str, seed: int, tol_scale: float = 1.0,
              options: dict | None = None) -> CheckResult:
    """Run one check; ``options[name]`` holds keyword overrides for it."""
    if name == "reproducibility":
        return check_reproducibility(seed, tol_scale)
    kwargs = (options or {}).get(name, {})
    return CHECKS[name](_rng_for(seed, name), tol_scale, **kwargs)


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("GAUGEWEAVE_THREADS", "1")))
    except ValueError:
        return 1


def run_suite(suite: str, seed: int, tol_scale: float = 1.0, config: dict | None = None,
              options: dict | None = None) -> dict:
    """Run a suite and assemble its report (checks sorted by name).

    ``config`` is only hashed into the stamp; ``options`` maps check names to
    keyword overrides.
    """
    names = suite_checks(suite)
    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda n: run_check(n, seed, tol_scale, options), names))
    else:
        results = [run_check(n, seed, tol_scale, options) for n in names]
    results.sort(key=lambda r: r.name)
    stamp = {"suite": suite, "seed": seed, "tol_scale": tol_scale, "config": config or {},
             "options": options or {}}
    return {
        "version": __version__,
        "config_hash": config_hash(stamp),
        "suite": suite,
        "seed": seed,
        "passed": all(r.passed for r in results),
        "checks": [r.as_dict() for r in results],
    }


def check_reproducibility(seed: int, tol_scale: float = 1.0) -> CheckResult:
    """Rerun the gauge suite in-process and compare serialised reports."""
    from .export import dumps
    a = dumps(run_suite("gauge", seed, tol_scale))
    b = dumps(run_suite("gauge", seed, tol_scale))
    m = {"identical": Measurement(a == b, True, "true")}
    return _result("reproducibility", m, "identical")
