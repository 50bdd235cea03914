"""Command-line entry point.

Every command reads an optional JSON run configuration, writes CSV and JSON
files into ``--out`` and exits 0 on success.  Library errors are reported
by class name on stderr with exit status 1; bad configurations and usage
errors exit with status 2.  The configuration format is described in
``docs/config.md``.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import adiabatic as ad
from . import aharonov_bohm as ab
from . import checks
from . import geometry as geo
from . import models
from . import weakvalue as wv
from .errors import ConfigError, GaugeweaveError
from .export import complex_columns, config_hash, field_rows, write_csv, write_json
from .grid import ParameterGrid, PathContour

MODELS = ("spin_half", "diag_two_level", "ab_well", "custom_file")
COMMANDS = ("connection", "phase", "curvature", "decompose", "suite", "evolve", "ab-fig2")
# commands that act on one band and so need it spelled out in a config file
BAND_COMMANDS = ("connection", "phase", "curvature", "decompose", "evolve")

_EQUATOR = {"lower": [0.0], "upper": [2 * np.pi], "points": [400], "boundary": ["periodic"]}

DEFAULTS = {
    "connection": {"model": "spin_half", "model_params": {"theta": np.pi / 2}, "grid": _EQUATOR,
                   "band": 0},
    "phase": {"model": "spin_half", "model_params": {"theta": np.pi / 2}, "grid": _EQUATOR,
              "band": 0},
    "curvature": {"model": "spin_half", "band": 0,
                  "grid": {"lower": [0.0, 0.0], "upper": [np.pi, 2 * np.pi], "points": [41, 40],
                           "boundary": ["open", "periodic"]}},
    "decompose": {"model": "spin_half", "band": 0,
                  "grid": {"lower": [0.15, 0.0], "upper": [1.45, 2 * np.pi],
                           "points": [64, 64], "boundary": ["open", "periodic"]},
                  "post_selection": {"type": "fixed_bra", "components": [1.0, 0.0]}},
    "evolve": {"model": "spin_half", "band": 0,
               "path": {"type": "cone", "theta": np.pi / 3, "omega": 0.01, "loops": 1,
                        "steps_per_loop": 2000, "dt_sub": 0.1}},
    "ab-fig2": {"model": "ab_well", "model_params": {"width": 1.0, "flux": 1.5},
                "modes": [0, 1, 2]},
    "suite": {},
}

MODEL_GRIDS = {
    "diag_two_level": {"lower": [0.5], "upper": [2.0], "points": [64], "boundary": ["open"]},
}


# -- configuration -------------------------------------------------------------------------

def load_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("the config must be a JSON object")
    doc.setdefault("_base_dir", str(Path(path).resolve().parent))
    return doc


def resolve_config(command: str, user: dict | None) -> dict:
    """Merge a user config over the command defaults and validate it."""
    cfg = copy.deepcopy(DEFAULTS[command])
    if user is not None:
        if command in BAND_COMMANDS and "band" not in user:
            raise ConfigError("config is missing the band index 'band'")
        if "model" in user and user["model"] != cfg.get("model"):
            # a different model does not inherit grid or parameters meant for the default
            for key in ("grid", "model_params"):
                cfg.pop(key, None)
        cfg.update({k: v for k, v in user.items()})
    model = cfg.get("model", "spin_half")
    if model not in MODELS:
        raise ConfigError(f"unknown model {model!r}; choose from {list(MODELS)}")
    cfg["model"] = model
    if "grid" not in cfg and model in MODEL_GRIDS:
        cfg["grid"] = copy.deepcopy(MODEL_GRIDS[model])
    if "band" in cfg and (not isinstance(cfg["band"], int) or cfg["band"] < 0):
        raise ConfigError("band must be a non-negative integer")
    tol = cfg.get("tolerances", {})
    for key, val in tol.items():
        if not isinstance(val, (int, float)) or not val > 0:
            raise ConfigError(f"tolerance {key!r} must be a positive number")
    return cfg


def make_grid(spec: dict) -> ParameterGrid:
    try:
        return ParameterGrid.from_bounds(spec["lower"], spec["upper"], spec["points"],
                                         tuple(spec.get("boundary", ["open"] * len(spec["points"]))))
    except KeyError as exc:
        raise ConfigError(f"grid spec is missing {exc}") from exc


def make_builder(cfg: dict, n_dims: int):
    model = cfg["model"]
    params = cfg.get("model_params", {})
    if model == "spin_half":
        if n_dims == 1:
            theta = float(params.get("theta", np.pi / 2))
            return lambda p: models.spin_half_sphere((theta, np.atleast_1d(p)[0]))
        if n_dims == 2:
            return models.spin_half_sphere
        if n_dims == 3:
            return models.spin_half
        raise ConfigError("spin_half takes a 1D (azimuth), 2D (theta, phi) or 3D (Cartesian) grid")
    if model == "diag_two_level":
        return models.diag_two_level
    if model == "custom_file":
        if "model_file" not in cfg:
            raise ConfigError("custom_file needs 'model_file'")
        path = Path(cfg.get("_base_dir", ".")) / cfg["model_file"]
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load model file {path}: {exc}") from exc
        model_obj = models.StencilModel.from_json(doc)
        if model_obj.n_params != n_dims:
            raise ConfigError(f"model has {model_obj.n_params} parameters, grid has {n_dims} axes")
        return model_obj
    raise ConfigError(f"model {model!r} has no grid Hamiltonian")


def make_bundle(cfg: dict, band_list=None) -> geo.EigenBundle:
    if cfg["model"] == "ab_well":
        p = cfg.get("model_params", {})
        n_bands = max(3, cfg.get("band", 0) + 2)
        bundle, _ = ab.moving_well_bundle(float(p.get("width", 1.0)), int(p.get("n_interior", 1023)),
                                          n_bands=n_bands)
        return bundle
    if "grid" not in cfg:
        raise ConfigError(f"model {cfg['model']!r} needs a 'grid'")
    grid = make_grid(cfg["grid"])
    bands = [cfg["band"]] if band_list is None else band_list
    return geo.build_bundle(make_builder(cfg, grid.n_dims), grid, bands=bands)


def make_post_selection(cfg: dict, bundle: geo.EigenBundle):
    spec = cfg.get("post_selection", {"type": "band", "band": cfg["band"]})
    kind = spec.get("type")
    if kind == "fixed_bra":
        comps = np.asarray(spec.get("components", []), dtype=float)
        if comps.ndim == 2 and comps.shape[1] == 2:
            comps = comps[:, 0] + 1j * comps[:, 1]
        return wv.FixedBra(comps)
    if kind == "parameter_state":
        return wv.ParameterState.fixed(int(spec.get("index", 0)))
    if kind in ("band", "custom"):
        return wv.CustomField.from_band(bundle, int(spec.get("band", cfg["band"])))
    raise ConfigError(f"unknown post_selection type {kind!r}")


def make_path(cfg: dict, grid: ParameterGrid) -> PathContour:
    """Grid path from the config; by default a loop along the last periodic axis."""
    spec = cfg.get("path")
    if spec is None:
        periodic = [m for m in range(grid.n_dims) if grid.is_periodic(m)]
        axis = periodic[-1] if periodic else grid.n_dims - 1
        spec = {"type": "grid_loop", "axis": axis}
    kind = spec.get("type")
    if kind == "grid_loop":
        axis = int(spec.get("axis", grid.n_dims - 1))
        at = list(spec.get("at", [p // 2 for p in grid.points]))
        n = grid.points[axis]
        idx = []
        for j in range(n):
            row = list(at)
            row[axis] = j
            idx.append(row)
        closed = grid.is_periodic(axis)
        if closed:
            idx.append(idx[0])
        return PathContour.from_indices(grid, idx, closed=closed)
    if kind == "indices":
        return PathContour.from_indices(grid, spec["indices"], closed=bool(spec.get("closed", False)))
    raise ConfigError(f"unknown grid path type {kind!r}")


def make_loop(spec: dict) -> np.ndarray:
    kind = spec.get("type", "circle")
    center = spec.get("center", [0.0, 0.0])
    steps = int(spec.get("steps", 1000))
    if kind == "circle":
        return ab.circle_loop(center, float(spec.get("radius", 1.5)), steps)
    if kind == "square":
        return ab.square_loop(center, float(spec.get("half_side", 1.5)), steps)
    raise ConfigError(f"unknown loop type {kind!r}")


def _seed(args, cfg) -> int:
    return int(args.seed if args.seed is not None else cfg.get("seed", 0))


def _tol_scale(args, cfg) -> float:
    val = args.tol_scale if args.tol_scale is not None else cfg.get("tolerances", {}).get("tol_scale", 1.0)
    if not val > 0:
        raise ConfigError("--tol-scale must be positive")
    return float(val)


def _public(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if not k.startswith("_")}


def _summary(command: str, cfg: dict, **fields) -> dict:
    return {"command": command, "version": __version__, "config_hash": config_hash(_public(cfg)),
            **fields}


# -- commands ------------------------------------------------------------------------------

def cmd_connection(cfg: dict, out: Path, args) -> int:
    bundle = make_bundle(cfg)
    n = cfg["band"]
    conn = geo.berry_connection(bundle, n)
    header, rows = field_rows(bundle.grid, {"A": conn.components})
    write_csv(out / "connection.csv", header, rows)
    summary = {"band": n, "model": cfg["model"], "rows": len(rows),
               "max_abs_connection": float(np.max(np.abs(conn.components)))}
    if cfg["model"] != "ab_well":
        path = make_path(cfg, bundle.grid)
        summary["berry_phase_line"] = geo.berry_phase_line(conn, path)
        summary["berry_phase_wilson"] = geo.berry_phase_wilson(bundle, n, path)
        summary["path_closed"] = path.closed
    write_json(out / "connection.json", _summary("connection", cfg, **summary))
    return 0


def cmd_phase(cfg: dict, out: Path, args) -> int:
    n = cfg["band"]
    if cfg["model"] == "ab_well":
        p = cfg.get("model_params", {})
        state = checks.ab_well_state(tuple(p.get("modes", [n, 0])), float(p.get("width", checks.AB_WIDTH)))
        sol = ab.SolenoidConfig(float(p.get("flux", 1.5)))
        loop_spec = cfg.get("path", {"type": "circle", "radius": 1.5, "steps": 1000})
        value = ab.loop_berry_phase(ab.MovingWell(state, sol), make_loop(loop_spec))
        summary = {"band": n, "loop": loop_spec, "berry_phase": value,
                   "flux_phase": geo.wrap_phase(sol.phase)}
    else:
        bundle = make_bundle(cfg)
        path = make_path(cfg, bundle.grid)
        line = geo.berry_phase_line(geo.berry_connection(bundle, n), path)
        summary = {"band": n, "berry_phase_line": line,
                   "berry_phase_wilson": geo.berry_phase_wilson(bundle, n, path),
                   "path_points": int(path.points.shape[0]), "path_closed": path.closed}
    write_json(out / "phase.json", _summary("phase", cfg, **summary))
    return 0


def cmd_curvature(cfg: dict, out: Path, args) -> int:
    bundle = make_bundle(cfg)
    n = cfg["band"]
    curl = geo.berry_curvature(bundle, n, "curl")
    plaq = geo.berry_curvature(bundle, n, "plaquette")
    fluxes = {}
    for (a, b), field in curl.planes.items():
        header, rows = field_rows(bundle.grid, {"B": field.values})
        write_csv(out / f"curvature_curl_{a}{b}.csv", header, rows)
        pf = plaq.plane(a, b)
        header, rows = field_rows(pf.grid, {"B": pf.values})
        write_csv(out / f"curvature_plaquette_{a}{b}.csv", header, rows)
        total, chern = geo.chern_number(bundle, n, (a, b))
        fluxes[f"{a}{b}"] = {"total_flux": total, "flux_over_2pi": chern}
    write_json(out / "curvature.json", _summary("curvature", cfg, band=n, planes=fluxes))
    return 0


def cmd_decompose(cfg: dict, out: Path, args) -> int:
    bundle = make_bundle(cfg)
    n = cfg["band"]
    phi = make_post_selection(cfg, bundle)
    dec = wv.decompose(bundle, n, phi)
    grid = bundle.grid
    write_csv(out / "a_self.csv", *field_rows(grid, {"A_self": dec.a_self.components}, dec.mask))
    write_csv(out / "a_mutual.csv", *field_rows(grid, {"A_mutual": dec.a_mutual.components}, dec.mask))
    for m, comp in dec.a_mutual_components.items():
        write_csv(out / f"a_mutual_band{m}.csv",
                  *field_rows(grid, {"A_mutual": comp.components}, dec.mask))
    keep = ~dec.mask
    A = geo.connection_array(bundle, n)
    closure = float(np.max(np.abs(dec.total - A)[keep]))
    mutual_max = float(np.max(np.abs(dec.a_mutual.components[keep])))
    summary = {"band": n, "closure_residual": closure, "a_mutual_max": mutual_max,
               "masked_points": int(np.sum(dec.mask)), "points": int(grid.size)}
    if grid.size > 1:
        rng = np.random.default_rng(_seed(args, cfg))
        G = geo.random_gauge(grid, bundle.band_count, rng)
        rep = wv.gauge_covariance_test(bundle, n, phi, G, 1e-8 * _tol_scale(args, cfg))
        summary["gauge_test"] = {"self_shift_defect": rep.self_shift_defect,
                                 "mutual_defect": rep.mutual_defect,
                                 "component_defects": rep.component_defects,
                                 "tolerance": rep.tolerance, "passed": rep.passed}
    write_json(out / "decompose.json", _summary("decompose", cfg, **summary))
    return 0


def cmd_evolve(cfg: dict, out: Path, args) -> int:
    if cfg["model"] != "spin_half":
        raise ConfigError("evolve supports the spin_half model")
    spec = cfg.get("path", {})
    if spec.get("type", "cone") != "cone":
        raise ConfigError("evolve takes a path of type 'cone'")
    theta = float(spec.get("theta", np.pi / 3))
    path = ad.cone_path(theta, float(spec.get("omega", 0.01)), int(spec.get("loops", 1)),
                        int(spec.get("steps_per_loop", 2000)), float(spec.get("phi0", 0.0)))
    n = cfg["band"]
    H0 = models.spin_half_sphere(path.samples[0])
    psi0 = np.linalg.eigh(H0)[1][:, n]
    res = ad.evolve_tdse(models.spin_half_sphere, path, psi0, float(spec.get("dt_sub", 0.1)), band=n)
    header = ["t"] + complex_columns("psi", res.states.shape[1]) + ["theta", "gamma", "leakage"]
    rows = []
    for k, t in enumerate(res.times):
        row = [t]
        for z in res.states[k]:
            row += [z.real, z.imag]
        rows.append(row + [res.dynamical_phase[k], res.geometric_phase[k], res.leakage[k]])
    write_csv(out / "trajectory.csv", header, rows)
    summary = {"band": n, "samples": len(rows), "max_leakage": res.max_leakage,
               "norm_defect": res.norm_defect,
               # the initial eigenvector phase is arbitrary; report what was acquired
               "geometric_phase_acquired": float(res.geometric_phase[-1] - res.geometric_phase[0]),
               "geometric_phase_wrapped": geo.wrap_phase(res.geometric_phase[-1] - res.geometric_phase[0]),
               "dynamical_phase_final": float(res.dynamical_phase[-1])}
    write_json(out / "evolve.json", _summary("evolve", cfg, **summary))
    return 0


def cmd_ab_fig2(cfg: dict, out: Path, args) -> int:
    p = cfg.get("model_params", {})
    width = float(p.get("width", 1.0))
    tables = {}
    for mode in cfg.get("modes", [0, 1, 2]):
        t = ab.profile_table(int(mode), width)
        write_csv(out / f"fig2_mode{mode}.csv", ["X", "Re_v", "Re_AMP_x", "Im_AMP_x", "masked"], t.rows())
        tables[str(mode)] = {"rows": len(t.x), "windows": t.windows, "max_real": t.max_real}
    flux = float(p.get("flux", 1.5))
    sol = ab.SolenoidConfig(flux)
    well = ab.MovingWell(checks.ab_well_state(), sol)
    tol = 1e-3 * _tol_scale(args, cfg)
    loops = []
    for spec in cfg.get("loops", [{"type": "circle", "radius": 1.5, "steps": 1000},
                                  {"type": "square", "half_side": 1.5, "steps": 1000}]):
        val = ab.loop_berry_phase(well, make_loop(spec))
        dev = geo.phase_distance(val, sol.phase)
        loops.append({"loop": spec, "value": val, "expected": geo.wrap_phase(sol.phase),
                      "deviation": dev, "tolerance": tol, "pass": dev <= tol})
    write_json(out / "ab_loops.json", _summary("ab-fig2", cfg, flux=flux, width=width,
                                                profiles=tables, loops=loops))
    return 0 if all(entry["pass"] for entry in loops) else 1


def cmd_suite(cfg: dict, out: Path, args) -> int:
    suite = args.suite or cfg.get("suite", "all")
    try:
        checks.suite_checks(suite)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from exc
    options = copy.deepcopy(cfg.get("checks", {}))
    if "flux" in cfg.get("model_params", {}):
        options.setdefault("ab_phase", {})["fluxes"] = [cfg["model_params"]["flux"]]
    report = checks.run_suite(suite, _seed(args, cfg), _tol_scale(args, cfg), _public(cfg), options)
    write_json(out / "suite_report.json", report)
    for entry in report["checks"]:
        status = "PASS" if entry["passed"] else "FAIL"
        print(f"{status} {entry['name']}: value={entry['value']:.3e} tolerance={entry['tolerance']:.3e}")
    return 0 if report["passed"] else 1


HANDLERS = {
    "connection": cmd_connection, "phase": cmd_phase, "curvature": cmd_curvature,
    "decompose": cmd_decompose, "suite": cmd_suite, "evolve": cmd_evolve, "ab-fig2": cmd_ab_fig2,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaugeweave", description="Berry connections and their weak-value split.")
    parser.add_argument("--version", action="version", version=f"gaugeweave {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--out", default=None, help="output directory (default: current)")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--tol-scale", type=float, default=None, dest="tol_scale")
        sp.add_argument("--suite", default=None, help="suite name for the suite command")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        user = load_config(args.config) if args.config else None
        cfg = resolve_config(args.command, user)
        out = Path(args.out or cfg.get("out", "."))
        out.mkdir(parents=True, exist_ok=True)
        return HANDLERS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"gaugeweave: ConfigError: {exc}", file=sys.stderr)
        return 2
    except GaugeweaveError as exc:
        print(f"gaugeweave: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
