"""Command-line pipeline: ``s3minimal <command> [options]``.

Every command writes a JSON report (sorted keys, no timings) and exits
nonzero if any check fails.  Reports go to ``--out``, else to the directory
in ``S3MINIMAL_REPORT_DIR``, else to stdout only.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigParseError, S3MinimalError

SCHEMA_VERSION = 1
REPORT_ENV = "S3MINIMAL_REPORT_DIR"
COMMANDS = ("verify-config", "enumerate-group", "coloring", "killing", "solve-disc", "assemble", "full")

# option name -> (type, default)
OPTIONS = {
    "N": (int, None),
    "m": (int, None),
    "k": (int, None),
    "refine": (int, 4),
    "seed": (int, 0),
    "samples": (int, 10_000),
    "orbit_samples": (int, 500),
    "weld_tol": (float, 1e-6),
    "max_iter": (int, 100),
    "tol": (float, 1e-8),
    "export": (str, None),
    "export_format": (str, "obj"),
    "out": (str, None),
}


class StageError(Exception):
    def __init__(self, stage, err):
        super().__init__(f"{stage}: {type(err).__name__}: {err}")
        self.stage = stage
        self.err = err


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def load_config(path):
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, ValueError) as e:
        raise ConfigParseError(f"cannot read config {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigParseError("config must be a JSON object")
    out = {}
    for key, val in data.items():
        k = key.replace("-", "_")
        if k not in OPTIONS:
            raise ConfigParseError(f"unknown config key {key!r}")
        typ = OPTIONS[k][0]
        if val is not None:
            if typ is int and (isinstance(val, bool) or not isinstance(val, int)):
                raise ConfigParseError(f"config key {key!r} must be an integer")
            if typ is float and not isinstance(val, (int, float)):
                raise ConfigParseError(f"config key {key!r} must be a number")
            if typ is str and not isinstance(val, str):
                raise ConfigParseError(f"config key {key!r} must be a string")
        out[k] = typ(val) if val is not None else None
    return out


def resolve_options(args):
    """Defaults, then the config file, then explicit flags."""
    opts = {k: d for k, (_, d) in OPTIONS.items()}
    if args.config:
        opts.update(load_config(args.config))
    for k in OPTIONS:
        v = getattr(args, k, None)
        if v is not None:
            opts[k] = v
    return opts


def _stage(name, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except S3MinimalError as e:
        raise StageError(name, e) from e


def _n_from(opts, default=4):
    if opts["N"] is not None:
        return opts["N"]
    if opts["m"] is not None:
        if opts["m"] < 0:
            raise ConfigParseError("m must be >= 0")
        return 4 + 8 * opts["m"]
    return default


# ---------------------------------------------------------------------------
# stages


def stage_verify_config(N, corrupt=False):
    from .tessellation import build_configuration, check_action_on_collections, check_configuration

    cfg = build_configuration(N, allow_partial=True)
    if corrupt:
        from .s3core import GreatCircle

        c = cfg.rcol["G12"]
        cfg.rcol["G12"] = GreatCircle.fiber(c.u + 1e-3 * c.perp().u, name="G12")
    res = check_configuration(cfg)
    checks = {name: bool(ok) for name, (ok, _) in res.items()}
    details = {name: d for name, (_, d) in res.items() if d is not None}
    if cfg.complete:
        for name, ok in check_action_on_collections(cfg).items():
            checks[f"generators_preserve_{name}"] = bool(ok)
    counts = {
        "acol": len(cfg.acol),
        "rcol": len(cfg.rcol),
        "scaf": len(cfg.scaf_circles),
        "ptcol_per_circle": sorted({int(v.shape[0]) for v in cfg.ptcol.values()}),
        "prisms": len(cfg.prisms),
    }
    return {"checks": checks, "values": {"counts": counts, "details": details}}, cfg


def stage_enumerate_group(N, cfg=None):
    from .isogroup import (
        default_cap,
        generate,
        hopf_kernel_image,
        is_cyclic,
        fiber_rotation_element,
        membership_checks,
        preserves_cube,
        stabilizer,
    )
    from .tessellation import SolidTorus, build_configuration

    cfg = cfg or build_configuration(N)
    G = generate(cfg.generators(), cap=default_cap(N))
    scaf = generate(cfg.scaf_generators())
    rc = generate(cfg.rcol_generators())
    stab = stabilizer(G, SolidTorus(cfg.acol["C1"]))
    images, kernel = hopf_kernel_image(G)
    kinds = [g.kind for g in G.elements]
    members = membership_checks(G, cfg)
    values = {
        "order": G.order,
        "scaf_subgroup_order": scaf.order,
        "rcol_subgroup_order": rc.order,
        "stabilizer_T_C1_order": stab.order,
        "image_order": len(images),
        "kernel_order": kernel.order,
        "unitary": kinds.count("unitary"),
        "antiunitary": kinds.count("antiunitary"),
    }
    checks = {
        "order_48N": G.order == 48 * N,
        "scaf_subgroup_8N": scaf.order == 8 * N,
        "rcol_subgroup_48": rc.order == 48,
        "stabilizer_T_C1_8N": stab.order == 8 * N,
        "image_48": len(images) == 48,
        "image_preserves_cube": all(preserves_cube(r) for r in images),
        "kernel_cyclic_order_N": kernel.order == N and is_cyclic(kernel),
        "kernel_contains_fiber_rotation": fiber_rotation_element(2 * np.pi / N) in kernel,
        "closed": G.is_closed(),
    }
    checks.update({k: bool(v) for k, v in members.items()})
    return {"checks": checks, "values": values}, (cfg, G)


def stage_coloring(N, cfg=None, G=None):
    from .isogroup import generate
    from .tessellation import (
        Inconsistency,
        build_configuration,
        explicit_coloring,
        propagate_coloring,
        verify_orbit_coloring_duality,
    )

    cfg = cfg or build_configuration(N)
    col = propagate_coloring(cfg)
    if isinstance(col, Inconsistency):
        return {
            "checks": {"consistent": False},
            "values": {"witness": [list(w) for w in col.witness], "reason": col.reason},
        }, None
    flipped = propagate_coloring(cfg, seed_value=1)
    G = G or generate(cfg.generators())
    dual = verify_orbit_coloring_duality(cfg, G, col)
    expl = explicit_coloring(cfg)
    checks = {
        "consistent": True,
        "exactly_two_colorings": not isinstance(flipped, Inconsistency) and flipped.values == col.flipped().values,
        "level_sets_are_orbits": dual["level_sets_are_orbits"],
        "orbit_sizes_24N": dual["orbit_sizes"] == [24 * N, 24 * N],
        "generators_preserve_coloring": dual["generators_preserve_coloring"],
        "matches_explicit_coloring": expl.values in (col.values, col.flipped().values),
    }
    return {"checks": checks, "values": {"orbit_sizes": dual["orbit_sizes"], "level_set_sizes": dual["level_set_sizes"]}}, col


def _prism_for(opts):
    from .assembler import choe_soret_prism
    from .plateau import StandardPrism

    if opts["k"] is not None:
        m = opts["m"] if opts["m"] is not None else 1
        if opts["k"] < 2 or m < 1:
            raise ConfigParseError("the Choe-Soret family needs k >= 2 and m >= 1")
        return choe_soret_prism(opts["k"], m), "choe-soret"
    N = _n_from(opts)
    return StandardPrism(np.pi / 8, np.pi / 2, np.pi / N), "three-tori"


def stage_killing(prism, opts):
    from .plateau import killing_analysis

    rep = killing_analysis(prism, opts["samples"], np.random.default_rng(opts["seed"]))
    checks = {
        "k_dot_nu_closed_forms": rep["k_dot_nu_max_error"] < 1e-12,
        "normals_unit_tangent": rep["normal_unit_error"] < 1e-12 and rep["normal_tangent_error"] < 1e-12,
        "normals_normal_to_faces": rep["normal_face_error"] < 1e-8,
        "normals_outward": rep["normals_outward"],
        "sign_pattern": rep["sign_pattern_ok"],
        "classification_matches_simulation": rep["classification_agree"] == rep["classification_checked"],
        "special_points": all(v["agree"] for v in rep["special_points"].values()),
        "hexagon_orbits_single": rep["hexagon_orbit_counts"] == [1],
        "exit_face_orbits_single": rep["exit_face_orbit_counts"] == [1],
    }
    return {"checks": checks, "values": rep}


def stage_solve_disc(prism, opts):
    from .plateau import SolverParams, disc_report, solve_plateau

    params = SolverParams(max_iter=opts["max_iter"], tol=opts["tol"])
    disc = solve_plateau(prism, opts["refine"], params)
    rep = disc_report(disc, opts["orbit_samples"], np.random.default_rng(opts["seed"]))
    hist = disc.info["area_history"]
    checks = {
        "disc_topology": rep["euler_characteristic"] == 1 and rep["boundary_loops"] == 1,
        "residual_below_tol": rep["residual"] < opts["tol"],
        "area_monotone": all(b <= a + 4e-16 * abs(a) for a, b in zip(hist, hist[1:])),
        "total_curvature_within_2pct": rep["total_curvature_rel_error"] < 0.02,
        "contained_in_prism": rep["containment_violation"] < 1e-6,
        "symmetric_under_refl_C00": rep["symmetry_hausdorff"] < 1e-5,
        "embedded": rep["embedded"],
        "graphical": rep["graphicality"]["all_single"],
    }
    if opts["export"]:
        from .assembler import export

        export(disc, opts["export"], opts["export_format"], projection="raw")
    return {"checks": checks, "values": rep}, disc


def stage_assemble(disc, family, opts, cfg=None, G=None):
    from .assembler import (
        assemble,
        choe_soret_genus,
        choe_soret_group,
        surface_report,
        three_tori_surface,
    )
    from .plateau import hexagon_gauss_bonnet

    if family == "choe-soret":
        G = choe_soret_group(disc.prism)
        surf = assemble(disc, G, weld_tol=opts["weld_tol"], require_closed=True)
        rep = surface_report(surf, None, G.generators, opts["weld_tol"])
        m = opts["m"] if opts["m"] is not None else 1
        expect = choe_soret_genus(opts["k"], m)
        rep["group_order"] = G.order
    else:
        from .isogroup import generate
        from .tessellation import build_configuration

        N = _n_from(opts)
        cfg = cfg or build_configuration(N)
        G = G or generate(cfg.generators())
        surf = three_tori_surface(disc, cfg, G, opts["weld_tol"])
        rep = surface_report(surf, cfg, cfg.generators(), opts["weld_tol"])
        expect = 6 * N + 1
        rep["group_order"] = G.order
    rep["expected_genus"] = expect
    target = rep["copies"] * hexagon_gauss_bonnet(disc.prism)
    rep["expected_total_curvature"] = target
    checks = {
        "closed": surf.closed,
        "orientable": rep["orientable"],
        "genus": rep["genus"] == expect,
        "chi_even": rep["chi"] % 2 == 0,
        "total_curvature_within_2pct": abs(rep["total_curvature"] - target) <= 0.02 * abs(target),
        "invariant_under_generators": rep["invariant"],
    }
    if family != "choe-soret":
        checks["copies_24N"] = rep["copies"] == 24 * _n_from(opts)
        checks["contains_rcol_and_scaf"] = rep["circles_contained"] == rep["circles_checked"]
    if opts["export"]:
        from .assembler import export

        export(surf, opts["export"], opts["export_format"], projection="raw")
    return {"checks": checks, "values": rep}, surf


# ---------------------------------------------------------------------------
# driver


def run(command, opts, corrupt=False):
    """Execute ``command``; returns the report dict."""
    params = {k: v for k, v in sorted(opts.items()) if k != "out"}
    stages = {}
    if command == "verify-config":
        stages["verify-config"], _ = _stage("verify-config", stage_verify_config, _n_from(opts), corrupt)
    elif command == "enumerate-group":
        stages["enumerate-group"], _ = _stage("enumerate-group", stage_enumerate_group, _n_from(opts))
    elif command == "coloring":
        stages["coloring"], _ = _stage("coloring", stage_coloring, _n_from(opts))
    elif command == "killing":
        prism, _ = _prism_for(opts)
        stages["killing"] = _stage("killing", stage_killing, prism, opts)
    elif command == "solve-disc":
        prism, _ = _prism_for(opts)
        stages["solve-disc"], _ = _stage("solve-disc", stage_solve_disc, prism, opts)
    elif command == "assemble":
        prism, family = _prism_for(opts)
        stages["solve-disc"], disc = _stage("solve-disc", stage_solve_disc, prism, opts)
        stages["assemble"], _ = _stage("assemble", stage_assemble, disc, family, opts)
    elif command == "full":
        prism, family = _prism_for(opts)
        if family == "three-tori":
            N = _n_from(opts)
            if N % 8 != 4:
                raise ConfigParseError(f"full runs need N in 4 + 8Z, got {N}")
            stages["verify-config"], cfg = _stage("verify-config", stage_verify_config, N)
            stages["enumerate-group"], (cfg, G) = _stage("enumerate-group", stage_enumerate_group, N, cfg)
            stages["coloring"], _ = _stage("coloring", stage_coloring, N, cfg, G)
        else:
            cfg = G = None
        stages["killing"] = _stage("killing", stage_killing, prism, opts)
        stages["solve-disc"], disc = _stage("solve-disc", stage_solve_disc, prism, opts)
        stages["assemble"], _ = _stage("assemble", stage_assemble, disc, family, opts, cfg, G)
    else:
        raise ConfigParseError(f"unknown command {command!r}")
    failed = sorted(f"{s}:{c}" for s, rep in stages.items() for c, ok in rep["checks"].items() if not ok)
    return _jsonable(
        {
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "params": params,
            "stages": stages,
            "failed": failed,
            "passed": not failed,
        }
    )


def build_parser():
    p = argparse.ArgumentParser(prog="s3minimal", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--N", type=int, help="scaffolding count (multiple of 4)")
    p.add_argument("--m", type=int, help="family index: N = 4 + 8m, or the Choe-Soret m")
    p.add_argument("--k", type=int, help="Choe-Soret k (selects that family)")
    p.add_argument("--refine", type=int, help="disc refinement level (default 4)")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--samples", type=int, help="face samples for the Killing analysis")
    p.add_argument("--orbit-samples", dest="orbit_samples", type=int, help="K-orbits for the graphicality check")
    p.add_argument("--weld-tol", dest="weld_tol", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--tol", type=float, help="solver residual tolerance")
    p.add_argument("--export", help="write the disc or surface mesh here")
    p.add_argument("--export-format", dest="export_format", choices=("obj", "ply"))
    p.add_argument("--config", help="JSON file of options; flags override it")
    p.add_argument("--out", help="report directory")
    p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        opts = resolve_options(args)
        report = run(args.command, opts, corrupt=args.corrupt)
    except ConfigParseError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except StageError as e:
        print(f"stage {e.stage} failed: {type(e.err).__name__}: {e.err}", file=sys.stderr)
        return 3
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    out_dir = opts.get("out") or os.environ.get(REPORT_ENV)
    if out_dir:
        path = Path(out_dir)
        path.mkdir(parents=True, exist_ok=True)
        (path / f"{args.command}.json").write_text(text)
    sys.stdout.write(text)
    for f in report["failed"]:
        print(f"FAILED {f}", file=sys.stderr)
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
