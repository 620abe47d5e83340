"""Acceptance criteria 1-10.

Each ``criterion_k`` returns ``(ok, detail)``; the pytest wrappers print one
PASS/FAIL line per criterion and assert ``ok``.  Run directly with
``python tests/test_acceptance.py`` for the summary without pytest.
"""
import time

import numpy as np
import pytest

from s3minimal.assembler import (
    assemble,
    check_circle_containment,
    check_invariance,
    choe_soret_genus,
    choe_soret_group,
    choe_soret_prism,
    three_tori_surface,
    topology,
)
from s3minimal.isogroup import (
    default_cap,
    generate,
    hopf_kernel_image,
    is_cyclic,
    membership_checks,
    preserves_cube,
    stabilizer,
)
from s3minimal.plateau import (
    StandardPrism,
    check_graphicality,
    hexagon_gauss_bonnet,
    killing_analysis,
    solve_plateau,
    symmetry_defect,
)
from s3minimal.s3core import diag_c2, hopf_project, refl
from s3minimal.tessellation import (
    RCOL_DATA,
    Coloring,
    SolidTorus,
    build_configuration,
    is_consistent,
    propagate_coloring,
    verify_orbit_coloring_duality,
)

PI = np.pi
WELD_TOL = 1e-6
_cache = {}


def _cached(key, fn):
    if key not in _cache:
        _cache[key] = fn()
    return _cache[key]


def _cfg(N):
    return _cached(("cfg", N), lambda: build_configuration(N))


def _group(N):
    return _cached(("G", N), lambda: generate(_cfg(N).generators(), cap=default_cap(N)))


def _disc(S, Theta, Z, level):
    def solve():
        t0 = time.perf_counter()
        d = solve_plateau(StandardPrism(S, Theta, Z), level)
        d.info["seconds"] = time.perf_counter() - t0
        return d

    return _cached(("disc", S, Theta, Z, level), solve)


# ---------------------------------------------------------------------------


def criterion_1():
    detail = {}
    ok = True
    for N in (4, 12):
        t0 = time.perf_counter()
        cfg = build_configuration(N)
        secs = time.perf_counter() - t0
        _cache[("cfg", N)] = cfg
        counts = (
            len(cfg.acol),
            len(cfg.rcol),
            len(cfg.scaf_circles),
            sorted({p.shape[0] for p in cfg.ptcol.values()}),
            len(cfg.prisms),
        )
        good = counts == (6, 12, 3 * N, [2 * N], 48 * N) and secs < 1.0
        ok &= good
        detail[N] = f"counts={counts} {secs:.2f}s"
    return ok, detail


def criterion_2():
    cfg = _cfg(4)
    err = max(
        float(np.max(np.abs(hopf_project(cfg.rcol[n].sample(256)) - np.sqrt(2) / 4 * np.array(img))))
        for n, (_, img) in RCOL_DATA.items()
    )
    return err < 1e-10, {"circles": len(RCOL_DATA), "max_error": err}


def criterion_3():
    detail = {}
    ok = True
    for N in (4, 12):
        t0 = time.perf_counter()
        cfg = _cfg(N)
        G = _group(N)
        scaf = generate(cfg.scaf_generators())
        rc = generate(cfg.rcol_generators())
        stab = stabilizer(G, SolidTorus(cfg.acol["C1"]))
        images, kernel = hopf_kernel_image(G)
        secs = time.perf_counter() - t0
        vals = (G.order, scaf.order, rc.order, stab.order, kernel.order, len(images))
        good = (
            vals == (48 * N, 8 * N, 48, 8 * N, N, 48)
            and is_cyclic(kernel)
            and all(preserves_cube(r) for r in images)
            and secs < 30
        )
        ok &= good
        detail[N] = f"|G|,scaf,rcol,stab,ker,img={vals} {secs:.1f}s"
    return ok, detail


def criterion_4():
    cfg, G = _cfg(12), _group(12)
    rep = membership_checks(G, cfg)
    R = {n: refl(c) for n, c in cfg.rcol.items()}
    last_three = {
        ("G12", "G1p2", "G1p3", "G13"): diag_c2(-1j, 1j),
        ("G12p", "G1p2p", "G1p3", "G13"): diag_c2(1j, -1j),
        ("G13p", "G1p3p", "G1p3", "G13"): diag_c2(-1, -1),
    }
    errs = []
    for chain, expect in last_three.items():
        prod = R[chain[0]] @ R[chain[1]] @ R[chain[2]] @ R[chain[3]]
        errs.append(float(np.max(np.abs(prod.m - expect.m))))
    ok = (
        rep["turn_and_shift_in_group"]
        and rep["isoclinic_along_scaf_in_group"]
        and rep["isoclinic_equals_refl_G12_refl_C1"]
        and max(errs) < 1e-10
    )
    return bool(ok), {
        "turn_and_shift": rep["turn_and_shift_in_group"],
        "isoclinic": rep["isoclinic_along_scaf_in_group"],
        "composite_errors": errs,
    }


def criterion_5():
    detail = {}
    ok = True
    for N in (4, 12):
        cfg, G = _cfg(N), _group(N)
        c0 = propagate_coloring(cfg, seed_value=0)
        c1 = propagate_coloring(cfg, seed_value=1)
        # any seed prism and value lands on one of the same two colorings
        other = propagate_coloring(cfg, seed=cfg.prisms[-1].index, seed_value=0)
        colorings = {tuple(sorted(c.values.items())) for c in (c0, c1, other) if isinstance(c, Coloring)}
        dual = verify_orbit_coloring_duality(cfg, G, c0) if isinstance(c0, Coloring) else {}
        good = (
            isinstance(c0, Coloring)
            and is_consistent(cfg, c0)
            and len(colorings) == 2
            and dual.get("level_sets_are_orbits", False)
            and dual.get("orbit_sizes") == [24 * N, 24 * N]
        )
        ok &= bool(good)
        detail[N] = f"colorings={len(colorings)} orbits={dual.get('orbit_sizes')}"
    return ok, detail


def criterion_6():
    detail = {}
    ok = True
    for S in (PI / 8, PI / 4):
        rep = killing_analysis(StandardPrism(S, PI / 2, PI / 4), samples=10_000, rng=np.random.default_rng(0))
        good = rep["k_dot_nu_max_error"] < 1e-12 and rep["ok"]
        ok &= bool(good)
        detail[f"S={S:.4f}"] = (
            f"samples={rep['samples']} kv_err={rep['k_dot_nu_max_error']:.1e} "
            f"classified={rep['classification_agree']}/{rep['classification_checked']}"
        )
    return ok, detail


def criterion_7():
    levels = (3, 4, 5)
    target = -PI
    errs, detail = [], {}
    ok = True
    for lv in levels:
        d = _disc(PI / 8, PI / 2, PI / 4, lv)
        tc = d.total_curvature()
        err = abs(tc - target) / PI
        errs.append(err)
        sym = symmetry_defect(d)
        gr = check_graphicality(d, 500, np.random.default_rng(0))
        good = d.info["residual"] < 1e-8 and sym < 1e-5 and gr["all_single"]
        ok &= bool(good)
        detail[lv] = (
            f"tc/pi={tc / PI:.5f} err={err:.2%} res={d.info['residual']:.1e} "
            f"sym={sym:.1e} orbits_single={gr['samples'] if gr['all_single'] else gr['max_count']} "
            f"{d.info['seconds']:.1f}s"
        )
    ok &= errs[-1] < 0.02
    ok &= all(b < a for a, b in zip(errs, errs[1:]))
    ok &= _disc(PI / 8, PI / 2, PI / 4, 5).info["seconds"] < 300
    return bool(ok), detail


def criterion_8():
    cfg, G = _cfg(4), _group(4)
    disc = _disc(PI / 8, PI / 2, PI / 4, 4)
    t0 = time.perf_counter()
    surf = three_tori_surface(disc, cfg, G, WELD_TOL)
    top = topology(surf)
    inv = check_invariance(surf, cfg.generators(), WELD_TOL)
    cont = check_circle_containment(surf, cfg.rcol_circles + cfg.scaf_circles, WELD_TOL)
    secs = time.perf_counter() - t0
    n_in = sum(v["contained"] for v in cont.values())
    tc_err = abs(top.total_curvature + 96 * PI) / (96 * PI)
    ok = (
        surf.copies == 96
        and surf.closed
        and top.orientable
        and top.chi == -48
        and top.genus == 25
        and tc_err < 0.02
        and inv["invariant"]
        and n_in == 24
        and secs < 120
    )
    return bool(ok), {
        "copies": surf.copies,
        "chi": top.chi,
        "genus": top.genus,
        "tc_rel_err": tc_err,
        "invariance": inv["max_deviation"],
        "circles": f"{n_in}/24",
        "seconds": round(secs, 1),
    }


def criterion_9():
    t0 = time.perf_counter()
    cfg, G = _cfg(12), _group(12)
    disc = _disc(PI / 8, PI / 2, PI / 12, 4)
    surf = three_tori_surface(disc, cfg, G, WELD_TOL)
    top = topology(surf)
    secs = time.perf_counter() - t0
    ok = top.genus == 73 and top.chi == -144 and surf.copies == 288 and secs < 900
    return bool(ok), {"genus": top.genus, "chi": top.chi, "copies": surf.copies, "seconds": round(secs, 1)}


def criterion_10():
    prism = choe_soret_prism(2, 1)
    disc = _disc(prism.S, prism.Theta, prism.Z, 4)
    gr = check_graphicality(disc, 500, np.random.default_rng(0))
    G = choe_soret_group(prism)
    surf = assemble(disc, G, weld_tol=WELD_TOL, require_closed=True)
    top = topology(surf)
    expect = choe_soret_genus(2, 1)
    tc_target = surf.copies * hexagon_gauss_bonnet(prism)
    ok = gr["all_single"] and top.genus == expect == 9 and disc.info["residual"] < 1e-8
    return bool(ok), {
        "orbits_single": gr["all_single"],
        "group": G.order,
        "copies": surf.copies,
        "genus": top.genus,
        "tc/target": top.total_curvature / tc_target,
    }


CRITERIA = {
    1: ("configuration counts", criterion_1),
    2: ("Hopf images of packing circles", criterion_2),
    3: ("group orders", criterion_3),
    4: ("membership identities", criterion_4),
    5: ("colorings and orbits", criterion_5),
    6: ("Killing analysis", criterion_6),
    7: ("Plateau solver", criterion_7),
    8: ("assembly m=0", criterion_8),
    9: ("assembly m=1 (N=12)", criterion_9),
    10: ("Choe-Soret k=2 m=1", criterion_10),
}


def _line(k, ok, detail):
    return f"{'PASS' if ok else 'FAIL'} criterion {k}: {CRITERIA[k][0]} | {detail}"


@pytest.mark.parametrize(
    "k",
    [pytest.param(k, marks=pytest.mark.slow) if k in (7, 8, 9, 10) else k for k in CRITERIA],
)
def test_criterion(k, capsys):
    ok, detail = CRITERIA[k][1]()
    with capsys.disabled():
        print("\n" + _line(k, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    results = []
    for k, (_, fn) in CRITERIA.items():
        ok, detail = fn()
        results.append(ok)
        print(_line(k, ok, detail), flush=True)
    print(f"{sum(results)}/{len(results)} criteria passed")
