import numpy as np
import pytest

from s3minimal.errors import InvalidN, NotAPrismEdge
from s3minimal.s3core import Arc, from_c2, hopf_project, refl, s3_distance
from s3minimal.tessellation import (
    RCOL_DATA,
    Coloring,
    Inconsistency,
    build_configuration,
    check_action_on_collections,
    check_configuration,
    compose_coloring,
    configuration_summary,
    edge_reflection_pairs,
    explicit_coloring,
    is_consistent,
    prism_coords,
    prism_point,
    propagate_coloring,
    shared_edge_prisms,
    verify_orbit_coloring_duality,
)

PI = np.pi


def test_counts_n4(cfg4):
    assert len(cfg4.acol) == 6
    assert len(cfg4.rcol) == 12
    assert len(cfg4.scaf_circles) == 12
    assert all(p.shape == (8, 4) for p in cfg4.ptcol.values())
    assert len(cfg4.prisms) == 192


def test_ptcol_equally_spaced(cfg4):
    for pts in cfg4.ptcol.values():
        d = s3_distance(pts[:, None], pts[None])
        np.fill_diagonal(d, np.inf)
        assert np.isclose(d.min(), PI / 4)


def test_center_omega00_n4(cfg4):
    w = np.exp(1j * PI / 8) * np.array([np.cos(PI / 16), np.exp(1j * PI / 4) * np.sin(PI / 16)])
    assert np.allclose(cfg4.prism(("C1", 0, 0)).center, from_c2(*w), atol=1e-15)


def test_center_is_axis_midpoint(cfg4):
    p = cfg4.prism(("C1", 3, 2))
    assert p.axis.contains(p.center)
    # the axis meets the prism in r in [0, S]; its midpoint is at r = S/2
    y = p.center @ p.placement.m
    r, _, z = prism_coords(y)
    assert np.isclose(r, p.S / 2) and abs(z) < 1e-14


def test_prism_coordinates_round_trip(rng):
    r = rng.uniform(0.01, PI / 2 - 0.01, 50)
    th = rng.uniform(-PI + 0.01, PI - 0.01, 50)
    z = rng.uniform(-PI, PI, 50)
    r2, th2, z2 = prism_coords(prism_point(r, th, z))
    assert np.allclose(r2, r)
    assert np.allclose(np.angle(np.exp(1j * (th2 - th))), 0, atol=1e-12)
    assert np.allclose(np.angle(np.exp(1j * (z2 - z))), 0, atol=1e-12)


def test_invalid_n():
    with pytest.raises(InvalidN):
        build_configuration(6)
    with pytest.raises(InvalidN):
        build_configuration(0)
    partial = build_configuration(6, allow_partial=True)
    assert not partial.complete
    assert len(partial.scaf_circles) == 12


@pytest.mark.parametrize("N", [4, 12])
def test_configuration_checks(N, cfg4, cfg12):
    cfg = cfg4 if N == 4 else cfg12
    res = check_configuration(cfg)
    failed = [k for k, (ok, _) in res.items() if not ok]
    assert failed == []


def test_rcol_hopf_images(cfg4):
    for name, (_, img) in RCOL_DATA.items():
        y = hopf_project(cfg4.rcol[name].sample(64))
        assert np.max(np.abs(y - np.sqrt(2) / 4 * np.array(img))) < 1e-10


def test_group_preserves_collections(cfg4):
    res = check_action_on_collections(cfg4)
    assert all(res.values()), res


def test_shared_edge_has_four_prisms(cfg4):
    for e in range(6):
        owners = shared_edge_prisms(cfg4, (("C1", 0, 0), e))
        assert len(owners) == 4
        assert ("C1", 0, 0) in owners


def test_edge_reflection_exchanges_pairs(cfg4):
    for e in range(6):
        owners, partner = edge_reflection_pairs(cfg4, (("C1", 0, 0), e))
        for i in owners:
            assert partner[i] in owners and partner[i] != i
            assert partner[partner[i]] == i


def test_shared_edges_equivariant(cfg4):
    g = refl(cfg4.prism(("C1", 0, 0)).axis)
    arc = cfg4.prism(("C1", 0, 0)).hexagon()[1]
    before = {cfg4.prism_position(i) for i in shared_edge_prisms(cfg4, arc)}
    after = {cfg4.prism_position(i) for i in shared_edge_prisms(cfg4, arc.transformed(g))}
    image = {cfg4.prism_at(g(cfg4.prisms[i].center)) for i in before}
    assert image == after


def test_not_a_prism_edge(cfg4):
    with pytest.raises(NotAPrismEdge):
        shared_edge_prisms(cfg4, Arc(from_c2(1, 0), from_c2(0, 1)))


def test_coloring_n4_matches_explicit(cfg4):
    c = propagate_coloring(cfg4)
    assert isinstance(c, Coloring)
    assert is_consistent(cfg4, c)
    exp = explicit_coloring(cfg4)
    c1 = {k: v for k, v in c.values.items() if k[0] == "C1"}
    assert c1 == {k: v for k, v in exp.values.items() if k[0] == "C1"}


def test_exactly_two_colorings(cfg4):
    c0 = propagate_coloring(cfg4, seed_value=0)
    c1 = propagate_coloring(cfg4, seed_value=1)
    assert c1.values == c0.flipped().values
    assert c0.level_set(0) == c1.level_set(1)


def test_coloring_n12_consistent(cfg12):
    c = propagate_coloring(cfg12)
    assert isinstance(c, Coloring)
    assert is_consistent(cfg12, c)


def _parity_oracle(cfg):
    """Independent parity union-find over all shared-edge constraints."""
    n = len(cfg.prisms)
    parent = list(range(n))
    par = [0] * n

    def find(x):
        if parent[x] == x:
            return x, 0
        r, p = find(parent[x])
        parent[x] = r
        par[x] ^= p
        return r, par[x]

    for owners in cfg._edge_index.values():
        arc = cfg.prisms[owners[0][0]].hexagon()[owners[0][1]]
        g = refl(arc.circle)
        pos = [i for i, _ in owners]
        for a in pos:
            b = cfg.prism_at(g(cfg.prisms[a].center))
            for c in pos:
                if c == a:
                    continue
                want = 0 if c == b else 1
                ra, pa = find(a)
                rc, pc = find(c)
                if ra == rc:
                    if pa ^ pc != want:
                        return False
                else:
                    parent[rc] = ra
                    par[rc] = pa ^ pc ^ want
    return True


def test_coloring_n8_outcome_matches_oracle():
    cfg = build_configuration(8)
    res = propagate_coloring(cfg)
    assert _parity_oracle(cfg) is False
    assert isinstance(res, Inconsistency)
    # the witness is a closed walk of prisms through the constraint graph
    assert len(res.witness) >= 3
    assert res.constraint[0] in res.witness and res.constraint[1] in res.witness


def test_oracle_agrees_on_consistent_case(cfg4):
    assert _parity_oracle(cfg4) is True


def test_orbit_coloring_duality(cfg4, G4):
    c = propagate_coloring(cfg4)
    rep = verify_orbit_coloring_duality(cfg4, G4, c)
    assert rep["orbit_sizes"] == [96, 96]
    assert rep["level_sets_are_orbits"]
    assert rep["composed_colorings_consistent"]


def test_composed_coloring_consistent(cfg4):
    c = propagate_coloring(cfg4)
    for g in cfg4.generators()[:6]:
        assert is_consistent(cfg4, compose_coloring(cfg4, c, g))


def test_summary_is_json_ready(cfg4):
    import json

    s = configuration_summary(cfg4)
    json.dumps(s)
    assert s["counts"]["rcol"] == 12
