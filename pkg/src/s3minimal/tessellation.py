"""The configuration of three Clifford tori and its prism tessellation.

Builds the six circles where the tori meet pairwise, the twelve circles
bounding the packed solid tori, the ``3N`` scaffolding circles, the marked
points, the spherical caps and the ``48N`` prisms, then checks the incidence
claims and runs the two-colouring machinery on the prisms.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidN, NotAPrismEdge
from .s3core import (
    C1,
    C00,
    KEY_DECIMALS,
    Arc,
    GreatCircle,
    Isometry,
    circle_distance,
    diag_c2,
    dist_to_circle,
    from_c2,
    hopf_project,
    normalize,
    refl,
    rounded_key,
    s3_distance,
)

PI = np.pi
R2 = np.sqrt(2.0)
C8, S8 = np.cos(PI / 8), np.sin(PI / 8)

# base point of each circle in the first collection; every one is a Hopf fiber
ACOL_BASE = {
    "C1": (1.0, 0.0),
    "C1p": (0.0, 1.0),
    "C2": (1 / R2, 1j / R2),
    "C2p": (1 / R2, -1j / R2),
    "C3": (1 / R2, 1 / R2),
    "C3p": (1 / R2, -1 / R2),
}
ACOL_HOPF = {
    "C1": (0, 0, 0.5),
    "C1p": (0, 0, -0.5),
    "C2": (0, -0.5, 0),
    "C2p": (0, 0.5, 0),
    "C3": (0.5, 0, 0),
    "C3p": (-0.5, 0, 0),
}
ACOL_PERP = {"C1": "C1p", "C1p": "C1", "C2": "C2p", "C2p": "C2", "C3": "C3p", "C3p": "C3"}

# the twelve packing circles, in listing order: name -> (base point, Hopf image / (sqrt2/4))
RCOL_DATA = {
    "G12": ((C8, 1j * S8), (0, -1, 1)),
    "G13": ((C8, S8), (1, 0, 1)),
    "G12p": ((C8, -1j * S8), (0, 1, 1)),
    "G13p": ((C8, -S8), (-1, 0, 1)),
    "G1p2": ((S8, 1j * C8), (0, -1, -1)),
    "G1p3": ((S8, C8), (1, 0, -1)),
    "G1p2p": ((S8, -1j * C8), (0, 1, -1)),
    "G1p3p": ((S8, -C8), (-1, 0, -1)),
    "G23": ((1 / R2, np.exp(1j * PI / 4) / R2), (1, -1, 0)),
    "G23p": ((1 / R2, np.exp(3j * PI / 4) / R2), (-1, -1, 0)),
    "G2p3": ((1 / R2, np.exp(-1j * PI / 4) / R2), (1, 1, 0)),
    "G2p3p": ((1 / R2, np.exp(5j * PI / 4) / R2), (-1, 1, 0)),
}
RCOL_NAMES = list(RCOL_DATA)

# isometry carrying the prisms around C1 to those around each other circle;
# it matches the extension rule of the explicit colouring
_TRANSPORT = {
    "C1": (),
    "C2": ("G12",),
    "C2p": ("G12p",),
    "C3": ("G13",),
    "C3p": ("G13p",),
    "C1p": ("G1p3", "G13"),
}

# hexagon edges of the standard prism in boundary order, as (kind, fixed params);
# vertices V1..V6 are (r, theta, z) = (0,*,Z/2), (S,T/2,Z/2), (S,T/2,-Z/2),
# (0,*,-Z/2), (S,-T/2,-Z/2), (S,-T/2,Z/2)
HEXAGON_EDGES = ("R+T+", "PR+", "R+T-", "R-T-", "PR-", "R-T+")


def prism_point(r, theta, z):
    """``e^{iz}(cos r, e^{i theta} sin r)`` in real coordinates."""
    r, theta, z = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (r, theta, z)))
    return np.stack(
        [np.cos(z) * np.cos(r), np.sin(z) * np.cos(r), np.cos(z + theta) * np.sin(r), np.sin(z + theta) * np.sin(r)],
        axis=-1,
    )


def prism_coords(x):
    """Inverse of :func:`prism_point`: ``(r, theta, z)`` with angles wrapped to (-pi, pi]."""
    x = np.asarray(x, dtype=float)
    a1 = np.hypot(x[..., 0], x[..., 1])
    a2 = np.hypot(x[..., 2], x[..., 3])
    r = np.arctan2(a2, a1)
    z = np.arctan2(x[..., 1], x[..., 0])
    theta = np.angle(np.exp(1j * (np.arctan2(x[..., 3], x[..., 2]) - z)))
    return r, theta, z


def hexagon_vertices(S, Theta, Z):
    rs = np.array([0, S, S, 0, S, S], dtype=float)
    ts = np.array([0, Theta / 2, Theta / 2, 0, -Theta / 2, -Theta / 2])
    zs = np.array([Z / 2, Z / 2, -Z / 2, -Z / 2, -Z / 2, Z / 2])
    return prism_point(rs, ts, zs)


def hexagon_arcs(S, Theta, Z):
    v = hexagon_vertices(S, Theta, Z)
    return [Arc(v[i], v[(i + 1) % 6]) for i in range(6)]


def excluded_edges(S, Theta, Z, n=16):
    """Sample points of the three prism edges not on the hexagon."""
    s = np.linspace(-0.5, 0.5, n)
    axis_edge = prism_point(0.0 * s, 0.0 * s, Z * s)
    top = prism_point(S + 0 * s, Theta * s, Z / 2 + 0 * s)
    bottom = prism_point(S + 0 * s, Theta * s, -Z / 2 + 0 * s)
    return {"R-R+": axis_edge, "PT+": top, "PT-": bottom}


# ---------------------------------------------------------------------------
# geometric objects acted on by isometries


class CliffordTorus:
    """The torus at distance pi/4 from a great circle (and from its polar)."""

    def __init__(self, core, name=None):
        self.core = core
        self.name = name

    def transformed(self, t):
        return CliffordTorus(self.core.transformed(t), self.name)

    def key(self, decimals=KEY_DECIMALS):
        p = self.core.projector
        k1, k2 = rounded_key(p, decimals), rounded_key(np.eye(4) - p, decimals)
        return min(k1, k2)

    def contains(self, x, tol=1e-9):
        return np.abs(dist_to_circle(self.core, x) - PI / 4) < tol


class SolidTorus:
    """``{d_C <= pi/8}`` around a circle ``C`` of the first collection."""

    def __init__(self, core, radius=PI / 8):
        self.core = core
        self.radius = radius

    def transformed(self, t):
        return SolidTorus(self.core.transformed(t), self.radius)

    def key(self, decimals=KEY_DECIMALS):
        return self.core.key(decimals)


@dataclass
class Cap:
    """Spherical cap of radius pi/8 centred on a marked point, orthogonal to its circle."""

    center: np.ndarray
    circle: str

    def transformed(self, t):
        return Cap(t(self.center), self.circle)

    def key(self, decimals=KEY_DECIMALS):
        return rounded_key(self.center, decimals)


@dataclass
class Prism:
    """A placed copy of the standard prism ``Omega_{S, Theta, Z}``."""

    index: tuple
    S: float
    Theta: float
    Z: float
    placement: Isometry

    @property
    def center(self):
        return self.placement(prism_point(self.S / 2, 0.0, 0.0))

    @property
    def axis(self):
        return C00.transformed(self.placement)

    def hexagon(self):
        return [a.transformed(self.placement) for a in hexagon_arcs(self.S, self.Theta, self.Z)]

    def transformed(self, t):
        return Prism(self.index, self.S, self.Theta, self.Z, t @ self.placement)

    def key(self, decimals=KEY_DECIMALS):
        return rounded_key(self.center, decimals)

    def contains(self, x, tol=1e-12):
        """Membership of points in the closed prism, with slack ``tol``."""
        y = np.asarray(x, dtype=float) @ self.placement.m
        return standard_prism_contains(y, self.S, self.Theta, self.Z, tol)


def standard_prism_contains(y, S, Theta, Z, tol=1e-12):
    r, theta, z = prism_coords(y)
    inside = (r <= S + tol) & (np.abs(z) <= Z / 2 + tol)
    # theta is meaningless on the axis circle r = 0
    on_axis = r < 1e-13
    inside &= on_axis | (np.abs(theta) <= Theta / 2 + tol / np.maximum(np.sin(r), 1e-300))
    return inside


# ---------------------------------------------------------------------------
# configuration


@dataclass
class Configuration:
    N: int
    tori: dict
    acol: dict
    rcol: dict
    scaf: dict  # torus name -> list of circles
    ptcol: dict  # acol name -> (2N, 4) array
    caps: list
    prisms: list
    complete: bool = True
    _prism_index: dict = field(default_factory=dict, repr=False)
    _edge_index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._prism_index = {p.index: i for i, p in enumerate(self.prisms)}
        self._center_index = {p.key(8): i for i, p in enumerate(self.prisms)}
        self._edge_index = {}
        for i, p in enumerate(self.prisms):
            for e, arc in enumerate(p.hexagon()):
                self._edge_index.setdefault(arc.key(8), []).append((i, e))

    @property
    def scaf_circles(self):
        return [c for name in ("T1", "T2", "T3") for c in self.scaf.get(name, [])]

    @property
    def rcol_circles(self):
        return [self.rcol[n] for n in RCOL_NAMES]

    def prism(self, index):
        return self.prisms[self._prism_index[index]]

    def prism_position(self, index):
        return self._prism_index[index]

    def prism_at(self, point):
        """Position of the prism whose center is ``point``, or None."""
        return self._center_index.get(rounded_key(point, 8))

    def generators(self):
        """Reflections through scaffolding circles then packing circles, in listing order."""
        return [refl(c) for c in self.scaf_circles] + [refl(c) for c in self.rcol_circles]

    def scaf_generators(self):
        return [refl(c) for c in self.scaf_circles]

    def rcol_generators(self):
        return [refl(c) for c in self.rcol_circles]

    def edge_owners(self, arc):
        return list(self._edge_index.get(arc.key(8), []))


def _check_n(N, allow_partial):
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise InvalidN(f"N must be a positive integer, got {N!r}")
    if N % 4 == 0:
        return True
    if allow_partial and N % 2 == 0:
        return False
    raise InvalidN(f"N={N} must be divisible by 4")


def scaffolding(N, include_t1=True):
    out = {"T1": [], "T2": [], "T3": []}
    for j in range(1, N + 1):
        e = np.exp(1j * j * PI / N)
        if include_t1:
            out["T1"].append(
                GreatCircle(from_c2(e / R2, e / R2), from_c2(1j * e / R2, -1j * e / R2), name=f"L1_{j}")
            )
        out["T2"].append(GreatCircle(from_c2(e, 0), from_c2(0, e), name=f"L2_{j}"))
        out["T3"].append(GreatCircle(from_c2(e, 0), from_c2(0, 1j * e), name=f"L3_{j}"))
    if not include_t1:
        del out["T1"]
    return out


def build_configuration(N, allow_partial=False):
    """Build every collection for the scaffolding count ``N``.

    ``N`` must be divisible by 4.  With ``allow_partial`` an even ``N`` is
    accepted and the scaffolding is built on the second and third tori only.
    """
    complete = _check_n(N, allow_partial)
    acol = {n: GreatCircle.fiber(from_c2(*b), name=n) for n, b in ACOL_BASE.items()}
    rcol = {n: GreatCircle.fiber(from_c2(*d[0]), name=n) for n, d in RCOL_DATA.items()}
    tori = {
        "T1": CliffordTorus(acol["C1"], "T1"),
        "T2": CliffordTorus(acol["C2"], "T2"),
        "T3": CliffordTorus(acol["C3"], "T3"),
    }
    scaf = scaffolding(N, include_t1=complete)
    phases = np.exp(1j * PI * np.arange(1, 2 * N + 1) / N)
    ptcol = {n: from_c2(phases * b[0], phases * b[1]) for n, b in ACOL_BASE.items()}
    caps = [Cap(p, n) for n in ACOL_BASE for p in ptcol[n]]

    S, Theta, Z = PI / 8, PI / 2, PI / N
    transports = {
        name: _compose([refl(rcol[g]) for g in chain]) for name, chain in _TRANSPORT.items()
    }
    prisms = []
    for cname in ("C1", "C2", "C2p", "C3", "C3p", "C1p"):
        tr = transports[cname]
        for j in range(2 * N):
            for ell in range(4):
                z0 = (2 * j + 1) * PI / (2 * N)
                t0 = (2 * ell + 1) * PI / 4
                place = tr @ diag_c2(np.exp(1j * z0), np.exp(1j * (z0 + t0)))
                prisms.append(Prism((cname, j, ell), S, Theta, Z, place))
    return Configuration(N, tori, acol, rcol, scaf, ptcol, caps, prisms, complete)


def _compose(isos):
    out = Isometry.identity()
    for t in isos:
        out = out @ t
    return out


def center_formula(N, j, ell):
    """The explicit center of the (j, ell) prism around C1."""
    return from_c2(
        np.exp(1j * PI * (2 * j + 1) / (2 * N)) * np.cos(PI / 16),
        np.exp(1j * PI * (2 * j + 1) / (2 * N)) * np.exp(1j * PI * (2 * ell + 1) / 4) * np.sin(PI / 16),
    )


# ---------------------------------------------------------------------------
# incidence checks


def _orthogonal_at(c1, c2, p, tol=1e-9):
    """Both circles pass through ``p`` and cross there at a right angle."""
    if dist_to_circle(c1, p) > tol or dist_to_circle(c2, p) > tol:
        return False
    t1 = _tangent(c1, p)
    t2 = _tangent(c2, p)
    return abs(float(t1 @ t2)) < tol


def _tangent(c, p):
    s = np.arctan2(p @ c.v, p @ c.u)
    return -np.sin(s) * c.u + np.cos(s) * c.v


def _circle_intersections(c1, c2, tol=1e-9):
    """Intersection points of two distinct great circles (empty or an antipodal pair)."""
    m = np.stack([c1.u, c1.v, -c2.u, -c2.v], axis=1)
    _, sv, vt = np.linalg.svd(m)
    if sv[-1] > tol:
        return np.zeros((0, 4))
    coef = vt[-1]
    p = normalize(coef[0] * c1.u + coef[1] * c1.v)
    return np.stack([p, -p])


def check_configuration(cfg, samples=64):
    """Evaluate the incidence and counting claims; returns ``{name: (ok, detail)}``."""
    N = cfg.N
    res = {}
    ac = cfg.acol
    names = list(ac)

    res["acol_count"] = (len(ac) == 6, len(ac))
    dists = {(a, b): circle_distance(ac[a], ac[b], samples) for a in names for b in names if a != b}
    res["acol_disjoint"] = (min(dists.values()) > 1e-6, min(dists.values()))
    spread = 0.0
    for (a, b) in dists:
        d = dist_to_circle(ac[a], ac[b].sample(samples))
        spread = max(spread, float(np.ptp(d)))
    res["acol_constant_distance"] = (spread < 1e-9, spread)
    nn_ok = True
    for a in names:
        others = sorted((dists[(a, b)], b) for b in names if b != a)
        near = [b for d, b in others if abs(d - PI / 4) < 1e-9]
        if len(near) != 4 or ACOL_PERP[a] in near or abs(dists[(a, ACOL_PERP[a])] - PI / 2) > 1e-9:
            nn_ok = False
    res["acol_four_nearest_neighbors"] = (nn_ok, None)
    hopf_err = max(
        float(np.max(np.abs(hopf_project(ac[n].sample(samples)) - np.array(ACOL_HOPF[n])))) for n in names
    )
    res["acol_hopf_images"] = (hopf_err < 1e-10, hopf_err)

    # tori: each contains exactly the expected pair of polar pairs
    tor_ok = True
    for tname, tor in cfg.tori.items():
        on = [n for n in names if np.all(tor.contains(ac[n].sample(samples)))]
        if len(on) != 4:
            tor_ok = False
    res["tori_contain_four_acol"] = (tor_ok, None)

    rc = cfg.rcol
    res["rcol_count"] = (len(rc) == 12, len(rc))
    herr = max(
        float(np.max(np.abs(hopf_project(rc[n].sample(samples)) - np.sqrt(2) / 4 * np.array(RCOL_DATA[n][1]))))
        for n in RCOL_NAMES
    )
    res["rcol_hopf_images"] = (herr < 1e-10, herr)
    inc_ok = True
    for n in RCOL_NAMES:
        pts = rc[n].sample(samples)
        on_tori = [t for t, tor in cfg.tori.items() if np.all(tor.contains(pts))]
        on_bdry = [c for c in names if np.all(np.abs(dist_to_circle(ac[c], pts) - PI / 8) < 1e-9)]
        if len(on_tori) != 1 or len(on_bdry) != 2 or ACOL_PERP[on_bdry[0]] == on_bdry[1]:
            inc_ok = False
    res["rcol_incidence"] = (inc_ok, None)
    # solid tori meet in a single circle for neighbours, not at all for polar pairs
    meet_ok = True
    for a in names:
        for b in names:
            if a >= b:
                continue
            shared = [n for n in RCOL_NAMES if np.all(np.abs(dist_to_circle(ac[a], rc[n].sample(samples)) - PI / 8) < 1e-9)
                      and np.all(np.abs(dist_to_circle(ac[b], rc[n].sample(samples)) - PI / 8) < 1e-9)]
            expect = 0 if ACOL_PERP[a] == b else 1
            if len(shared) != expect:
                meet_ok = False
    res["solid_tori_intersections"] = (meet_ok, None)

    scaf = cfg.scaf_circles
    expect_scaf = 3 * N if cfg.complete else 2 * N
    res["scaf_count"] = (len(scaf) == expect_scaf and len({c.key() for c in scaf}) == expect_scaf, len(scaf))
    pt_ok = all(cfg.ptcol[n].shape == (2 * N, 4) for n in names)
    gaps = []
    for n in names:
        p = cfg.ptcol[n]
        d = s3_distance(p[:, None, :], p[None, :, :])
        np.fill_diagonal(d, np.inf)
        gaps.append(float(np.min(d)))
    res["ptcol_count"] = (pt_ok, [cfg.ptcol[n].shape[0] for n in names])
    res["ptcol_equally_spaced"] = (max(abs(g - PI / N) for g in gaps) < 1e-9, min(gaps))

    # scaffolding circles meet the acol circles of their torus orthogonally on marked points
    ptkeys = {n: {rounded_key(p, 8) for p in cfg.ptcol[n]} for n in names}
    sc_ok = True
    for tname, circles in cfg.scaf.items():
        tor = cfg.tori[tname]
        acol_on = [n for n in names if np.all(tor.contains(ac[n].sample(16)))]
        for L in circles:
            if not np.all(tor.contains(L.sample(16))):
                sc_ok = False
            for n in acol_on:
                pts = _circle_intersections(L, ac[n])
                if len(pts) != 2:
                    sc_ok = False
                    continue
                for p in pts:
                    if rounded_key(p, 8) not in ptkeys[n] or not _orthogonal_at(L, ac[n], p):
                        sc_ok = False
    res["scaf_orthogonal_on_ptcol"] = (sc_ok, None)

    # prisms
    res["prism_count"] = (len(cfg.prisms) == 48 * N and len(cfg._center_index) == 48 * N, len(cfg.prisms))
    cerr = max(
        float(np.max(np.abs(cfg.prism(("C1", j, l)).center - center_formula(N, j, l))))
        for j in range(2 * N)
        for l in range(4)
    )
    res["prism_centers_formula"] = (cerr < 1e-12, cerr)
    if cfg.complete:
        circ = cfg.rcol_circles + cfg.scaf_circles
        projs = np.stack([c.projector for c in circ])
        edge_ok, excl_ok, worst = True, True, 0.0
        for p in cfg.prisms:
            for arc in p.hexagon():
                pts = arc.points(4)
                dev = _min_circle_deviation(projs, pts)
                worst = max(worst, dev)
                if dev > 1e-9:
                    edge_ok = False
            for pts in excluded_edges(p.S, p.Theta, p.Z, 5).values():
                if _min_circle_deviation(projs, p.placement(pts)) < 1e-6:
                    excl_ok = False
        res["hexagon_edges_on_circles"] = (edge_ok, worst)
        res["excluded_edges_off_circles"] = (excl_ok, None)
        four = [len(v) for v in cfg._edge_index.values()]
        res["four_prisms_per_edge"] = (set(four) == {4}, sorted(set(four)))
    return res


def _min_circle_deviation(projs, pts):
    """Over circles, the min of the max distance of ``pts`` from the circle."""
    inside = np.einsum("cij,nj->cni", projs, pts)
    outside = pts[None, :, :] - inside
    d = np.arctan2(np.linalg.norm(outside, axis=-1), np.linalg.norm(inside, axis=-1)).max(axis=1)
    return float(d.min())


def check_action_on_collections(cfg, gens=None):
    """Every generator must permute each collection; returns ``{name: ok}``."""
    gens = cfg.generators() if gens is None else gens
    collections = {
        "acol": list(cfg.acol.values()),
        "tori": list(cfg.tori.values()),
        "solid_tori": [SolidTorus(c) for c in cfg.acol.values()],
        "scaf": cfg.scaf_circles,
        "rcol": cfg.rcol_circles,
        "ptcol": [_PointObj(p) for n in cfg.acol for p in cfg.ptcol[n]],
        "caps": cfg.caps,
        "prisms": cfg.prisms,
    }
    out = {}
    for cname, objs in collections.items():
        keys = {o.key(8) for o in objs}
        ok = len(keys) == len(objs)
        for g in gens:
            img = {o.transformed(g).key(8) for o in objs}
            if img != keys:
                ok = False
                break
        out[cname] = ok
    return out


class _PointObj:
    __slots__ = ("p",)

    def __init__(self, p):
        self.p = np.asarray(p)

    def transformed(self, t):
        return _PointObj(t(self.p))

    def key(self, decimals=KEY_DECIMALS):
        return rounded_key(self.p, decimals)


# ---------------------------------------------------------------------------
# shared edges and colourings


def prism_permutation(cfg, g):
    """Positions of ``g(prism_i)`` for each prism; -1 where the image is not a prism."""
    centers = np.stack([p.center for p in cfg.prisms])
    imgs = g(centers)
    return np.array([cfg.prism_at(c) if cfg.prism_at(c) is not None else -1 for c in imgs])


def shared_edge_prisms(cfg, edge):
    """The prisms sharing a hexagon edge.

    ``edge`` is either an :class:`Arc` or a pair ``(prism index, edge number)``.
    """
    if not isinstance(edge, Arc):
        pidx, e = edge
        edge = cfg.prism(pidx).hexagon()[e]
    owners = cfg.edge_owners(edge)
    if not owners:
        raise NotAPrismEdge(f"{edge!r} is not a hexagon edge of any prism")
    return [cfg.prisms[i].index for i, _ in owners]


def edge_reflection_pairs(cfg, edge):
    """Pair up the prisms on ``edge`` by the reflection through its circle."""
    owners = [cfg.prism_position(i) for i in shared_edge_prisms(cfg, edge)]
    if not isinstance(edge, Arc):
        edge = cfg.prism(edge[0]).hexagon()[edge[1]]
    g = refl(edge.circle)
    partner = {}
    for i in owners:
        j = cfg.prism_at(g(cfg.prisms[i].center))
        partner[i] = j
    return owners, partner


@dataclass
class Coloring:
    values: dict  # prism index tuple -> 0/1

    def level_set(self, v):
        return sorted(k for k, c in self.values.items() if c == v)

    def flipped(self):
        return Coloring({k: 1 - c for k, c in self.values.items()})


@dataclass
class Inconsistency:
    witness: list  # cycle of prism indices whose constraints contradict
    constraint: tuple  # (prism a, prism b, required parity)
    reason: str = "odd constraint cycle"


def _constraints(cfg):
    """Parity constraints ``(i, j, same?)`` from every shared edge."""
    cons = []
    problems = []
    for key, owners in cfg._edge_index.items():
        i0, e0 = owners[0]
        arc = cfg.prisms[i0].hexagon()[e0]
        g = refl(arc.circle)
        pos = [i for i, _ in owners]
        partner = {i: cfg.prism_at(g(cfg.prisms[i].center)) for i in pos}
        if len(pos) != 4 or any(partner[i] not in pos or partner[i] == i for i in pos):
            problems.append(pos)
            continue
        for a in pos:
            for b in pos:
                if a < b:
                    cons.append((a, b, 0 if partner[a] == b else 1))
    return cons, problems


def propagate_coloring(cfg, seed=("C1", 0, 0), seed_value=0):
    """Breadth-first propagation of the edge-consistency rule from one prism.

    Returns the unique consistent :class:`Coloring` extending the seed, or an
    :class:`Inconsistency` carrying a cycle of prisms whose constraints force
    a contradiction.
    """
    cons, problems = _constraints(cfg)
    if problems:
        return Inconsistency([cfg.prisms[i].index for i in problems[0]], (), "edge not exchanged in pairs")
    adj = {}
    for a, b, par in cons:
        adj.setdefault(a, []).append((b, par))
        adj.setdefault(b, []).append((a, par))
    s = cfg.prism_position(seed)
    color = {s: seed_value}
    parent = {s: None}
    queue = deque([s])
    while queue:
        a = queue.popleft()
        for b, par in adj.get(a, []):
            want = color[a] ^ par
            if b not in color:
                color[b] = want
                parent[b] = a
                queue.append(b)
            elif color[b] != want:
                cycle = _witness(parent, a, b)
                return Inconsistency([cfg.prisms[i].index for i in cycle], (cfg.prisms[a].index, cfg.prisms[b].index, par))
    if len(color) != len(cfg.prisms):
        return Inconsistency([], (), f"constraint graph reaches only {len(color)} of {len(cfg.prisms)} prisms")
    return Coloring({cfg.prisms[i].index: c for i, c in color.items()})


def _witness(parent, a, b):
    def path(x):
        out = []
        while x is not None:
            out.append(x)
            x = parent[x]
        return out

    pa, pb = path(a), path(b)
    common = set(pa) & set(pb)
    pa_cut = []
    for x in pa:
        pa_cut.append(x)
        if x in common:
            break
    lca = pa_cut[-1]
    pb_cut = []
    for x in pb:
        if x == lca:
            break
        pb_cut.append(x)
    return pa_cut + pb_cut[::-1]


def is_consistent(cfg, coloring):
    cons, problems = _constraints(cfg)
    if problems:
        return False
    vals = [coloring.values[p.index] for p in cfg.prisms]
    return all((vals[a] ^ vals[b]) == par for a, b, par in cons)


def compose_coloring(cfg, coloring, g):
    """``c o g`` as a coloring."""
    perm = prism_permutation(cfg, g)
    vals = {}
    for i, p in enumerate(cfg.prisms):
        vals[p.index] = coloring.values[cfg.prisms[perm[i]].index]
    return Coloring(vals)


def prism_orbits(cfg, gens):
    """Orbits of the prisms under the group generated by ``gens``."""
    n = len(cfg.prisms)
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for g in gens:
        perm = prism_permutation(cfg, g)
        if np.any(perm < 0):
            raise ValueError("generator does not preserve the prisms")
        for i, j in enumerate(perm):
            ri, rj = find(i), find(int(j))
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(cfg.prisms[i].index)
    return sorted(groups.values(), key=lambda g: (-len(g), g[0]))


def verify_orbit_coloring_duality(cfg, group, coloring):
    """Check that the two level sets of ``coloring`` are exactly the prism orbits."""
    gens = group.generators or group.elements
    orbits = prism_orbits(cfg, gens)
    zero, one = set(coloring.level_set(0)), set(coloring.level_set(1))
    orbit_sets = [set(o) for o in orbits]
    match = len(orbit_sets) == 2 and {frozenset(zero), frozenset(one)} == {frozenset(o) for o in orbit_sets}
    invariant = all(
        compose_coloring(cfg, coloring, g).values == coloring.values for g in cfg.generators()
    )
    consistent_after = all(is_consistent(cfg, compose_coloring(cfg, coloring, g)) for g in cfg.generators())
    return {
        "orbit_sizes": [len(o) for o in orbits],
        "level_set_sizes": [len(zero), len(one)],
        "level_sets_are_orbits": bool(match),
        "generators_preserve_coloring": bool(invariant),
        "composed_colorings_consistent": bool(consistent_after),
    }


def explicit_coloring(cfg):
    """``(j + l) mod 2`` on every prism, using the transport labelling."""
    return Coloring({p.index: (p.index[1] + p.index[2]) % 2 for p in cfg.prisms})


def configuration_summary(cfg):
    """JSON-ready summary: counts, circle coordinates, incidence tables."""
    def circ(c):
        return {"u": c.u.round(12).tolist(), "v": c.v.round(12).tolist()}

    circles = cfg.rcol_circles + cfg.scaf_circles
    incidence = {}
    for p in cfg.prisms[: 8 * cfg.N]:
        names = []
        for arc in p.hexagon():
            mid = arc.midpoint()
            hit = [c.name for c in circles if dist_to_circle(c, mid) < 1e-9]
            names.append(hit[0] if hit else None)
        incidence["/".join(map(str, p.index))] = names
    return {
        "N": cfg.N,
        "counts": {
            "acol": len(cfg.acol),
            "rcol": len(cfg.rcol),
            "scaf": len(cfg.scaf_circles),
            "ptcol_per_circle": {n: int(v.shape[0]) for n, v in cfg.ptcol.items()},
            "caps": len(cfg.caps),
            "prisms": len(cfg.prisms),
        },
        "acol": {n: circ(c) for n, c in cfg.acol.items()},
        "rcol": {n: circ(c) for n, c in cfg.rcol.items()},
        "rcol_hopf": {n: hopf_project(c.u).round(12).tolist() for n, c in cfg.rcol.items()},
        "scaf": {t: [circ(c) for c in cs] for t, cs in cfg.scaf.items()},
        "prism_centers_C1": {
            f"{j},{l}": cfg.prism(("C1", j, l)).center.round(12).tolist() for j in range(2 * cfg.N) for l in range(4)
        },
        "hexagon_edge_circles_C1": incidence,
    }
