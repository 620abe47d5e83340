"""The standard prism, the Killing field K, and a discrete Plateau solver on S^3.

Prism coordinates are ``e^{iz}(cos r, e^{i theta} sin r)`` with
``r in [0, S]``, ``theta in [-Theta/2, Theta/2]``, ``z in [-Z/2, Z/2]``.
Faces are tagged ``T+``, ``T-`` (great spheres z = +-Z/2), ``P`` (the torus
r = S) and ``R+``, ``R-`` (Clifford tori theta = +-Theta/2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve
from scipy.spatial import cKDTree

from .errors import BoundaryAssemblyFailure, HypothesisViolated, NonConvergence, UnknownFaceTag
from .s3core import C00, refl
from .tessellation import HEXAGON_EDGES, hexagon_arcs, hexagon_vertices, prism_coords, prism_point, standard_prism_contains

FACE_TAGS = ("T+", "T-", "P", "R+", "R-")
PI = np.pi


# ---------------------------------------------------------------------------
# prism and faces


@dataclass(frozen=True)
class StandardPrism:
    S: float
    Theta: float
    Z: float

    def __post_init__(self):
        if not (0 < self.S <= PI / 4 + 1e-15 and 0 < self.Theta <= PI / 2 + 1e-15 and 0 < self.Z <= PI / 4 + 1e-15):
            raise ValueError(f"prism parameters out of range: {self}")

    @property
    def satisfies_hypothesis(self):
        return self.Z <= self.Theta / 2 + 1e-15

    def require_hypothesis(self):
        if not self.satisfies_hypothesis:
            raise HypothesisViolated(f"Z={self.Z} exceeds Theta/2={self.Theta / 2}")

    def param_box(self, tag):
        S, T, Z = self.S, self.Theta, self.Z
        if tag in ("T+", "T-"):
            return (0.0, S), (-T / 2, T / 2)
        if tag == "P":
            return (-T / 2, T / 2), (-Z / 2, Z / 2)
        if tag in ("R+", "R-"):
            return (0.0, S), (-Z / 2, Z / 2)
        raise UnknownFaceTag(tag)

    def face_coords(self, tag, a, b):
        """Prism coordinates ``(r, theta, z)`` of a face point with face parameters ``(a, b)``."""
        a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        if tag in ("T+", "T-"):
            s = 1.0 if tag == "T+" else -1.0
            return a, b, np.full_like(a, s * self.Z / 2)
        if tag == "P":
            return np.full_like(a, self.S), a, b
        if tag in ("R+", "R-"):
            s = 1.0 if tag == "R+" else -1.0
            return a, np.full_like(a, s * self.Theta / 2), b
        raise UnknownFaceTag(tag)

    def face_point(self, tag, a, b):
        return prism_point(*self.face_coords(tag, a, b))

    def sample_face(self, tag, n, rng):
        (a0, a1), (b0, b1) = self.param_box(tag)
        return rng.uniform(a0, a1, n), rng.uniform(b0, b1, n)

    def contains(self, x, tol=1e-12):
        return standard_prism_contains(x, self.S, self.Theta, self.Z, tol)

    def center(self):
        return prism_point(self.S / 2, 0.0, 0.0)

    def hexagon_vertices(self):
        return hexagon_vertices(self.S, self.Theta, self.Z)

    def hexagon_arcs(self):
        return hexagon_arcs(self.S, self.Theta, self.Z)

    def parallelogram_vertex_angles(self, h=1e-6):
        """Interior angles of P at its corners (theta, z) = (+-Theta/2, +-Z/2)."""
        out = {}
        for st in (1, -1):
            for sz in (1, -1):
                th, z = st * self.Theta / 2, sz * self.Z / 2
                dz = (self.face_point("P", th, z - sz * h) - self.face_point("P", th, z)) / h
                dt = (self.face_point("P", th - st * h, z) - self.face_point("P", th, z)) / h
                c = dz @ dt / (np.linalg.norm(dz) * np.linalg.norm(dt))
                out[(st, sz)] = float(np.arccos(np.clip(c, -1, 1)))
        return out

    def triangle_apex_angle(self, h=1e-6):
        """Angle of T+ at its vertex on C1, between the sides on R+ and R-."""
        p = self.face_point("T+", 0.0, 0.0)
        d1 = self.face_point("T+", h, self.Theta / 2) - p
        d2 = self.face_point("T+", h, -self.Theta / 2) - p
        return float(np.arccos(np.clip(d1 @ d2 / (np.linalg.norm(d1) * np.linalg.norm(d2)), -1, 1)))


def face_normal(prism, tag, a, b):
    """Outward unit normal of ``prism`` on face ``tag`` at parameters ``(a, b)``."""
    S, T, Z = prism.S, prism.Theta, prism.Z
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    zero = np.zeros_like(a)
    if tag in ("T+", "T-"):
        s = 1.0 if tag == "T+" else -1.0
        return np.stack([zero - np.sin(Z / 2), zero + s * np.cos(Z / 2), zero, zero], axis=-1)
    if tag == "P":
        th, z = a, b
        return np.stack(
            [-np.sin(S) * np.cos(z), -np.sin(S) * np.sin(z), np.cos(S) * np.cos(z + th), np.cos(S) * np.sin(z + th)],
            axis=-1,
        )
    if tag in ("R+", "R-"):
        s = 1.0 if tag == "R+" else -1.0
        r, z = a, b
        ph = z + s * T / 2
        return np.stack(
            [s * np.sin(r) * np.sin(z), -s * np.sin(r) * np.cos(z), -s * np.cos(r) * np.sin(ph), s * np.cos(r) * np.cos(ph)],
            axis=-1,
        )
    raise UnknownFaceTag(tag)


def k_dot_nu_closed_form(prism, tag, a, b):
    """Closed forms of ``K . nu`` on each face, in the face parameters of :meth:`StandardPrism.face_coords`."""
    S, T, Z = prism.S, prism.Theta, prism.Z
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    if tag in ("T+", "T-"):
        # cos of the absolute angle of w2, which is theta + z on z = +-Z/2
        s = 1.0 if tag == "T+" else -1.0
        r, th = a, b
        return np.sin(Z / 2) * np.sin(r) * np.cos(th + s * Z / 2)
    if tag == "P":
        th, z = a, b
        return np.cos(z) * np.cos(z + th)
    if tag in ("R+", "R-"):
        s = 1.0 if tag == "R+" else -1.0
        r, z = a, b
        return -0.5 * (np.sin(T / 2) * np.cos(2 * r) + np.sin(T / 2 + s * 2 * z))
    raise UnknownFaceTag(tag)


# ---------------------------------------------------------------------------
# the Killing field


class KillingField:
    """``K(x) = (-x3, 0, x1, 0)``: rotation of the x1-x3 plane, fixing C^{pi/2}_{pi/2} pointwise."""

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[..., 0] = -x[..., 2]
        out[..., 2] = x[..., 0]
        return out

    @staticmethod
    def orbit(x, t):
        """``beta(t)``; points ``x`` (..., 4) and times ``t`` broadcast against each other."""
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        c, s = np.cos(t), np.sin(t)
        x1, x2, x3, x4 = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
        parts = np.broadcast_arrays(x1 * c - x3 * s, x2 + 0 * t, x1 * s + x3 * c, x4 + 0 * t)
        return np.stack(parts, axis=-1)


killing = KillingField()


class BoundaryClass(NamedTuple):
    for_K: str
    for_minus_K: str
    k_dot_nu: float
    tangential: bool
    faces: tuple


def faces_at(prism, r, theta, z, tol=1e-12):
    """Tags of all faces containing the point with prism coordinates ``(r, theta, z)``."""
    out = []
    if abs(z - prism.Z / 2) <= tol:
        out.append("T+")
    if abs(z + prism.Z / 2) <= tol:
        out.append("T-")
    if abs(r - prism.S) <= tol:
        out.append("P")
    if r <= tol or abs(theta - prism.Theta / 2) <= tol:
        out.append("R+")
    if r <= tol or abs(theta + prism.Theta / 2) <= tol:
        out.append("R-")
    return tuple(out)


def classify_boundary_point(prism, tag, a, b, tol=1e-12):
    """Entry/exit behaviour of the K and -K orbits at a boundary point.

    The sign of ``K . nu`` decides off the tangential loci.  Where it
    vanishes (r = 0 on T+-, and the R/T/P corners when S = pi/4,
    Z = Theta/2) the second-order analysis gives the same rule: points
    on an R-face and on T-/P/T+ are exits for both directions.
    """
    prism.require_hypothesis()
    if tag not in FACE_TAGS:
        raise UnknownFaceTag(tag)
    r, th, z = (float(v) for v in prism.face_coords(tag, a, b))
    faces = faces_at(prism, r, th, z, tol)
    kn = float(k_dot_nu_closed_form(prism, tag, a, b))
    on_r = "R+" in faces or "R-" in faces
    on_tp = any(f in faces for f in ("T+", "T-", "P"))
    for_k = "exit" if on_tp else "entry"
    for_minus_k = "exit" if on_r else "entry"
    return BoundaryClass(for_k, for_minus_k, kn, abs(kn) <= tol, faces)


def orbit_membership(prism, p, t, tol=1e-12):
    return prism.contains(KillingField.orbit(p, t), tol)


def orbit_prism_intersections(prism, p, samples=4096, tol=1e-12, refine=50, return_intervals=False):
    """Number of connected components of ``{t in [0, 2 pi) : beta(t) in prism}``.

    Dense sampling (including t = 0) locates the membership transitions;
    each is refined by bisection.  Isolated touching points are caught by
    evaluating ``t = 0`` exactly, since ``p`` itself is usually on the boundary.
    """
    t = np.linspace(0.0, 2 * PI, samples, endpoint=False)
    inside = orbit_membership(prism, p, t, tol)
    if inside.all():
        return (1, [(0.0, 2 * PI)]) if return_intervals else 1
    if not inside.any():
        return (0, []) if return_intervals else 0
    # rotate so index 0 is outside, then read off runs
    k0 = int(np.argmin(inside))
    order = np.roll(np.arange(samples), -k0)
    ins = inside[order]
    ts = t[order]
    starts = np.nonzero(~ins[:-1] & ins[1:])[0] + 1
    ends = np.nonzero(ins[:-1] & ~ins[1:])[0] + 1
    if ins[-1]:
        ends = np.append(ends, samples)
    dt = 2 * PI / samples

    def bisect(lo, hi, want_inside_at_hi):
        for _ in range(refine):
            mid = 0.5 * (lo + hi)
            if bool(orbit_membership(prism, p, mid, tol)) == want_inside_at_hi:
                hi = mid
            else:
                lo = mid
        return hi

    intervals = []
    for s, e in zip(starts, ends):
        t_in = bisect(ts[s] - dt, ts[s], True)
        t_out = bisect(ts[e - 1] + dt, ts[e - 1], True)
        intervals.append((float(t_in % (2 * PI)), float(t_out % (2 * PI))))
    return (len(intervals), intervals) if return_intervals else len(intervals)


def simulate_boundary_point(prism, x, eps=1e-6, tol=0.0):
    """Entry/exit for K and -K read off from membership of ``beta(+-eps)``."""
    fwd, back = KillingField.orbit(x, np.array([eps, -eps]))
    return (
        "entry" if prism.contains(fwd, tol) else "exit",
        "entry" if prism.contains(back, tol) else "exit",
    )


def special_boundary_points(prism):
    """Points where K is tangent to the boundary, with the faces used to classify them."""
    S, T, Z = prism.S, prism.Theta, prism.Z
    out = {"T+R+R-": ("T+", 0.0, 0.0), "T-R+R-": ("T-", 0.0, 0.0)}
    if abs(S - PI / 4) < 1e-15 and abs(Z - T / 2) < 1e-15:
        # R+- meets T-+ and P at r = S, z = -+Z/2
        out["R+T-P"] = ("R+", S, -Z / 2)
        out["R-T+P"] = ("R-", S, Z / 2)
    return out


def killing_analysis(prism, samples=10_000, rng=None, eps=1e-6, h=1e-6):
    """Sampled verification of the face normals, ``K . nu`` and the entry/exit rules.

    Returns a dict of residuals and booleans.
    """
    prism.require_hypothesis()
    rng = rng or np.random.default_rng(0)
    per_face = -(-samples // len(FACE_TAGS))
    rep = {"samples": per_face * len(FACE_TAGS)}
    kn_err = unit_err = tan_err = face_err = 0.0
    outward = sign_ok = True
    agree = checked = 0
    for tag in FACE_TAGS:
        a, b = prism.sample_face(tag, per_face, rng)
        x = prism.face_point(tag, a, b)
        nu = face_normal(prism, tag, a, b)
        kn = np.einsum("ij,ij->i", killing(x), nu)
        cf = k_dot_nu_closed_form(prism, tag, a, b)
        kn_err = max(kn_err, float(np.abs(kn - cf).max()))
        unit_err = max(unit_err, float(np.abs(np.einsum("ij,ij->i", nu, nu) - 1).max()))
        tan_err = max(tan_err, float(np.abs(np.einsum("ij,ij->i", nu, x)).max()))
        da = (prism.face_point(tag, a + h, b) - prism.face_point(tag, a - h, b)) / (2 * h)
        db = (prism.face_point(tag, a, b + h) - prism.face_point(tag, a, b - h)) / (2 * h)
        face_err = max(face_err, float(np.abs(np.einsum("ij,ij->i", nu, da)).max()), float(np.abs(np.einsum("ij,ij->i", nu, db)).max()))
        out_pts = x + 1e-7 * nu
        in_pts = x - 1e-7 * nu
        outward &= bool(not prism.contains(out_pts / np.linalg.norm(out_pts, axis=1, keepdims=True), 0.0).any())
        outward &= bool(prism.contains(in_pts / np.linalg.norm(in_pts, axis=1, keepdims=True), 0.0).all())
        if tag.startswith("T"):
            sign_ok &= bool(np.all(cf >= 0))
        elif tag == "P":
            sign_ok &= bool(np.all(cf > 0))
        else:
            sign_ok &= bool(np.all(cf <= 0))
        # compare classification with simulation away from edges and tangential points
        (a0, a1), (b0, b1) = prism.param_box(tag)
        away = (a - a0 > 1e-4) & (a1 - a > 1e-4) & (b - b0 > 1e-4) & (b1 - b > 1e-4) & (np.abs(cf) > 1e-6)
        for i in np.nonzero(away)[0]:
            c = classify_boundary_point(prism, tag, a[i], b[i])
            checked += 1
            agree += (c.for_K, c.for_minus_K) == simulate_boundary_point(prism, x[i], eps)
    rep.update(
        k_dot_nu_max_error=kn_err,
        normal_unit_error=unit_err,
        normal_tangent_error=tan_err,
        normal_face_error=face_err,
        normals_outward=outward,
        sign_pattern_ok=sign_ok,
        classification_checked=checked,
        classification_agree=agree,
    )
    specials = {}
    for name, (tag, a, b) in special_boundary_points(prism).items():
        c = classify_boundary_point(prism, tag, a, b)
        x = prism.face_point(tag, a, b)
        sim = simulate_boundary_point(prism, x, 1e-4)
        specials[name] = {
            "class": [c.for_K, c.for_minus_K],
            "simulated": list(sim),
            "tangential": bool(c.tangential),
            "agree": (c.for_K, c.for_minus_K) == sim,
        }
    rep["special_points"] = specials
    # orbits through the hexagon meet the prism once
    hex_counts = []
    for arc in prism.hexagon_arcs():
        for p in arc.points(8):
            hex_counts.append(orbit_prism_intersections(prism, p, samples=2048))
    rep["hexagon_orbit_counts"] = sorted(set(hex_counts))
    # orbits through exit faces leave once, so they meet the prism in one component
    exit_counts = []
    for tag in ("T+", "T-", "P"):
        a, b = prism.sample_face(tag, 20, rng)
        for p in prism.face_point(tag, a, b):
            exit_counts.append(orbit_prism_intersections(prism, p, samples=2048))
    rep["exit_face_orbit_counts"] = sorted(set(exit_counts))
    rep["ok"] = bool(
        kn_err < 1e-12
        and unit_err < 1e-12
        and tan_err < 1e-12
        and face_err < 1e-8
        and outward
        and sign_ok
        and agree == checked
        and all(v["agree"] for v in specials.values())
        and rep["hexagon_orbit_counts"] == [1]
        and rep["exit_face_orbit_counts"] == [1]
    )
    return rep


# ---------------------------------------------------------------------------
# disc mesh


@dataclass
class DiscMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    edge_tag: np.ndarray  # hexagon edge index for boundary vertices (first one at corners), -1 inside
    level: int
    prism: StandardPrism
    info: dict = field(default_factory=dict)

    @property
    def boundary(self):
        return self.edge_tag >= 0

    def edges(self):
        t = self.triangles
        e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return uniq, counts

    def euler_characteristic(self):
        e, _ = self.edges()
        return len(self.vertices) - len(e) + len(self.triangles)

    def boundary_loops(self):
        t = self.triangles
        directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        und = np.sort(directed, axis=1)
        _, inv, counts = np.unique(und, axis=0, return_inverse=True, return_counts=True)
        bd = directed[counts[inv.ravel()] == 1]
        nxt = {int(a): int(b) for a, b in bd}
        loops, seen = [], set()
        for s in nxt:
            if s in seen:
                continue
            loop, v = [], s
            while v not in seen:
                seen.add(v)
                loop.append(v)
                v = nxt[v]
            loops.append(loop)
        return loops

    def area(self):
        return chordal_area(self.vertices, self.triangles)

    def total_curvature(self):
        return total_curvature(self.vertices, self.triangles, self.boundary)

    def transformed(self, t):
        return DiscMesh(t(self.vertices), self.triangles.copy(), self.edge_tag.copy(), self.level, self.prism, dict(self.info))

    def to_dict(self):
        return {
            "vertices": self.vertices.tolist(),
            "triangles": self.triangles.tolist(),
            "edge_tag": self.edge_tag.tolist(),
            "level": self.level,
            "prism": [self.prism.S, self.prism.Theta, self.prism.Z],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["vertices"], dtype=float),
            np.asarray(d["triangles"], dtype=np.int64),
            np.asarray(d["edge_tag"], dtype=np.int64),
            int(d["level"]),
            StandardPrism(*d["prism"]),
        )


def hexagon_mesh(prism, level):
    """Fan of six triangles over the hexagon, uniformly subdivided ``level`` times.

    The fan apex is the prism centre on C^0_0, so the combinatorics are
    invariant under refl(C^0_0), which swaps hexagon vertices i and i+3.
    Boundary vertices are placed at equal arc length on their edges.
    """
    hv = prism.hexagon_vertices()
    verts = [*hv, prism.center()]
    tags = [0, 1, 2, 3, 4, 5, -1]
    tris = [(6, i, (i + 1) % 6) for i in range(6)]
    bedge = {tuple(sorted((i, (i + 1) % 6))): i for i in range(6)}
    for _ in range(level):
        mid = {}
        new_tris = []
        new_bedge = {}

        def midpoint(a, b):
            key = (a, b) if a < b else (b, a)
            if key in mid:
                return mid[key]
            p = np.asarray(verts[a]) + np.asarray(verts[b])
            verts.append(p / np.linalg.norm(p))
            idx = len(verts) - 1
            tag = bedge.get(key, -1)
            tags.append(tag)
            if tag >= 0:
                new_bedge[tuple(sorted((a, idx)))] = tag
                new_bedge[tuple(sorted((idx, b)))] = tag
            mid[key] = idx
            return idx

        for a, b, c in tris:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_tris += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        tris = new_tris
        bedge = new_bedge
    return np.array(verts, dtype=float), np.array(tris, dtype=np.int64), np.array(tags, dtype=np.int64)


def check_boundary(vertices, edge_tag, prism, tol=1e-9):
    """Largest distance of tagged boundary vertices from their hexagon arcs."""
    arcs = prism.hexagon_arcs()
    worst = 0.0
    for e, arc in enumerate(arcs):
        pts = vertices[edge_tag == e]
        if len(pts) == 0:
            continue
        P = np.outer(arc.p0, arc.p0)
        w = arc.p1 - (arc.p1 @ arc.p0) * arc.p0
        w /= np.linalg.norm(w)
        P = P + np.outer(w, w)
        inplane = pts @ P
        d = np.arctan2(np.linalg.norm(pts - inplane, axis=1), np.linalg.norm(inplane, axis=1))
        # and within the arc's angular range
        ang = np.arctan2(pts @ w, pts @ arc.p0)
        d = np.maximum(d, np.maximum(-ang, ang - arc.length).clip(min=0))
        worst = max(worst, float(d.max()))
    if worst > tol:
        raise BoundaryAssemblyFailure(f"boundary vertex off its hexagon edge by {worst:.3e}")
    return worst


# ---------------------------------------------------------------------------
# chordal area with derivatives


def chordal_area(x, tris):
    a = x[tris[:, 1]] - x[tris[:, 0]]
    b = x[tris[:, 2]] - x[tris[:, 0]]
    G = np.einsum("ij,ij->i", a, a) * np.einsum("ij,ij->i", b, b) - np.einsum("ij,ij->i", a, b) ** 2
    return math.fsum(0.5 * np.sqrt(np.maximum(G, 0.0)))


def triangle_areas(x, tris):
    a = x[tris[:, 1]] - x[tris[:, 0]]
    b = x[tris[:, 2]] - x[tris[:, 0]]
    G = np.einsum("ij,ij->i", a, a) * np.einsum("ij,ij->i", b, b) - np.einsum("ij,ij->i", a, b) ** 2
    return 0.5 * np.sqrt(np.maximum(G, 0.0))


def area_gradient(x, tris):
    """Euclidean gradient of the chordal area, shape (V, 4)."""
    a = x[tris[:, 1]] - x[tris[:, 0]]
    b = x[tris[:, 2]] - x[tris[:, 0]]
    aa = np.einsum("ij,ij->i", a, a)[:, None]
    bb = np.einsum("ij,ij->i", b, b)[:, None]
    ab = np.einsum("ij,ij->i", a, b)[:, None]
    sq = np.sqrt(aa * bb - ab**2)
    ga = (bb * a - ab * b) / (2 * sq)
    gb = (aa * b - ab * a) / (2 * sq)
    g = np.zeros_like(x)
    np.add.at(g, tris[:, 1], ga)
    np.add.at(g, tris[:, 2], gb)
    np.add.at(g, tris[:, 0], -ga - gb)
    return g


_M = np.zeros((12, 8))
_M[0:4, 0:4] = -np.eye(4)
_M[0:4, 4:8] = -np.eye(4)
_M[4:8, 0:4] = np.eye(4)
_M[8:12, 4:8] = np.eye(4)


def triangle_hessians(x, tris):
    """Per-triangle 12x12 Euclidean Hessians of the area in the vertex coordinates."""
    a = x[tris[:, 1]] - x[tris[:, 0]]
    b = x[tris[:, 2]] - x[tris[:, 0]]
    aa = np.einsum("ij,ij->i", a, a)
    bb = np.einsum("ij,ij->i", b, b)
    ab = np.einsum("ij,ij->i", a, b)
    G = aa * bb - ab**2
    I = np.eye(4)
    dGa = 2 * (bb[:, None] * a - ab[:, None] * b)
    dGb = 2 * (aa[:, None] * b - ab[:, None] * a)
    dG = np.concatenate([dGa, dGb], axis=1)
    Haa = 2 * bb[:, None, None] * I - 2 * np.einsum("ni,nj->nij", b, b)
    Hbb = 2 * aa[:, None, None] * I - 2 * np.einsum("ni,nj->nij", a, a)
    Hab = 4 * np.einsum("ni,nj->nij", a, b) - 2 * np.einsum("ni,nj->nij", b, a) - 2 * ab[:, None, None] * I
    HG = np.zeros((len(tris), 8, 8))
    HG[:, :4, :4] = Haa
    HG[:, 4:, 4:] = Hbb
    HG[:, :4, 4:] = Hab
    HG[:, 4:, :4] = np.transpose(Hab, (0, 2, 1))
    s = np.sqrt(G)
    HA = HG / (4 * s)[:, None, None] - np.einsum("ni,nj->nij", dG, dG) / (8 * s**3)[:, None, None]
    return np.einsum("ij,njk,lk->nil", _M, HA, _M)


def tangent_frames(x):
    """Orthonormal bases of the tangent spaces of S^3: right multiplication by i, j, k."""
    a, b, c, d = x[:, 0], x[:, 1], x[:, 2], x[:, 3]
    e1 = np.stack([-b, a, -d, c], axis=1)
    e2 = np.stack([-c, d, a, -b], axis=1)
    e3 = np.stack([-d, -c, b, a], axis=1)
    return np.stack([e1, e2, e3], axis=2)  # (V, 4, 3)


def dual_areas(x, tris):
    A = triangle_areas(x, tris)
    out = np.zeros(len(x))
    for k in range(3):
        np.add.at(out, tris[:, k], A / 3)
    return out


def minimality_residual(x, tris, free):
    g = area_gradient(x, tris)
    gt = g - np.einsum("ij,ij->i", g, x)[:, None] * x
    r = np.linalg.norm(gt, axis=1) / dual_areas(x, tris)
    return float(r[free].max()) if free.any() else 0.0


def _tri_normals3(x, tris):
    """Unit normal in R^4 of the 3-space spanned by each triangle, oriented so det[v0, v1, v2, n] > 0."""
    M = x[tris]  # (F, 3, 4)
    _, _, vt = np.linalg.svd(M)
    n = vt[:, 3, :]
    det = np.linalg.det(np.concatenate([M, n[:, None, :]], axis=1))
    return n * np.sign(det)[:, None]


def vertex_normals(x, tris):
    """Unit normals of the surface inside S^3 at each vertex, tangent to S^3."""
    tn = _tri_normals3(x, tris) * triangle_areas(x, tris)[:, None]
    n = np.zeros_like(x)
    for k in range(3):
        np.add.at(n, tris[:, k], tn)
    n -= np.einsum("ij,ij->i", n, x)[:, None] * x
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def _graph_system(x, tris, free, vel):
    """Gradient and sparse Hessian of the area in the normal-graph coordinates of the free vertices.

    Vertex ``i`` moves as ``cos(s) p_i + sin(s) n_i``, so ``dx/ds = vel`` and ``d2x/ds2 = -x``.
    """
    V = len(x)
    g = area_gradient(x, tris)
    idx = -np.ones(V, dtype=np.int64)
    idx[free] = np.arange(free.sum())
    n = int(free.sum())
    grad = np.einsum("ij,ij->i", g, vel)[free]
    H = triangle_hessians(x, tris).reshape(len(tris), 3, 4, 3, 4)
    vt = vel[tris]  # (F, 3, 4)
    Hr = np.einsum("fpi,fpiqj,fqj->fpq", vt, H, vt)
    ti = idx[tris]
    rows, cols, vals = [], [], []
    for p in range(3):
        for q in range(3):
            ok = (ti[:, p] >= 0) & (ti[:, q] >= 0)
            rows.append(ti[ok, p])
            cols.append(ti[ok, q])
            vals.append(Hr[ok, p, q])
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(-np.einsum("ij,ij->i", g, x)[free])
    Hs = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return grad, Hs


def graph_residual(x, tris, free, vel):
    """Max over free vertices of ``|dA/ds_i|`` divided by the vertex dual area."""
    g = area_gradient(x, tris)
    r = np.abs(np.einsum("ij,ij->i", g, vel)) / dual_areas(x, tris)
    return float(r[free].max()) if free.any() else 0.0


@dataclass
class SolverParams:
    max_iter: int = 100
    tol: float = 1e-8
    armijo: float = 1e-4
    shrink: float = 0.5
    damping: float = 1e-3
    max_backtracks: int = 40


def _harmonic_init(verts, tris, free):
    """Uniform-weight harmonic extension of the boundary positions in R^4, then normalized."""
    V = len(verts)
    e = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    e = np.unique(np.sort(e, axis=1), axis=0)
    W = sp.coo_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(V, V)).tocsr()
    deg = np.asarray(W.sum(axis=1)).ravel()
    L = sp.diags(deg) - W
    fi = np.nonzero(free)[0]
    bi = np.nonzero(~free)[0]
    Lff = L[fi][:, fi].tocsc()
    rhs = -L[fi][:, bi] @ verts[bi]
    out = verts.copy()
    out[fi] = spsolve(Lff, rhs)
    out[fi] /= np.linalg.norm(out[fi], axis=1, keepdims=True)
    return out


def minimize_area(x0, tris, free, params=None, log=None):
    """Damped Newton on the chordal area over normal graphs of the starting mesh.

    Each free vertex moves on the great circle through its start position
    in the direction of the start surface normal.  Tangential sliding is
    excluded: it leaves the chordal area almost unchanged and lets
    triangles collapse.  Steps use Armijo backtracking, so the area is
    non-increasing.  Returns ``(x, history)`` with (area, residual) pairs.
    """
    params = params or SolverParams()
    nrm = vertex_normals(x0, tris)
    s = np.zeros(int(free.sum()))

    def embed(s):
        x = x0.copy()
        c, sn = np.cos(s)[:, None], np.sin(s)[:, None]
        x[free] = c * x0[free] + sn * nrm[free]
        vel = np.zeros_like(x0)
        vel[free] = -sn * x0[free] + c * nrm[free]
        return x, vel

    x, vel = embed(s)
    lam = params.damping
    f = chordal_area(x, tris)
    res = graph_residual(x, tris, free, vel)
    history = [(f, res)]
    it = 0
    alpha = 1.0
    while res >= params.tol:
        if it >= params.max_iter:
            raise NonConvergence(it, res)
        it += 1
        grad, H = _graph_system(x, tris, free, vel)
        scale = float(np.abs(H.diagonal()).mean())
        accepted = False
        for _ in range(12):
            A = (H + sp.identity(H.shape[0]) * (lam * scale)).tocsc()
            d = spsolve(A, -grad)
            slope = float(grad @ d)
            if not np.all(np.isfinite(d)) or slope >= 0:
                lam = max(lam * 10, 1e-8)
                continue
            alpha = 1.0
            for _ in range(params.max_backtracks):
                sn = s + alpha * d
                xn, veln = embed(sn)
                fn = chordal_area(xn, tris)
                # rounding slack: near convergence the decrease is below double precision
                if fn <= f + params.armijo * alpha * slope + 4e-16 * abs(f):
                    accepted = True
                    break
                alpha *= params.shrink
            if accepted:
                break
            lam = max(lam * 10, 1e-8)
        if not accepted:
            raise NonConvergence(it, res)
        s, x, vel, f = sn, xn, veln, fn
        res = graph_residual(x, tris, free, vel)
        history.append((f, res))
        if log:
            log(it, f, res, lam, alpha)
        if alpha == 1.0:
            lam = lam / 10 if lam > 1e-12 else 0.0
    return x, history


def solve_plateau(prism, level=4, params=None, log=None):
    """Discrete area-minimizing disc spanning the hexagon of ``prism``."""
    if not isinstance(prism, StandardPrism):
        prism = StandardPrism(*prism)
    prism.require_hypothesis()
    verts, tris, tags = hexagon_mesh(prism, level)
    check_boundary(verts, tags, prism)
    free = tags < 0
    x0 = _harmonic_init(verts, tris, free)
    x, hist = minimize_area(x0, tris, free, params, log)
    disc = DiscMesh(x, tris, tags, level, prism)
    disc.info["iterations"] = len(hist) - 1
    disc.info["residual"] = hist[-1][1]
    disc.info["tangential_residual"] = minimality_residual(x, tris, free)
    disc.info["area_history"] = [h[0] for h in hist]
    return disc


# ---------------------------------------------------------------------------
# diagnostics on solved discs


def corner_angles(x, tris):
    """Per-triangle interior angles, shape (F, 3)."""
    out = np.empty((len(tris), 3))
    for k in range(3):
        p = x[tris[:, k]]
        u = x[tris[:, (k + 1) % 3]] - p
        v = x[tris[:, (k + 2) % 3]] - p
        cr = np.sqrt(np.maximum(np.einsum("ij,ij->i", u, u) * np.einsum("ij,ij->i", v, v) - np.einsum("ij,ij->i", u, v) ** 2, 0))
        out[:, k] = np.arctan2(cr, np.einsum("ij,ij->i", u, v))
    return out


def angle_sums(x, tris):
    ang = corner_angles(x, tris)
    s = np.zeros(len(x))
    for k in range(3):
        np.add.at(s, tris[:, k], ang[:, k])
    return s


def interior_defect_sum(x, tris, boundary):
    """Sum of angle defects ``2 pi - angle sum`` over interior vertices."""
    s = angle_sums(x, tris)
    return math.fsum(2 * PI - s[~boundary])


def total_curvature(x, tris, boundary=None):
    """Discrete integral of the Gauss curvature.

    Interior vertices carry their angle defects.  A boundary vertex's angle
    sum mixes geodesic turning of the chordal boundary with curvature, so
    its dual cell instead gets the area-weighted mean curvature density of
    its interior neighbours.  Without this the missing boundary strip makes
    the error first order in the mesh size.
    """
    if boundary is None or not boundary.any():
        return math.fsum(2 * PI - angle_sums(x, tris))
    s = angle_sums(x, tris)
    da = dual_areas(x, tris)
    defect = np.where(boundary, 0.0, 2 * PI - s)
    num = np.zeros(len(x))
    den = np.zeros(len(x))
    for i, j in ((0, 1), (1, 2), (2, 0), (1, 0), (2, 1), (0, 2)):
        m = ~boundary[tris[:, j]]
        np.add.at(num, tris[m, i], defect[tris[m, j]])
        np.add.at(den, tris[m, i], da[tris[m, j]])
    dens = num / np.where(den > 0, den, 1.0)
    return math.fsum(defect[~boundary]) + math.fsum((dens * da)[boundary])


def hexagon_gauss_bonnet(prism):
    """Total curvature forced by Gauss-Bonnet on a disc with the hexagon's corner angles."""
    interior = [prism.Theta, PI / 2, PI / 2, prism.Theta, PI / 2, PI / 2]
    return 2 * PI - sum(PI - a for a in interior)


def containment_violation(disc, tol=1e-6):
    """Largest excess of any vertex over the prism bounds (0 if inside)."""
    r, th, z = prism_coords(disc.vertices)
    p = disc.prism
    ex = np.maximum(r - p.S, 0)
    ex = np.maximum(ex, np.abs(z) - p.Z / 2)
    ex = np.maximum(ex, (np.abs(th) - p.Theta / 2) * np.sin(r))
    return float(max(ex.max(), 0.0))


def hausdorff(a, b):
    ta, tb = cKDTree(a), cKDTree(b)
    return float(max(ta.query(b)[0].max(), tb.query(a)[0].max()))


def symmetry_defect(disc):
    """Hausdorff distance between the disc vertices and their image under refl(C^0_0)."""
    return hausdorff(disc.vertices, refl(C00)(disc.vertices))


def orbit_triangle_hits(x, tris, p, normals=None, tol=1e-10):
    """Parameters ``t in [0, 2 pi)`` where the K-orbit of ``p`` meets the cone over some triangle."""
    if normals is None:
        normals = _tri_normals3(x, tris)
    n = normals
    # n . beta(t) = A cos t + B sin t + C
    A = n[:, 0] * p[0] + n[:, 2] * p[2]
    Bc = n[:, 2] * p[0] - n[:, 0] * p[2]
    C = n[:, 1] * p[1] + n[:, 3] * p[3]
    R = np.hypot(A, Bc)
    ok = R > 1e-14
    ratio = np.where(ok, -C / np.where(ok, R, 1), 2.0)
    ok &= np.abs(ratio) <= 1 + 1e-12
    phi = np.arctan2(Bc, A)
    base = np.arccos(np.clip(ratio, -1, 1))
    hits = []
    fi = np.nonzero(ok)[0]
    for sgn in (1.0, -1.0):
        t = (phi[fi] + sgn * base[fi]) % (2 * PI)
        pts = KillingField.orbit(p, t)  # (k, 4)
        if pts.ndim == 1:
            pts = pts[None]
        M = x[tris[fi]]  # (k, 3, 4)
        # solve the 3x3 normal equations per triangle
        G = np.einsum("kai,kbi->kab", M, M)
        rhs = np.einsum("kai,ki->ka", M, pts)
        coef = np.linalg.solve(G, rhs[..., None])[..., 0]
        good = np.all(coef >= -tol, axis=1) & (coef.sum(axis=1) > 0)
        hits.append(t[good])
    return np.concatenate(hits) if hits else np.zeros(0)


def _count_distinct(ts, tol=1e-7):
    if len(ts) == 0:
        return 0
    ts = np.sort(np.mod(ts, 2 * PI))
    gaps = np.diff(ts)
    n = 1 + int(np.sum(gaps > tol))
    if n > 1 and (ts[0] + 2 * PI - ts[-1]) <= tol:
        n -= 1
    return n


def check_graphicality(disc, samples=500, rng=None):
    """Count intersections of K-orbits through random disc points with the disc."""
    rng = rng or np.random.default_rng(0)
    x, tris = disc.vertices, disc.triangles
    normals = _tri_normals3(x, tris)
    ti = rng.integers(0, len(tris), samples)
    w = rng.dirichlet(np.ones(3), samples)
    pts = np.einsum("ka,kai->ki", w, x[tris[ti]])
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    counts = np.array([_count_distinct(orbit_triangle_hits(x, tris, p, normals)) for p in pts])
    bad = np.nonzero(counts != 1)[0]
    return {
        "samples": int(samples),
        "max_count": int(counts.max()),
        "min_count": int(counts.min()),
        "all_single": bool(len(bad) == 0),
        "violations": [pts[i].tolist() for i in bad[:5]],
    }


def orbit_disc_count(disc, p):
    return _count_distinct(orbit_triangle_hits(disc.vertices, disc.triangles, np.asarray(p, dtype=float)))


def gnomonic(x, center):
    """Central projection of points near ``center`` to its tangent 3-space (great circles become lines)."""
    c = np.asarray(center, dtype=float)
    B = tangent_frames(c[None])[0]  # (4, 3)
    return (x @ B) / (x @ c)[:, None]


def _segment_hits_triangle(p0, p1, a, b, c, eps=1e-12):
    """Vectorized: does the open segment p0-p1 cross the open triangle abc?"""
    e1, e2 = b - a, c - a
    d = p1 - p0
    h = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, h)
    ok = np.abs(det) > eps
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    s = p0 - a
    u = inv * np.einsum("ij,ij->i", s, h)
    q = np.cross(s, e1)
    v = inv * np.einsum("ij,ij->i", d, q)
    t = inv * np.einsum("ij,ij->i", e2, q)
    m = 1e-9
    return ok & (u > m) & (v > m) & (u + v < 1 - m) & (t > m) & (t < 1 - m)


def self_intersections(x3, tris):
    """Pairs of triangles sharing no vertex whose interiors cross (3D coordinates)."""
    cent = x3[tris].mean(axis=1)
    rad = np.linalg.norm(x3[tris] - cent[:, None], axis=2).max(axis=1)
    tree = cKDTree(cent)
    pairs = tree.query_pairs(2 * rad.max(), output_type="ndarray")
    if len(pairs) == 0:
        return []
    share = (tris[pairs[:, 0]][:, :, None] == tris[pairs[:, 1]][:, None, :]).any(axis=(1, 2))
    pairs = pairs[~share]
    bad = np.zeros(len(pairs), dtype=bool)
    for first, second in ((0, 1), (1, 0)):
        T1 = tris[pairs[:, first]]
        T2 = tris[pairs[:, second]]
        a, b, c = x3[T2[:, 0]], x3[T2[:, 1]], x3[T2[:, 2]]
        for i, j in ((0, 1), (1, 2), (2, 0)):
            bad |= _segment_hits_triangle(x3[T1[:, i]], x3[T1[:, j]], a, b, c)
    return [tuple(map(int, p)) for p in pairs[bad]]


def is_embedded(disc):
    x3 = gnomonic(disc.vertices, disc.prism.center())
    return len(self_intersections(x3, disc.triangles)) == 0


def disc_report(disc, graph_samples=500, rng=None):
    prism = disc.prism
    target = hexagon_gauss_bonnet(prism)
    tc = disc.total_curvature()
    return {
        "level": disc.level,
        "vertices": int(len(disc.vertices)),
        "triangles": int(len(disc.triangles)),
        "euler_characteristic": int(disc.euler_characteristic()),
        "boundary_loops": len(disc.boundary_loops()),
        "iterations": disc.info.get("iterations"),
        "residual": disc.info.get("residual"),
        "area": disc.area(),
        "total_curvature": tc,
        "interior_defect_sum": interior_defect_sum(disc.vertices, disc.triangles, disc.boundary),
        "total_curvature_target": target,
        "total_curvature_rel_error": abs(tc - target) / abs(target),
        "containment_violation": containment_violation(disc),
        "symmetry_hausdorff": symmetry_defect(disc),
        "embedded": is_embedded(disc),
        "graphicality": check_graphicality(disc, graph_samples, rng),
    }


__all__ = [
    "FACE_TAGS",
    "HEXAGON_EDGES",
    "StandardPrism",
    "face_normal",
    "k_dot_nu_closed_form",
    "KillingField",
    "killing",
    "BoundaryClass",
    "classify_boundary_point",
    "orbit_prism_intersections",
    "DiscMesh",
    "hexagon_mesh",
    "SolverParams",
    "solve_plateau",
    "check_graphicality",
    "killing_analysis",
    "disc_report",
]
