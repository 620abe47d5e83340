"""Replicate a solved disc under a finite group, weld the copies, and measure the result."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import NotClosed, PoleOnSurface, WeldFailure
from .isogroup import generate
from .s3core import GreatCircle, Isometry, refl, rounded_key
from .plateau import DiscMesh, StandardPrism, angle_sums

PI = np.pi


@dataclass
class AssembledSurface:
    vertices: np.ndarray
    triangles: np.ndarray
    copy_of_triangle: np.ndarray  # copy index per triangle
    disc_triangle: np.ndarray  # source disc triangle per triangle
    copy_elements: list  # group element index per copy
    weld_map: np.ndarray  # (copies * disc vertices,) -> welded vertex
    boundary_edges: int = 0
    info: dict = field(default_factory=dict)

    @property
    def copies(self):
        return len(self.copy_elements)

    @property
    def closed(self):
        return self.boundary_edges == 0


@dataclass
class TopologyReport:
    V: int
    E: int
    F: int
    chi: int
    genus: int
    total_curvature: float
    copies: int
    orientable: bool

    def as_dict(self):
        return {
            "V": self.V,
            "E": self.E,
            "F": self.F,
            "chi": self.chi,
            "genus": self.genus,
            "total_curvature": self.total_curvature,
            "copies": self.copies,
            "orientable": self.orientable,
        }


def _edge_table(tris):
    directed = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    und = np.sort(directed, axis=1)
    uniq, inv, counts = np.unique(und, axis=0, return_inverse=True, return_counts=True)
    return directed, uniq, inv.ravel(), counts


def weld(points, tol):
    """Cluster points closer than ``tol``; returns (labels, representative coordinates)."""
    tree = cKDTree(points)
    pairs = tree.query_pairs(tol, output_type="ndarray")
    n = len(points)
    g = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) if len(pairs) else coo_matrix((n, n))
    _, labels = connected_components(g, directed=False)
    # relabel by first occurrence so the output is deterministic
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    labels = rank[inv]
    reps = points[np.sort(first)]
    return labels, reps


def copy_elements(group, placement, anchor):
    """Indices of group elements giving one representative per distinct image of ``placement(anchor)``."""
    base = placement(anchor)
    seen, out = set(), []
    for i, g in enumerate(group.elements):
        k = rounded_key(g(base), 8)
        if k not in seen:
            seen.add(k)
            out.append(i)
    return out


def assemble(disc, group, placement=None, weld_tol=1e-6, require_closed=False):
    """Apply one group element per distinct image of the placed disc and weld the copies.

    Copies are identified by the image of the prism centre, so elements of
    the disc's stabilizer do not produce duplicates.
    """
    placement = placement or Isometry.identity()
    x = placement(disc.vertices)
    anchor = disc.prism.center()
    reps = copy_elements(group, placement, anchor)
    nv = len(x)
    pts = np.concatenate([group.elements[i](x) for i in reps])
    labels, verts = weld(pts, weld_tol)
    # two vertices of one copy welded together means the tolerance is too coarse
    per_copy = labels.reshape(len(reps), nv)
    for c in range(len(reps)):
        if len(np.unique(per_copy[c])) != nv:
            raise WeldFailure(f"copy {c}: distinct disc vertices merged at tolerance {weld_tol}")
    # interior vertices must stay unmatched
    interior = np.tile(~disc.boundary, len(reps))
    counts = np.bincount(labels)
    if np.any(counts[labels[interior]] > 1):
        raise WeldFailure("an interior disc vertex coincides with a vertex of another copy")
    tris = np.concatenate([per_copy[c][disc.triangles] for c in range(len(reps))])
    _, _, inv, ecount = _edge_table(tris)
    if np.any(ecount > 2):
        raise WeldFailure("non-manifold edge after welding")
    nbd = int(np.sum(ecount == 1))
    surf = AssembledSurface(
        vertices=verts,
        triangles=tris,
        copy_of_triangle=np.repeat(np.arange(len(reps)), len(disc.triangles)),
        disc_triangle=np.tile(np.arange(len(disc.triangles)), len(reps)),
        copy_elements=reps,
        weld_map=labels,
        boundary_edges=nbd,
    )
    if require_closed and not surf.closed:
        raise NotClosed(f"{nbd} boundary edges remain after welding")
    return surf


def orient(tris):
    """Flip triangles to a coherent orientation if possible.

    Returns ``(oriented triangles, orientable)``.
    """
    tris = tris.copy()
    directed, uniq, inv, counts = _edge_table(tris)
    F = len(tris)
    tri_of = np.tile(np.arange(F), 3)
    # the two half-edges of each interior edge
    order = np.argsort(inv, kind="stable")
    inv_s = inv[order]
    starts = np.searchsorted(inv_s, np.arange(len(uniq)))
    nbrs = [[] for _ in range(F)]
    for e in np.nonzero(counts == 2)[0]:
        h1, h2 = order[starts[e]], order[starts[e] + 1]
        t1, t2 = tri_of[h1], tri_of[h2]
        same = bool(directed[h1, 0] == directed[h2, 0])  # same direction means inconsistent
        nbrs[t1].append((t2, same))
        nbrs[t2].append((t1, same))
    flip = -np.ones(F, dtype=np.int8)
    ok = True
    for s in range(F):
        if flip[s] >= 0:
            continue
        flip[s] = 0
        stack = [s]
        while stack:
            t = stack.pop()
            for u, same in nbrs[t]:
                want = flip[t] ^ int(same)
                if flip[u] < 0:
                    flip[u] = want
                    stack.append(u)
                elif flip[u] != want:
                    ok = False
    f = flip.astype(bool)
    tris[f] = tris[f][:, ::-1]
    return tris, ok


def topology(surface):
    """Exact Euler characteristic and genus of a closed welded surface, plus total curvature."""
    if len(surface.triangles) == 0:
        raise NotClosed("empty surface")
    _, uniq, _, counts = _edge_table(surface.triangles)
    if np.any(counts != 2):
        raise NotClosed(f"{int(np.sum(counts == 1))} edges bound a single triangle")
    V = len(np.unique(surface.triangles))
    E = len(uniq)
    F = len(surface.triangles)
    chi = V - E + F
    _, orientable = orient(surface.triangles)
    if chi % 2:
        raise NotClosed(f"odd Euler characteristic {chi}")
    s = angle_sums(surface.vertices, surface.triangles)
    used = np.zeros(len(surface.vertices), dtype=bool)
    used[surface.triangles.ravel()] = True
    tc = math.fsum(2 * PI - s[used])
    return TopologyReport(V, E, F, chi, (2 - chi) // 2, tc, surface.copies, orientable)


# ---------------------------------------------------------------------------
# geodesic distance from points to the mesh


def _point_tri_dist(p, tri):
    """Geodesic distance from unit vectors ``p`` (k, 4) to spherical triangles ``tri`` (k, 3, 4)."""
    G = np.einsum("kai,kbi->kab", tri, tri)
    rhs = np.einsum("kai,ki->ka", tri, p)
    c = np.linalg.solve(G, rhs[..., None])[..., 0]
    proj = np.einsum("ka,kai->ki", c, tri)
    pn = np.linalg.norm(proj, axis=1)
    face = np.arctan2(np.linalg.norm(p - proj, axis=1), pn)
    inside = np.all(c >= 0, axis=1)
    best = np.where(inside, face, np.inf)
    for i, j in ((0, 1), (1, 2), (2, 0)):
        a, b = tri[:, i], tri[:, j]
        ab = np.einsum("ki,ki->k", a, b)
        Gm = np.stack([np.stack([np.ones_like(ab), ab], 1), np.stack([ab, np.ones_like(ab)], 1)], 1)
        r2 = np.stack([np.einsum("ki,ki->k", a, p), np.einsum("ki,ki->k", b, p)], 1)
        cc = np.linalg.solve(Gm, r2[..., None])[..., 0]
        pe = cc[:, :1] * a + cc[:, 1:] * b
        d = np.arctan2(np.linalg.norm(p - pe, axis=1), np.linalg.norm(pe, axis=1))
        ok = np.all(cc >= 0, axis=1)
        best = np.minimum(best, np.where(ok, d, np.inf))
    for i in range(3):
        v = tri[:, i]
        best = np.minimum(best, 2 * np.arctan2(np.linalg.norm(p - v, axis=1), np.linalg.norm(p + v, axis=1)))
    return best


class MeshDistance:
    """Geodesic distance from points of S^3 to a mesh of spherical triangles."""

    def __init__(self, vertices, triangles, k=24):
        self.v = vertices
        self.t = triangles
        cent = vertices[triangles].mean(axis=1)
        self.tree = cKDTree(cent)
        self.k = min(k, len(triangles))

    def __call__(self, pts):
        pts = np.atleast_2d(pts)
        _, idx = self.tree.query(pts, k=self.k)
        idx = idx.reshape(len(pts), -1)
        rep = np.repeat(pts, idx.shape[1], axis=0)
        d = _point_tri_dist(rep, self.v[self.t[idx.ravel()]])
        return d.reshape(idx.shape).min(axis=1)


def check_circle_containment(surface, circles, weld_tol=1e-6, samples=1024):
    """Max distance from sampled points of each circle to the mesh, with pass flags."""
    md = MeshDistance(surface.vertices, surface.triangles)
    out = {}
    for c in circles:
        d = float(md(c.sample(samples)).max())
        out[c.name] = {"max_distance": d, "contained": d < 10 * weld_tol}
    return out


def check_invariance(surface, generators, tol=1e-6):
    """For each generator, the largest distance from an image vertex to the vertex set."""
    tree = cKDTree(surface.vertices)
    worst = []
    for g in generators:
        d, _ = tree.query(g(surface.vertices))
        worst.append(float(d.max()))
    return {"max_deviation": max(worst) if worst else 0.0, "invariant": all(w < tol for w in worst), "per_generator": worst}


def surface_report(surface, cfg=None, generators=None, weld_tol=1e-6, samples=1024):
    topo = topology(surface)
    rep = topo.as_dict()
    if generators is not None:
        inv = check_invariance(surface, generators, weld_tol)
        rep["invariance_max_deviation"] = inv["max_deviation"]
        rep["invariant"] = inv["invariant"]
    if cfg is not None:
        circles = cfg.rcol_circles + cfg.scaf_circles
        cont = check_circle_containment(surface, circles, weld_tol, samples)
        rep["circles_checked"] = len(cont)
        rep["circles_contained"] = int(sum(v["contained"] for v in cont.values()))
        rep["circle_max_distance"] = max(v["max_distance"] for v in cont.values())
        acol = check_circle_containment(surface, list(cfg.acol.values()), weld_tol, samples)
        rep["acol_min_distance"] = min(v["max_distance"] for v in acol.values())
    return rep


# ---------------------------------------------------------------------------
# the two supported families


def three_tori_surface(disc, cfg, group, weld_tol=1e-6):
    """Assemble the disc solved in the standard prism over the prism ``(C1, 0, 0)`` of ``cfg``."""
    placement = cfg.prism(("C1", 0, 0)).placement
    return assemble(disc, group, placement, weld_tol, require_closed=True)


def hexagon_circles(prism):
    names = ("R+T+", "PR+", "R+T-", "R-T-", "PR-", "R-T+")
    return [GreatCircle.through(a.p0, a.p1, name=n) for a, n in zip(prism.hexagon_arcs(), names)]


def choe_soret_prism(k, m):
    return StandardPrism(PI / 4, PI / k, PI / (2 * k * m))


def choe_soret_group(prism, cap=100_000):
    """Group generated by the reflections through the great circles containing the hexagon sides."""
    return generate([refl(c) for c in hexagon_circles(prism)], cap=cap)


def choe_soret_genus(k, m):
    return 1 + 4 * (k - 1) * k * m


# ---------------------------------------------------------------------------
# export


def stereographic(x, pole):
    """Stereographic projection from ``pole`` onto the orthogonal 3-space, in the quaternion frame at ``-pole``."""
    from .plateau import tangent_frames

    pole = np.asarray(pole, dtype=float)
    pole = pole / np.linalg.norm(pole)
    B = tangent_frames(pole[None])[0]
    denom = 1.0 - x @ pole
    return (x @ B) / denom[:, None]


def _mesh_arrays(obj):
    if isinstance(obj, (AssembledSurface, DiscMesh)):
        return obj.vertices, obj.triangles
    v, t = obj
    return np.asarray(v, dtype=float), np.asarray(t, dtype=np.int64)


def export(obj, path, fmt="obj", projection="stereographic", pole=None):
    """Write an ASCII OBJ or PLY file.

    ``projection='stereographic'`` maps S^3 minus ``pole`` to R^3;
    ``'raw'`` writes the four coordinates.
    """
    v, t = _mesh_arrays(obj)
    if len(v) == 0 or len(t) == 0:
        raise NotClosed("empty mesh")
    if projection == "stereographic":
        pole = np.asarray(pole if pole is not None else [0.0, 0.0, 0.0, 1.0], dtype=float)
        pole = pole / np.linalg.norm(pole)
        dmin = float(np.min(2 * np.arctan2(np.linalg.norm(v - pole, axis=1), np.linalg.norm(v + pole, axis=1))))
        if dmin <= 1e-3:
            raise PoleOnSurface(f"pole within {dmin:.2e} of a vertex")
        coords = stereographic(v, pole)
        header = [
            "stereographic projection from pole " + " ".join(f"{c:.12g}" for c in pole),
            "x -> (x . e_k) / (1 - x . pole), e_k = pole * (i, j, k) as quaternions",
        ]
    elif projection == "raw":
        coords = v
        header = ["raw coordinates (x1, x2, x3, x4) on the unit 3-sphere"]
    else:
        raise ValueError(f"unknown projection {projection!r}")
    lines = []
    if fmt == "obj":
        lines += [f"# {h}" for h in header]
        lines += ["v " + " ".join(f"{c:.12g}" for c in row) for row in coords]
        lines += ["f " + " ".join(str(i + 1) for i in tri) for tri in t]
    elif fmt == "ply":
        props = ["x", "y", "z"] + (["w"] if coords.shape[1] == 4 else [])
        lines += ["ply", "format ascii 1.0"]
        lines += [f"comment {h}" for h in header]
        lines += [f"element vertex {len(coords)}"]
        lines += [f"property double {p}" for p in props]
        lines += [f"element face {len(t)}", "property list uchar int vertex_indices", "end_header"]
        lines += [" ".join(f"{c:.12g}" for c in row) for row in coords]
        lines += ["3 " + " ".join(str(i) for i in tri) for tri in t]
    else:
        raise ValueError(f"unknown format {fmt!r}")
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_mesh(path):
    """Parse an ASCII OBJ or PLY file written by :func:`export`."""
    text = Path(path).read_text().splitlines()
    if text and text[0].strip() == "ply":
        nv = nf = 0
        i = 0
        for i, line in enumerate(text):
            if line.startswith("element vertex"):
                nv = int(line.split()[-1])
            elif line.startswith("element face"):
                nf = int(line.split()[-1])
            elif line.strip() == "end_header":
                break
        body = text[i + 1 :]
        v = np.array([[float(c) for c in row.split()] for row in body[:nv]])
        t = np.array([[int(c) for c in row.split()[1:]] for row in body[nv : nv + nf]], dtype=np.int64)
        return v, t
    v, t = [], []
    for line in text:
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "v":
            v.append([float(c) for c in parts[1:]])
        elif parts[0] == "f":
            t.append([int(c.split("/")[0]) - 1 for c in parts[1:]])
    return np.array(v), np.array(t, dtype=np.int64)
