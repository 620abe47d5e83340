"""Geometry of the round three-sphere.

Points of S^3 are unit vectors ``x = (x1, x2, x3, x4)`` in R^4, read as the
complex pair ``(w1, w2) = (x1 + i x2, x3 + i x4)``.  Isometries are 4x4
orthogonal matrices.  Everything here works on plain numpy arrays; the
functions accept a single point of shape ``(4,)`` or a stack ``(..., 4)``.
"""
from __future__ import annotations

import numpy as np

from .errors import InvalidPoint, NotFiberPreserving

EPS_PT = 1e-12
EPS_MAT = 1e-10
KEY_DECIMALS = 9

# complex structure J(w1, w2) = (i w1, i w2)
J = np.array(
    [
        [0.0, -1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, -1.0],
        [0.0, 0.0, 1.0, 0.0],
    ]
)


def rounded_key(arr, decimals=KEY_DECIMALS):
    """Hashable key of an array, entries rounded to ``decimals`` digits."""
    q = np.rint(np.asarray(arr, dtype=float) * 10.0**decimals).astype(np.int64)
    return q.tobytes()


def from_c2(w1, w2):
    w1 = np.asarray(w1, dtype=complex)
    w2 = np.asarray(w2, dtype=complex)
    return np.stack([w1.real, w1.imag, w2.real, w2.imag], axis=-1)


def to_c2(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0] + 1j * x[..., 1], x[..., 2] + 1j * x[..., 3]


def s3_point(x, tol=EPS_PT):
    """Validate and return ``x`` as a point (or stack of points) of S^3."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 4:
        raise InvalidPoint(f"expected 4 coordinates, got shape {x.shape}")
    err = np.abs(np.linalg.norm(x, axis=-1) - 1.0)
    if np.any(err > tol):
        raise InvalidPoint(f"point off the unit sphere by {float(np.max(err)):.3e}")
    return x


def normalize(x):
    x = np.asarray(x, dtype=float)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def s3_distance(p, q):
    """Geodesic distance on S^3."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return 2.0 * np.arctan2(np.linalg.norm(p - q, axis=-1), np.linalg.norm(p + q, axis=-1))


def hopf_project(p):
    """Hopf projection onto the sphere of radius 1/2 in R^3."""
    w1, w2 = to_c2(p)
    z = w1 * np.conj(w2)
    return np.stack([z.real, z.imag, (np.abs(w1) ** 2 - np.abs(w2) ** 2) / 2.0], axis=-1)


def random_s3_points(rng, n):
    return normalize(rng.standard_normal((n, 4)))


# ---------------------------------------------------------------------------
# isometries


def complex_matrix(a, conjugate=False):
    """Real 4x4 form of ``w -> A w`` (or ``w -> A conj(w)`` if ``conjugate``)."""
    a = np.asarray(a, dtype=complex)
    m = np.zeros((4, 4))
    for j in range(2):
        for k in range(2):
            al, be = a[j, k].real, a[j, k].imag
            if conjugate:
                block = [[al, be], [be, -al]]
            else:
                block = [[al, -be], [be, al]]
            m[2 * j : 2 * j + 2, 2 * k : 2 * k + 2] = block
    return m


class Isometry:
    """An element of O(4), classified as unitary, antiunitary or neither."""

    __slots__ = ("m", "kind")

    def __init__(self, m, check=True):
        m = np.array(m, dtype=float)
        if m.shape != (4, 4):
            raise ValueError(f"isometry matrix must be 4x4, got {m.shape}")
        if check and not is_orthogonal(m):
            raise ValueError("matrix is not orthogonal")
        self.m = m
        self.kind = classify_matrix(m)

    @classmethod
    def identity(cls):
        return cls(np.eye(4), check=False)

    @classmethod
    def from_complex(cls, a, conjugate=False):
        return cls(complex_matrix(a, conjugate))

    def __matmul__(self, other):
        if isinstance(other, Isometry):
            return Isometry(self.m @ other.m, check=False)
        return NotImplemented

    def __call__(self, points):
        return np.asarray(points, dtype=float) @ self.m.T

    def inverse(self):
        return Isometry(self.m.T, check=False)

    def key(self, decimals=KEY_DECIMALS):
        return rounded_key(self.m, decimals)

    def allclose(self, other, tol=EPS_MAT):
        om = other.m if isinstance(other, Isometry) else np.asarray(other)
        return bool(np.max(np.abs(self.m - om)) < tol)

    def __repr__(self):
        return f"Isometry(kind={self.kind!r}, m={np.round(self.m, 6).tolist()})"


def is_orthogonal(m, tol=EPS_MAT):
    m = np.asarray(m)
    return bool(np.max(np.abs(m.T @ m - np.eye(m.shape[0]))) < tol)


def classify_matrix(m, tol=EPS_MAT):
    if np.max(np.abs(m @ J - J @ m)) < tol:
        return "unitary"
    if np.max(np.abs(m @ J + J @ m)) < tol:
        return "antiunitary"
    return "neither"


def diag_c2(a, b):
    """The unitary ``(w1, w2) -> (a w1, b w2)`` for unit complex ``a, b``."""
    return Isometry.from_complex(np.diag([a, b]))


def hopf_rotation(t):
    """Rotation along every Hopf fiber by angle ``t`` (multiplication by e^{it})."""
    return diag_c2(np.exp(1j * t), np.exp(1j * t))


# preimages of the coordinate directions of R^3 under the Hopf projection
_HOPF_FRAME = np.array(
    [
        [1.0, 0.0, 1.0, 0.0],  # -> (1/2, 0, 0)
        [1.0, 0.0, 0.0, -1.0],  # -> (0, 1/2, 0)
        [np.sqrt(2.0), 0.0, 0.0, 0.0],  # -> (0, 0, 1/2)
    ]
) / np.sqrt(2.0)


def project_o3(t):
    """The orthogonal 3x3 matrix ``R`` with ``hopf_project(T p) = R hopf_project(p)``."""
    if not isinstance(t, Isometry):
        t = Isometry(t)
    if t.kind == "neither":
        raise NotFiberPreserving("isometry does not preserve the Hopf fibration")
    return 2.0 * hopf_project(t(_HOPF_FRAME)).T


# ---------------------------------------------------------------------------
# great circles


def _orthonormal_completion(vecs):
    """Extend orthonormal ``vecs`` to a basis of R^4 via Gram-Schmidt on e_i."""
    basis = [np.asarray(v, dtype=float) for v in vecs]
    out = []
    cands = np.eye(4)
    # choose candidates with the largest residual first for stability
    resid = cands - sum(np.outer(cands @ b, b) for b in basis)
    order = np.argsort(-np.linalg.norm(resid, axis=1), kind="stable")
    for i in order:
        w = cands[i].copy()
        for b in basis + out:
            w -= (w @ b) * b
        n = np.linalg.norm(w)
        if n > 1e-6:
            out.append(w / n)
        if len(basis) + len(out) == 4:
            break
    return out


class GreatCircle:
    """Oriented great circle: the unit circle of the plane spanned by ``u, v``.

    ``a, b`` is an ordered orthonormal basis of the orthogonal plane; it fixes
    the sense in which :func:`rot` turns the polar circle.  When not given it
    is completed so that ``det[u, v, a, b] = +1``, which reproduces the
    orientation convention for ``C1`` and for Hopf fibers oriented along
    ``e^{it}``.
    """

    __slots__ = ("u", "v", "a", "b", "name")

    def __init__(self, u, v, perp=None, name=None):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        u = u / np.linalg.norm(u)
        v = v - (v @ u) * u
        nv = np.linalg.norm(v)
        if nv < 1e-8:
            raise ValueError("u and v do not span a plane")
        v = v / nv
        if perp is None:
            a, b = _orthonormal_completion([u, v])
            if np.linalg.det(np.stack([u, v, a, b])) < 0:
                b = -b
        else:
            a = np.asarray(perp[0], dtype=float)
            b = np.asarray(perp[1], dtype=float)
            a = a - (a @ u) * u - (a @ v) * v
            a = a / np.linalg.norm(a)
            b = b - (b @ u) * u - (b @ v) * v - (b @ a) * a
            b = b / np.linalg.norm(b)
        self.u, self.v, self.a, self.b = u, v, a, b
        self.name = name

    @classmethod
    def fiber(cls, p, name=None):
        """The Hopf fiber through ``p``, oriented along ``e^{it} p``."""
        p = normalize(p)
        (a,) = _orthonormal_completion([p, J @ p])[:1]
        return cls(p, J @ p, perp=(a, J @ a), name=name)

    @classmethod
    def through(cls, p, q, name=None):
        """Great circle through two non-antipodal points."""
        return cls(p, q, name=name)

    @property
    def projector(self):
        return np.outer(self.u, self.u) + np.outer(self.v, self.v)

    def perp(self):
        name = f"{self.name}^perp" if self.name else None
        return GreatCircle(self.a, self.b, perp=(self.u, self.v), name=name)

    def point(self, s):
        s = np.asarray(s, dtype=float)[..., None]
        return np.cos(s) * self.u + np.sin(s) * self.v

    def sample(self, n):
        return self.point(2.0 * np.pi * np.arange(n) / n)

    def transformed(self, t):
        return GreatCircle(t.m @ self.u, t.m @ self.v, perp=(t.m @ self.a, t.m @ self.b), name=self.name)

    def key(self, decimals=KEY_DECIMALS):
        """Orientation-independent identity of the circle."""
        return rounded_key(self.projector, decimals)

    def contains(self, p, tol=1e-9):
        return bool(np.all(dist_to_circle(self, p) < tol))

    def renamed(self, name):
        return GreatCircle(self.u, self.v, perp=(self.a, self.b), name=name)

    def __repr__(self):
        return f"GreatCircle(name={self.name!r}, u={np.round(self.u, 6).tolist()}, v={np.round(self.v, 6).tolist()})"


def rot(circle, t):
    """Rotation fixing ``circle`` pointwise and turning its polar circle by ``t``."""
    u, v, a, b = circle.u, circle.v, circle.a, circle.b
    m = (
        np.outer(u, u)
        + np.outer(v, v)
        + np.cos(t) * (np.outer(a, a) + np.outer(b, b))
        + np.sin(t) * (np.outer(b, a) - np.outer(a, b))
    )
    return Isometry(m, check=False)


def refl(circle):
    """Reflection through ``circle``; independent of orientation."""
    return Isometry(2.0 * circle.projector - np.eye(4), check=False)


def dist_to_circle(circle, p):
    """Distance from ``p`` to the great circle, in ``[0, pi/2]``."""
    p = np.asarray(p, dtype=float)
    inside = np.hypot(p @ circle.u, p @ circle.v)
    outside = np.hypot(p @ circle.a, p @ circle.b)
    return np.arctan2(outside, inside)


def circle_distance(c1, c2, samples=64):
    """Distance between two great circles from ``samples`` points of ``c2``."""
    return float(np.min(dist_to_circle(c1, c2.sample(samples))))


# the distinguished circle C1 = {(e^{is}, 0)} and its polar circle
C1 = GreatCircle([1, 0, 0, 0], [0, 1, 0, 0], perp=([0, 0, 1, 0], [0, 0, 0, 1]), name="C1")
C1_PERP = C1.perp()
# C^0_0 = {(cos r, sin r)} and its polar circle; the Killing field turns about the latter
C00 = GreatCircle([1, 0, 0, 0], [0, 0, 1, 0], name="C00")
C_HALF_PI = GreatCircle([0, 1, 0, 0], [0, 0, 0, 1], perp=([1, 0, 0, 0], [0, 0, 1, 0]), name="C^{pi/2}_{pi/2}")


class Arc:
    """Minor great-circle arc from ``p0`` to ``p1``."""

    __slots__ = ("p0", "p1")

    def __init__(self, p0, p1):
        self.p0 = np.asarray(p0, dtype=float)
        self.p1 = np.asarray(p1, dtype=float)

    @property
    def length(self):
        return float(s3_distance(self.p0, self.p1))

    @property
    def circle(self):
        return GreatCircle.through(self.p0, self.p1)

    def points(self, n):
        """``n + 1`` points equally spaced in arc length, endpoints included."""
        return slerp(self.p0, self.p1, np.linspace(0.0, 1.0, n + 1))

    def midpoint(self):
        return normalize(self.p0 + self.p1)

    def transformed(self, t):
        return Arc(t.m @ self.p0, t.m @ self.p1)

    def reversed(self):
        return Arc(self.p1, self.p0)

    def key(self, decimals=KEY_DECIMALS):
        """Orientation-free identity: the unordered endpoint pair."""
        k0, k1 = rounded_key(self.p0, decimals), rounded_key(self.p1, decimals)
        return (k0, k1) if k0 <= k1 else (k1, k0)

    def __repr__(self):
        return f"Arc({np.round(self.p0, 6).tolist()} -> {np.round(self.p1, 6).tolist()})"


def slerp(p0, p1, s):
    """Points at fraction ``s`` of the minor arc from ``p0`` to ``p1``."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    om = float(s3_distance(p0, p1))
    s = np.asarray(s, dtype=float)[..., None]
    if om < 1e-15:
        return np.broadcast_to(p0, s.shape[:-1] + (4,)).copy()
    return (np.sin((1.0 - s) * om) * p0 + np.sin(s * om) * p1) / np.sin(om)
