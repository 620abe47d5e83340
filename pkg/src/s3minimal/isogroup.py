"""Finite subgroups of O(4): closure, orbits, stabilizers, Hopf kernel/image."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ClosureCapExceeded, NonOrthogonalGenerator, NotFiberPreserving
from .s3core import (
    C1,
    C1_PERP,
    EPS_MAT,
    KEY_DECIMALS,
    Isometry,
    is_orthogonal,
    project_o3,
    rot,
    rounded_key,
)


@dataclass
class FiniteGroup:
    """A finite matrix group stored as an explicit, deduplicated element list."""

    elements: list
    generators: list = field(default_factory=list)
    decimals: int = KEY_DECIMALS

    def __post_init__(self):
        self._index = {rounded_key(g.m, self.decimals): i for i, g in enumerate(self.elements)}

    @property
    def order(self):
        return len(self.elements)

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __contains__(self, g):
        m = g.m if hasattr(g, "m") else np.asarray(g)
        return rounded_key(m, self.decimals) in self._index

    def index_of(self, g):
        m = g.m if hasattr(g, "m") else np.asarray(g)
        return self._index.get(rounded_key(m, self.decimals))

    def matrices(self):
        return np.stack([g.m for g in self.elements])

    def is_closed(self, samples=None, rng=None):
        """Closure under products and inverses.

        Exhaustive for groups up to 2000 elements, otherwise ``samples``
        random pairs.
        """
        els = self.elements
        n = len(els)
        if samples is None and n <= 2000:
            mats = self.matrices()
            for g in els:
                if g.inverse() not in self:
                    return False
                prods = np.einsum("ij,njk->nik", g.m, mats)
                for p in prods:
                    if rounded_key(p, self.decimals) not in self._index:
                        return False
            return True
        rng = rng or np.random.default_rng(0)
        samples = samples or 20000
        for _ in range(samples):
            i, j = rng.integers(0, n, 2)
            if (els[i] @ els[j]) not in self or els[i].inverse() not in self:
                return False
        return True


def default_cap(n):
    return 64 * n + 64


def generate(gens, cap=10_000, decimals=KEY_DECIMALS):
    """Breadth-first closure of ``gens``.

    Elements are discovered by left-multiplying by the generators in the
    order given, starting from the identity, so the element order is
    deterministic.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    gens = list(gens)
    for i, g in enumerate(gens):
        if not is_orthogonal(g.m, EPS_MAT):
            raise NonOrthogonalGenerator(f"generator {i} is not orthogonal")
    ident = Isometry.identity()
    elements = [ident]
    seen = {rounded_key(ident.m, decimals)}
    queue = deque([ident])
    while queue:
        g = queue.popleft()
        for s in gens:
            h = Isometry(s.m @ g.m, check=False)
            k = rounded_key(h.m, decimals)
            if k in seen:
                continue
            if len(elements) >= cap:
                raise ClosureCapExceeded(cap, len(elements) + 1)
            seen.add(k)
            elements.append(h)
            queue.append(h)
    return FiniteGroup(elements, gens, decimals)


def _act_default(g, obj):
    if hasattr(obj, "transformed"):
        return obj.transformed(g)
    return g(obj)


def _key_default(obj, decimals):
    if hasattr(obj, "key"):
        return obj.key(decimals)
    return rounded_key(obj, decimals)


def tol_to_decimals(tol):
    return max(0, int(round(-np.log10(tol))))


def orbit(group, obj, tol=1e-9, act=None, key=None):
    """Deduplicated orbit of ``obj``, in group element order.

    ``act(g, obj)`` and ``key(obj, decimals)`` default to the object's own
    ``transformed``/``key`` methods, or to matrix action on a point array.
    """
    act = act or _act_default
    key = key or _key_default
    dec = tol_to_decimals(tol)
    out, seen = [], set()
    for g in group.elements:
        img = act(g, obj)
        k = key(img, dec)
        if k not in seen:
            seen.add(k)
            out.append(img)
    return out


def stabilizer(group, obj, tol=1e-9, act=None, key=None):
    """Subgroup of elements mapping ``obj`` to itself (setwise)."""
    act = act or _act_default
    key = key or _key_default
    dec = tol_to_decimals(tol)
    k0 = key(obj, dec)
    els = [g for g in group.elements if key(act(g, obj), dec) == k0]
    return FiniteGroup(els, [], group.decimals)


def hopf_kernel_image(group):
    """Image of ``group`` in O(3) under the Hopf-induced homomorphism, and its kernel."""
    images, kernel = [], []
    seen = {}
    for g in group.elements:
        if g.kind == "neither":
            raise NotFiberPreserving("group element does not preserve the Hopf fibers")
        r = project_o3(g)
        k = rounded_key(r, group.decimals)
        if k not in seen:
            seen[k] = len(images)
            images.append(r)
        if np.max(np.abs(r - np.eye(3))) < 1e-9:
            kernel.append(g)
    return images, FiniteGroup(kernel, [], group.decimals)


def preserves_cube(r, tol=1e-9):
    """True if the 3x3 matrix maps the cube [-1,1]^3 onto itself."""
    corners = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], dtype=float)
    img = corners @ np.asarray(r).T
    keys = {rounded_key(c, 6) for c in corners}
    return all(rounded_key(c, 6) in keys for c in img) and np.allclose(np.abs(img), 1.0, atol=tol)


def is_cyclic(group):
    """True if some element has order equal to the group order."""
    n = group.order
    for g in group.elements:
        p = g.m.copy()
        k = 1
        while np.max(np.abs(p - np.eye(4))) > 1e-9:
            p = g.m @ p
            k += 1
            if k > n:
                break
        if k == n:
            return True
    return False


def fiber_rotation_element(t):
    """``rot(C1, t) rot(C1^perp, t)``: multiplication by e^{it}."""
    return rot(C1, t) @ rot(C1_PERP, t)


def _diag(a, b):
    from .s3core import diag_c2

    return diag_c2(a, b)


def _product(isos):
    out = Isometry.identity()
    for t in isos:
        out = out @ t
    return out


def isoclinic_along(circle, tori, t=np.pi / 4):
    """``rot_L^t rot_{L^perp}^t`` with the relative orientation preserving the torus through ``L``.

    Returns ``(element, torus name)``; both relative orientations are tried.
    """
    from .s3core import rot as _rot

    perp = circle.perp()
    host = [name for name, tor in tori.items() if np.all(tor.contains(circle.sample(16)))]
    for sign in (1.0, -1.0):
        g = _rot(circle, t) @ _rot(perp, sign * t)
        for name in host:
            tor = tori[name]
            if tor.transformed(g).key() == tor.key():
                return g, name
    return None, None


def _oriented_toward(circle, start_circle, end_circle):
    """Orthonormal pair (p, w): p on ``circle`` and ``start_circle``, w pointing along
    ``circle`` toward the nearest point where it meets ``end_circle``."""
    from .tessellation import _circle_intersections

    p = _circle_intersections(circle, start_circle)[0]
    qs = _circle_intersections(circle, end_circle)
    q = qs[np.argmax(qs @ p)]
    w = q - (q @ p) * p
    return p, w / np.linalg.norm(w)


def oriented_isoclinic(L, start, end, t=np.pi / 4):
    """``rot_L^t rot_{L^perp}^t`` with ``L`` and ``L^perp`` each oriented from
    their meeting point with ``start`` toward the closest meeting point with ``end``."""
    from .s3core import GreatCircle
    from .s3core import rot as _rot

    p, w = _oriented_toward(L, start, end)
    pp, wp = _oriented_toward(L.perp(), start, end)
    oriented = GreatCircle(p, w, perp=(pp, wp))
    return _rot(oriented, t) @ _rot(oriented.perp(), t)


def membership_checks(group, cfg):
    """Boolean report of the listed membership claims and composite identities."""
    from .s3core import refl as _refl

    N = cfg.N
    rc = cfg.rcol
    R = {n: _refl(c) for n, c in rc.items()}
    out = {}
    out["identity_in_group"] = Isometry.identity() in group
    turn_shift = rot(C1, np.pi / 2) @ rot(C1, np.pi / N) @ rot(C1_PERP, np.pi / N)
    out["turn_and_shift_in_group"] = turn_shift in group
    iso_ok = True
    for L in cfg.scaf_circles:
        g, _ = isoclinic_along(L, cfg.tori)
        if g is None or g not in group:
            iso_ok = False
    out["isoclinic_along_scaf_in_group"] = iso_ok
    target = R["G12"] @ _refl(C1)
    out["isoclinic_equals_refl_G12_refl_C1"] = all(
        oriented_isoclinic(L, C1, rc["G12"]).allclose(target) for L in cfg.scaf["T3"]
    )
    out["axial_reflections_in_group"] = all(_refl(p.axis) in group for p in cfg.prisms)

    e = np.exp(1j * np.pi / 4)
    composites = {
        "G12.G1p2.G1p3.G13": (("G12", "G1p2", "G1p3", "G13"), _diag(-1j, 1j)),
        "G12p.G1p2p.G1p3.G13": (("G12p", "G1p2p", "G1p3", "G13"), _diag(1j, -1j)),
        "G13p.G1p3p.G1p3.G13": (("G13p", "G1p3p", "G1p3", "G13"), _diag(-1, -1)),
        "G13.G23.G12": (("G13", "G23", "G12"), _diag(e, -np.conj(e))),
        "G13p.G2p3p.G12p": (("G13p", "G2p3p", "G12p"), _diag(e, -np.conj(e))),
        "G13p.G23p.G12": (("G13p", "G23p", "G12"), _diag(np.conj(e), -e)),
        "G13.G2p3.G12p": (("G13", "G2p3", "G12p"), _diag(np.conj(e), -e)),
    }
    for name, (chain, expect) in composites.items():
        prod = _product([R[n] for n in chain])
        out[f"composite {name}"] = prod.allclose(expect, 1e-10)

    # the two centre conditions used to extend the explicit colouring
    from .tessellation import center_formula

    even = {
        tuple(np.round(center_formula(N, k, l), 8))
        for k in range(2 * N)
        for l in range(4)
        if (k + l) % 2 == 0
    }
    w00 = center_formula(N, 0, 0)
    first_four = True
    for i in ("2", "2p"):
        for j in ("3", "3p"):
            g = R[f"G1{j}"] @ R[f"G{i}{j}"] @ R[f"G1{i}"]
            if tuple(np.round(g(w00), 8)) not in even:
                first_four = False
    out["first_four_center_condition"] = first_four
    last_three = True
    for j in ("2", "2p", "3p"):
        g = R[f"G1{j}"] @ R[f"G1p{j}"] @ R["G1p3"] @ R["G13"]
        if tuple(np.round(g(w00), 8)) not in even:
            last_three = False
    out["last_three_center_condition"] = last_three
    return out
