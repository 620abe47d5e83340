import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from s3minimal.errors import InvalidPoint, NotFiberPreserving
from s3minimal.s3core import (
    C1,
    C1_PERP,
    GreatCircle,
    Isometry,
    complex_matrix,
    dist_to_circle,
    from_c2,
    hopf_project,
    hopf_rotation,
    is_orthogonal,
    project_o3,
    random_s3_points,
    refl,
    rot,
    s3_distance,
    s3_point,
    to_c2,
)

PI = np.pi
R2 = np.sqrt(2.0)

angles = st.floats(-2 * PI, 2 * PI, allow_nan=False)
seeds = st.integers(0, 2**32 - 1)


def random_circle(seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    return GreatCircle(q[:, 0], q[:, 1])


def random_fiber_preserving(seed):
    """A random unitary or antiunitary map from a random U(2) matrix."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    q, _ = np.linalg.qr(z)
    return Isometry.from_complex(q, conjugate=bool(rng.integers(2)))


# -- points and the Hopf projection ------------------------------------------


def test_s3_point_rejects_off_sphere():
    with pytest.raises(InvalidPoint):
        s3_point([1.0, 1e-5, 0, 0])
    with pytest.raises(InvalidPoint):
        s3_point([1.0, 0, 0])
    assert s3_point([0, 0, 0, 1.0]).shape == (4,)


def test_c2_round_trip(rng):
    x = random_s3_points(rng, 10)
    w1, w2 = to_c2(x)
    assert np.allclose(from_c2(w1, w2), x)


def test_hopf_north_pole():
    assert np.allclose(hopf_project(from_c2(1, 0)), [0, 0, 0.5])


def test_hopf_of_c2_base_point():
    assert np.allclose(hopf_project(from_c2(1 / R2, 1j / R2)), [0, -0.5, 0], atol=1e-15)


def test_hopf_constant_along_fiber():
    s = np.linspace(0, 2 * PI, 50)
    p = from_c2(np.exp(1j * s) * np.cos(PI / 8), np.exp(1j * s) * np.sin(PI / 8))
    assert np.allclose(hopf_project(p), [R2 / 4, 0, R2 / 4], atol=1e-14)


def test_hopf_image_has_radius_half(rng):
    y = hopf_project(random_s3_points(rng, 200))
    assert np.allclose(np.linalg.norm(y, axis=1), 0.5, atol=1e-12)


# -- rotations and reflections -----------------------------------------------


def test_rot_c1_multiplies_second_coordinate(rng):
    s = 0.7
    w1, w2 = to_c2(random_s3_points(rng, 20))
    assert np.allclose(rot(C1, s)(from_c2(w1, w2)), from_c2(w1, np.exp(1j * s) * w2))


def test_rot_zero_is_identity():
    assert rot(random_circle(1), 0.0).allclose(np.eye(4))


def test_refl_is_rot_pi():
    for seed in range(5):
        c = random_circle(seed)
        assert rot(c, PI).allclose(refl(c))


def test_refl_gamma12_matrix(cfg4):
    m = complex_matrix(np.array([[1, -1j], [1j, -1]]) / R2)
    assert refl(cfg4.rcol["G12"]).allclose(m)


def test_refl_gamma23_matrix(cfg4):
    e = np.exp(1j * PI / 4)
    m = complex_matrix(np.array([[0, np.conj(e)], [e, 0]]))
    assert refl(cfg4.rcol["G23"]).allclose(m)


def test_refl_independent_of_orientation():
    c = random_circle(3)
    flipped = GreatCircle(c.u, c.v, perp=(c.b, c.a))
    assert refl(c).allclose(refl(flipped))
    assert not rot(c, 0.4).allclose(rot(flipped, 0.4))


def test_rot_moves_perp_circle_by_t():
    c = random_circle(7)
    t = 1.1
    pts = c.perp().sample(32)
    assert np.allclose(s3_distance(pts, rot(c, t)(pts)), t)
    assert np.allclose(rot(c, t)(c.sample(32)), c.sample(32))
    # sense of rotation follows the stored perp basis a -> b
    assert np.allclose(rot(c, PI / 2)(c.a), c.b)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, t1=angles, t2=angles)
def test_rot_is_one_parameter_group(seed, t1, t2):
    c = random_circle(seed)
    assert (rot(c, t1) @ rot(c, t2)).allclose(rot(c, t1 + t2))
    assert is_orthogonal(rot(c, t1).m)


@settings(max_examples=30, deadline=None)
@given(seed=seeds)
def test_refl_involution_and_fixed_set(seed):
    c = random_circle(seed)
    r = refl(c)
    assert (r @ r).allclose(np.eye(4))
    assert np.allclose(r(c.sample(16)), c.sample(16))
    perp = c.perp().sample(16)
    assert np.allclose(r(perp), -perp)
    # points off C and C^perp are moved
    rng = np.random.default_rng(seed)
    p = random_s3_points(rng, 50)
    d = dist_to_circle(c, p)
    off = (d > 1e-3) & (d < PI / 2 - 1e-3)
    assert np.all(np.linalg.norm(r(p[off]) - p[off], axis=1) > 1e-6)


# -- distances ----------------------------------------------------------------


def test_dist_to_c1_is_prism_radius():
    r = np.linspace(0, PI / 2, 11)
    z, th = 0.3, -1.2
    p = from_c2(np.exp(1j * z) * np.cos(r), np.exp(1j * (z + th)) * np.sin(r))
    assert np.allclose(dist_to_circle(C1, p), r, atol=1e-15)


def test_dist_to_perp_circle_is_right_angle():
    c = random_circle(11)
    assert np.allclose(dist_to_circle(c, c.perp().sample(64)), PI / 2)


def test_dist_gamma12_to_c1(cfg4):
    assert np.allclose(dist_to_circle(C1, cfg4.rcol["G12"].sample(64)), PI / 8)


# -- projection to O(3) -------------------------------------------------------


def test_project_identity():
    assert np.allclose(project_o3(Isometry.identity()), np.eye(3))


def test_fiber_rotation_projects_to_identity():
    t = 0.9
    g = rot(C1, t) @ rot(C1_PERP, t)
    assert g.allclose(hopf_rotation(t))
    assert np.allclose(project_o3(g), np.eye(3), atol=1e-14)


def test_project_refl_gamma12(cfg4, rng):
    g = refl(cfg4.rcol["G12"])
    R = project_o3(g)
    axis = np.array([0, -1, 1]) / R2
    # rotation by pi about the Hopf image of Gamma_12
    assert np.allclose(R, 2 * np.outer(axis, axis) - np.eye(3), atol=1e-14)
    p = random_s3_points(rng, 100)
    assert np.max(np.abs(hopf_project(g(p)) - hopf_project(p) @ R.T)) < 1e-10


def test_project_rejects_non_fiber_preserving():
    with pytest.raises(NotFiberPreserving):
        project_o3(rot(GreatCircle([1, 0, 0, 0], [0, 0, 1, 0]), 0.3))


def test_kind_classification():
    assert rot(C1, 0.3).kind == "unitary"
    assert Isometry.from_complex(np.eye(2), conjugate=True).kind == "antiunitary"
    assert refl(GreatCircle([1, 0, 0, 0], [0, 0, 1, 0])).kind == "antiunitary"
    assert rot(GreatCircle([1, 0, 0, 0], [0, 0, 1, 0]), 0.3).kind == "neither"
    with pytest.raises(ValueError):
        Isometry(np.ones((4, 4)))


@settings(max_examples=40, deadline=None)
@given(s1=seeds, s2=seeds)
def test_project_is_homomorphism(s1, s2):
    a, b = random_fiber_preserving(s1), random_fiber_preserving(s2)
    Ra, Rb, Rab = project_o3(a), project_o3(b), project_o3(a @ b)
    assert np.allclose(Rab, Ra @ Rb, atol=1e-12)
    assert np.allclose(Ra.T @ Ra, np.eye(3), atol=1e-12)
    if a.kind == "unitary":
        assert np.linalg.det(Ra) > 0


def test_conjugation_identity_for_generators(cfg4, rng):
    p = random_s3_points(rng, 100)
    for g in cfg4.generators():
        R = project_o3(g)
        assert np.max(np.abs(hopf_project(g(p)) - hopf_project(p) @ R.T)) < 1e-10
