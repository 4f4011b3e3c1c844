import math
import warnings

import numpy as np
import pytest

from czreeb.cz_geometric import cz_geometric
from czreeb.errors import NonMinimalWarning, NoConvergence, SingularSystem
from czreeb.reeb import (
    GOLDEN,
    GlobalXiFrame,
    StarShapedLevel,
    action,
    defining_residuals,
    ellipsoid_cz_formula,
    ellipsoid_orbit,
    find_orbit,
    flow,
    flow_with_variation,
    golden_ellipsoid,
    hopf_point,
    linearized_flow,
    monomial_exponents,
    normalize,
    orbit_cz,
    random_perturbation,
    reeb_at,
    reeb_batch,
    reeb_closed_form,
    trajectory,
)


def ellipsoid_flow_oracle(r1, r2, p, t):
    """Closed form: ``z_j -> e^{2 i t / r_j^2} z_j``, then back to S^3."""
    z1 = complex(p[0], p[1]) * np.exp(2j * t / r1 ** 2)
    z2 = complex(p[2], p[3]) * np.exp(2j * t / r2 ** 2)
    return normalize(np.array([z1.real, z1.imag, z2.real, z2.imag]))


@pytest.fixture(scope="module")
def perturbed():
    c = random_perturbation(np.random.default_rng(3))
    return StarShapedLevel.perturbed_ellipsoid(1.0, math.sqrt(GOLDEN), c, eps=1e-2)


def random_points(n, seed=0):
    return normalize(np.random.default_rng(seed).normal(size=(n, 4)))


def test_monomial_count():
    E = monomial_exponents()
    assert len(E) == 69
    assert E.sum(axis=1).min() == 1 and E.sum(axis=1).max() == 4


def test_reeb_matches_closed_form(perturbed):
    X = random_points(50)
    for level in (golden_ellipsoid(), perturbed, StarShapedLevel.round()):
        assert np.max(np.abs(reeb_batch(level, X) - reeb_closed_form(level, X))) < 1e-12


def test_defining_residuals(perturbed):
    for p in random_points(10, 1):
        R = reeb_at(perturbed, p)
        assert defining_residuals(perturbed, p, R) < 1e-12


def test_round_sphere_reeb():
    p = random_points(1, 2)[0]
    R = reeb_at(StarShapedLevel.round(), p)
    assert np.allclose(R, 2 * np.array([-p[1], p[0], -p[3], p[2]]), atol=1e-14)


def test_reeb_off_sphere():
    with pytest.raises(ValueError):
        reeb_at(golden_ellipsoid(), np.array([2.0, 0, 0, 0]))


def test_singular_level():
    # f = 0 makes the contact form degenerate
    flat = StarShapedLevel(lambda X: np.zeros(len(X)), lambda X: np.zeros_like(X))
    with pytest.raises(SingularSystem):
        reeb_batch(flat, random_points(2))


def test_gradient_check(perturbed):
    assert perturbed.check() < 1e-7
    assert golden_ellipsoid().check() < 1e-7


def test_level_json_round_trip(perturbed):
    back = StarShapedLevel.from_json(perturbed.to_json())
    X = random_points(5, 4)
    assert np.array_equal(back.f(X), perturbed.f(X))
    with pytest.raises(ValueError):
        StarShapedLevel.from_json({"kind": "torus"})


def test_flow_against_oracle():
    level = golden_ellipsoid()
    r2 = math.sqrt(GOLDEN)
    p = random_points(1, 5)[0]
    for t in (0.7, 3.1, -2.2):
        assert np.linalg.norm(flow(level, p, t) - ellipsoid_flow_oracle(1.0, r2, p, t)) < 1e-8


def test_flow_reversible_and_group_property(perturbed):
    p = random_points(1, 6)[0]
    q = flow(perturbed, p, 1.3)
    assert np.linalg.norm(flow(perturbed, q, -1.3) - p) < 1e-8
    assert np.linalg.norm(flow(perturbed, flow(perturbed, p, 0.5), 0.8) - q) < 1e-8


def test_trajectory_and_variation():
    level = golden_ellipsoid()
    p = random_points(1, 7)[0]
    X = trajectory(level, p, [0.0, 0.5, 1.0])
    assert np.allclose(X[0], p)
    (x1, W), _ = flow_with_variation(level, p, np.eye(4)[:1], 1.0)
    assert np.allclose(x1, X[2], atol=1e-9)
    # FD check of the variational vector along e1 projected to the tangent space
    h = 1e-6
    e = np.eye(4)[0] - p[0] * p
    fd = (flow(level, normalize(p + h * e), 1.0) - flow(level, normalize(p - h * e), 1.0)) / (2 * h)
    Wt = W[0] - np.dot(W[0], x1) * x1
    assert np.linalg.norm(Wt - fd) < 1e-4 * max(1.0, np.linalg.norm(fd))


def test_frame_defects(perturbed):
    lam, dl = GlobalXiFrame(perturbed).defects(random_points(30, 8))
    assert lam < 1e-13 and dl < 1e-12


def test_find_orbit_short_circle():
    level = golden_ellipsoid()
    orb = find_orbit(level, hopf_point(0.05, 0.2, 1.0), 3.0)
    assert abs(orb.period - math.pi) < 1e-9
    assert orb.minimal and orb.residual < 1e-9
    assert abs(action(level, orb) - orb.period) < 1e-9


def test_find_orbit_double_cover_warns():
    level = golden_ellipsoid()
    with pytest.warns(NonMinimalWarning):
        orb = find_orbit(level, np.array([1.0, 0, 0, 0]), 2 * math.pi)
    assert orb.multiplicity == 2 and not orb.minimal


def test_find_orbit_no_convergence():
    with pytest.raises(NoConvergence):
        find_orbit(golden_ellipsoid(), random_points(1, 9)[0], 1.0, max_iter=1)


def test_find_orbit_rejects_bad_period():
    with pytest.raises(ValueError):
        find_orbit(golden_ellipsoid(), np.array([1.0, 0, 0, 0]), -1.0)


def test_perturbed_orbit_near_circle(perturbed):
    orb = find_orbit(perturbed, hopf_point(0.02, 0.0, 0.0), math.pi)
    assert abs(orb.period - math.pi) < 0.05
    assert orb.residual < 1e-9
    assert cz_geometric(linearized_flow(perturbed, orb)).index == 3


@pytest.mark.parametrize("k", [1, 2, 3])
def test_exact_circle_covers(k):
    level = golden_ellipsoid()
    orb = ellipsoid_orbit(level, 1)
    assert orbit_cz(level, orb, cover=k).index == ellipsoid_cz_formula(GOLDEN, k, 1)


def test_long_circle_index():
    level = golden_ellipsoid()
    assert orbit_cz(level, ellipsoid_orbit(level, 2)).index == 5
    assert ellipsoid_cz_formula(GOLDEN, 1, 2) == 5


def test_linearized_flow_closure():
    level = golden_ellipsoid()
    path = linearized_flow(level, ellipsoid_orbit(level, 1))
    assert path.closure < 1e-9
    # the linearised return map of the short circle is a rotation by 2 pi tau
    ang = math.atan2(path.end[1, 0], path.end[0, 0]) % (2 * math.pi)
    assert abs(ang - (2 * math.pi * GOLDEN) % (2 * math.pi)) < 1e-7


def test_formula_values():
    assert [ellipsoid_cz_formula(GOLDEN, k, 1) for k in range(1, 6)] == [3, 7, 9, 13, 17]
