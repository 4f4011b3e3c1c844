import cmath
import math

import numpy as np
import pytest

from czreeb.errors import NoReturnWithinHorizon, TransversalityLost
from czreeb.reeb import GOLDEN, StarShapedLevel, golden_ellipsoid, random_perturbation
from czreeb.sections import (
    area_preservation_check,
    ellipsoid_section,
    global_section_audit,
    return_map,
    return_map_disk,
    return_map_single,
)

R2SQ = GOLDEN   # r2^2 on the golden ellipsoid, r1 = 1


@pytest.fixture(scope="module")
def level():
    return golden_ellipsoid()


@pytest.fixture(scope="module")
def perturbed():
    c = random_perturbation(np.random.default_rng(21))
    return StarShapedLevel.perturbed_ellipsoid(1.0, math.sqrt(GOLDEN), c, eps=1e-3)


def test_page_margins(level):
    assert abs(ellipsoid_section(level).transversality_margin() - 2 / R2SQ) < 1e-12
    assert abs(ellipsoid_section(level, dual=True).transversality_margin() - 2.0) < 1e-12


def test_page_points(level):
    sec = ellipsoid_section(level)
    w = 0.3 - 0.4j
    x = sec.point(w)
    assert abs(np.linalg.norm(x) - 1) < 1e-15 and sec.coordinate(x) == w
    assert sec.crossing(x) == 0 and sec.on_page_side(x)
    with pytest.raises(ValueError):
        sec.point(1.2)


def test_return_map_is_rotation(level):
    sec = ellipsoid_section(level)
    w = 0.4 + 0.25j
    w2, t = return_map_disk(level, sec, w)
    assert abs(t - math.pi * R2SQ) < 1e-8
    assert abs(w2 - w * cmath.exp(2j * math.pi * R2SQ)) < 1e-8


def test_dual_return_map(level):
    sec = ellipsoid_section(level, dual=True)
    w = -0.2 + 0.5j
    w2, t = return_map_disk(level, sec, w)
    assert abs(t - math.pi) < 1e-8
    assert abs(w2 - w * cmath.exp(2j * math.pi / R2SQ)) < 1e-8


def test_iterated_return_two_routes(level):
    sec = ellipsoid_section(level)
    w = 0.1 + 0.6j
    a, ta = return_map_disk(level, sec, w, k=3)
    b, tb = return_map_single(level, sec, w, 3)
    assert abs(a - b) < 1e-9 and abs(ta - tb) < 1e-9


def test_area_coordinates_round_trip(perturbed):
    sec = ellipsoid_section(perturbed)
    for w in (0.0, 0.5j, -0.7 + 0.1j):
        assert abs(sec.from_area_coordinate(sec.area_coordinate(w)) - w) < 1e-12


def test_return_requires_page_point(level):
    sec = ellipsoid_section(level)
    with pytest.raises(ValueError):
        return_map(level, sec, np.array([0.0, 0.0, 0.0, 1.0]))


def test_no_return_within_horizon(level):
    sec = ellipsoid_section(level)
    with pytest.raises(NoReturnWithinHorizon):
        return_map(level, sec, 0.3, horizon=1.0)


def test_perturbed_page_margin(perturbed, level):
    base = ellipsoid_section(level).transversality_margin()
    assert ellipsoid_section(perturbed).transversality_margin() > 0.5 * base
    with pytest.raises(TransversalityLost):
        ellipsoid_section(perturbed, check_ratio=1.5)


def test_perturbed_area_preservation(perturbed):
    sec = ellipsoid_section(perturbed)
    assert area_preservation_check(perturbed, sec, points=[0.3 + 0.1j]) < 1e-4


def test_small_audit(perturbed):
    sec = ellipsoid_section(perturbed, dual=True)
    rep = global_section_audit(perturbed, sec, n=5, seed=2)
    assert rep["passed"] and rep["forward"]["count"] == 5 and rep["backward"]["count"] == 5
