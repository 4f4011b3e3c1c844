import numpy as np
import pytest

from czreeb.cz_geometric import cz_geometric, winding_interval
from czreeb.errors import BoundaryCase, InequalityViolated, SignChange
from czreeb.sp_path import rotation_matrix
from czreeb.strip import (
    TwistFunction,
    build_model_path,
    build_twist,
    catalog_index,
    catalog_interval_ok,
    choose_delta,
    classify_end_matrix,
    comparison_loop,
    drd_closed_form,
    drd_generic,
    k_from_index,
    manufactured_path,
    strip_determinant_check,
    strip_report,
)

from helpers import strip_matrix, strip_winding

CASES = ["a", "b", "c", "d"]


@pytest.mark.parametrize("case", CASES)
def test_classification_round_trip(case):
    rng = np.random.default_rng(ord(case))
    for _ in range(5):
        m, param = strip_matrix(rng, case)
        cls = classify_end_matrix(m)
        assert cls.case == case
        if case == "b":
            # shears of one sign are all conjugate: only the sign is invariant
            assert np.sign(cls.param) == np.sign(param)
        else:
            assert abs(cls.param - param) < 1e-8 * max(1, abs(param))
        assert cls.reconstruction_error() < 1e-10


@pytest.mark.parametrize("case", CASES)
def test_model_path_catalog(case):
    rng = np.random.default_rng(10 + ord(case))
    for _ in range(3):
        cls = classify_end_matrix(strip_matrix(rng, case)[0])
        K = build_model_path(cls)
        assert cz_geometric(K).index == catalog_index(cls)
        assert catalog_interval_ok(cls, winding_interval(K))


@pytest.mark.parametrize("case", CASES)
def test_comparison_loop_and_twist(case):
    rng = np.random.default_rng(20 + ord(case))
    for _ in range(3):
        m, param = strip_matrix(rng, case)
        cls = classify_end_matrix(m)
        n = strip_winding(case, param, rng)
        phi = manufactured_path(cls, n, wiggle=rng.uniform(0, 1))
        comp = comparison_loop(phi, cls)
        assert comp.relation_holds and comp.maslov == -comp.k
        tw = build_twist(cls, comp.k)
        assert tw.boundary_defect() < 1e-12
        margin, sign = strip_determinant_check(cls, tw)
        assert margin > 0 and sign == -1
        assert np.max(np.abs(drd_closed_form(cls, tw) - drd_generic(cls, tw))) < 1e-9


def test_boundary_cases():
    with pytest.raises(BoundaryCase):
        classify_end_matrix(np.eye(2))
    with pytest.raises(BoundaryCase):
        classify_end_matrix(-np.eye(2))
    with pytest.raises(BoundaryCase):
        classify_end_matrix(rotation_matrix(1e-9))
    # trace within the band but not exactly parabolic
    a = 1 + 1e-5
    with pytest.raises(BoundaryCase):
        classify_end_matrix(np.diag([a, 1 / a]))


def test_k_from_index():
    cls_a = classify_end_matrix(np.diag([2.0, 0.5]))
    assert k_from_index(cls_a, 4) == 2
    with pytest.raises(ValueError):
        k_from_index(cls_a, 3)
    cls_c = classify_end_matrix(rotation_matrix(1.0))
    assert k_from_index(cls_c, 5) == 2
    with pytest.raises(ValueError):
        k_from_index(cls_c, 4)


def test_sign_change_detected():
    a = np.exp(3.0)
    cls = classify_end_matrix(np.diag([a, 1 / a]))
    t = np.linspace(0, 1, 1025)
    # linear twist: b' = -2.5 loses against 3 sin 2b near b = -3 pi / 4
    bad = TwistFunction("a", 1, t, -2.5 * t, np.full_like(t, -2.5))
    with pytest.raises(SignChange):
        strip_determinant_check(cls, bad)


def test_choose_delta():
    delta, C = choose_delta(2.0)
    assert C * delta ** 4 < delta ** 2 / 2
    assert -delta + 3 * 2.0 * delta ** 2 < 0


def test_twist_needs_positive_k():
    cls = classify_end_matrix(np.diag([2.0, 0.5]))
    with pytest.raises(ValueError):
        build_twist(cls, 0)


def test_report_from_matrix():
    r = strip_report(m=np.array([[2.0, 1.0], [1.0, 1.0]]), k=2)
    assert r["case"] == "a" and r["maslov_M"] == -2 and r["sign"] == -1
    assert r["min_abs_drd"] > 0
    with pytest.raises(ValueError):
        strip_report(m=np.array([[2.0, 1.0], [1.0, 1.0]]))
