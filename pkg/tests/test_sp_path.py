import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from czreeb.errors import (
    DegenerateSection,
    GridMismatch,
    LiftResolutionFailure,
    NonSymplecticPath,
    NotALoop,
)
from czreeb.sp_path import (
    I2,
    J0,
    SymplecticPath,
    angle_lift,
    check_symplectic,
    concatenate,
    conjugate,
    det2,
    expm_sp,
    iterate,
    lift_angles,
    loop_degree,
    maslov_index,
    path_inverse,
    path_product,
    rotation_matrix,
    sp_inverse,
    wind_rel,
)

from helpers import random_loop, random_path, random_sl2

finite = st.floats(-3, 3, allow_nan=False)


@given(a=finite, b=finite, c=finite, t=st.floats(-2, 2))
def test_expm_sp_matches_scipy(a, b, c, t):
    Y = np.array([[a, b], [c, -a]])
    assert np.allclose(expm_sp(Y, t), expm(t * Y), rtol=1e-9, atol=1e-9)


@given(a=finite, b=finite, c=finite)
def test_expm_sp_is_symplectic(a, b, c):
    Y = np.array([[a, b], [c, -a]])
    E = expm_sp(Y)
    assert abs(det2(E) - 1) < 1e-8 * max(1.0, np.abs(E).max() ** 2)


def test_sp_inverse():
    rng = np.random.default_rng(0)
    m = random_sl2(rng)
    assert np.allclose(sp_inverse(m) @ m, I2, atol=1e-14)
    assert np.allclose(m.T @ J0 @ m, J0, atol=1e-13)


def test_rotation_derivative_closed_form():
    p = SymplecticPath.rotation(0.7)
    t = np.linspace(0, 1, 11)
    fd = (p(t + 1e-6) - p(t - 1e-6)) / 2e-6
    assert np.allclose(p.derivative(t), fd, atol=1e-7)


def test_check_symplectic_rejects():
    with pytest.raises(NonSymplecticPath):
        check_symplectic(np.diag([2.0, 1.0]))
    with pytest.raises(NonSymplecticPath):
        check_symplectic(np.eye(3))


def test_validate_start():
    bad = SymplecticPath(lambda t: rotation_matrix(t + 0.1))
    with pytest.raises(NonSymplecticPath):
        bad.validate()
    SymplecticPath.hyperbolic(0.5).validate()


def test_exponential_requires_traceless():
    with pytest.raises(NonSymplecticPath):
        SymplecticPath.exponential(np.eye(2))


def test_from_samples_grid_errors():
    t = np.linspace(0, 1, 9)
    mats = rotation_matrix(t)
    with pytest.raises(GridMismatch):
        SymplecticPath.from_samples(t[:-1], mats)
    with pytest.raises(GridMismatch):
        SymplecticPath.from_samples(t * 0.9, mats)
    with pytest.raises(GridMismatch):
        SymplecticPath.from_samples(t[:3], mats[:3])


def test_from_samples_reproduces_nodes_and_interpolates():
    t = np.linspace(0, 1, 65)
    exact = SymplecticPath.rotation(1.3)
    p = SymplecticPath.from_samples(t, exact(t), derivatives=exact.derivative(t))
    assert np.max(np.abs(p(t) - exact(t))) < 1e-15
    mid = (t[:-1] + t[1:]) / 2
    assert np.max(np.abs(p(mid) - exact(mid))) < 1e-6
    assert np.allclose(det2(p(mid)), 1.0, atol=1e-14)


def test_product_inverse_and_conjugate():
    rng = np.random.default_rng(1)
    a, b = random_path(rng), random_path(rng)
    t = np.linspace(0, 1, 7)
    assert np.allclose(path_product(a, b)(t), a(t) @ b(t))
    assert np.allclose(path_product(a, path_inverse(a))(t), I2, atol=1e-10)
    T = random_sl2(rng)
    assert np.allclose(conjugate(a, T)(t), T @ a(t) @ sp_inverse(T))
    with pytest.raises(NonSymplecticPath):
        conjugate(a, 2 * np.eye(2))


def test_concatenate_endpoint():
    a, b = SymplecticPath.rotation(0.3), SymplecticPath.hyperbolic(0.4)
    c = concatenate(a, b)
    assert np.allclose(c.end, b.end @ a.end)
    assert np.allclose(c(0.5), a.end)


def test_iterate_matches_power():
    a = SymplecticPath.exponential([[0.2, 1.0], [-2.0, -0.2]])
    for k in (1, 2, 3):
        assert np.allclose(iterate(a, k).end, np.linalg.matrix_power(a.end, k))
    with pytest.raises(ValueError):
        iterate(a, 0)


@given(alpha=st.floats(-3, 3), s=st.floats(0, 2 * np.pi))
@settings(max_examples=40)
def test_angle_lift_rotation(alpha, s):
    theta, r = angle_lift(SymplecticPath.rotation(alpha), s)
    assert abs(theta - s - 2 * np.pi * alpha) < 1e-9
    assert abs(r - 1) < 1e-12


def test_lift_resolution_failure():
    fast = SymplecticPath.rotation(37.3)
    fast.grid_size = 1
    with pytest.raises(LiftResolutionFailure):
        lift_angles(fast, [0.0], max_depth=1)


def test_maslov_index_of_rotation_loops():
    for n in range(-3, 4):
        assert maslov_index(SymplecticPath.rotation(n)) == n


def test_maslov_random_loops():
    rng = np.random.default_rng(5)
    for _ in range(10):
        loop, n = random_loop(rng)
        assert maslov_index(loop) == n


def test_maslov_rejects_open_path():
    with pytest.raises(NotALoop):
        maslov_index(SymplecticPath.rotation(0.5))


def test_wind_rel_and_degree():
    t = np.arange(200) / 200
    Z = np.stack([np.cos(2 * np.pi * t), np.sin(2 * np.pi * t)], 1)
    W = np.stack([np.cos(6 * np.pi * t), np.sin(6 * np.pi * t)], 1)
    assert loop_degree(W) == 3
    assert wind_rel(W, Z) == 2
    assert wind_rel(Z, W) == -2
    with pytest.raises(DegenerateSection):
        wind_rel(np.zeros_like(W), Z)
    with pytest.raises(GridMismatch):
        wind_rel(W[:100], Z)
