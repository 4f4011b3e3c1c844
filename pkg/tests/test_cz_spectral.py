import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from czreeb._linalg import jacobi_eigh
from czreeb.cz_geometric import cz_geometric
from czreeb.cz_spectral import (
    SymmetricPotential,
    crosscheck,
    cz_spectral,
    cz_spectral_detail,
    degenerate_potentials,
    eigenvector_winding,
    galerkin_matrix,
    path_from_potential,
    potential_from_path,
    random_trig_potential,
    spectrum,
)
from czreeb.errors import (
    NonPeriodicPotential,
    TruncationNotConverged,
    WindingAmbiguous,
)
from czreeb.sp_path import J0, SymplecticPath, expm_sp


def test_free_spectrum():
    sl = spectrum(SymmetricPotential.constant(np.zeros((2, 2))), 32, (-20, 20))
    assert [e.winding for e in sl.eigenvalues] == [-3, -2, -1, 0, 1, 2, 3]
    for e in sl.eigenvalues:
        assert abs(e.value - 2 * np.pi * e.winding) < 1e-9
        assert e.multiplicity == 2


@pytest.mark.parametrize("s", [0.3, -1.7, 4.0])
def test_scalar_potential_shift(s):
    # L = -J d/dt - s I has eigenvalues 2 pi k - s, winding k
    sl = spectrum(SymmetricPotential.constant(s * np.eye(2)), 32, (-10, 10))
    for e in sl.eigenvalues:
        assert abs(e.value - (2 * np.pi * e.winding - s)) < 1e-9


def test_galerkin_symmetric_and_jacobi():
    S = random_trig_potential(np.random.default_rng(0), degree=2)
    L = galerkin_matrix(S, 8)
    assert np.allclose(L, L.T, atol=0)
    w, V = jacobi_eigh(L)
    assert np.allclose(np.sort(w), np.linalg.eigvalsh(L), atol=1e-10)
    assert np.max(np.abs(L @ V - V * w)) < 1e-10


def test_jacobi_route_gives_same_index():
    S = random_trig_potential(np.random.default_rng(3), degree=1, bound=2)
    assert cz_spectral(S, K=16, method="jacobi") == cz_spectral(S, K=16)


@pytest.mark.parametrize("alpha", [0.5, 0.25, -0.4, 1.3, 2.1])
def test_rotation_potential(alpha):
    S = SymmetricPotential.constant(2 * np.pi * alpha * np.eye(2))
    assert cz_spectral(S) == cz_geometric(SymplecticPath.rotation(alpha)).index


@given(a=st.floats(-4, 4), b=st.floats(-4, 4), c=st.floats(-4, 4))
@settings(max_examples=25, deadline=None)
def test_constant_potential_closed_form(a, b, c):
    # constant S gives phi(t) = exp(t J0 S) in closed form
    S = np.array([[a, b], [b, c]])
    Y = J0 @ S
    end = expm_sp(Y)
    assume(abs(np.linalg.det(end - np.eye(2))) > 1e-4)
    assert cz_spectral(SymmetricPotential.constant(S)) == cz_geometric(
        SymplecticPath.exponential(Y)).index


def test_path_potential_round_trip():
    S = random_trig_potential(np.random.default_rng(4), degree=3, bound=3)
    back = potential_from_path(path_from_potential(S))
    t = np.linspace(0, 1, 33)
    assert np.max(np.abs(back(t) - S(t))) < 1e-5
    assert back.symmetry_defect < 1e-5


def test_path_from_potential_is_solution():
    S = random_trig_potential(np.random.default_rng(5), degree=2, bound=3)
    p = path_from_potential(S)
    t = np.linspace(0.05, 0.95, 9)
    fd = (p(t + 1e-5) - p(t - 1e-5)) / 2e-5
    assert np.max(np.abs(fd - J0 @ S(t) @ p(t))) < 1e-5
    assert p.integration_residual < 1e-8


def test_nonperiodic_potential_rejected():
    Y = np.array([[0.0, 1.0], [0.5, 0.0]])
    p = SymplecticPath(lambda t: expm_sp(Y, t * t), label="t^2")
    with pytest.raises(NonPeriodicPotential):
        potential_from_path(p)


def test_truncation_guards():
    S = SymmetricPotential.constant(np.eye(2))
    with pytest.raises(ValueError):
        spectrum(S, 8)
    with pytest.raises(TruncationNotConverged):
        spectrum(S, 16, (-100, 100))


def test_winding_ambiguous_on_zero_vector():
    with pytest.raises(WindingAmbiguous):
        eigenvector_winding(np.zeros(2 * 33), 16)


def test_two_per_winding_random():
    rng = np.random.default_rng(6)
    for _ in range(5):
        sl = spectrum(random_trig_potential(rng), 64, (-12, 12))
        assert sl.two_per_winding() and sl.monotone()


def test_spectral_continuity():
    rng = np.random.default_rng(7)
    S = random_trig_potential(rng, bound=3)
    P = random_trig_potential(rng, bound=1)
    eps = 1e-4
    T = SymmetricPotential(lambda t: S(t) + eps * P(t), label="S+eps P")
    a = spectrum(S, 64, (-8, 8)).eigenvalues
    b = spectrum(T, 64, (-8, 8)).eigenvalues
    va = np.repeat([e.value for e in a], [e.multiplicity for e in a])
    vb = np.repeat([e.value for e in b], [e.multiplicity for e in b])
    assert len(va) == len(vb)
    # Weyl: eigenvalues move by at most eps * max ||P(t)||
    assert np.max(np.abs(va - vb)) <= 10 * eps * P.max_norm()


def test_degenerate_potentials_have_zero_eigenvalue():
    for S in degenerate_potentials(np.random.default_rng(8), 7):
        r = cz_spectral_detail(S)
        assert r.degenerate
        assert cz_geometric(path_from_potential(S)).degenerate


def test_trig_json_round_trip():
    S = random_trig_potential(np.random.default_rng(9))
    j = S.to_json()
    R = SymmetricPotential.trig(j["const"], j["cos"], j["sin"])
    t = np.linspace(0, 1, 17)
    assert np.array_equal(R(t), S(t))


def test_small_crosscheck():
    r = crosscheck(n=12, seed=3, n_degenerate=4)
    assert r["disagree"] == 0 and r["agree"] == 12 and r["degenerate"] >= 4
