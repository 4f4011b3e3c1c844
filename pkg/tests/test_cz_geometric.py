import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from czreeb.cz_geometric import (
    WindingInterval,
    cz_geometric,
    framing_shift,
    mu_hat,
    winding_interval,
)
from czreeb.errors import DegeneracyMismatch, IntervalTooLong
from czreeb.sp_path import (
    SymplecticPath,
    conjugate,
    path_inverse,
    path_product,
    rotation_matrix,
)

from helpers import random_loop, random_nondegenerate_path, random_path, random_sl2


def rotation_index(alpha):
    """Oracle: ``mu(e^{i 2 pi alpha t})`` from the interval ``{alpha}``."""
    k = math.floor(alpha)
    # degenerate {k}: the lower semicontinuous extension gives 2k - 1
    return 2 * k - 1 if alpha == k else 2 * k + 1


@pytest.mark.parametrize("alpha", [0.5, 0.25, 1.0, 1.5, -0.5, -1.0, 2.9, 0.0, -2.3])
def test_rotation_indices(alpha):
    r = cz_geometric(SymplecticPath.rotation(alpha))
    assert r.index == rotation_index(alpha)
    assert r.degenerate == (alpha == round(alpha))


def test_normalization():
    assert cz_geometric(SymplecticPath.rotation(0.5)).index == 1


def test_identity_path():
    r = cz_geometric(SymplecticPath.identity())
    assert r.index == -1 and r.degenerate
    assert r.interval.as_list() == [0.0, 0.0]


def test_shear_interval():
    iv = winding_interval(SymplecticPath.shear(1.0))
    assert abs(iv.hi) < 1e-12
    assert -0.5 < iv.lo < 0
    assert cz_geometric(SymplecticPath.shear(1.0)).index == -1
    assert cz_geometric(SymplecticPath.shear(-1.0)).index == 0


def test_hyperbolic_index_zero():
    r = cz_geometric(SymplecticPath.hyperbolic(math.log(2)))
    assert r.index == 0 and not r.degenerate
    assert r.interval.lo < 0 < r.interval.hi


@given(lo=st.floats(-5, 5), w=st.floats(0, 0.49))
def test_mu_hat_parity(lo, w):
    iv = WindingInterval(lo, lo + w)
    mu = mu_hat(iv)
    if any(lo <= k < lo + w for k in range(-6, 7)):
        assert mu % 2 == 0
    else:
        assert mu % 2 == 1


def test_mu_hat_lower_semicontinuous_rule():
    assert mu_hat(WindingInterval(1.0, 1.0)) == 1
    assert mu_hat(WindingInterval(0.8, 1.0)) == 1
    assert mu_hat(WindingInterval(1.0, 1.2)) == 2
    assert mu_hat(WindingInterval(0.9, 1.1)) == 2


def test_interval_too_long():
    with pytest.raises(IntervalTooLong):
        WindingInterval(0.0, 0.5)


def test_degeneracy_mismatch_band():
    # rotation by 1e-5 turns: endpoint gap 1e-5 > 1e-6 but det(phi(1)-I) ~ 4e-9
    with pytest.raises(DegeneracyMismatch):
        cz_geometric(SymplecticPath.rotation(1.0 + 1e-5))


def test_framing_shift():
    assert framing_shift(3, -1) == 1
    assert framing_shift(5, 0) == 5
    assert framing_shift(framing_shift(7, 2), -2) == 7


def test_inversion_axiom():
    rng = np.random.default_rng(11)
    for _ in range(15):
        p = random_nondegenerate_path(rng)
        assert cz_geometric(path_inverse(p)).index == -cz_geometric(p).index


def test_loop_axiom():
    rng = np.random.default_rng(12)
    for _ in range(10):
        p = random_nondegenerate_path(rng)
        loop, n = random_loop(rng)
        assert cz_geometric(path_product(loop, p)).index == 2 * n + cz_geometric(p).index


def test_conjugation_invariance():
    rng = np.random.default_rng(13)
    for _ in range(10):
        p = random_nondegenerate_path(rng)
        T = random_sl2(rng, 1.0)
        assert cz_geometric(conjugate(p, T)).index == cz_geometric(p).index


def test_lower_semicontinuity():
    rng = np.random.default_rng(14)
    for _ in range(20):
        n = int(rng.integers(-2, 3))
        c = rng.uniform(-2, 2)
        base = path_product(SymplecticPath.rotation(n),
                            conjugate(SymplecticPath.shear(c), random_sl2(rng)))
        mu0 = cz_geometric(base).index
        assert cz_geometric(base).degenerate
        for sign in (1, -1):
            eps = sign * 1e-3
            pert = path_product(SymplecticPath.rotation(eps / (2 * np.pi)), base)
            assert cz_geometric(pert).index >= mu0


def test_interval_length_bound_random():
    rng = np.random.default_rng(15)
    for _ in range(30):
        assert winding_interval(random_path(rng)).length < 0.5


def test_det_gap_reported():
    r = cz_geometric(SymplecticPath.rotation(0.5))
    assert abs(r.det_gap - 4.0) < 1e-12
    assert set(r.as_dict()) == {"index", "interval", "degenerate"}
