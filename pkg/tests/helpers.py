"""Random generators shared by the test modules."""

import numpy as np

from czreeb.sp_path import (
    J0,
    SymplecticPath,
    expm_sp,
    path_product,
    rotation_matrix,
    sp_inverse,
)


def random_sl2(rng, scale=0.6):
    """Random element of Sp(2) = SL(2) near the identity."""
    Y = rng.normal(scale=scale, size=(2, 2))
    Y[1, 1] = -Y[0, 0]
    return expm_sp(Y)


def strip_matrix(rng, case):
    """End matrix of the requested type, conjugated by a random T.

    Returns ``(m, param)`` with ``param`` the eigenvalue ``a`` (cases a, d),
    the shear ``a`` (case b) or the angle ``gamma`` (case c).
    """
    T = random_sl2(rng)
    Ti = sp_inverse(T)
    if case == "a":
        a = rng.uniform(1.2, 6.0)
        core, param = np.diag([a, 1 / a]), a
    elif case == "b":
        a = rng.choice([-1, 1]) * rng.uniform(0.2, 3.0)
        core, param = np.array([[1.0, a], [0.0, 1.0]]), a
    elif case == "c":
        g = rng.uniform(0.1, 2 * np.pi - 0.1)
        core, param = rotation_matrix(g), g
    else:
        a = rng.uniform(1.2, 6.0)
        core, param = -np.diag([a, 1 / a]), -a
    return Ti @ core @ T, param


def strip_winding(case, param, rng):
    """A shift ``n`` giving an admissible index for the case."""
    low = 1 if case in ("a", "b") else 0
    return int(rng.integers(low, low + 3))


def random_generator(rng, kind=None):
    """Traceless 2x2 generator; ``kind`` in {None, 'hyperbolic', 'elliptic'}."""
    while True:
        Y = rng.normal(size=(2, 2))
        Y[1, 1] = -Y[0, 0]
        d = -np.linalg.det(Y)   # eigenvalues are +-sqrt(d)
        if kind is None or (kind == "hyperbolic" and d > 0.05) or (kind == "elliptic" and d < -0.05):
            return Y


def random_path(rng):
    """``R(2 pi n t) exp(tY)`` conjugated by a random T, n in -2..2."""
    n = int(rng.integers(-2, 3))
    Y = random_generator(rng)
    T = random_sl2(rng)
    Ti = sp_inverse(T)
    w = 2 * np.pi * n

    def ev(t):
        return T @ rotation_matrix(w * t) @ expm_sp(Y, t) @ Ti

    def dv(t):
        R, E = rotation_matrix(w * t), expm_sp(Y, t)
        return T @ (w * J0 @ R @ E + R @ Y @ E) @ Ti
    return SymplecticPath(ev, derivative=dv, label=f"rand(n={n})")


def random_nondegenerate_path(rng, margin=1e-3):
    while True:
        p = random_path(rng)
        if abs(np.linalg.det(p.end - np.eye(2))) > margin:
            return p


def random_loop(rng):
    """Loop ``T R(2 pi n t) e^{g(t) G} T^{-1}`` with Maslov index ``n``."""
    n = int(rng.integers(-3, 4))
    G = random_generator(rng)
    amp = rng.uniform(0.0, 1.5)
    T = random_sl2(rng)
    Ti = sp_inverse(T)

    def ev(t):
        g = amp * np.sin(np.pi * t) ** 2
        return T @ rotation_matrix(2 * np.pi * n * t) @ expm_sp(G, g) @ Ti
    loop = SymplecticPath(ev, label=f"loop(n={n})")
    return loop, n


def loop_times(loop, path):
    return path_product(loop, path)


# acceptance bookkeeping ----------------------------------------------------------

ACCEPTANCE = []


class Criterion:
    """Context manager recording one PASS/FAIL line per acceptance criterion."""

    def __init__(self, number, title):
        self.number, self.title = number, title
        self.details = {}

    def __enter__(self):
        return self.details

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        info = ", ".join(f"{k}={v}" for k, v in self.details.items())
        line = f"criterion {self.number} [{self.title}]: {status}" + (f" ({info})" if info else "")
        print(line)
        ACCEPTANCE.append(line)
        return False
