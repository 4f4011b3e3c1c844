"""Strip construction near a closed orbit: end matrices, model paths, twists.

Given the linearised flow ``phi`` along an orbit, the end matrix ``phi(1)``
falls into one of four conjugacy types

* ``a``: real eigenvalues ``a, 1/a`` with ``a > 0``, ``a != 1``;
* ``b``: ``phi(1) != I`` with spectrum ``{1}`` (a shear of corner ``a``);
* ``c``: eigenvalues ``e^{+-i gamma}`` with ``0 < gamma < 2 pi``;
* ``d``: real eigenvalues ``a, 1/a`` with ``a < 0``, ``a != -1``.

Each type has a model path ``K`` with ``K(1) = T phi(1) T^{-1}``, a comparison
loop ``M`` and a twist function ``b`` for the strip
``F(r, t) = (t, (1 - r) cos b(t), (1 - r) sin b(t))``.  The strip is
transverse to the Reeb field near ``r = 1`` when ``d_r d(1, t)`` never
vanishes; each type has a closed form for that coefficient.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .cz_geometric import cz_geometric, winding_interval
from .errors import (
    BoundaryCase,
    InequalityViolated,
    ReconstructionFailure,
    SignChange,
)
from .sp_path import (
    I2,
    J0,
    SymplecticPath,
    check_symplectic,
    conjugate,
    expm_sp,
    maslov_index,
    path_inverse,
    path_product,
    rotation_matrix,
    sp_inverse,
)

BAND = 1e-8
PARABOLIC_TOL = 1e-12
MIN_GAMMA = 1e-6
GRID = 1025


@dataclass(frozen=True)
class EndMatrixClass:
    """Conjugacy type of an end matrix.

    ``m = T^{-1} (s e^Y) T`` with ``s = -1`` in case ``d`` and ``s = 1``
    otherwise.  ``param`` is ``a`` (cases a, b, d) or ``gamma`` (case c).
    """
    case: str
    Y: np.ndarray
    T: np.ndarray
    param: float
    m: np.ndarray = field(repr=False)

    @property
    def sign(self):
        return -1.0 if self.case == "d" else 1.0

    @property
    def constant(self):
        """Size of the zeroth-order term the twist has to beat."""
        if self.case in ("a", "c"):
            return abs(self.Y[0, 0]) if self.case == "a" else self.param
        if self.case == "d":
            return abs(self.Y[0, 0])
        return abs(self.param)

    def reconstruction_error(self):
        rec = sp_inverse(self.T) @ (self.sign * expm_sp(self.Y)) @ self.T
        return float(np.max(np.abs(rec - self.m)))

    def as_dict(self):
        return {"case": self.case, "Y": self.Y.tolist(), "T": self.T.tolist(),
                "param": self.param}


def _unit_det(cols):
    """Scale two columns to determinant one (flipping the second if needed)."""
    cols = np.array(cols, dtype=float)
    d = np.linalg.det(cols)
    if d < 0:
        cols[:, 1] *= -1
        d = -d
    return cols / math.sqrt(d)


def _hyperbolic(m):
    """``m = T^{-1} diag(a, 1/a) T`` with ``a > 1``."""
    tr = np.trace(m)
    a = 0.5 * (tr + math.sqrt(tr * tr - 4.0))
    vecs = []
    for lam in (a, 1.0 / a):
        n = m - lam * I2
        # kernel of a rank-one 2x2 matrix: J0 applied to its largest row
        row = n[np.argmax(np.linalg.norm(n, axis=1))]
        vecs.append(J0 @ row)
    Tinv = _unit_det(np.column_stack(vecs))
    return a, sp_inverse(Tinv)


def classify_end_matrix(m, band=BAND):
    """Conjugacy type of ``m`` in Sp(2, R) with a rejection band at the boundaries."""
    m = check_symplectic(m, tol=1e-8)
    tr = float(np.trace(m))
    if abs(tr - 2.0) <= band:
        N = m - I2
        if abs(tr - 2.0) <= PARABOLIC_TOL and np.max(np.abs(N)) > 1e-6:
            _, _, Vt = np.linalg.svd(N)
            u = Vt[-1]
            Tinv = np.column_stack([u, J0 @ u])
            a = float(u @ (N @ (J0 @ u)))
            Y = np.array([[0.0, a], [0.0, 0.0]])
            cls = EndMatrixClass("b", Y, sp_inverse(Tinv), a, m)
        else:
            raise BoundaryCase(f"trace {tr:.12g} is within {band:g} of 2", trace=tr)
    elif abs(tr + 2.0) <= band:
        raise BoundaryCase(f"trace {tr:.12g} is within {band:g} of -2", trace=tr)
    elif tr > 2.0:
        a, T = _hyperbolic(m)
        L = math.log(a)
        cls = EndMatrixClass("a", np.diag([L, -L]), T, a, m)
    elif tr < -2.0:
        a, T = _hyperbolic(-m)
        L = math.log(a)
        cls = EndMatrixClass("d", np.diag([L, -L]), T, -a, m)
    else:
        c = tr / 2.0
        gamma = math.acos(c)
        if m[1, 0] < 0:
            gamma = 2.0 * math.pi - gamma
        if gamma < MIN_GAMMA or 2 * math.pi - gamma < MIN_GAMMA:
            raise BoundaryCase(f"rotation angle {gamma:.3g} too small")
        u = np.array([1.0, 0.0])
        w = (m @ u - c * u) / math.sin(gamma)
        Tinv = _unit_det(np.column_stack([u, w]))
        cls = EndMatrixClass("c", gamma * J0, sp_inverse(Tinv), gamma, m)
    err = cls.reconstruction_error()
    if err > 1e-8:
        raise ReconstructionFailure(f"case {cls.case}: reconstruction error {err:.2e}")
    return cls


# model paths and comparison loops ------------------------------------------------

def build_model_path(cls):
    """``K(t) = e^{tY}`` (cases a-c) or ``e^{i pi t} e^{tY}`` (case d)."""
    Y = cls.Y
    if cls.case == "d":
        def ev(t):
            return rotation_matrix(np.pi * t) @ expm_sp(Y, t)

        def dv(t):
            return (np.pi * J0 @ rotation_matrix(np.pi * t) @ expm_sp(Y, t)
                    + rotation_matrix(np.pi * t) @ Y @ expm_sp(Y, t))
        K = SymplecticPath(ev, derivative=dv, label="K_d")
    else:
        K = SymplecticPath.exponential(Y)
        K.label = f"K_{cls.case}"
    target = cls.T @ cls.m @ sp_inverse(cls.T)
    err = float(np.max(np.abs(K.end - target)))
    if err > 1e-8:
        raise ReconstructionFailure(f"K(1) misses the end matrix by {err:.2e}")
    return K


def catalog_index(cls):
    """Index of ``K`` predicted by the case analysis."""
    if cls.case == "a":
        return 0
    if cls.case == "b":
        return -1 if cls.param > 0 else 0
    return 1


def catalog_interval_ok(cls, interval):
    """Whether ``I(K)`` has the predicted shape."""
    lo, hi = interval.lo, interval.hi
    tol = 1e-9
    if cls.case == "a":
        return lo < -tol and hi > tol
    if cls.case == "b":
        if cls.param < 0:
            return abs(lo) <= tol and tol < hi < 0.5
        return abs(hi) <= tol and -0.5 < lo < -tol
    if cls.case == "c":
        return abs(lo - cls.param / (2 * np.pi)) <= 1e-8 and hi - lo <= 1e-8
    return lo < 0.5 - tol and hi > 0.5 + tol


def k_from_index(cls, mu_phi):
    """``k`` with ``mu(phi) = 2k`` (cases a, b with a < 0) or ``2k + 1``."""
    even = cls.case == "a" or (cls.case == "b" and cls.param < 0)
    if even:
        if mu_phi % 2 or mu_phi < 2:
            raise ValueError(f"case {cls.case} needs an even index >= 2, got {mu_phi}")
        return mu_phi // 2
    if mu_phi % 2 == 0 or mu_phi < 1:
        raise ValueError(f"case {cls.case} needs an odd index >= 1, got {mu_phi}")
    return (mu_phi - 1) // 2


@dataclass(frozen=True)
class ComparisonLoop:
    loop: SymplecticPath = field(repr=False)
    maslov: int
    k: int
    mu_phi: int
    mu_K: int
    relation_holds: bool


def comparison_loop(path, cls, mu_phi=None):
    """``M = K phi~^{-1}`` (case b with ``a > 0``: ``e^{i 2 pi t} K phi~^{-1}``).

    ``phi~ = T phi T^{-1}`` so that ``phi~(1) = K(1)``.  The returned record
    holds ``Maslov(M)`` and whether it equals ``(mu(K) - mu(phi)) / 2``
    (plus one for the extra rotation in case b), which is ``-k``.
    """
    K = build_model_path(cls)
    phit = conjugate(path, cls.T)
    M = path_product(K, path_inverse(phit))
    extra = 0
    if cls.case == "b" and cls.param > 0:
        M = path_product(SymplecticPath.rotation(1.0), M)
        extra = 1
    M.label = "M"
    maslov = maslov_index(M)
    mu_K = cz_geometric(K).index
    if mu_phi is None:
        mu_phi = cz_geometric(path).index
    k = k_from_index(cls, mu_phi)
    holds = maslov == (mu_K - mu_phi) // 2 + extra == -k
    return ComparisonLoop(M, maslov, k, mu_phi, mu_K, holds)


def manufactured_path(cls, n, wiggle=0.0, wiggle_generator=None):
    """A path with end matrix ``cls.m`` and index ``mu(K) + 2n``.

    ``phi = T^{-1} R(2 pi n t) e^{g(t) G} K(t) T`` with ``g(t) = wiggle
    sin^2(pi t)``, a contractible loop factor that keeps the index.
    """
    K = build_model_path(cls)
    G = np.array([[1.0, 0.3], [0.3, -1.0]]) if wiggle_generator is None else wiggle_generator
    Ti = sp_inverse(cls.T)
    T = cls.T

    def ev(t):
        g = wiggle * np.sin(np.pi * t) ** 2
        W = expm_sp(G, g) if wiggle else I2
        return Ti @ rotation_matrix(2 * np.pi * n * t) @ W @ K._eval(t) @ T
    return SymplecticPath(ev, grid_size=256 * max(1, abs(n)), label=f"phi({cls.case},n={n})")


# twist functions -----------------------------------------------------------------

def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)


def _window(x, lo, hi, w):
    """Smooth indicator: 1 on ``[lo + w, hi - w]``, 0 outside ``(lo, hi)``."""
    return _smoothstep((x - lo) / w) * _smoothstep((hi - x) / w)


def quartic_constant(delta0=0.5, n=20001):
    """``sup |x^2 - sin^2 x| / x^4`` over ``(0, delta0]`` (about 1/3)."""
    x = np.linspace(delta0 / n, delta0, n)
    return float(np.max(np.abs(x * x - np.sin(x) ** 2) / x ** 4)) * (1 + 1e-6)


def choose_delta(a, delta0=0.5):
    """``delta`` with ``C delta^4 < delta^2 / 2`` and ``-delta + 3 a delta^2 < 0``."""
    C = quartic_constant(delta0)
    delta = 0.5 * min(delta0, 1.0 / math.sqrt(2.0 * C), 1.0 / (3.0 * a))
    if not (C * delta ** 4 < delta ** 2 / 2 and -delta + 3 * a * delta ** 2 < 0):
        raise InequalityViolated("no admissible delta")
    return delta, C


@dataclass(frozen=True)
class TwistFunction:
    """``b`` on ``[0, 1]`` with ``b(1) = b(0) - 2 pi k``; sampled on ``t``."""
    case: str
    k: int
    t: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    db: np.ndarray = field(repr=False)
    slow_interval: tuple = None
    alpha: float = None

    def boundary_defect(self):
        return float(abs(self.b[-1] - self.b[0] + 2 * np.pi * self.k))


def _profile_twist(drop, J, v_fast, n=GRID, fine=20001):
    """``beta`` from 0 down to ``-drop`` in unit time with ``beta' = -v(beta)``.

    ``v`` equals ``v_fast`` outside ``J`` and a slower constant deep inside
    ``J``, joined by smooth steps; the slow speed is fixed by unit time.
    """
    lo, hi = J
    w = (hi - lo) / 4.0
    grid = np.linspace(-drop, 0.0, fine)
    chi = _window(grid, lo, hi, w)

    def total_time(v_slow):
        v = v_fast + (v_slow - v_fast) * chi
        return np.trapezoid(1.0 / v, grid)

    if total_time(v_fast) >= 1.0:
        raise InequalityViolated("fast slope too shallow to finish in unit time")
    v_slow = brentq(lambda v: total_time(v) - 1.0, 1e-9 * v_fast, v_fast, xtol=1e-14)
    v = v_fast + (v_slow - v_fast) * chi
    # time at which beta = grid value (beta decreases from 0)
    tb = cumulative_trapezoid((1.0 / v)[::-1], -grid[::-1], initial=0.0)
    tb /= tb[-1]
    beta_of_t = CubicSpline(tb, grid[::-1])
    t = np.linspace(0.0, 1.0, n)
    beta = beta_of_t(t)
    beta[0], beta[-1] = 0.0, -drop
    speed = v_fast + (v_slow - v_fast) * _window(beta, lo, hi, w)
    return t, beta, -speed, v_slow


def build_twist(cls, k, n=GRID):
    """Twist ``b(t)`` making ``d_r d(1, t)`` negative for every ``t``."""
    k = int(k)
    case = cls.case
    t = np.linspace(0.0, 1.0, n)
    if case == "c" or (case == "b" and cls.param < 0):
        if case == "b" and k < 1:
            raise ValueError("case b with a < 0 needs k >= 1")
        tw = TwistFunction(case, k, t, -2 * np.pi * k * t, np.full(n, -2 * np.pi * k))
    else:
        c = cls.constant
        # steep slope; the 2 pi (k + 1) term keeps the fast phase shorter than 1
        v_fast = 4.0 * (c + 2.0 * np.pi * (k + 1))
        eta = 0.1
        if case == "a":
            if k < 1:
                raise ValueError("case a needs k >= 1")
            drop, shift = 2 * np.pi * k, 0.0
            L = cls.Y[0, 0]
            J = (-np.pi / 2 + eta, -eta) if L > 0 else (-np.pi + eta, -np.pi / 2 - eta)
        elif case == "d":
            drop, shift = (2 * k + 1) * np.pi, np.pi
            L = cls.Y[0, 0]
            J = (-np.pi / 2 + eta, -eta) if L > 0 else (-np.pi + eta, -np.pi / 2 - eta)
        else:
            delta, _ = choose_delta(cls.param)
            drop, shift = 2 * np.pi * (k + 1), 2 * np.pi
            J = (-np.pi - delta, -np.pi)
        tt, beta, dbeta, _ = _profile_twist(drop, J, v_fast, n)
        tw = TwistFunction(case, k, tt, beta + shift * tt, dbeta + shift, J, -v_fast)
    margin = drd_closed_form(cls, tw)
    if not np.all(margin < 0):
        raise InequalityViolated(f"case {case}: d_r d(1,t) reaches {margin.max():.3e}")
    return tw


def drd_closed_form(cls, tw):
    """``d_r d(1, t)`` on the twist grid from the per-case formula."""
    b, db, t = tw.b, tw.db, tw.t
    if cls.case == "a":
        return db + cls.Y[0, 0] * np.sin(2 * b)
    if cls.case == "c":
        return db - cls.param
    if cls.case == "d":
        beta = b - np.pi * t
        return (db - np.pi) + cls.Y[0, 0] * np.sin(2 * beta)
    a = cls.param
    if a > 0:
        beta = b - 2 * np.pi * t
        return (db - 2 * np.pi) + a * np.sin(beta) ** 2
    return db + a * np.sin(b) ** 2


def drd_generic(cls, tw):
    """Same coefficient as ``b' - (e^{-ib} A e^{ib})_{21}`` with ``A`` the
    linearised Reeb field in strip coordinates (``K' K^{-1}``, or
    ``i 2 pi + e^{i 2 pi t} Y e^{-i 2 pi t}`` in case b with ``a > 0``)."""
    t = tw.t
    if cls.case == "b" and cls.param > 0:
        R = rotation_matrix(2 * np.pi * t)
        A = 2 * np.pi * J0 + R @ cls.Y @ np.swapaxes(R, -1, -2)
    else:
        K = build_model_path(cls)
        A = K.derivative(t) @ sp_inverse(K(t))
    Rb = rotation_matrix(tw.b)
    B = np.swapaxes(Rb, -1, -2) @ A @ Rb
    return tw.db - B[:, 1, 0]


def strip_determinant_check(cls, tw):
    """Minimum of ``|d_r d(1, t)|`` on the grid and its (constant) sign."""
    vals = drd_closed_form(cls, tw)
    signs = np.sign(vals)
    if np.any(signs == 0) or np.any(signs != signs[0]):
        raise SignChange(f"d_r d(1,t) changes sign (range [{vals.min():.3e}, {vals.max():.3e}])")
    return float(np.min(np.abs(vals))), int(signs[0])


def strip_report(path=None, m=None, k=None):
    """Full analysis for a path (or an end matrix with a given ``k``)."""
    if path is not None:
        cls = classify_end_matrix(path.end)
        comp = comparison_loop(path, cls)
        k, maslov = comp.k, comp.maslov
    else:
        cls = classify_end_matrix(m)
        if k is None:
            raise ValueError("k is required when only an end matrix is given")
        n = {"a": k, "b": k + 1 if cls.param > 0 else k, "c": k, "d": k}[cls.case]
        comp = comparison_loop(manufactured_path(cls, n), cls)
        maslov = comp.maslov
    tw = build_twist(cls, k)
    min_abs, sign = strip_determinant_check(cls, tw)
    return {"case": cls.case, "Y": cls.Y.tolist(), "k": int(k),
            "maslov_M": int(maslov), "min_abs_drd": min_abs, "sign": sign}
