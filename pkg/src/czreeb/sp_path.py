"""Paths in the 2x2 real symplectic group and their angle lifts.

A :class:`SymplecticPath` is either built from a closed form (rotation, shear,
hyperbolic, matrix exponential, products of those) or from samples on a grid
with piecewise-cubic interpolation.  All evaluators are vectorised: they take
a 1-D array of times and return an array of shape ``(n, 2, 2)``.

The complex structure is ``J0 = [[0, -1], [1, 0]]`` so that ``exp(t*J0)`` is
the counter-clockwise rotation ``e^{it}``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    GridMismatch,
    InconsistentWinding,
    LiftResolutionFailure,
    NonSymplecticPath,
    NotALoop,
    DegenerateSection,
)

J0 = np.array([[0.0, -1.0], [1.0, 0.0]])
I2 = np.eye(2)

EXACT_TOL = 1e-10
GRID_TOL = 1e-8
LIFT_STEP_BOUND = np.pi / 4
LIFT_MAX_DEPTH = 20


def rotation_matrix(theta):
    """``e^{i theta}`` as real 2x2 matrices; broadcasts over ``theta``."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    out = np.empty(theta.shape + (2, 2))
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def sp_inverse(m):
    """Inverse of (a stack of) 2x2 matrices with determinant one."""
    m = np.asarray(m, dtype=float)
    out = np.empty_like(m)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    out[..., 1, 1] = m[..., 0, 0]
    return out


def det2(m):
    m = np.asarray(m)
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


def expm_sp(Y, t=1.0):
    """``exp(t Y)`` for a traceless 2x2 matrix ``Y``, in closed form.

    Uses ``Y @ Y = -det(Y) * I``.  ``t`` may be an array; the result then has
    shape ``t.shape + (2, 2)``.
    """
    Y = np.asarray(Y, dtype=float)
    t = np.asarray(t, dtype=float)
    d = -det2(Y)
    if d > 0:
        w = np.sqrt(d)
        c = np.cosh(w * t)
        s = np.sinh(w * t) / w
    elif d < 0:
        w = np.sqrt(-d)
        c = np.cos(w * t)
        s = np.sin(w * t) / w
    else:
        c = np.ones_like(t)
        s = t.copy()
    return c[..., None, None] * I2 + s[..., None, None] * Y


def check_symplectic(m, tol=EXACT_TOL):
    """Return ``m`` as an array after checking ``det m = 1``."""
    m = np.asarray(m, dtype=float)
    if m.shape != (2, 2):
        raise NonSymplecticPath(f"expected a 2x2 matrix, got shape {m.shape}")
    if abs(det2(m) - 1.0) > tol:
        raise NonSymplecticPath(f"det = {det2(m):.3e} differs from 1")
    return m


def _renormalize(mats):
    d = det2(mats)
    if np.any(d <= 0):
        raise NonSymplecticPath("interpolated matrix lost orientation")
    return mats / np.sqrt(d)[..., None, None]


class SymplecticPath:
    """A path ``t -> phi(t)`` in Sp(2, R) on ``[0, 1]`` with ``phi(0) = I``.

    Parameters
    ----------
    evaluator : callable
        Maps a 1-D array of times to an array of shape ``(n, 2, 2)``.
    grid_size : int
        Number of intervals of the default uniform grid used for lifts.
    derivative : callable, optional
        Same signature as ``evaluator``; returns ``phi'(t)``.  When absent,
        central finite differences are used.
    exact : bool
        True for closed-form builders (tighter tolerances).
    nodes : array, optional
        Grid of a sampled path.  Lifts start from these nodes.
    """

    def __init__(self, evaluator, grid_size=256, derivative=None, exact=True,
                 nodes=None, label="path"):
        self._eval = evaluator
        self._deriv = derivative
        self.grid_size = int(grid_size)
        self.exact = exact
        self.nodes = None if nodes is None else np.asarray(nodes, dtype=float)
        self.label = label

    # evaluation -----------------------------------------------------------
    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        out = self._eval(np.atleast_1d(t_arr).ravel())
        if t_arr.ndim == 0:
            return out[0]
        return out.reshape(t_arr.shape + (2, 2))

    def derivative(self, t, h=1e-5):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float)).ravel()
        if self._deriv is not None:
            out = self._deriv(t_arr)
        else:
            lo = np.clip(t_arr - h, 0.0, 1.0)
            hi = np.clip(t_arr + h, 0.0, 1.0)
            out = (self._eval(hi) - self._eval(lo)) / (hi - lo)[:, None, None]
        return out[0] if np.ndim(t) == 0 else out

    @property
    def end(self):
        return self(1.0)

    @property
    def tol(self):
        return EXACT_TOL if self.exact else GRID_TOL

    def grid(self):
        if self.nodes is not None:
            return self.nodes.copy()
        return np.linspace(0.0, 1.0, self.grid_size + 1)

    def validate(self):
        start = self(0.0)
        if np.max(np.abs(start - I2)) > self.tol:
            raise NonSymplecticPath(f"{self.label}: phi(0) != I")
        d = det2(self(self.grid()))
        if np.max(np.abs(d - 1.0)) > (EXACT_TOL if self.exact else GRID_TOL):
            raise NonSymplecticPath(
                f"{self.label}: det drifts by {np.max(np.abs(d - 1.0)):.2e}")
        return self

    def __repr__(self):
        kind = "exact" if self.exact else "sampled"
        return f"SymplecticPath({self.label!r}, {kind}, grid={self.grid_size})"

    # builders -------------------------------------------------------------
    @classmethod
    def identity(cls):
        return cls(lambda t: np.broadcast_to(I2, t.shape + (2, 2)).copy(),
                   derivative=lambda t: np.zeros(t.shape + (2, 2)),
                   label="identity")

    @classmethod
    def rotation(cls, alpha):
        """``t -> e^{i 2 pi alpha t}``."""
        w = 2.0 * np.pi * alpha
        return cls(lambda t: rotation_matrix(w * t),
                   derivative=lambda t: w * (J0 @ rotation_matrix(w * t)),
                   label=f"rotation({alpha:g})")

    @classmethod
    def shear(cls, c=1.0):
        def ev(t):
            out = np.broadcast_to(I2, t.shape + (2, 2)).copy()
            out[:, 0, 1] = c * t
            return out

        def dv(t):
            out = np.zeros(t.shape + (2, 2))
            out[:, 0, 1] = c
            return out
        return cls(ev, derivative=dv, label=f"shear({c:g})")

    @classmethod
    def hyperbolic(cls, c):
        """``t -> diag(e^{ct}, e^{-ct})``."""
        def ev(t):
            out = np.zeros(t.shape + (2, 2))
            out[:, 0, 0] = np.exp(c * t)
            out[:, 1, 1] = np.exp(-c * t)
            return out

        def dv(t):
            out = np.zeros(t.shape + (2, 2))
            out[:, 0, 0] = c * np.exp(c * t)
            out[:, 1, 1] = -c * np.exp(-c * t)
            return out
        return cls(ev, derivative=dv, label=f"hyperbolic({c:g})")

    @classmethod
    def exponential(cls, Y):
        """``t -> exp(t Y)`` for traceless ``Y``."""
        Y = np.array(Y, dtype=float)
        if abs(np.trace(Y)) > 1e-12:
            raise NonSymplecticPath("generator must be traceless")
        return cls(lambda t: expm_sp(Y, t),
                   derivative=lambda t: Y @ expm_sp(Y, t),
                   label="exp(tY)")

    @classmethod
    def from_function(cls, func, grid_size=256, label="function"):
        """Wrap a vectorised closed-form ``func(t) -> (n, 2, 2)``."""
        return cls(func, grid_size=grid_size, label=label)

    @classmethod
    def from_samples(cls, t, mats, derivatives=None, label="samples"):
        """Piecewise-cubic interpolant through ``mats`` at times ``t``.

        Interpolated matrices are rescaled to determinant one.  ``t`` must
        start at 0 and end at 1.
        """
        t = np.asarray(t, dtype=float)
        mats = np.asarray(mats, dtype=float)
        if t.ndim != 1 or mats.shape != t.shape + (2, 2):
            raise GridMismatch("sample times and matrices do not match")
        if abs(t[0]) > 1e-14 or abs(t[-1] - 1.0) > 1e-14 or np.any(np.diff(t) <= 0):
            raise GridMismatch("sample times must increase from 0 to 1")
        if len(t) < 4:
            raise GridMismatch("need at least four samples")
        if derivatives is not None:
            from scipy.interpolate import CubicHermiteSpline
            spl = CubicHermiteSpline(t, mats.reshape(-1, 4),
                                     np.asarray(derivatives).reshape(-1, 4))
        else:
            spl = CubicSpline(t, mats.reshape(-1, 4))
        dspl = spl.derivative()
        ends = (t[0], t[-1])

        def ev(tt):
            out = spl(tt).reshape(-1, 2, 2)
            # nodes are returned verbatim
            idx = np.searchsorted(t, tt)
            idx = np.clip(idx, 0, len(t) - 1)
            hit = np.abs(t[idx] - tt) < 1e-15
            out[hit] = mats[idx[hit]]
            return _renormalize(out)

        def dv(tt):
            return dspl(np.clip(tt, *ends)).reshape(-1, 2, 2)
        return cls(ev, grid_size=len(t) - 1, derivative=dv, exact=False,
                   nodes=t, label=label)


def path_product(a, b):
    """Pointwise product ``t -> a(t) b(t)``."""
    exact = a.exact and b.exact
    nodes = None
    if a.nodes is not None or b.nodes is not None:
        nodes = np.union1d(a.grid(), b.grid())

    def dv(t):
        return a.derivative(t) @ b._eval(t) + a._eval(t) @ b.derivative(t)
    return SymplecticPath(lambda t: a._eval(t) @ b._eval(t),
                          grid_size=max(a.grid_size, b.grid_size),
                          derivative=dv, exact=exact, nodes=nodes,
                          label=f"({a.label})*({b.label})")


def path_inverse(a):
    """Pointwise inverse ``t -> a(t)^{-1}``."""
    def dv(t):
        inv = sp_inverse(a._eval(t))
        return -inv @ a.derivative(t) @ inv
    return SymplecticPath(lambda t: sp_inverse(a._eval(t)),
                          grid_size=a.grid_size, derivative=dv, exact=a.exact,
                          nodes=a.nodes, label=f"inv({a.label})")


def conjugate(a, T):
    """Constant conjugation ``t -> T a(t) T^{-1}``."""
    T = check_symplectic(T, tol=1e-8)
    Ti = sp_inverse(T)
    return SymplecticPath(lambda t: T @ a._eval(t) @ Ti,
                          grid_size=a.grid_size,
                          derivative=lambda t: T @ a.derivative(t) @ Ti,
                          exact=a.exact, nodes=a.nodes,
                          label=f"conj({a.label})")


def concatenate(a, b):
    """Run ``a`` on ``[0, 1/2]`` and then ``b(.) a(1)`` on ``[1/2, 1]``."""
    a1 = a.end

    def ev(t):
        out = np.empty(t.shape + (2, 2))
        first = t <= 0.5
        out[first] = a._eval(2.0 * t[first])
        out[~first] = b._eval(2.0 * t[~first] - 1.0) @ a1
        return out
    nodes = None
    if a.nodes is not None or b.nodes is not None:
        nodes = np.union1d(0.5 * a.grid(), 0.5 + 0.5 * b.grid())
    return SymplecticPath(ev, grid_size=a.grid_size + b.grid_size,
                          exact=a.exact and b.exact, nodes=nodes,
                          label=f"({a.label})#({b.label})")


def iterate(a, k):
    """Path of the ``k``-fold iterate: ``s -> a(ks - j) a(1)^j``.

    This is the linearised flow along ``k`` covers of a periodic orbit when
    ``a`` is the linearised flow along one cover in a periodic frame.
    """
    k = int(k)
    if k < 1:
        raise ValueError("k must be positive")
    a1 = a.end
    powers = [I2]
    for _ in range(k):
        powers.append(a1 @ powers[-1])
    powers = np.array(powers)

    def ev(t):
        u = k * t
        j = np.minimum(np.floor(u).astype(int), k - 1)
        return a._eval(u - j) @ powers[j]
    nodes = None
    if a.nodes is not None:
        nodes = np.unique(np.concatenate([(j + a.nodes) / k for j in range(k)]))
    return SymplecticPath(ev, grid_size=k * a.grid_size, exact=a.exact,
                          nodes=nodes, label=f"{a.label}^{k}")


# angle lifts ---------------------------------------------------------------

def _increments(V):
    """Signed angle from ``V[i]`` to ``V[i+1]`` along the first axis."""
    a, b = V[:-1], V[1:]
    cross = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    dot = a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1]
    return np.arctan2(cross, dot)


def lift_angles(path, s, step_bound=LIFT_STEP_BOUND, max_depth=LIFT_MAX_DEPTH):
    """Continuous lift of ``arg(phi(t) e^{is})`` for many ``s`` at once.

    Starts from the path's grid and bisects every interval in which some
    vector turns by ``step_bound`` or more.

    Returns
    -------
    theta_end : ndarray
        ``theta(1, s)`` with ``theta(0, s) = s``.
    r_end : ndarray
        ``|phi(1) e^{is}|``.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    u = np.stack([np.cos(s), np.sin(s)], axis=-1)
    t = path.grid()
    V = np.einsum("nij,mj->nmi", path._eval(t), u)
    for depth in range(max_depth + 1):
        inc = _increments(V)
        bad = np.any(np.abs(inc) >= step_bound, axis=1)
        if not bad.any():
            break
        if depth == max_depth:
            raise LiftResolutionFailure(
                f"{path.label}: angle steps still too large after "
                f"{max_depth} bisections")
        mids = 0.5 * (t[:-1][bad] + t[1:][bad])
        Vm = np.einsum("nij,mj->nmi", path._eval(mids), u)
        pos = np.searchsorted(t, mids)
        t = np.insert(t, pos, mids)
        V = np.insert(V, pos, Vm, axis=0)
    norms = np.linalg.norm(V, axis=-1)
    if np.min(norms) < 1e-300:
        raise NonSymplecticPath(f"{path.label}: vector collapsed to zero")
    return s + inc.sum(axis=0), norms[-1]


def angle_lift(path, s):
    """``(theta(1, s), r(1, s))`` for a single angle ``s``."""
    theta, r = lift_angles(path, [s])
    return float(theta[0]), float(r[0])


def maslov_index(loop, n_s=16):
    """Maslov index (rotation number) of a loop with ``phi(1) = I``."""
    if np.max(np.abs(loop.end - I2)) >= 1e-8:
        raise NotALoop(f"{loop.label}: phi(1) is not the identity")
    s = np.linspace(0.0, 2.0 * np.pi, n_s, endpoint=False)
    theta, _ = lift_angles(loop, s)
    w = (theta - s) / (2.0 * np.pi)
    k = np.rint(w)
    if np.max(np.abs(w - k)) > 1e-6 or np.any(k != k[0]):
        raise InconsistentWinding(f"{loop.label}: windings {w}")
    return int(k[0])


# sections of a plane bundle over the circle --------------------------------

@dataclass(frozen=True)
class PlaneSectionLoop:
    """Nonvanishing vectors ``samples[k]`` at ``t_k = k / n`` on R/Z."""
    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise GridMismatch("samples must have shape (n, 2)")
        if np.min(np.linalg.norm(arr, axis=1)) < 1e-12:
            raise DegenerateSection("section vanishes at a sample")
        object.__setattr__(self, "samples", arr)


def loop_degree(vecs):
    """Degree of a closed sampled loop of nonzero plane vectors."""
    vecs = np.asarray(vecs, dtype=float)
    closed = np.concatenate([vecs, vecs[:1]], axis=0)
    inc = _increments(closed)
    if np.max(np.abs(inc)) >= np.pi / 2:
        raise LiftResolutionFailure("loop too coarsely sampled for a degree")
    return int(np.rint(inc.sum() / (2.0 * np.pi)))


def wind_rel(W, Z):
    """Winding of ``W`` relative to ``Z`` (both nonvanishing, same grid).

    Writes ``W = a Z + b J0 Z`` and returns the degree of ``a + ib``.
    """
    W = W if isinstance(W, PlaneSectionLoop) else PlaneSectionLoop(W)
    Z = Z if isinstance(Z, PlaneSectionLoop) else PlaneSectionLoop(Z)
    w, z = W.samples, Z.samples
    if w.shape != z.shape:
        raise GridMismatch("sections sampled on different grids")
    jz = z @ J0.T
    nz = np.sum(z * z, axis=1)
    a = np.sum(w * z, axis=1) / nz
    b = np.sum(w * jz, axis=1) / nz
    return loop_degree(np.stack([a, b], axis=1))
