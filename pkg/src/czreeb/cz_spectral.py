"""Conley-Zehnder index from the spectrum of ``L = -J0 d/dt - S(t)``.

``S`` is a 1-periodic path of symmetric 2x2 matrices and ``L`` acts on loops
``R/Z -> R^2``.  Eigenvectors never vanish, so each eigenvalue carries a
winding number; for every integer there are exactly two eigenvalues (with
multiplicity) of that winding, and winding is monotone in the eigenvalue.
With ``lam_minus`` the largest negative and ``lam_plus`` the smallest
non-negative eigenvalue, the index is ``2 wind(lam_minus) + p`` where
``p = wind(lam_plus) - wind(lam_minus)``.

The operator is discretised by Fourier-Galerkin in the real basis
``{1, sqrt2 cos 2 pi k t, sqrt2 sin 2 pi k t} x R^2``.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._linalg import jacobi_eigh
from .errors import (
    IntegrationDivergence,
    NonPeriodicPotential,
    TruncationNotConverged,
    WindingAmbiguous,
    ZeroEigenvalueAmbiguity,
)
from .sp_path import J0, SymplecticPath, sp_inverse

DEFAULT_K = 64
QUAD_POINTS = 512
CLUSTER_TOL = 1e-7
CONVERGENCE_TOL = 1e-8
ZERO_TOL = 1e-9
RESIDUAL_TOL = 1e-8


class SymmetricPotential:
    """A 1-periodic path of symmetric 2x2 matrices.

    ``evaluator`` maps a 1-D array of times to ``(n, 2, 2)``.  Potentials
    built with :meth:`trig` also keep their Fourier data.
    """

    def __init__(self, evaluator, sample_count=QUAD_POINTS, label="S",
                 check=True, periodic_tol=1e-10):
        self._eval = evaluator
        self.sample_count = int(sample_count)
        self.label = label
        self.trig_data = None
        if check:
            self.validate(periodic_tol)

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        out = self._eval(np.atleast_1d(t_arr).ravel())
        return out[0] if t_arr.ndim == 0 else out.reshape(t_arr.shape + (2, 2))

    def samples(self, n=None):
        n = n or self.sample_count
        return self(np.arange(n) / n)

    def max_norm(self, n=None):
        return float(np.max(np.linalg.norm(self.samples(n), ord=2, axis=(1, 2))))

    def max_entry(self, n=None):
        return float(np.max(np.abs(self.samples(n))))

    def validate(self, periodic_tol=1e-10):
        vals = self.samples()
        asym = np.max(np.abs(vals - np.swapaxes(vals, 1, 2)))
        if asym > 1e-12:
            raise ValueError(f"{self.label}: potential not symmetric ({asym:.2e})")
        gap = np.max(np.abs(self(0.0) - self(1.0)))
        if gap > periodic_tol:
            raise NonPeriodicPotential(
                f"{self.label}: S(0) and S(1) differ by {gap:.2e}", gap=gap)
        return self

    def shifted(self, c):
        """``S + c I``: shifts the spectrum of ``L`` by ``-c``."""
        out = SymmetricPotential(lambda t: self._eval(t) + c * np.eye(2),
                                 self.sample_count, label=f"{self.label}+{c:.6g}I")
        if self.trig_data is not None:
            const, cos, sin = self.trig_data
            out.trig_data = (const + c * np.eye(2), cos, sin)
        return out

    def __add__(self, other):
        return SymmetricPotential(lambda t: self._eval(t) + other._eval(t),
                                  max(self.sample_count, other.sample_count),
                                  label=f"{self.label}+{other.label}")

    def scaled(self, c):
        return SymmetricPotential(lambda t: c * self._eval(t), self.sample_count,
                                  label=f"{c:g}*{self.label}")

    @classmethod
    def constant(cls, M):
        M = np.array(M, dtype=float)
        return cls.trig(M, [], [], label="const")

    @classmethod
    def trig(cls, const, cos, sin, label="trig"):
        """``const + sum_k cos[k-1] cos(2 pi k t) + sin[k-1] sin(2 pi k t)``."""
        const = np.array(const, dtype=float).reshape(2, 2)
        cos = np.array(cos, dtype=float).reshape(-1, 2, 2)
        sin = np.array(sin, dtype=float).reshape(-1, 2, 2)
        if len(cos) != len(sin):
            n = max(len(cos), len(sin))
            cos = np.concatenate([cos, np.zeros((n - len(cos), 2, 2))])
            sin = np.concatenate([sin, np.zeros((n - len(sin), 2, 2))])
        ks = 2.0 * np.pi * np.arange(1, len(cos) + 1)

        def ev(t):
            ang = np.outer(t, ks)
            return (const + np.einsum("nk,kij->nij", np.cos(ang), cos)
                    + np.einsum("nk,kij->nij", np.sin(ang), sin))
        obj = cls(ev, label=label)
        obj.trig_data = (const, cos, sin)
        return obj

    def to_json(self):
        if self.trig_data is None:
            raise ValueError("only trigonometric potentials serialise")
        const, cos, sin = self.trig_data
        return {"const": const.tolist(), "cos": cos.tolist(), "sin": sin.tolist()}


def random_trig_potential(rng, degree=4, bound=6.0, amplitude=None):
    """Random symmetric trigonometric polynomial with entries bounded by ``bound``.

    The peak entry is rescaled to ``amplitude`` (default: uniform in
    ``[0.5, bound]``).
    """
    d = int(rng.integers(0, degree + 1))

    def sym(shape):
        a = rng.normal(size=shape + (2, 2))
        return 0.5 * (a + np.swapaxes(a, -1, -2))
    const = sym(())
    cos = sym((d,)) / (1.0 + np.arange(d))[:, None, None]
    sin = sym((d,)) / (1.0 + np.arange(d))[:, None, None]
    S = SymmetricPotential.trig(const, cos, sin)
    peak = S.max_entry(1024)
    amp = rng.uniform(0.5, bound) if amplitude is None else amplitude
    c = amp / peak
    return SymmetricPotential.trig(c * const, c * cos, c * sin,
                                   label=f"trig(deg={d})")


# path <-> potential ---------------------------------------------------------

def _rk4_grid(Sa, Sb, Sc, N):
    """Classical RK4 for ``phi' = J0 S phi`` on ``N`` uniform steps.

    ``Sa, Sb, Sc`` hold the entries of ``S = [[a, b], [b, c]]`` at the
    ``2N + 1`` half-step times.  Each step is renormalised to det one.
    """
    h = 1.0 / N
    h2 = 0.5 * h
    h6 = h / 6.0
    out = np.empty((N + 1, 4))
    p, q, r, s = 1.0, 0.0, 0.0, 1.0
    out[0] = (p, q, r, s)
    Sa, Sb, Sc = Sa.tolist(), Sb.tolist(), Sc.tolist()
    sqrt = math.sqrt
    for n in range(N):
        i = 2 * n
        a0, b0, c0 = Sa[i], Sb[i], Sc[i]
        am, bm, cm = Sa[i + 1], Sb[i + 1], Sc[i + 1]
        a1, b1, c1 = Sa[i + 2], Sb[i + 2], Sc[i + 2]
        # J0 S = [[-b, -c], [a, b]]
        k1p = -b0 * p - c0 * r; k1q = -b0 * q - c0 * s
        k1r = a0 * p + b0 * r; k1s = a0 * q + b0 * s
        pp, qq, rr, ss = p + h2 * k1p, q + h2 * k1q, r + h2 * k1r, s + h2 * k1s
        k2p = -bm * pp - cm * rr; k2q = -bm * qq - cm * ss
        k2r = am * pp + bm * rr; k2s = am * qq + bm * ss
        pp, qq, rr, ss = p + h2 * k2p, q + h2 * k2q, r + h2 * k2r, s + h2 * k2s
        k3p = -bm * pp - cm * rr; k3q = -bm * qq - cm * ss
        k3r = am * pp + bm * rr; k3s = am * qq + bm * ss
        pp, qq, rr, ss = p + h * k3p, q + h * k3q, r + h * k3r, s + h * k3s
        k4p = -b1 * pp - c1 * rr; k4q = -b1 * qq - c1 * ss
        k4r = a1 * pp + b1 * rr; k4s = a1 * qq + b1 * ss
        p += h6 * (k1p + 2.0 * (k2p + k3p) + k4p)
        q += h6 * (k1q + 2.0 * (k2q + k3q) + k4q)
        r += h6 * (k1r + 2.0 * (k2r + k3r) + k4r)
        s += h6 * (k1s + 2.0 * (k2s + k3s) + k4s)
        det = p * s - q * r
        if not det > 0.0:
            raise IntegrationDivergence("determinant collapsed during RK4")
        f = 1.0 / sqrt(det)
        p *= f; q *= f; r *= f; s *= f
        out[n + 1] = (p, q, r, s)
    return out.reshape(N + 1, 2, 2)


def path_from_potential(S, tol=1e-8, min_steps=1024, max_steps=2 ** 17):
    """Solve ``-J0 phi' - S phi = 0``, ``phi(0) = I`` (i.e. ``phi' = J0 S phi``).

    The step count doubles until the step-doubling estimate of the error,
    relative to ``max(1, max |phi|)``, is below ``tol``.  The result is a cubic-Hermite sampled path whose nodal
    derivatives are ``J0 S phi`` exactly.
    """
    N = max(min_steps, 2 ** math.ceil(math.log2(max(1.0, 100.0 * S.max_norm()))))
    while True:
        if N > max_steps:
            raise IntegrationDivergence(
                f"{S.label}: no convergence with {max_steps} steps")
        th = np.arange(2 * N + 1) / (2 * N)
        vals = S(th)
        fine = _rk4_grid(vals[:, 0, 0], vals[:, 0, 1], vals[:, 1, 1], N)
        coarse = _rk4_grid(vals[::2, 0, 0], vals[::2, 0, 1], vals[::2, 1, 1], N // 2)
        # relative to the path size: hyperbolic potentials grow like e^|S|
        scale = max(1.0, float(np.max(np.abs(fine))))
        residual = float(np.max(np.abs(fine[::2] - coarse))) / scale
        if residual < tol:
            break
        N *= 2
    t = th[::2]
    deriv = J0 @ vals[::2] @ fine
    path = SymplecticPath.from_samples(t, fine, derivatives=deriv,
                                       label=f"path({S.label})")
    path.potential = S
    path.integration_residual = residual / 15.0
    path._deriv = lambda tt: J0 @ S._eval(tt) @ path._eval(tt)
    return path


def potential_from_path(path, periodic_tol=1e-6, n=QUAD_POINTS):
    """``S = -J0 phi' phi^{-1}``, symmetrised.

    Raises :class:`NonPeriodicPotential` when ``S(0) != S(1)``; the operator
    ``L`` only makes sense for periodic potentials.  The symmetry defect
    of the raw matrices is stored as ``symmetry_defect``.
    """
    def raw(t):
        return -J0 @ path.derivative(t) @ sp_inverse(path._eval(t))

    def ev(t):
        m = raw(t)
        return 0.5 * (m + np.swapaxes(m, 1, 2))
    grid = np.linspace(0.0, 1.0, n + 1)
    m = raw(grid)
    defect = float(np.max(np.abs(m - np.swapaxes(m, 1, 2))))
    S = SymmetricPotential(ev, sample_count=n, label=f"S({path.label})",
                           check=False)
    S.symmetry_defect = defect
    S.validate(periodic_tol)
    return S


# Galerkin operator ------------------------------------------------------------

def _basis(t, K):
    """Orthonormal real trigonometric basis at times ``t``: ``(len(t), 2K+1)``."""
    ks = np.arange(1, K + 1)
    ang = 2.0 * np.pi * np.outer(t, ks)
    B = np.empty((len(t), 2 * K + 1))
    B[:, 0] = 1.0
    B[:, 1::2] = math.sqrt(2.0) * np.cos(ang)
    B[:, 2::2] = math.sqrt(2.0) * np.sin(ang)
    return B


def galerkin_matrix(S, K):
    """Symmetric matrix of ``L`` on modes ``|k| <= K``; size ``2(2K+1)``.

    Ordering: function index major, vector component minor.
    """
    nb = 2 * K + 1
    Q = max(QUAD_POINTS, 4 * K + 32)
    tq = np.arange(Q) / Q
    B = _basis(tq, K)
    Sq = S(tq)
    M = np.zeros((nb, 2, nb, 2))
    for i in range(2):
        for j in range(2):
            M[:, i, :, j] = (B.T * Sq[:, i, j]) @ B / Q
    D = np.zeros((nb, 2, nb, 2))
    for k in range(1, K + 1):
        c, s = 2 * k - 1, 2 * k
        # <c_k, -J d/dt s_k> = 2 pi k (-J);  <s_k, -J d/dt c_k> = 2 pi k J
        D[c, :, s, :] = -2.0 * np.pi * k * J0
        D[s, :, c, :] = 2.0 * np.pi * k * J0
    L = (D - M).reshape(2 * nb, 2 * nb)
    return 0.5 * (L + L.T)


def eigenvector_loop(vec, K, n):
    """Values of the eigenvector's trigonometric polynomial on ``n`` points."""
    coef = vec.reshape(2 * K + 1, 2)
    t = np.arange(n) / n
    return _basis(t, K) @ coef


def eigenvector_winding(vec, K, n_grid=None, min_norm_tol=1e-8):
    n = n_grid or 4 * K
    for _ in range(6):
        vals = eigenvector_loop(vec, K, n)
        norms = np.linalg.norm(vals, axis=1)
        if norms.min() < min_norm_tol:
            raise WindingAmbiguous(
                f"eigenvector nearly vanishes (min norm {norms.min():.2e})")
        closed = np.concatenate([vals, vals[:1]])
        a, b = closed[:-1], closed[1:]
        inc = np.arctan2(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0],
                         np.sum(a * b, axis=1))
        if np.max(np.abs(inc)) < np.pi / 4:
            return int(np.rint(inc.sum() / (2.0 * np.pi)))
        n *= 2
    raise WindingAmbiguous("eigenvector angle not resolved on the grid")


@dataclass(frozen=True)
class Eigen:
    value: float
    winding: int
    multiplicity: int


@dataclass(frozen=True)
class SpectrumSlice:
    eigenvalues: tuple
    truncation: int
    window: tuple = field(default=(None, None))

    def windings(self):
        return [e.winding for e in self.eigenvalues]

    def two_per_winding(self):
        counts = {}
        for e in self.eigenvalues:
            counts[e.winding] = counts.get(e.winding, 0) + e.multiplicity
        return all(c == 2 for c in counts.values())

    def monotone(self):
        w = self.windings()
        return all(a <= b for a, b in zip(w, w[1:]))

    def rows(self):
        return [(e.value, e.winding, e.multiplicity) for e in self.eigenvalues]


def _eigs(S, K, method):
    L = galerkin_matrix(S, K)
    if method == "jacobi":
        w, V = jacobi_eigh(L)
    else:
        w, V = np.linalg.eigh(L)
    res = np.linalg.norm(L @ V - V * w, axis=0)
    if np.max(res) > RESIDUAL_TOL:
        raise TruncationNotConverged(f"eigen residual {np.max(res):.2e}")
    return w, V


def _cluster(values, tol=CLUSTER_TOL):
    groups = [[0]]
    for i in range(1, len(values)):
        if values[i] - values[groups[-1][-1]] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def _slice(S, K, lo, hi, method):
    w, V = _eigs(S, K, method)
    inside = np.nonzero((w >= lo) & (w <= hi))[0]
    if len(inside) == 0:
        return [], w
    first = max(inside[0] - 3, 0)
    last = min(inside[-1] + 3, len(w) - 1)
    idx = np.arange(first, last + 1)
    winds = {i: eigenvector_winding(V[:, i], K) for i in idx}
    keep_w = {winds[i] for i in inside}
    out = []
    for group in _cluster(w[idx]):
        members = [int(idx[g]) for g in group]
        ws = {winds[m] for m in members}
        if len(members) > 2:
            raise TruncationNotConverged(
                f"cluster of {len(members)} eigenvalues near {w[members[0]]:.6g}")
        if len(ws) > 1:
            raise WindingAmbiguous(
                f"double eigenvalue {w[members[0]]:.6g} with windings {sorted(ws)}")
        wind = ws.pop()
        if wind in keep_w:
            out.append(Eigen(float(np.mean(w[members])), wind, len(members)))
    return out, w


def spectrum(S, K=DEFAULT_K, window=(-7.0, 7.0), method="eigh"):
    """Eigenvalues of ``L`` in ``window`` with windings and multiplicities.

    Every winding class touched by the window is returned complete.  The
    window must keep a margin of ``2 pi K / 4`` from the truncation edge;
    the values are certified by recomputing with ``2K`` modes.
    """
    if K < 16:
        raise ValueError("K must be at least 16")
    lo, hi = window
    edge = 2.0 * np.pi * K * 0.75
    if lo < -edge or hi > edge:
        raise TruncationNotConverged(
            f"window {window} too close to the truncation edge {edge:.1f}")
    first, _ = _slice(S, K, lo, hi, method)
    second, _ = _slice(S, 2 * K, lo, hi, method)
    if len(first) != len(second) or any(
            abs(a.value - b.value) > CONVERGENCE_TOL or a.winding != b.winding
            or a.multiplicity != b.multiplicity for a, b in zip(first, second)):
        raise TruncationNotConverged(
            f"{S.label}: spectrum changes between K={K} and K={2 * K}")
    return SpectrumSlice(tuple(first), K, (lo, hi))


def _signed_split(eigs, zero_tol):
    neg = [e for e in eigs if e.value < -zero_tol]
    nonneg = [e for e in eigs if e.value >= -zero_tol]
    return neg, nonneg


@dataclass(frozen=True)
class SpectralCz:
    index: int
    lam_minus: float
    lam_plus: float
    wind_minus: int
    wind_plus: int
    degenerate: bool


def cz_spectral_detail(S, K=None, zero_tol=ZERO_TOL, method="eigh"):
    norm = S.max_norm()
    W = 2.0 * norm + 2.0 * np.pi + 1.0
    if K is None:
        K = DEFAULT_K
        while 2.0 * np.pi * K * 0.75 < W:
            K *= 2
    sl = spectrum(S, K, (-W, W), method)
    # classification of tiny eigenvalues must survive K-doubling
    near = [e.value for e in sl.eigenvalues if abs(e.value) < 1e3 * zero_tol]
    if near:
        w2, _ = _eigs(S, 2 * K, method)
        for v in near:
            v2 = w2[np.argmin(np.abs(w2 - v))]
            if (abs(v) <= zero_tol) != (abs(v2) <= zero_tol):
                raise ZeroEigenvalueAmbiguity(
                    f"eigenvalue {v:.3e} is not classifiable as zero")
    neg, nonneg = _signed_split(sl.eigenvalues, zero_tol)
    if not neg or not nonneg:
        raise TruncationNotConverged("window misses lambda+ or lambda-")
    lm, lp = neg[-1], nonneg[0]
    p = lp.winding - lm.winding
    if p not in (0, 1):
        raise WindingAmbiguous(
            f"windings {lm.winding}, {lp.winding} violate monotonicity")
    return SpectralCz(2 * lm.winding + p, lm.value, lp.value, lm.winding,
                      lp.winding, abs(lp.value) <= zero_tol)


def cz_spectral(S, K=None, method="eigh"):
    """Conley-Zehnder index ``2 wind(lam_minus) + p`` of the potential ``S``."""
    return cz_spectral_detail(S, K, method=method).index


# engineered degenerate potentials and the batch cross-check ----------------

def degenerate_potentials(rng, n):
    """Potentials whose operator has a zero eigenvalue (degenerate paths).

    Includes ``S = 0``, rank-one constants (shears at ``t = 1``), and random
    trigonometric potentials shifted by one of their own eigenvalues.
    """
    out = [SymmetricPotential.constant(np.zeros((2, 2)))]
    for c in (2.0, -2.0, 5.5, -0.75):
        ang = rng.uniform(0, np.pi)
        u = np.array([np.cos(ang), np.sin(ang)])
        out.append(SymmetricPotential.constant(c * np.outer(u, u)))
    while len(out) < n:
        base = random_trig_potential(rng, amplitude=rng.uniform(0.5, 2.5))
        w, _ = _eigs(base, DEFAULT_K, "eigh")
        order = np.argsort(np.abs(w))
        lam = float(w[order[int(rng.integers(0, 4))]])
        shifted = base.shifted(lam)
        if shifted.max_entry(1024) <= 6.0:
            out.append(shifted)
    return out[:n]


def crosscheck_potentials(n, seed, n_degenerate=12):
    rng = np.random.default_rng(seed)
    n_deg = min(n_degenerate, n)
    pots = degenerate_potentials(rng, n_deg)
    while len(pots) < n:
        pots.append(random_trig_potential(rng))
    return pots


def _compare_one(S):
    from .cz_geometric import cz_geometric
    if isinstance(S, dict):
        S = SymmetricPotential.trig(S["const"], S["cos"], S["sin"])
    geo = cz_geometric(path_from_potential(S))
    spc = cz_spectral_detail(S)
    return {"geometric": geo.index, "spectral": spc.index,
            "degenerate_geometric": geo.degenerate,
            "degenerate_spectral": spc.degenerate,
            "interval_length": geo.interval.length}


def crosscheck(n=200, seed=7, jobs=1, n_degenerate=12):
    """Compare both index computations on ``n`` seeded potentials."""
    pots = crosscheck_potentials(n, seed, n_degenerate)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_compare_one, [S.to_json() for S in pots]))
    else:
        rows = [_compare_one(S) for S in pots]
    agree = sum(r["geometric"] == r["spectral"] for r in rows)
    return {"agree": agree, "disagree": len(rows) - agree,
            "degenerate": sum(r["degenerate_geometric"] for r in rows),
            "rows": rows}
