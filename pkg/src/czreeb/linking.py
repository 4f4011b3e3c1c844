"""Linking and self-linking numbers of closed curves in S^3.

Curves are projected stereographically into R^3 from a pole far from all
samples, and linking numbers are evaluated with the Gauss double integral
on periodic cubic-spline interpolants of the samples.
"""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize

from .errors import (
    CurvesTooClose,
    InvalidCurve,
    NotDisjoint,
    NotTransverse,
    PoleTooClose,
    ResidualTooLarge,
    UnstableEps,
)
from .reeb import lambda0, mul_j, normalize

CLOSURE_TOL = 1e-8
MAX_CHORD = 0.1
POLE_MIN_DIST = 0.05
MIN_SEPARATION = 1e-3
TARGET_RESIDUAL = 1e-2
REJECT_RESIDUAL = 0.2
MAX_NODES = 4096


class ClosedCurve:
    """Oriented closed curve on S^3 given by samples.

    A repeated final sample (closing the loop) is dropped.  Consecutive
    samples, including the wrap-around pair, must be closer than ``0.1``.
    """

    def __init__(self, samples, label="curve"):
        X = np.array(samples, dtype=float)
        if X.ndim != 2 or X.shape[1] not in (3, 4) or len(X) < 4:
            raise InvalidCurve("need at least four samples in R^4 (or R^3)")
        self.closure_defect = 0.0
        gap = np.linalg.norm(X[-1] - X[0])
        if gap < CLOSURE_TOL:
            X = X[:-1]
            self.closure_defect = float(gap)
        chords = np.linalg.norm(np.roll(X, -1, axis=0) - X, axis=1)
        if chords.max() > MAX_CHORD:
            raise InvalidCurve(f"{label}: chord {chords.max():.3f} exceeds {MAX_CHORD}")
        if X.shape[1] == 4 and np.max(np.abs(np.linalg.norm(X, axis=1) - 1.0)) > 1e-8:
            raise InvalidCurve(f"{label}: samples are not on S^3")
        self.samples = X
        self.label = label

    def __len__(self):
        return len(self.samples)

    def reversed(self):
        return ClosedCurve(self.samples[::-1], label=f"-{self.label}")

    def spline(self):
        n = len(self.samples)
        t = np.arange(n + 1) / n
        return CubicSpline(t, np.concatenate([self.samples, self.samples[:1]]),
                           bc_type="periodic")

    def resampled(self, n):
        return ClosedCurve(self.spline()(np.arange(n) / n), label=self.label)

    def shifted(self, k):
        """Same curve with the starting sample moved by ``k``."""
        return ClosedCurve(np.roll(self.samples, -k, axis=0), label=self.label)

    @classmethod
    def from_orbit(cls, orbit, label="orbit"):
        return cls(orbit.samples, label=label)

    @classmethod
    def circle(cls, a, b, n=512, label="circle"):
        """Great circle ``cos t a + sin t b`` for orthonormal ``a, b``."""
        t = 2 * np.pi * np.arange(n) / n
        return cls(np.outer(np.cos(t), a) + np.outer(np.sin(t), b), label=label)


# stereographic projection ------------------------------------------------------

def complement_basis(P):
    """Orthonormal basis ``b`` of ``P^perp`` with ``det[-P, b1, b2, b3] > 0``.

    With this orientation the projection from ``P`` preserves orientation
    (S^3 oriented as the boundary of the unit ball).
    """
    P = normalize(P)
    M = np.column_stack([P, np.eye(4)])
    Q, _ = np.linalg.qr(M)
    B = Q[:, 1:4].T * np.sign(np.dot(Q[:, 0], P))
    B = B - np.outer(B @ P, P)
    B = np.linalg.qr(B.T)[0].T
    if np.linalg.det(np.column_stack([-P, B.T])) < 0:
        B[2] = -B[2]
    return B


def project(X, P, B=None):
    B = complement_basis(P) if B is None else B
    X = np.atleast_2d(X)
    return (X @ B.T) / (1.0 - X @ P)[:, None]


def unproject(Y, P, B=None):
    B = complement_basis(P) if B is None else B
    Y = np.atleast_2d(Y)
    n2 = np.sum(Y * Y, axis=1)[:, None]
    return (2.0 * Y @ B + (n2 - 1.0) * P) / (n2 + 1.0)


def _pole_candidates():
    dirs = [d for d in itertools.product((-1, 0, 1), repeat=4) if any(d)]
    return normalize(np.array(dirs, dtype=float))


def rank_poles(points):
    """Candidate poles sorted by decreasing distance to the point cloud."""
    points = np.atleast_2d(points)
    cand = _pole_candidates()
    # |x - P|^2 = 2 - 2 <x, P> on the sphere
    dmin = np.sqrt(np.maximum(2.0 - 2.0 * np.max(points @ cand.T, axis=0), 0.0))
    order = np.argsort(-dmin, kind="stable")
    return cand[order], dmin[order]


def _refine_pole(points, P0):
    def neg(v):
        P = normalize(v)
        return -np.sqrt(max(2.0 - 2.0 * np.max(points @ P), 0.0))
    res = minimize(neg, P0, method="Nelder-Mead",
                   options={"xatol": 1e-6, "fatol": 1e-9, "maxiter": 400})
    P = normalize(res.x)
    return (P, -neg(P)) if -neg(P) >= -neg(P0) else (P0, -neg(P0))


def choose_pole(curves, rank=0):
    """Pole far from every sample: coarse candidates, then local refinement.

    ``rank`` selects the ``rank``-th best coarse candidate (for pole-change
    checks).
    """
    pts = np.concatenate([c.samples for c in curves])
    cand, _ = rank_poles(pts)
    P, d = _refine_pole(pts, cand[rank])
    if d < POLE_MIN_DIST:
        raise PoleTooClose(f"best pole is only {d:.3g} from the curves", distance=d)
    return P, d


@dataclass(frozen=True)
class Projection:
    curves: tuple
    pole: np.ndarray
    distance: float


def stereographic_project(curves, pole=None, rank=0):
    """Project curves on S^3 into R^3 from a common pole."""
    if pole is None:
        P, d = choose_pole(curves, rank)
    else:
        P = normalize(pole)
        pts = np.concatenate([c.samples for c in curves])
        d = float(np.sqrt(max(2.0 - 2.0 * np.max(pts @ P), 0.0)))
        if d < POLE_MIN_DIST:
            raise PoleTooClose(f"pole is only {d:.3g} from the curves", distance=d)
    B = complement_basis(P)
    return Projection(tuple(project(c.samples, P, B) for c in curves), P, d)


# Gauss integral -----------------------------------------------------------------

def _periodic_spline(Y):
    n = len(Y)
    t = np.arange(n + 1) / n
    return CubicSpline(t, np.concatenate([Y, Y[:1]]), bc_type="periodic")


def _gauss_sum(r1, d1, r2, d2, chunk=256):
    """Rectangle rule for ``(1/4pi) sum (r1 - r2) . (d1 x d2) / |r1 - r2|^3``."""
    total = 0.0
    for i in range(0, len(r1), chunk):
        diff = r1[i:i + chunk, None, :] - r2[None, :, :]
        cross = np.cross(d1[i:i + chunk, None, :], d2[None, :, :])
        num = np.sum(diff * cross, axis=-1)
        den = np.sum(diff * diff, axis=-1) ** 1.5
        total += np.sum(num / den)
    return total / (4.0 * np.pi * len(r1) * len(r2))


def gauss_integral(Y1, Y2, n):
    s1, s2 = _periodic_spline(Y1), _periodic_spline(Y2)
    t = (np.arange(n) + 0.5) / n
    return _gauss_sum(s1(t), s1(t, 1), s2(t), s2(t, 1))


@dataclass(frozen=True)
class LinkResult:
    value: int
    raw: float
    residual: float
    nodes: int
    pole: np.ndarray

    def as_dict(self):
        return {"link": self.value, "raw": self.raw, "residual": self.residual,
                "nodes": self.nodes, "pole": self.pole.tolist()}


def min_distance(A, B, chunk=512):
    best = np.inf
    for i in range(0, len(A), chunk):
        d = np.linalg.norm(A[i:i + chunk, None, :] - B[None], axis=-1)
        best = min(best, float(d.min()))
    return best


def gauss_linking(c1, c2, pole=None, rank=0, n_start=None):
    """Linking number of two disjoint closed curves on S^3.

    The quadrature node count doubles (with a Richardson-extrapolated
    value) until both the distance to the nearest integer and the change
    under refinement are below ``1e-2``, or 4096 nodes are reached.
    """
    sep = min_distance(c1.samples, c2.samples)
    if sep < MIN_SEPARATION:
        raise CurvesTooClose(f"curves come within {sep:.2e}", distance=sep)
    proj = stereographic_project([c1, c2], pole, rank)
    Y1, Y2 = proj.curves
    n = n_start or max(256, len(c1), len(c2))
    n = min(n, MAX_NODES // 2)
    prev = gauss_integral(Y1, Y2, n)
    while True:
        n *= 2
        cur = gauss_integral(Y1, Y2, n)
        est = cur + (cur - prev) / 15.0
        # the rule converges spectrally for smooth separated curves, so the
        # last change also bounds the error
        residual = max(abs(est - round(est)), abs(cur - prev))
        if residual < TARGET_RESIDUAL or n >= MAX_NODES:
            break
        prev = cur
    if residual > REJECT_RESIDUAL:
        raise ResidualTooLarge(f"linking integral {est:.4f} is not near an integer",
                               raw=est)
    return LinkResult(int(round(est)), float(est), float(residual), n, proj.pole)


def link(c1, c2, **kw):
    return gauss_linking(c1, c2, **kw).value


# pushoff and self-linking -----------------------------------------------------

def pushoff(knot, frame=None, eps=1e-2):
    """Move each sample a geodesic distance ``eps`` along the unit ``j x``.

    ``frame`` may be any object with a ``Z1`` evaluator; only the direction
    of ``Z1`` is used.
    """
    if not 0 < eps <= 0.05:
        raise ValueError("eps must lie in (0, 0.05]")
    X = knot.samples
    Z = mul_j(X) if frame is None else frame.Z1(X)
    Z = Z - np.sum(Z * X, axis=1)[:, None] * X
    U = normalize(Z)
    Xp = np.cos(eps) * X + np.sin(eps) * U
    out = ClosedCurve(Xp, label=f"pushoff({knot.label})")
    d = min_distance(Xp, X)
    if d < eps / 2:
        raise NotDisjoint(f"pushoff comes within {d:.2e} of the knot", distance=d)
    return out


def transversality(knot):
    """``min lambda0(x, x') / |x'|`` along the knot (positive: positively transverse)."""
    spl = knot.spline()
    t = np.arange(len(knot)) / len(knot)
    X, dX = spl(t), spl(t, 1)
    return float(np.min(lambda0(X, dX) / np.linalg.norm(dX, axis=1)))


@dataclass(frozen=True)
class SelfLinkResult:
    value: int
    eps: float
    link_eps: LinkResult
    link_half: LinkResult

    def as_dict(self):
        return {"sl": self.value, "eps": self.eps,
                "raw": self.link_eps.raw, "raw_half": self.link_half.raw}


def self_linking(knot, frame=None, eps=1e-2, max_halvings=6):
    """``link(pushoff(knot), knot)`` with ``eps`` stable under halving."""
    tr = transversality(knot)
    if tr < 1e-3:
        raise NotTransverse(f"knot not positively transverse (min {tr:.2e})")
    last = None
    for _ in range(max_halvings + 1):
        try:
            a = gauss_linking(pushoff(knot, frame, eps), knot)
            b = gauss_linking(pushoff(knot, frame, eps / 2), knot)
        except (NotDisjoint, CurvesTooClose, ResidualTooLarge) as exc:
            last = exc
            eps /= 2
            continue
        if a.value == b.value:
            return SelfLinkResult(a.value, eps, a, b)
        last = None
        eps /= 2
    raise UnstableEps(f"self-linking not stable down to eps={eps:.2e}"
                      + (f" ({last.detail})" if last else ""))
