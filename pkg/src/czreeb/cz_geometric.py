"""Conley-Zehnder index from the winding interval of a symplectic path.

For ``phi(t) e^{is} = r(t, s) e^{i theta(t, s)}`` with ``theta(0, s) = s`` the
map ``Delta(s) = (theta(1, s) - s) / 2 pi`` has a closed image of length below
one half.  Its position relative to the integers gives the index, and an
integer endpoint signals that ``phi(1)`` has eigenvalue one.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyMismatch, IntervalTooLong
from .sp_path import I2, det2, lift_angles

GAP_TOL = 1e-6
DET_TOL = 1e-8
N_S_GRID = 64


@dataclass(frozen=True)
class WindingInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("lo > hi")
        if self.hi - self.lo >= 0.5:
            raise IntervalTooLong(
                f"winding interval [{self.lo}, {self.hi}] has length >= 1/2")

    @property
    def length(self):
        return self.hi - self.lo

    def as_list(self):
        return [self.lo, self.hi]


@dataclass(frozen=True)
class CzResult:
    index: int
    degenerate: bool
    interval: WindingInterval
    endpoint_gap: float
    det_gap: float

    def as_dict(self):
        return {"index": self.index, "interval": self.interval.as_list(),
                "degenerate": self.degenerate}


def _critical_angles(A):
    """Angles in ``[0, pi)`` where ``|A e^{is}| = 1``, i.e. where Delta is
    stationary (``theta_s = 1 / |A e^{is}|^2`` when ``det A = 1``)."""
    evals, Q = np.linalg.eigh(A.T @ A)
    lo, hi = evals
    if hi - lo < 1e-14:
        return np.empty(0)
    c2 = np.clip((hi - 1.0) / (hi - lo), 0.0, 1.0)
    # eigenvector order from eigh is ascending: coordinates (x along lo, y along hi)
    x, y = np.sqrt(c2), np.sqrt(1.0 - c2)
    out = []
    for sign in (1.0, -1.0):
        u = Q @ np.array([x, sign * y])
        out.append(math.atan2(u[1], u[0]) % np.pi)
    return np.array(out)


def delta_function(path, s):
    theta, _ = lift_angles(path, s)
    return (theta - np.asarray(s)) / (2.0 * np.pi)


def winding_interval(path, n_grid=N_S_GRID):
    """Image of ``Delta`` as a :class:`WindingInterval`.

    ``Delta`` is pi-periodic, so only ``s in [0, pi)`` is sampled.  The
    uniform grid is augmented by the two stationary directions of
    ``Delta``, which makes the extremes exact up to the lift accuracy.
    """
    A = path.end
    s = np.concatenate([np.linspace(0.0, np.pi, n_grid, endpoint=False),
                        _critical_angles(A)])
    d = delta_function(path, s)
    return WindingInterval(float(d.min()), float(d.max()))


def mu_hat(interval, tol=0.0):
    """Index of a winding interval, extended lower semi-continuously.

    Endpoints within ``tol`` of an integer are snapped to it first.  The rule
    ``mu(J) = lim mu(J - eps)`` amounts to: ``2k`` if ``lo <= k < hi`` for some
    integer ``k``, otherwise ``2k + 1`` with ``J - eps`` inside ``(k, k+1)``.
    """
    lo, hi = interval.lo, interval.hi
    if tol > 0:
        if abs(lo - round(lo)) <= tol:
            lo = float(round(lo))
        if abs(hi - round(hi)) <= tol:
            hi = float(round(hi))
    k = math.ceil(lo)
    if k < hi:
        return 2 * k
    return 2 * (math.ceil(lo) - 1) + 1


def endpoint_gap(interval):
    return min(abs(interval.lo - round(interval.lo)),
               abs(interval.hi - round(interval.hi)))


def cz_geometric(path, gap_tol=GAP_TOL, det_tol=DET_TOL):
    """Conley-Zehnder index of ``path`` via its winding interval.

    Degeneracy is decided twice: an integer endpoint of the interval and a
    vanishing ``det(phi(1) - I)``.  The two must agree; otherwise the path
    sits in the tolerance band and :class:`DegeneracyMismatch` is raised.
    """
    interval = winding_interval(path)
    gap = endpoint_gap(interval)
    dgap = abs(float(det2(path.end - I2)))
    by_interval = gap < gap_tol
    by_det = dgap < det_tol
    if by_interval != by_det:
        raise DegeneracyMismatch(
            f"{path.label}: endpoint gap {gap:.3e} vs |det(phi(1)-I)| {dgap:.3e}",
            gap=gap, det=dgap)
    index = mu_hat(interval, tol=gap_tol if by_interval else 0.0)
    return CzResult(index, by_interval, interval, gap, dgap)


def framing_shift(index, sl):
    """Index after changing trivialisation by ``sl`` twists: ``index + 2 sl``."""
    return int(index) + 2 * int(sl)
