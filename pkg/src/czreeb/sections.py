"""Disk-like surfaces of section on ellipsoid levels and their return maps.

The page ``{arg x2 = 0}`` is the graph ``w -> (w, sqrt(1 - |w|^2))`` over the
closed unit disk and is bounded by the circle ``{x2 = 0}``; the dual page
swaps the two complex coordinates.  Crossings are detected on the smooth
functional ``Im x_b`` (``b`` the coordinate vanishing on the boundary)
restricted to ``Re x_b > 0``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import NoFixedPointFound, NoReturnWithinHorizon, TransversalityLost
from .reeb import (
    PeriodicOrbit,
    _dopri_step,
    _integrate,
    _System,
    ellipsoid_orbit,
    find_orbit,
    reeb_batch,
)

RETURN_TOL = 1e-10
AREA_TOL = 1e-13
AREA_STEP = 1e-4
NEWTON_STEP = 1e-6


@dataclass
class DiskSection:
    """Page ``{arg x_b = 0}`` parametrised by the unit disk.

    ``binding`` is 2 for the page bounded by ``{x2 = 0}`` and 1 for the dual
    page bounded by ``{x1 = 0}``.
    """
    level: object = field(repr=False)
    binding: int = 2
    boundary_period: float = None

    @property
    def _b(self):
        return 2 if self.binding == 2 else 0

    @property
    def _w(self):
        return 0 if self.binding == 2 else 2

    def point(self, w):
        """Page point over ``w`` (complex or a pair of reals)."""
        w = complex(*w) if np.ndim(w) else complex(w)
        r2 = abs(w) ** 2
        if r2 > 1.0 + 1e-12:
            raise ValueError("w outside the closed unit disk")
        x = np.zeros(4)
        x[self._w], x[self._w + 1] = w.real, w.imag
        x[self._b] = math.sqrt(max(1.0 - r2, 0.0))
        return x

    def coordinate(self, x):
        return complex(x[self._w], x[self._w + 1])

    def crossing(self, x):
        return x[..., self._b + 1]

    def on_page_side(self, x):
        return x[..., self._b] > 0

    def boundary_orbit(self):
        return ellipsoid_orbit(self.level, 1 if self.binding == 2 else 2)

    def arg_rate(self, X):
        """``d arg(x_b)(R)``: the transversality margin of the page."""
        X = np.atleast_2d(X)
        R = reeb_batch(self.level, X)
        zb = X[:, self._b] + 1j * X[:, self._b + 1]
        rb = R[:, self._b] + 1j * R[:, self._b + 1]
        return np.imag(np.conj(zb) * rb) / np.abs(zb) ** 2

    def transversality_margin(self, n_radii=8, n_angles=16, max_radius=0.99):
        """Minimum of the arg rate over a polar grid of interior page points."""
        pts = [self.point(r * np.exp(1j * a))
               for r in np.linspace(0.0, max_radius, n_radii)
               for a in np.linspace(0, 2 * np.pi, n_angles, endpoint=False)]
        return float(np.min(self.arg_rate(np.array(pts))))

    def area_coordinate(self, w):
        """``u = sqrt(f) w``: the pulled-back form is ``du1 ^ du2`` in ``u``."""
        f = self.level.f(self.point(w))[0]
        return math.sqrt(f) * complex(w)

    def from_area_coordinate(self, u):
        rho = abs(u)
        if rho == 0.0:
            return 0j
        phase = u / rho

        def g(r):
            return math.sqrt(self.level.f(self.point(r * phase))[0]) * r - rho
        r = brentq(g, 0.0, 1.0, xtol=1e-16, rtol=4 * np.finfo(float).eps)
        return r * phase


def ellipsoid_section(level, dual=False, check_ratio=0.5):
    """Page bounded by ``{x2 = 0}`` (or ``{x1 = 0}`` when ``dual``).

    For perturbed ellipsoids the same page is kept as long as its
    transversality margin stays above ``check_ratio`` times the unperturbed
    value; otherwise :class:`TransversalityLost` is raised.
    """
    r1, r2 = level.params["r1"], level.params["r2"]
    binding = 1 if dual else 2
    period = math.pi * (r2 if dual else r1) ** 2
    sec = DiskSection(level, binding, period)
    if level.kind != "ellipsoid":
        base = 2.0 / (r1 if dual else r2) ** 2
        margin = sec.transversality_margin()
        if margin < check_ratio * base:
            raise TransversalityLost(
                f"page margin {margin:.3g} below {check_ratio:.0%} of {base:.3g}")
    return sec


def _first_crossing(section, p, T, tol, direction=1, count=1):
    """First time in ``(0, T]`` (or ``[T, 0)``) at which the trajectory of ``p``
    meets the page; ``direction=1`` keeps only crossings with increasing
    ``arg x_b`` in forward time.  ``count`` selects the ``count``-th crossing."""
    system = _System(section.level)
    hit = {}
    seen = [0]

    def on_step(t0, y0, t1, y1):
        g0, g1 = section.crossing(y0), section.crossing(y1)
        if t0 == 0.0 and g0 == 0.0:
            return False
        if forward and direction == 1:
            crossed = g0 < 0.0 <= g1
        else:
            crossed = (g0 < 0.0 <= g1) or (g0 > 0.0 >= g1)
        if not crossed:
            return False
        h = t1 - t0

        def state(tau):
            return system.project(_dopri_step(system, y0, tau)[0])

        tau = brentq(lambda s: section.crossing(state(s)), 0.0, h,
                     xtol=1e-15, rtol=4 * np.finfo(float).eps)
        y = state(tau)
        if not section.on_page_side(y):
            return False
        seen[0] += 1
        if seen[0] < count:
            return False
        hit["t"], hit["y"] = t0 + tau, y
        return True

    forward = T > 0
    _integrate(system, p, T, tol, on_step=on_step)
    if not hit:
        raise NoReturnWithinHorizon(f"no crossing within |t| <= {abs(T):.4g}")
    return hit["y"], hit["t"]


def return_map(level, section, p, tol=RETURN_TOL, horizon=None):
    """First return of the page point ``p`` (a point on S^3 or a disk value)."""
    x = section.point(p) if np.ndim(p) == 0 or np.size(p) == 2 else np.asarray(p, float)
    if abs(section.crossing(x)) > 1e-10 or not section.on_page_side(x):
        raise ValueError("point is not in the open page")
    # snap onto the page so the start itself is not detected as a crossing
    x = section.point(section.coordinate(x))
    horizon = horizon or 10.0 * section.boundary_period
    if section.level is not level:
        section = DiskSection(level, section.binding, section.boundary_period)
    return _first_crossing(section, x, horizon, tol)


def return_map_single(level, section, w, k, tol=RETURN_TOL):
    """``k``-th return from one integration (no restarts on the page)."""
    x = section.point(w)
    horizon = 10.0 * section.boundary_period * k
    y, t = _first_crossing(section, x, horizon, tol, count=k)
    return section.coordinate(y), t


def return_map_disk(level, section, w, tol=RETURN_TOL, k=1):
    """``k``-fold return map in disk coordinates; also returns the total time."""
    x = section.point(w)
    total = 0.0
    for _ in range(k):
        x, t = return_map(level, section, x, tol)
        total += t
    return section.coordinate(x), total


@dataclass
class ReturnMapReport:
    pairs: list
    area_defect: float = None
    fixed_point: np.ndarray = None
    orbit: PeriodicOrbit = None

    def rows(self):
        return [(*p.tolist(), *q.tolist(), t) for p, q, t in self.pairs]


def sample_returns(level, section, disk_points, tol=RETURN_TOL):
    pairs = []
    for w in disk_points:
        x = section.point(w)
        y, t = return_map(level, section, x, tol)
        pairs.append((x, y, t))
    return ReturnMapReport(pairs)


def area_preservation_check(level, section, n_samples=6, seed=0, points=None,
                            step=AREA_STEP, tol=AREA_TOL):
    """Worst ``|det D P - 1|`` of the return map in area coordinates.

    Central differences with step ``step`` in ``u = sqrt(f) w``.
    """
    if points is None:
        rng = np.random.default_rng(seed)
        r = 0.8 * np.sqrt(rng.uniform(0, 1, n_samples))
        a = rng.uniform(0, 2 * np.pi, n_samples)
        points = r * np.exp(1j * a)

    def P(u):
        w = section.from_area_coordinate(u)
        w2, _ = return_map_disk(level, section, w, tol)
        return section.area_coordinate(w2)

    worst = 0.0
    for w in np.atleast_1d(points):
        u0 = section.area_coordinate(complex(w))
        cols = []
        for e in (1.0, 1j):
            d = (P(u0 + step * e) - P(u0 - step * e)) / (2 * step)
            cols.append([d.real, d.imag])
        worst = max(worst, abs(np.linalg.det(np.array(cols).T) - 1.0))
    return float(worst)


def fixed_point(level, section, starts=None, tol=1e-10, max_iter=30, h=NEWTON_STEP):
    """Fixed point of the return map by damped Newton, and its closed orbit."""
    if starts is None:
        starts = [0.3 + 0.2j, -0.4 + 0.1j, 0.1 - 0.5j, 0.6j, -0.5 - 0.3j, 0.0]
    diagnostics = []
    for w0 in starts:
        w = complex(w0)
        try:
            for _ in range(max_iter):
                Pw, T = return_map_disk(level, section, w)
                F = np.array([(Pw - w).real, (Pw - w).imag])
                if np.linalg.norm(F) < tol:
                    orb = find_orbit(level, section.point(w), T)
                    return orb, w
                Jm = np.empty((2, 2))
                for j, e in enumerate((1.0, 1j)):
                    wp = return_map_disk(level, section, w + h * e)[0] - (w + h * e)
                    wm = return_map_disk(level, section, w - h * e)[0] - (w - h * e)
                    d = (wp - wm) / (2 * h)
                    Jm[:, j] = [d.real, d.imag]
                delta = np.linalg.solve(Jm, -F)
                lam = 1.0
                while abs(w + lam * complex(*delta)) >= 0.99 and lam > 1e-3:
                    lam /= 2
                w = w + lam * complex(*delta)
            diagnostics.append({"start": [w0.real, w0.imag], "residual": float(np.linalg.norm(F))})
        except (NoReturnWithinHorizon, ValueError, np.linalg.LinAlgError) as exc:
            diagnostics.append({"start": [complex(w0).real, complex(w0).imag],
                                "error": str(exc)})
    raise NoFixedPointFound("Newton failed from every start", starts=diagnostics)


def global_section_audit(level, section, n=100, horizon=None, seed=0, tol=1e-8,
                         exclusion=1e-3):
    """Forward and backward page crossings for ``n`` random starts.

    Starts within ``exclusion`` of the boundary orbit are redrawn.
    """
    horizon = horizon or 4.0 * math.pi * level.params["r2"] ** 2
    rng = np.random.default_rng(seed)
    starts = []
    while len(starts) < n:
        x = rng.normal(size=4)
        x /= np.linalg.norm(x)
        if np.hypot(x[section._b], x[section._b + 1]) > exclusion:
            starts.append(x)
    fwd, bwd, failures = [], [], []
    for i, x in enumerate(starts):
        for sign, store in ((1.0, fwd), (-1.0, bwd)):
            try:
                _, t = _first_crossing(section, x, sign * horizon, tol, direction=0)
                store.append(abs(t))
            except NoReturnWithinHorizon:
                failures.append({"start": i, "direction": "forward" if sign > 0 else "backward"})

    def stats(v):
        return {"count": len(v), "min": float(np.min(v)) if v else None,
                "max": float(np.max(v)) if v else None,
                "mean": float(np.mean(v)) if v else None}
    return {"n": n, "horizon": horizon, "forward": stats(fwd), "backward": stats(bwd),
            "failures": failures, "passed": not failures}
