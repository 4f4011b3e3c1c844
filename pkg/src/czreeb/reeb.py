"""Reeb dynamics of ``lambda = f * lambda0`` on the unit sphere S^3 in R^4.

Points are ``x = (q1, p1, q2, p2)`` with ``z_j = q_j + i p_j``.  The standard
Liouville form is ``lambda0(v) = <J x, v> / 2`` and ``d lambda0 = omega0`` with
``omega0(u, v) = <J u, v>``, where ``J`` is multiplication by ``i``.  A
star-shaped level ``{sqrt(f(x)) x}`` pulls back to ``(S^3, f lambda0)``, so all
dynamics are computed on the sphere.
"""

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from .cz_geometric import cz_geometric
from .errors import (
    FrameDegenerate,
    NoConvergence,
    NonMinimalWarning,
    SingularSystem,
    StepSizeUnderflow,
)
from .sp_path import SymplecticPath

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0
FLOW_TOL = 1e-10
NEWTON_TOL = 1e-12
ORBIT_RESIDUAL = 1e-10
FD_STEP = 1e-6


# quaternionic structure --------------------------------------------------------

def mul_i(x):
    """``J x``: multiplication by ``i`` on both complex coordinates."""
    x = np.asarray(x, dtype=float)
    return np.stack([-x[..., 1], x[..., 0], -x[..., 3], x[..., 2]], axis=-1)


def mul_j(x):
    """Left multiplication by ``j``: ``(z1, z2) -> (-conj z2, conj z1)``."""
    x = np.asarray(x, dtype=float)
    return np.stack([-x[..., 2], x[..., 3], x[..., 0], -x[..., 1]], axis=-1)


def mul_k(x):
    """Left multiplication by ``k``: ``(z1, z2) -> (-i conj z2, i conj z1)``."""
    x = np.asarray(x, dtype=float)
    return np.stack([-x[..., 3], -x[..., 2], x[..., 1], x[..., 0]], axis=-1)


def lambda0(x, v):
    return 0.5 * np.sum(mul_i(x) * v, axis=-1)


def omega0(u, v):
    return np.sum(mul_i(u) * v, axis=-1)


def normalize(x):
    x = np.asarray(x, dtype=float)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def hopf_point(eta, alpha, beta):
    """``(cos eta e^{i alpha}, sin eta e^{i beta})``."""
    return np.array([math.cos(eta) * math.cos(alpha), math.cos(eta) * math.sin(alpha),
                     math.sin(eta) * math.cos(beta), math.sin(eta) * math.sin(beta)])


# levels ------------------------------------------------------------------------

def monomial_exponents(max_degree=4):
    """Exponent vectors of all monomials in ``(q1, p1, q2, p2)`` of degree 1..4.

    Ordered by degree, then lexicographically in the variable order; this
    fixes the meaning of the ``coeffs`` list of a perturbed ellipsoid.
    """
    out = []
    for d in range(1, max_degree + 1):
        for combo in combinations_with_replacement(range(4), d):
            e = [0, 0, 0, 0]
            for v in combo:
                e[v] += 1
            out.append(tuple(e))
    return np.array(out, dtype=int)


MONOMIALS = monomial_exponents()


class StarShapedLevel:
    """Positive function ``f`` on S^3 with gradient (in R^4 coordinates).

    ``f`` and ``grad`` take arrays of shape ``(n, 4)``.
    """

    def __init__(self, f, grad=None, kind="custom", params=None):
        self._f = f
        self._grad = grad
        self.kind = kind
        self.params = dict(params or {})

    def f(self, X):
        return self._f(np.atleast_2d(X))

    def grad(self, X):
        X = np.atleast_2d(X)
        if self._grad is not None:
            return self._grad(X)
        h = 1e-6
        out = np.empty_like(X)
        for a in range(4):
            e = np.zeros(4)
            e[a] = h
            out[:, a] = (self._f(X + e) - self._f(X - e)) / (2 * h)
        return out

    def __repr__(self):
        return f"StarShapedLevel({self.kind}, {self.params})"

    def to_json(self):
        return {"kind": self.kind, **self.params}

    # builders
    @classmethod
    def round(cls):
        return cls(lambda X: np.ones(len(X)), lambda X: np.zeros_like(X),
                   kind="round")

    @classmethod
    def ellipsoid(cls, r1, r2):
        w = np.array([1 / r1 ** 2, 1 / r1 ** 2, 1 / r2 ** 2, 1 / r2 ** 2])

        def f(X):
            return 1.0 / np.sum(w * X * X, axis=-1)

        def grad(X):
            Q = np.sum(w * X * X, axis=-1)
            return -2.0 * w * X / (Q * Q)[:, None]
        return cls(f, grad, kind="ellipsoid", params={"r1": r1, "r2": r2})

    @classmethod
    def perturbed_ellipsoid(cls, r1, r2, coeffs, eps=1e-3):
        """``f (1 + eps g)`` with ``g = sum coeffs[m] x^MONOMIALS[m]``."""
        base = cls.ellipsoid(r1, r2)
        c = np.zeros(len(MONOMIALS))
        coeffs = np.asarray(coeffs, dtype=float).ravel()
        if len(coeffs) > len(c):
            raise ValueError(f"at most {len(c)} coefficients")
        c[:len(coeffs)] = coeffs
        used = np.nonzero(c)[0]
        E = MONOMIALS[used]
        cu = c[used]

        def g_and_grad(X):
            P = np.prod(X[:, None, :] ** E[None], axis=-1)
            g = P @ cu
            dg = np.empty_like(X)
            for a in range(4):
                Ea = E.copy()
                Ea[:, a] = np.maximum(Ea[:, a] - 1, 0)
                Pa = np.prod(X[:, None, :] ** Ea[None], axis=-1) * E[:, a]
                dg[:, a] = Pa @ cu
            return g, dg

        def f(X):
            g, _ = g_and_grad(X)
            return base._f(X) * (1.0 + eps * g)

        def grad(X):
            g, dg = g_and_grad(X)
            return (base._grad(X) * (1.0 + eps * g)[:, None]
                    + eps * base._f(X)[:, None] * dg)
        return cls(f, grad, kind="perturbed_ellipsoid",
                   params={"r1": r1, "r2": r2, "coeffs": c.tolist(), "eps": eps})

    @classmethod
    def from_json(cls, data):
        kind = data.get("kind")
        if kind == "ellipsoid":
            return cls.ellipsoid(float(data["r1"]), float(data["r2"]))
        if kind == "perturbed_ellipsoid":
            return cls.perturbed_ellipsoid(float(data["r1"]), float(data["r2"]),
                                           data.get("coeffs", []),
                                           float(data.get("eps", 1e-3)))
        if kind == "round":
            return cls.round()
        raise ValueError(f"unknown level kind {kind!r}")

    def check(self, rng=None, n=32):
        """Positivity and gradient consistency at random points of S^3."""
        rng = rng or np.random.default_rng(0)
        X = normalize(rng.normal(size=(n, 4)))
        fx = self.f(X)
        if np.any(fx <= 0):
            raise ValueError("f is not positive")
        h = 1e-6
        G = self.grad(X)
        fd = np.empty_like(X)
        for a in range(4):
            e = np.zeros(4)
            e[a] = h
            fd[:, a] = (self.f(X + e) - self.f(X - e)) / (2 * h)
        rel = np.max(np.abs(G - fd)) / max(1.0, np.max(np.abs(fd)))
        return rel


def random_perturbation(rng, n_terms=6):
    """Sparse coefficients with ``sum |c| = 1``, hence ``|g| <= 1`` on S^3."""
    c = np.zeros(len(MONOMIALS))
    idx = rng.choice(len(MONOMIALS), size=n_terms, replace=False)
    c[idx] = rng.normal(size=n_terms)
    return c / np.sum(np.abs(c))


def golden_ellipsoid():
    return StarShapedLevel.ellipsoid(1.0, math.sqrt(GOLDEN))


# Reeb field --------------------------------------------------------------------

def _tangent_frame(X):
    """Orthonormal tangent frame ``(ix, jx, kx)`` of S^3; shape ``(n, 3, 4)``."""
    return np.stack([mul_i(X), mul_j(X), mul_k(X)], axis=1)


def dlambda(level_f, level_grad, X, U, V):
    """``d(f lambda0)(U, V)`` at points ``X`` (all arrays ``(..., 4)``)."""
    return (np.sum(level_grad * U, axis=-1) * lambda0(X, V)
            - np.sum(level_grad * V, axis=-1) * lambda0(X, U)
            + level_f * omega0(U, V))


def reeb_batch(level, X):
    """Reeb vectors at the rows of ``X`` (normalised onto S^3 first)."""
    X = normalize(np.atleast_2d(X))
    f = level.f(X)
    g = level.grad(X)
    E = _tangent_frame(X)
    Xb = X[:, None, :]
    fb, gb = f[:, None], g[:, None, :]
    A = np.empty((len(X), 3, 3))
    A[:, 0, :] = f[:, None] * lambda0(Xb, E)
    A[:, 1, :] = dlambda(fb, gb, Xb, E, E[:, 1:2, :])
    A[:, 2, :] = dlambda(fb, gb, Xb, E, E[:, 2:3, :])
    rhs = np.zeros((len(X), 3))
    rhs[:, 0] = 1.0
    try:
        c = np.linalg.solve(A, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("Reeb system is singular") from exc
    return np.einsum("na,nai->ni", c, E)


def reeb_at(level, p, check=True, tol=1e-10):
    """Reeb vector ``R`` of ``f lambda0`` at ``p``: ``lambda(R) = 1``, ``i_R d lambda = 0``."""
    p = np.asarray(p, dtype=float)
    if abs(np.linalg.norm(p) - 1.0) > 1e-10:
        raise ValueError("point is not on the unit sphere")
    R = reeb_batch(level, p)[0]
    if check:
        res = defining_residuals(level, p, R)
        if res > tol:
            raise SingularSystem(f"Reeb residual {res:.2e} exceeds {tol:.0e}")
    return R


def defining_residuals(level, p, R):
    """Max of ``|lambda(R) - 1|`` and ``|d lambda(R, e)|`` over a tangent frame."""
    p = np.atleast_2d(p)
    f, g = level.f(p)[0], level.grad(p)[0]
    E = _tangent_frame(p)[0]
    out = [abs(f * lambda0(p[0], R) - 1.0)]
    out += [abs(dlambda(f, g, p[0], R, e)) for e in E]
    out.append(abs(float(np.dot(p[0], R))))
    return max(out)


def reeb_closed_form(level, X):
    """Independent formula ``R = 2 J x / f - J pi_xi(grad f) / f^2``.

    ``pi_xi`` is the orthogonal projection onto ``span(jx, kx)``.
    """
    X = normalize(np.atleast_2d(X))
    f = level.f(X)[:, None]
    g = level.grad(X)
    jx, kx = mul_j(X), mul_k(X)
    pg = (np.sum(g * jx, -1)[:, None] * jx + np.sum(g * kx, -1)[:, None] * kx)
    return 2.0 * mul_i(X) / f - mul_i(pg) / f ** 2


@dataclass(frozen=True)
class GlobalXiFrame:
    """``Z1 = j x / sqrt f``, ``Z2 = k x / sqrt f``: ``d lambda(Z1, Z2) = 1``."""
    level: StarShapedLevel

    def Z1(self, X):
        X = np.atleast_2d(X)
        return mul_j(X) / np.sqrt(self.level.f(X))[:, None]

    def Z2(self, X):
        X = np.atleast_2d(X)
        return mul_k(X) / np.sqrt(self.level.f(X))[:, None]

    def coordinates(self, X, V):
        """Coefficients of ``V`` (mod R) in ``(Z1, Z2)``: ``dl(V, Z2), dl(Z1, V)``."""
        X = np.atleast_2d(X)
        f, g = self.level.f(X), self.level.grad(X)
        return np.stack([dlambda(f, g, X, V, self.Z2(X)),
                         dlambda(f, g, X, self.Z1(X), V)], axis=-1)

    def defects(self, X):
        X = np.atleast_2d(X)
        f, g = self.level.f(X), self.level.grad(X)
        z1, z2 = self.Z1(X), self.Z2(X)
        lam = np.maximum(np.abs(f * lambda0(X, z1)), np.abs(f * lambda0(X, z2)))
        return float(np.max(lam)), float(np.max(np.abs(dlambda(f, g, X, z1, z2) - 1.0)))


def quaternion_frame(level):
    return GlobalXiFrame(level)


# integrator --------------------------------------------------------------------

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_BS = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                187 / 2100, 1 / 40])
_E = _B - _BS


def _dopri_step(fun, y, h, k1=None):
    """One Dormand-Prince step; returns ``(y5, error estimate)``."""
    k = [fun(y) if k1 is None else k1]
    for i in range(1, 7):
        yi = y + h * sum(a * kj for a, kj in zip(_A[i], k))
        k.append(fun(yi))
    K = np.array(k)
    y5 = y + h * np.tensordot(_B, K, axes=1)
    err = h * np.tensordot(_E, K, axes=1)
    return y5, err


class _System:
    """Reeb flow on S^3, optionally with ``m`` variational vectors.

    The state is ``(x, V_1, ..., V_m)`` flattened.  ``D R . V`` is taken by
    central differences of ``x -> R(x / |x|)``.
    """

    def __init__(self, level, m=0, fd_step=FD_STEP):
        self.level = level
        self.m = m
        self.h = fd_step

    def __call__(self, y):
        x = y[:4]
        if self.m == 0:
            return reeb_batch(self.level, x)[0]
        V = y[4:].reshape(self.m, 4)
        nv = np.linalg.norm(V, axis=1)
        s = self.h / np.maximum(nv, 1e-300)
        pts = np.concatenate([x[None], x + s[:, None] * V, x - s[:, None] * V])
        R = reeb_batch(self.level, pts)
        dR = (R[1:1 + self.m] - R[1 + self.m:]) / (2 * s)[:, None]
        return np.concatenate([R[0], dR.ravel()])

    def project(self, y):
        y = y.copy()
        x = y[:4] / np.linalg.norm(y[:4])
        y[:4] = x
        if self.m:
            V = y[4:].reshape(self.m, 4)
            V -= np.outer(V @ x, x)
            y[4:] = V.ravel()
        return y


def _integrate(system, y0, T, tol=FLOW_TOL, stops=(), on_step=None,
               max_steps=2_000_000):
    """Adaptive DOPRI5 from ``0`` to ``T`` (either sign) with projection.

    Steps are shortened to land on every time in ``stops``; the states at
    the stops are returned as a dict.  ``on_step(t0, y0, t1, y1)`` is called
    after each accepted step and may return True to stop early.
    """
    y = system.project(np.asarray(y0, dtype=float))
    sgn = 1.0 if T >= 0 else -1.0
    targets = sorted({float(s) for s in stops if 0 < sgn * s < sgn * T} | {float(T)},
                     key=lambda s: sgn * s)
    out = {}
    if any(abs(s) == 0 for s in stops):
        out[0.0] = y.copy()
    if T == 0:
        out[0.0] = y.copy()
        return y, out
    t = 0.0
    h = sgn * min(abs(T), 0.05)
    ti = 0
    for _ in range(max_steps):
        target = targets[ti]
        land = sgn * (t + h - target) >= 0
        step = target - t if land else h
        y5, err = _dopri_step(system, y, step)
        scale = tol * (1.0 + np.maximum(np.abs(y), np.abs(y5)))
        en = float(np.max(np.abs(err) / scale))
        if en <= 1.0:
            y_new = system.project(y5)
            t_new = target if land else t + step
            if on_step is not None and on_step(t, y, t_new, y_new):
                return y_new, out
            t, y = t_new, y_new
            if land:
                out[target] = y.copy()
                ti += 1
                if ti == len(targets):
                    return y, out
            fac = 5.0 if en == 0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
            if not land or abs(step) >= abs(h):
                h = sgn * abs(step) * fac
        else:
            h = sgn * abs(step) * max(0.2, 0.9 * en ** -0.2)
        if abs(h) < 1e-14 * max(1.0, abs(t)):
            raise StepSizeUnderflow(f"step size underflow at t={t:.6g}")
    raise StepSizeUnderflow("maximum number of steps exceeded")


def flow(level, p0, t, tol=FLOW_TOL):
    """Time-``t`` map of the Reeb flow (negative ``t`` allowed)."""
    y, _ = _integrate(_System(level), p0, float(t), tol)
    return y


def trajectory(level, p0, times, tol=FLOW_TOL):
    """States at the given times (all of one sign, in any order)."""
    times = np.asarray(times, dtype=float)
    T = times[np.argmax(np.abs(times))] if len(times) else 0.0
    _, out = _integrate(_System(level), p0, T, tol, stops=times)
    p0n = normalize(p0)
    return np.array([p0n if t == 0 else out[float(t)] for t in times])


def flow_with_variation(level, p0, V0, t, tol=FLOW_TOL, stops=()):
    """Flow ``p0`` together with tangent vectors ``V0`` (shape ``(m, 4)``)."""
    V0 = np.atleast_2d(V0)
    sys_ = _System(level, m=len(V0))
    y0 = np.concatenate([normalize(p0), V0.ravel()])
    y, out = _integrate(sys_, y0, float(t), tol, stops=stops)
    split = lambda v: (v[:4], v[4:].reshape(len(V0), 4))
    return split(y), {s: split(v) for s, v in out.items()}


# periodic orbits ---------------------------------------------------------------

@dataclass
class PeriodicOrbit:
    """Closed Reeb trajectory through ``point`` with period ``period``.

    ``samples`` holds ``n`` points at ``t_i = i T / n`` (not repeating the
    first).  ``multiplicity`` > 1 flags a multiply covered trajectory.
    """
    point: np.ndarray
    period: float
    samples: np.ndarray
    residual: float
    minimal: bool = True
    multiplicity: int = 1
    newton_steps: int = 0
    level: StarShapedLevel = field(default=None, repr=False)

    def cover(self, k):
        return PeriodicOrbit(self.point, k * self.period,
                             np.concatenate([self.samples] * k), self.residual,
                             minimal=k == 1 and self.minimal,
                             multiplicity=k * self.multiplicity, level=self.level)

    def as_dict(self):
        return {"point": self.point.tolist(), "period": self.period,
                "residual": self.residual, "minimal": self.minimal,
                "multiplicity": self.multiplicity}

    def curve_distance(self, x):
        """Distance from ``x`` to the orbit's periodic spline interpolant."""
        n = len(self.samples)
        t = np.arange(n + 1) / n
        spl = CubicSpline(t, np.concatenate([self.samples, self.samples[:1]]),
                          bc_type="periodic")
        grid = np.linspace(0, 1, 8 * n, endpoint=False)
        d = np.linalg.norm(spl(grid) - x, axis=1)
        i = int(np.argmin(d))
        res = minimize_scalar(lambda s: np.linalg.norm(spl(s % 1.0) - x),
                              bounds=(grid[i] - 1 / (8 * n), grid[i] + 1 / (8 * n)),
                              method="bounded", options={"xatol": 1e-12})
        return float(min(res.fun, d[i]))


def _newton_solve(level, seed, T_guess, tol, max_iter, closure_tol):
    seed = normalize(seed)
    r0 = reeb_batch(level, seed)[0]
    p, T = seed.copy(), float(T_guess)
    for it in range(max_iter + 1):
        E = _tangent_frame(p[None])[0]
        (xT, W), _ = flow_with_variation(level, p, E, T, tol)
        F = xT - p
        res = float(np.linalg.norm(F))
        if res < closure_tol:
            return p, T, res, it
        if it == max_iter:
            break
        Jac = np.zeros((5, 4))
        Jac[:4, :3] = (W - E).T
        Jac[:4, 3] = reeb_batch(level, xT)[0]
        Jac[4, :3] = E @ r0
        rhs = -np.concatenate([F, [np.dot(p - seed, r0)]])
        delta = np.linalg.lstsq(Jac, rhs, rcond=None)[0]
        size = np.linalg.norm(delta)
        if size > 0.25:
            delta *= 0.25 / size
        p = normalize(p + delta[:3] @ E)
        T += delta[3]
        if T <= 0:
            break
    raise NoConvergence(f"Newton did not close the orbit (residual {res:.2e})",
                        residual=res, iterations=it)


def _sample_orbit(level, p, T, n_samples, tol, max_divisor=64):
    times = [i * T / n_samples for i in range(1, n_samples)]
    divs = {m: T / m for m in range(2, max_divisor + 1)}
    stops = sorted(set(times) | set(divs.values()) | {T})
    _, out = _integrate(_System(level), p, T, tol, stops=stops)
    samples = np.array([p] + [out[t] for t in times])
    residual = float(np.linalg.norm(out[T] - p))
    mult = 1
    for m, tm in divs.items():
        if np.linalg.norm(out[tm] - p) < 1e-6:
            mult = max(mult, m)
    return samples, residual, mult


def find_orbit(level, seed, T_guess, tol=NEWTON_TOL, max_iter=50, n_samples=512):
    """Closed Reeb orbit near ``seed`` by Newton shooting on ``(p, T)``.

    The phase condition ``<p - seed, R(seed)> = 0`` removes the time-shift
    freedom.  A multiply covered result is returned with ``minimal=False``
    and a :class:`NonMinimalWarning`.
    """
    if T_guess <= 0:
        raise ValueError("T_guess must be positive")
    p, T, res, it = _newton_solve(level, seed, T_guess, tol, max_iter, ORBIT_RESIDUAL)
    samples, residual, mult = _sample_orbit(level, p, T, n_samples, tol)
    orbit = PeriodicOrbit(p, T, samples, residual, minimal=mult == 1,
                          multiplicity=mult, newton_steps=it, level=level)
    if mult > 1:
        warnings.warn(f"orbit of period {T:.6g} is a {mult}-fold cover",
                      NonMinimalWarning)
    return orbit


def prime_orbit(orbit):
    """The simple orbit underlying a multiply covered one."""
    if orbit.multiplicity == 1:
        return orbit
    m = orbit.multiplicity
    n = len(orbit.samples) // m
    return PeriodicOrbit(orbit.point, orbit.period / m, orbit.samples[:n],
                         orbit.residual, True, 1, orbit.newton_steps, orbit.level)


def action(level, orbit):
    """``int_orbit f lambda0`` by the periodic trapezoid rule (spectral)."""
    X = orbit.samples
    R = reeb_batch(level, X)
    vals = level.f(X) * lambda0(X, R)
    return float(np.mean(vals) * orbit.period)


# linearised flow and the index ------------------------------------------------

def linearized_flow(level, orbit, frame=None, cover=1, samples_per_cover=256,
                    tol=FLOW_TOL):
    """``d phi_{tT}`` restricted to the contact planes, in the frame ``(Z1, Z2)``.

    Integrates the variational equation over ``cover`` periods directly and
    returns a sampled :class:`SymplecticPath` on ``[0, 1]``.
    """
    frame = frame or GlobalXiFrame(level)
    p = orbit.point
    T = cover * orbit.period
    n = samples_per_cover * cover
    times = [T * i / n for i in range(1, n + 1)]
    V0 = np.stack([frame.Z1(p)[0], frame.Z2(p)[0]])
    _, out = flow_with_variation(level, p, V0, T, tol, stops=times)
    X = np.array([p] + [out[t][0] for t in times])
    V = np.array([V0] + [out[t][1] for t in times])
    R = reeb_batch(level, X)
    quad = np.stack([R, frame.Z1(X), frame.Z2(X), X], axis=1)
    vol = np.abs(np.linalg.det(quad))
    if vol.min() < 1e-8:
        raise FrameDegenerate(f"frame nearly aligned with R (volume {vol.min():.2e})")
    c1 = frame.coordinates(X, V[:, 0])
    c2 = frame.coordinates(X, V[:, 1])
    mats = np.stack([c1, c2], axis=-1)
    mats /= np.sqrt(np.linalg.det(mats))[:, None, None]
    mats[0] = np.eye(2)
    path = SymplecticPath.from_samples(np.linspace(0.0, 1.0, n + 1), mats,
                                       label=f"dphi(T={T:.6g})")
    path.closure = float(np.linalg.norm(X[-1] - p))
    return path


def orbit_cz(level, orbit, frame=None, cover=1):
    """Conley-Zehnder index of the ``cover``-fold orbit in the global frame."""
    return cz_geometric(linearized_flow(level, orbit, frame, cover=cover))


def ellipsoid_orbit(level, which):
    """The exact circle orbits of an ellipsoid: ``which`` is 1 (``x2 = 0``) or 2."""
    r1, r2 = level.params["r1"], level.params["r2"]
    n = 512
    t = 2 * np.pi * np.arange(n) / n
    z = np.stack([np.cos(t), np.sin(t)], axis=1)
    zero = np.zeros_like(z)
    samples = np.hstack([z, zero]) if which == 1 else np.hstack([zero, z])
    period = np.pi * (r1 if which == 1 else r2) ** 2
    return PeriodicOrbit(samples[0].copy(), period, samples, 0.0, level=level)


def ellipsoid_cz_formula(tau, k, which):
    """Closed-form indices for ellipsoid ``(1, sqrt tau)`` circle covers."""
    if which == 1:
        return 2 * k + 2 * math.floor(k / tau) + 1
    return 2 * math.floor(k * (tau + 1)) + 1


# convexity scan ---------------------------------------------------------------

def _recurrences(level, seed, horizon, dt=0.02, tol=1e-8, threshold=0.3):
    times = np.arange(1, int(horizon / dt) + 1) * dt
    X = trajectory(level, seed, times, tol)
    d = np.linalg.norm(X - seed, axis=1)
    left = np.argmax(d > 2 * threshold) if np.any(d > 2 * threshold) else len(d)
    out = []
    for i in range(max(left, 1), len(d) - 1):
        if d[i] < threshold and d[i] <= d[i - 1] and d[i] <= d[i + 1]:
            out.append((float(times[i]), float(d[i])))
    return out


def _same_orbit(a, b):
    if abs(a.period - b.period) > 1e-6 * max(1.0, a.period):
        return False
    return a.curve_distance(b.point) < 1e-5


def _scan_seed(args):
    level, seed, cutoff = args
    detach = isinstance(level, dict)
    if detach:
        # worker processes receive the level as JSON (closures do not pickle)
        level = StarShapedLevel.from_json(level)
    found, failed = [], []
    for t_rec, _ in _recurrences(level, seed, cutoff):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NonMinimalWarning)
                orb = find_orbit(level, seed, t_rec, max_iter=25)
        except (NoConvergence, StepSizeUnderflow, SingularSystem):
            failed.append({"seed": seed.tolist(), "t_guess": t_rec})
            continue
        orb = prime_orbit(orb)
        if detach:
            orb.level = None
        found.append(orb)
        break
    return found, failed


def seed_grid(resolution):
    """Hopf-coordinate seeds ``(cos eta e^{ia}, sin eta e^{ib})``.

    ``eta`` runs over ``resolution`` values in ``[0, pi/2]``; the phases
    over ``resolution`` values each (only one phase on the two circles).
    """
    n = int(resolution)
    seeds = []
    for eta in np.linspace(0.0, np.pi / 2, n):
        phases = [0.0] if eta in (0.0, np.pi / 2) else np.linspace(0, 2 * np.pi, n, endpoint=False)
        for a in phases:
            for b in ([0.0] if eta in (0.0, np.pi / 2) else phases):
                seeds.append(hopf_point(eta, a, b))
    return np.array(seeds)


def convexity_scan(level, action_cutoff, seed_resolution=5, jobs=1):
    """Periodic orbits with action below the cutoff and their indices.

    Returns a dict with the sorted orbit list (period, cover, index), the
    minimum index, the dynamical-convexity verdict up to the cutoff and the
    unconverged seeds.
    """
    if action_cutoff <= 0:
        raise ValueError("cutoff must be positive")
    tasks = [(level, s, action_cutoff) for s in seed_grid(seed_resolution)]
    if jobs > 1:
        tasks = [(level.to_json(), s, c) for _, s, c in tasks]
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_scan_seed, tasks))
    else:
        results = [_scan_seed(t) for t in tasks]
    candidates = sorted((o for found, _ in results for o in found),
                        key=lambda o: o.period)
    for o in candidates:
        o.level = level
    prime = []
    for orb in candidates:
        if orb.period >= action_cutoff:
            continue
        if not any(_same_orbit(orb, q) for q in prime):
            prime.append(orb)
    rows = []
    for orb in prime:
        k = 1
        while k * orb.period < action_cutoff:
            res = orbit_cz(level, orb, cover=k)
            rows.append({"period": k * orb.period, "prime_period": orb.period,
                         "cover": k, "index": res.index,
                         "degenerate": res.degenerate,
                         "point": orb.point.tolist()})
            k += 1
    rows.sort(key=lambda r: (r["period"], r["cover"]))
    indices = [r["index"] for r in rows]
    min_index = min(indices) if indices else None
    return {"orbits": rows, "prime_orbits": len(prime), "min_index": min_index,
            "dynamically_convex": min_index is None or min_index >= 3,
            "unconverged": [f for _, fl in results for f in fl]}
