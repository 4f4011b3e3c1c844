"""Cyclic Jacobi eigensolver for dense symmetric matrices.

Rotations are applied in round-robin (tournament) order so that each round
consists of ``n // 2`` disjoint plane rotations, applied together.
"""

import numpy as np


def _round_robin(n):
    players = list(range(n if n % 2 == 0 else n + 1))
    m = len(players)
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a < n and b < n]
        rounds.append((np.array([p for p, _ in pairs], dtype=int),
                       np.array([q for _, q in pairs], dtype=int)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(A, tol=1e-14, max_sweeps=50):
    """Eigenvalues (ascending) and orthonormal eigenvectors of symmetric ``A``."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if n == 1:
        return A.diagonal().copy(), np.eye(1)
    V = np.eye(n)
    rounds = _round_robin(n)
    scale = np.linalg.norm(A)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(A.diagonal()))
        if off <= tol * scale:
            break
        for P, Q in rounds:
            app, aqq, apq = A[P, P], A[Q, Q], A[P, Q]
            active = np.abs(apq) > 1e-300
            theta = np.where(active, (aqq - app) / (2.0 * np.where(active, apq, 1.0)), 0.0)
            t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t = np.where(theta == 0.0, 1.0, t)
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            Ap, Aq = A[:, P].copy(), A[:, Q].copy()
            A[:, P] = c * Ap - s * Aq
            A[:, Q] = s * Ap + c * Aq
            Ap, Aq = A[P, :].copy(), A[Q, :].copy()
            A[P, :] = c[:, None] * Ap - s[:, None] * Aq
            A[Q, :] = s[:, None] * Ap + c[:, None] * Aq
            Vp, Vq = V[:, P].copy(), V[:, Q].copy()
            V[:, P] = c * Vp - s * Vq
            V[:, Q] = s * Vp + c * Vq
    w = A.diagonal().copy()
    order = np.argsort(w)
    return w[order], V[:, order]
