"""Case analysis of end matrices and the twisted comparison loop.

For an end matrix ``m`` of each type (hyperbolic, parabolic, elliptic,
negative hyperbolic) this builds the model path ``K``, a path ``phi``
ending at ``m`` with a chosen index, the loop ``M = K phi^-1`` and a
twist ``b`` for which ``d_r d(1, t)`` keeps one sign.

Run:  python3 demos/04_strip_cases.py
"""

import numpy as np

from czreeb.cz_geometric import cz_geometric
from czreeb.sp_path import rotation_matrix
from czreeb.strip import (
    build_model_path,
    build_twist,
    classify_end_matrix,
    comparison_loop,
    drd_closed_form,
    manufactured_path,
    strip_determinant_check,
)

matrices = {
    "hyperbolic": np.array([[2.0, 1.0], [1.0, 1.0]]),
    "parabolic": np.array([[1.0, -0.7], [0.0, 1.0]]),
    "elliptic": rotation_matrix(2.2),
    "negative hyperbolic": -np.array([[3.0, 0.0], [2.0, 1 / 3]]),
}

for name, m in matrices.items():
    cls = classify_end_matrix(m)
    K = build_model_path(cls)
    rK = cz_geometric(K)
    phi = manufactured_path(cls, 2, wiggle=0.5)
    comp = comparison_loop(phi, cls)
    tw = build_twist(cls, comp.k)
    margin, sign = strip_determinant_check(cls, tw)
    vals = drd_closed_form(cls, tw)
    print(f"{name:20s} case {cls.case}: mu(K) = {rK.index:2d}, mu(phi) = {comp.mu_phi}, "
          f"k = {comp.k}, Maslov(M) = {comp.maslov}")
    print(f"{'':20s} d_r d(1,t) in [{vals.min():.3f}, {vals.max():.3f}], "
          f"sign {sign:+d}, margin {margin:.3g}")
