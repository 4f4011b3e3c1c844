"""Conley-Zehnder index of 2x2 symplectic paths, computed two ways.

The geometric route lifts the angles of ``phi(t) e^{is}`` and reads the
index off the winding interval.  The spectral route discretises the
operator ``-J d/dt - S(t)`` and counts windings of eigenvectors around
zero.  Both are run on the same potentials.

Run:  python3 demos/01_index_two_ways.py
"""

import numpy as np

from czreeb.cz_geometric import cz_geometric
from czreeb.cz_spectral import (
    SymmetricPotential,
    cz_spectral_detail,
    path_from_potential,
    random_trig_potential,
    spectrum,
)
from czreeb.sp_path import SymplecticPath, path_inverse, path_product

# rotations: e^{i 2 pi alpha t} has interval {alpha}
print("rotations")
for alpha in (0.5, 1.0, 1.25, -0.3):
    r = cz_geometric(SymplecticPath.rotation(alpha))
    print(f"  alpha={alpha:5.2f}  interval={r.interval.as_list()}  "
          f"index={r.index:3d}  degenerate={r.degenerate}")

# inversion and the loop axiom on a generic path
phi = path_product(SymplecticPath.rotation(0.4), SymplecticPath.exponential([[0.6, 0.2], [1.1, -0.6]]))
mu = cz_geometric(phi).index
print(f"\nmu(phi) = {mu}, mu(phi^-1) = {cz_geometric(path_inverse(phi)).index}, "
      f"mu(e^(2 pi i t) phi) = {cz_geometric(path_product(SymplecticPath.rotation(1), phi)).index}")

# the spectrum of the free operator: 2 pi k, twice each, winding k
free = spectrum(SymmetricPotential.constant(np.zeros((2, 2))), 32, (-13, 13))
print("\nfree operator (value, winding, multiplicity)")
for row in free.rows():
    print("  %9.5f %3d %d" % row)

# random potentials: both routes
rng = np.random.default_rng(1)
print("\nrandom trigonometric potentials")
for i in range(6):
    S = random_trig_potential(rng)
    geo = cz_geometric(path_from_potential(S))
    spc = cz_spectral_detail(S)
    print(f"  #{i}: geometric {geo.index:3d}   spectral {spc.index:3d}   "
          f"(lambda- = {spc.lam_minus:+.4f} wind {spc.wind_minus}, "
          f"lambda+ = {spc.lam_plus:+.4f} wind {spc.wind_plus})")
