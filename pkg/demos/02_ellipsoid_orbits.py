"""Closed Reeb orbits on the ellipsoid with radii (1, sqrt(golden ratio)).

The level is pulled back to the unit sphere as ``f lambda0``.  Newton
shooting finds the two circle orbits, the linearised flow in the global
quaternion frame gives their indices, and a scan below action 12 checks
that no index falls below 3.

Run:  python3 demos/02_ellipsoid_orbits.py   (about a minute)
"""

import math

from czreeb.reeb import (
    GOLDEN,
    action,
    convexity_scan,
    ellipsoid_cz_formula,
    find_orbit,
    golden_ellipsoid,
    hopf_point,
    orbit_cz,
)

level = golden_ellipsoid()

short = find_orbit(level, hopf_point(0.05, 0.3, 1.0), 3.0)
long_ = find_orbit(level, hopf_point(math.pi / 2 - 0.05, 1.0, 0.4), 5.0)
print(f"short orbit: T = {short.period:.12f}  (pi       = {math.pi:.12f})")
print(f"long orbit:  T = {long_.period:.12f}  (pi*tau   = {math.pi * GOLDEN:.12f})")
print(f"action of the short orbit: {action(level, short):.12f}")

print("\ncovers of the short orbit")
for k in range(1, 6):
    r = orbit_cz(level, short, cover=k)
    print(f"  k={k}: interval [{r.interval.lo:.6f}, {r.interval.hi:.6f}]  "
          f"index {r.index}  formula {ellipsoid_cz_formula(GOLDEN, k, 1)}")
print(f"long orbit index: {orbit_cz(level, long_).index}")

scan = convexity_scan(level, 12.0, seed_resolution=4)
print("\nscan below action 12")
for row in scan["orbits"]:
    print(f"  T = {row['period']:9.5f}  cover {row['cover']}  index {row['index']}")
print(f"min index {scan['min_index']}, dynamically convex up to the cutoff: "
      f"{scan['dynamically_convex']}")
