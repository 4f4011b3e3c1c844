"""Disk pages, return maps and linking on the golden ellipsoid.

The page bounded by the short circle is swept once per ``pi r2^2``; its
return map is a rigid rotation.  The long circle is the fixed point.
The two circles link once and each has self-linking number -1 in the
quaternion framing.

Run:  python3 demos/03_sections_and_links.py   (about half a minute)
"""

import cmath
import math

import numpy as np

from czreeb.linking import ClosedCurve, gauss_linking, self_linking
from czreeb.reeb import GOLDEN, ellipsoid_orbit, golden_ellipsoid, quaternion_frame
from czreeb.sections import (
    area_preservation_check,
    ellipsoid_section,
    fixed_point,
    global_section_audit,
    return_map_disk,
)

level = golden_ellipsoid()
page = ellipsoid_section(level)
print(f"page transversality margin: {page.transversality_margin():.6f}")

rot = cmath.exp(2j * math.pi * GOLDEN)
for w in (0.3, 0.2 + 0.5j):
    w2, t = return_map_disk(level, page, w)
    print(f"  w={w}: return time {t:.10f} (pi r2^2 = {math.pi * GOLDEN:.10f}), "
          f"|P(w) - rotation| = {abs(w2 - rot * w):.1e}")

print(f"area defect: {area_preservation_check(level, page, n_samples=2):.1e}")

orb, w = fixed_point(level, page)
print(f"fixed point w = {w:.2e}, period {orb.period:.10f}, "
      f"max |x1| on the orbit {np.max(np.abs(orb.samples[:, :2])):.1e}")

audit = global_section_audit(level, page, n=20)
print(f"audit: {audit['forward']['count']}/20 forward, {audit['backward']['count']}/20 backward")

P1 = ClosedCurve.from_orbit(ellipsoid_orbit(level, 1), "P1")
P0 = ClosedCurve.from_orbit(ellipsoid_orbit(level, 2), "P0")
lk = gauss_linking(P1, P0)
print(f"\nlink(P1, P0) = {lk.value}  (raw {lk.raw:.12f})")
frame = quaternion_frame(level)
for c in (P0, P1):
    r = self_linking(c, frame)
    print(f"sl({c.label}) = {r.value}  (raw {r.link_eps.raw:.6f} at eps {r.eps})")
