"""Measure one Finsleroid angle twice: closed form and a shortest path on the indicatrix.

The discrete path error shrinks by about 4x per segment doubling.
"""
import numpy as np

from finsler_angle import closed_angle, fixture, geodesic_angle

x = np.array([0.1, -0.2, 0.3])
y1 = np.array([0.3, 0.5, -0.4])
y2 = np.array([0.6, 0.2, 0.3])

for name in ("SPHERE3", "FLAT3", "CURV3"):
    space = fixture(name)
    exact = closed_angle(space, x, y1, y2)
    print(f"{name}: closed form {exact:.12f}  (H = {float(space.H(x)):.6f})")
    for segments in (25, 50, 100, 200):
        geo = geodesic_angle(space, x, y1, y2, segments=segments)
        print(f"  {segments:4d} segments  {geo.angle:.12f}  error {geo.angle - exact:+.2e}")
