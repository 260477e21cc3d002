"""The Finsleroid indicatrix is a round sphere of curvature H(x)^2; a quartic norm's is not.

In three dimensions the indicatrix is a surface, so its curvature always fits the
constant-curvature form pointwise and the test is whether it varies along the fiber.
From four dimensions the Weyl part of S measures the same thing.
"""
import numpy as np

from finsler_angle import fixture, sample, sample_points
from finsler_angle.finsler_core import indicatrix_curvature, weyl_contraction_check

for name in ("CURV3", "QUARTIC"):
    space = fixture(name)
    x = np.array([0.2, 0.1, -0.3])
    values = [indicatrix_curvature(sample(space, x, y)).c_ind
              for _, y in sample_points(space, 6, seed=1)]
    print(f"{name}: curvature over six directions at one x  {np.round(values, 10)}")

for name in ("CURV3", "QUARTIC"):
    space = fixture(name, dim=4)
    x, y = sample_points(space, 1, seed=1)[0]
    w = weyl_contraction_check(sample(space, x, y))
    print(f"{name} N=4: |F^2 W| = {w.weyl_norm:.2e}, contraction identity residual {w.residual:.1e}")
