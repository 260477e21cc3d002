"""Carry two vectors along a CURV3 curve with the horizontal connection.

F stays fixed, the angle drifts with H, and the product H * alpha is conserved.
Pass a path to also write the trace as CSV.
"""
import csv
import sys

from finsler_angle import fixture
from finsler_angle.angle_transport import TRACE_HEADER, bent_curve, horizontal_transport

space = fixture("CURV3")
curve = bent_curve([0.1, -0.2, 0.15], [0.3, 0.4, -0.2])
state = horizontal_transport(space, curve, ([1.0, 0.3, -0.2], [0.2, 1.0, 0.4]), steps=200)

print(f"{'s':>5} {'alpha':>12} {'H':>10} {'H*alpha':>14} {'dalpha/ds':>12} {'-(dH/ds/H) alpha':>17}")
for k in range(0, len(state.s), 25):
    print(f"{state.s[k]:5.2f} {state.alpha[k]:12.8f} {state.H[k]:10.6f} {state.H_alpha[k]:14.10f} "
          f"{state.dalpha_ds[k]:12.3e} {state.rhs[k]:17.3e}")
print("drift:", {k: f"{v:.1e}" for k, v in state.drift().items()})

if len(sys.argv) > 1:
    with open(sys.argv[1], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        w.writerows(state.rows())
