"""
Cutting a twist into disc-supported pieces
==========================================

A map supported in a small disc has zero flux (the integral of the
rotation angle against area).  A tube twist sweeps its area forward, so
its flux is positive and no product of disc maps can equal it.  A twist
that turns forward and then back has zero flux and does split.
"""

import math

from fragnorm import HamiltonianTwist, PuncturedPlane, TubeTwist, fragment_tube_twist, verify_fragmentation
from fragnorm.fragmentation import FragmentationInfeasible, flux

M = PuncturedPlane([[0.0, 0.0], [3.0, 0.5]], [-5.0, 5.0])

tube = TubeTwist([0.0, 0.0], 1.0, 2.0, 1, 0.99)
print(f"tube twist flux {flux(tube):.5f}  (3*pi*(1+0.99)/2 = {3 * math.pi * 1.99 / 2:.5f})")
try:
    fragment_tube_twist(tube, 1.0, M)
except FragmentationInfeasible as exc:
    print("refused:", exc)

# forward-and-back profile on the same annulus
twist = HamiltonianTwist([0.0, 0.0], 1.0, 2.0, 1.0)
print(f"zero-flux twist flux {flux(twist):.2e}")
for budget in (1.0, 0.5):
    pieces = fragment_tube_twist(twist, budget, M)
    chk = verify_fragmentation(twist, pieces, 10_000, max_piece_measure=budget)
    print(f"budget {budget}: {chk.n_pieces} pieces, largest {chk.max_piece_measure:.3f}, "
          f"sup deviation {chk.max_deviation:.1e}, {'PASS' if chk.passed else 'FAIL'}")
