"""
Integrating a quasimorphism over a push map
===========================================

A tube twist around a puncture drags every point of its core once around
that puncture.  Integrating psi of the traced loop over the plane gives
roughly psi(a) times the core area.
"""

import math

from fragnorm import CountingQuasimorphism, MapWord, PuncturedPlane, QuadratureSpec, make_push_map, psi_integral
from fragnorm.words import ReducedWord

M = PuncturedPlane([[0.0, 0.0], [3.0, 0.5]], [-5.0, 5.0])
psi = CountingQuasimorphism.from_string("a", 2)

# support area 3*pi, 99% of it in the full-turn core
twist = make_push_map(M, [1], 3 * math.pi, 0.99)
print("core measure", twist.core_measure, "peripheral measure", twist.peripheral_measure)

target = psi.stable_value(ReducedWord.parse("a", 2)) * twist.core_measure
for res in (64, 128, 256, 512):
    v = psi_integral(MapWord.of(twist), psi, M, QuadratureSpec(resolution=res))
    print(f"{res:4d}^2: Psi = {v.value:.6f} +- {v.statistical_error:.4f}   (core target {target:.6f})")

# Monte Carlo gives the same answer with a statistical error bar
mc = psi_integral(MapWord.of(twist), psi, M, QuadratureSpec(mode="monte-carlo", samples=200_000, seed=1))
print(f"monte-carlo: Psi = {mc.value:.4f} +- {mc.statistical_error:.4f}")
