"""
Linear growth of the fragmentation norm
=======================================

The homogenized integral gives a lower bound on the fragmentation norm of
f^k that grows linearly in k.  For the push map the matching upper bound
would need a fragmentation, which the flux rules out, so the report marks
it uncertified.
"""

import math

from fragnorm import CountingQuasimorphism, MapWord, PuncturedPlane, QuadratureSpec, make_push_map, stable_norm_report

M = PuncturedPlane([[0.0, 0.0], [3.0, 0.5]], [-5.0, 5.0])
psi = CountingQuasimorphism.from_string("a", 2)
f = MapWord.of(make_push_map(M, [1], 3 * math.pi, 0.99))

rep = stable_norm_report(f, psi, M, 20, QuadratureSpec(resolution=256))
print(f"hPsi(f) = {rep.psi_bar.value:.4f} +- {rep.psi_bar.statistical_error:.4f} (truncation {rep.psi_bar.truncation_error:.4f})")
print(f"certified rate {rep.rate:.4f}, naive |hPsi|/3D = {abs(rep.psi_bar.value) / (3 * rep.defect_bound):.4f}")
print(" k   Psi(f^k)     lower")
for r in rep.rows[::3]:
    print(f"{r.k:2d}  {r.psi_power:9.3f}  {r.lower_bound:8.3f}")
print("upper bounds:", rep.upper_note)
