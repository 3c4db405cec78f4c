"""
Auditing the relative defect
============================

Psi is not additive, but the failure is controlled by the area where the
two maps interact: |Psi(fg) - Psi(f) - Psi(g)| <= D * mu(U).
"""

import numpy as np

from fragnorm import CountingQuasimorphism, MapWord, PuncturedPlane, QuadratureSpec, TubeTwist, relative_defect_audit
from fragnorm.cli import random_composition

M = PuncturedPlane([[0.0, 0.0], [3.0, 0.5]], [-5.0, 5.0])
psi = CountingQuasimorphism.from_string("ab", 2)
quad = QuadratureSpec(resolution=128)

# wide twists around each puncture overlap in a lens between them
left = MapWord.of(TubeTwist([0.0, 0.0], 0.5, 2.6, 1, 0.9))
right = MapWord.of(TubeTwist([3.0, 0.5], 0.5, 2.6, 1, 0.9))
far = MapWord.of(TubeTwist([-3.0, -3.0], 0.3, 0.8, 2, 0.9))

pairs = {"left*right": (left, right), "right*left": (right, left), "left*far": (left, far)}
for name, (f, g) in pairs.items():
    a = relative_defect_audit(f, g, psi, M, quad)
    print(f"{name:>10}: delta={a.delta:.4f}  bound={a.bound:.4f}  mu(U)={a.mu_U:.4f}  {'PASS' if a.passed else 'FAIL'}")

# random compositions of up to three primitives
rng = np.random.default_rng(7)
audits = [relative_defect_audit(random_composition(rng, M, 3), random_composition(rng, M, 3), psi, M, quad) for _ in range(20)]
print(f"20 random pairs: {sum(a.passed for a in audits)} pass, largest delta {max(a.delta for a in audits):.4f}")
