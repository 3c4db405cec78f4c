"""
Two twists that cannot be told apart by a homomorphism
======================================================

Twists around p1 and p2 each read as a or b, which psi_ab ignores, but
their composition reads as ab.  The combination
hPsi(alpha) - hPsi(alpha beta) + hPsi(beta) is then about -gap * overlap.
"""

from fragnorm import essential_claim_check, scenarios

sc = scenarios.load(dict(scenarios.bundled())["essential-claim"])
r = essential_claim_check(sc.maps["alpha"], sc.maps["beta"], sc.psi, sc.plane, sc.quad, k_max=sc.params["k_max"])
for name, v in zip(("alpha", "alpha*beta", "beta"), r.values):
    print(f"{name:>12}: {v.value:.4f} +- {v.statistical_error:.4f}")
print(f"combination {r.combination:.4f}, gap {r.gap}, overlap {r.overlap:.4f}")
print(f"margin {r.margin:.4f} -> {'PASS' if r.passed else 'FAIL'}")
