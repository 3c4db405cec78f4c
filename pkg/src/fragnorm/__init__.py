"""Fragmentation norms on the punctured plane via quasimorphism integrals."""

from .calculus import (
    QuadratureSpec,
    PsiValue,
    psi_integral,
    homogenized_psi,
    relative_defect_audit,
    frag_upper_bound,
    frag_lower_bound,
    stable_norm_report,
    essential_claim_check,
)
from .dynamics import MapWord, TubeTwist, HamiltonianShear, BallMap, make_push_map, evaluate, y0_solve
from .fragmentation import HamiltonianTwist, FragmentationInfeasible, fragment_tube_twist, verify_fragmentation
from .plane import PuncturedPlane, loop_words
from .words import ReducedWord, CountingQuasimorphism, homogenize, essentiality_witness

__version__ = "0.1.0"

__all__ = [
    "QuadratureSpec", "PsiValue", "psi_integral", "homogenized_psi", "relative_defect_audit",
    "frag_upper_bound", "frag_lower_bound", "stable_norm_report", "essential_claim_check",
    "MapWord", "TubeTwist", "HamiltonianShear", "BallMap", "make_push_map", "evaluate", "y0_solve",
    "HamiltonianTwist", "FragmentationInfeasible", "fragment_tube_twist", "verify_fragmentation",
    "PuncturedPlane", "loop_words",
    "ReducedWord", "CountingQuasimorphism", "homogenize", "essentiality_witness",
]
