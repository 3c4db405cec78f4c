"""
Counting quasimorphisms on the free group
=========================================

Loops in the twice-punctured plane are words in F_2 = <a, b>.  A counting
quasimorphism counts a pattern minus its inverse; homogenizing it kills
the bounded error and leaves a class function.
"""

from fragnorm.words import CountingQuasimorphism, ReducedWord, essentiality_witness, homogenize

# words reduce on construction; capitals are inverses
w = ReducedWord.parse("abBAab", 2)
print("abBAab reduces to", w)

# psi_ab counts occurrences of ab minus occurrences of BA
psi = CountingQuasimorphism.from_string("ab", 2)
print("defect bound:", psi.defect_bound)

# the stable value is exact (cyclic counts); homogenize() gives the n-th estimate with its error bar
for text in ("a", "b", "ab", "abab", "aB"):
    g = ReducedWord.parse(text, 2)
    est = homogenize(psi, g, 2**10)
    print(f"{text:>5}: psi={psi(g):3d}  stable={psi.stable_value(g):g}  estimate={est.value:.6f} +- {est.error_bound:.2e}")

# a and b are invisible to psi_ab but ab is not: that mismatch is the gap
wit = essentiality_witness(psi, 1, 2**10)
print("essentiality witness:", wit)
