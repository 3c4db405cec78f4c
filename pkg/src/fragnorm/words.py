"""Free groups and Brooks counting quasimorphisms.

Words in the free group F_k are tuples of nonzero signed integers: ``i``
stands for the i-th generator and ``-i`` for its inverse (generators are
numbered from 1).  For rank up to 26 the usual shorthand applies, lower case
for generators and upper case for inverses, so ``"aB"`` is a*b^-1.
"""

from __future__ import annotations

import itertools
import string
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence


class RankError(ValueError):
    """Generator index out of range, or words of different ranks mixed."""


def _free_reduce(letters: Iterable[int]) -> tuple[int, ...]:
    stack: list[int] = []
    for x in letters:
        if stack and stack[-1] == -x:
            stack.pop()
        else:
            stack.append(x)
    return tuple(stack)


@dataclass(frozen=True)
class ReducedWord:
    """An element of the free group of the given rank, stored freely reduced."""

    letters: tuple[int, ...]
    rank: int

    def __post_init__(self):
        letters = tuple(int(x) for x in self.letters)
        for x in letters:
            if x == 0 or abs(x) > self.rank:
                raise RankError(f"generator index {x} out of range for rank {self.rank}")
        object.__setattr__(self, "letters", _free_reduce(letters))

    @classmethod
    def identity(cls, rank: int) -> "ReducedWord":
        return cls((), rank)

    @classmethod
    def parse(cls, text: str, rank: int) -> "ReducedWord":
        """Parse the letter shorthand, e.g. ``ReducedWord.parse("abA", 2)``.

        ``"1"`` and the empty string both denote the identity.
        """
        text = text.strip()
        if text in ("", "1"):
            return cls((), rank)
        letters = []
        for ch in text:
            if ch in string.ascii_lowercase:
                letters.append(ord(ch) - ord("a") + 1)
            elif ch in string.ascii_uppercase:
                letters.append(-(ord(ch) - ord("A") + 1))
            else:
                raise ValueError(f"bad letter {ch!r} in word {text!r}")
        return cls(tuple(letters), rank)

    def __len__(self) -> int:
        return len(self.letters)

    def __bool__(self) -> bool:
        return bool(self.letters)

    def __str__(self) -> str:
        if not self.letters:
            return "1"
        if self.rank > 26:
            return ".".join(str(x) for x in self.letters)
        return "".join(
            chr(ord("a") + x - 1) if x > 0 else chr(ord("A") - x - 1) for x in self.letters
        )

    def __repr__(self) -> str:
        return f"ReducedWord({str(self)!r}, rank={self.rank})"

    def __mul__(self, other: "ReducedWord") -> "ReducedWord":
        return multiply(self, other)

    def __invert__(self) -> "ReducedWord":
        return invert(self)

    def __pow__(self, n: int) -> "ReducedWord":
        return power(self, n)

    def exponent_sums(self) -> tuple[int, ...]:
        sums = [0] * self.rank
        for x in self.letters:
            sums[abs(x) - 1] += 1 if x > 0 else -1
        return tuple(sums)


def reduce(letters: Sequence[int], rank: int) -> ReducedWord:
    return ReducedWord(tuple(letters), rank)


def multiply(u: ReducedWord, v: ReducedWord) -> ReducedWord:
    if u.rank != v.rank:
        raise RankError(f"rank mismatch: {u.rank} != {v.rank}")
    # both halves are reduced, so cancellation only happens at the seam
    a, b = u.letters, v.letters
    i = 0
    while i < len(a) and i < len(b) and a[len(a) - 1 - i] == -b[i]:
        i += 1
    return ReducedWord(a[: len(a) - i] + b[i:], u.rank)


def invert(u: ReducedWord) -> ReducedWord:
    return ReducedWord(tuple(-x for x in reversed(u.letters)), u.rank)


def power(u: ReducedWord, n: int) -> ReducedWord:
    if n < 0:
        return power(invert(u), -n)
    if n == 0 or not u:
        return ReducedWord.identity(u.rank)
    # u = p c p^-1 with c cyclically reduced; then u^n = p c^n p^-1 without further cancellation
    prefix, core = cyclic_reduction(u)
    return ReducedWord(prefix + core * n + tuple(-x for x in reversed(prefix)), u.rank)


def cyclic_reduction(u: ReducedWord) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Split ``u = p c p^-1`` with ``c`` cyclically reduced; returns ``(p, c)``."""
    w = u.letters
    i = 0
    while 2 * i + 1 < len(w) and w[i] == -w[len(w) - 1 - i]:
        i += 1
    return w[:i], w[i : len(w) - i]


def count_occurrences(pattern: ReducedWord, g: ReducedWord) -> int:
    """Number of (possibly overlapping) positions where ``pattern`` is a subword of ``g``."""
    if not pattern:
        raise ValueError("pattern must be nonempty")
    p, w = pattern.letters, g.letters
    m = len(p)
    return sum(1 for i in range(len(w) - m + 1) if w[i : i + m] == p)


def cyclic_count(pattern: ReducedWord, core: Sequence[int]) -> int:
    """Occurrences of ``pattern`` per period of the bi-infinite word ``...core core core...``."""
    p = pattern.letters
    n = len(core)
    if n == 0:
        return 0
    return sum(1 for i in range(n) if all(core[(i + j) % n] == p[j] for j in range(len(p))))


@dataclass(frozen=True)
class HomogenizationEstimate:
    value: float
    n_used: int
    error_bound: float


@dataclass(frozen=True)
class CountingQuasimorphism:
    """Brooks quasimorphism ``g -> #pattern(g) - #pattern^-1(g)``.

    ``defect_bound`` is the certified upper bound used wherever a defect enters
    a norm estimate.  For the overlapping convention the raw defect is at most
    ``3(|pattern|-1)`` and the homogenization at most twice that, so the
    default ``6(|pattern|-1)`` covers both.  A single-letter pattern gives a
    homomorphism (defect 0); any positive bound is then valid and 1.0 is used.
    """

    pattern: ReducedWord
    defect_bound: float | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.pattern:
            raise ValueError("pattern must not be the identity")
        if self.defect_bound is None:
            object.__setattr__(self, "defect_bound", default_defect_bound(self.pattern))
        if not self.defect_bound > 0:
            raise ValueError("defect_bound must be positive")

    @classmethod
    def from_string(cls, pattern: str, rank: int, defect_bound: float | None = None):
        return cls(ReducedWord.parse(pattern, rank), defect_bound)

    @property
    def rank(self) -> int:
        return self.pattern.rank

    def __call__(self, g: ReducedWord) -> int:
        return brooks_value(self, g)

    def stable_value(self, g: ReducedWord) -> float:
        """Exact homogenization, from occurrences in the cyclic word of ``g``."""
        try:
            return self._cache[g.letters]
        except KeyError:
            pass
        _, core = cyclic_reduction(g)
        val = float(cyclic_count(self.pattern, core) - cyclic_count(invert(self.pattern), core))
        self._cache[g.letters] = val
        return val


def default_defect_bound(pattern: ReducedWord) -> float:
    return float(2 * (len(pattern) - 1) * 3) or 1.0


def brooks_value(psi: CountingQuasimorphism, g: ReducedWord) -> int:
    if g.rank != psi.rank:
        raise RankError(f"rank mismatch: {g.rank} != {psi.rank}")
    return count_occurrences(psi.pattern, g) - count_occurrences(invert(psi.pattern), g)


def homogenize(psi: CountingQuasimorphism, g: ReducedWord, n_max: int) -> HomogenizationEstimate:
    """``psi(g^n)/n`` at ``n = n_max``; the limit lies within ``defect_bound/n_max``."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    value = brooks_value(psi, power(g, n_max)) / n_max
    return HomogenizationEstimate(value, n_max, psi.defect_bound / n_max)


def words_up_to(rank: int, max_len: int) -> Iterator[ReducedWord]:
    """All reduced words of length <= max_len in shortlex order (a < A < b < B ...)."""
    alphabet = [s * i for i in range(1, rank + 1) for s in (1, -1)]
    yield ReducedWord.identity(rank)
    frontier: list[tuple[int, ...]] = [()]
    for _ in range(max_len):
        nxt = []
        for w in frontier:
            for x in alphabet:
                if w and w[-1] == -x:
                    continue
                nxt.append(w + (x,))
        for w in nxt:
            yield ReducedWord(w, rank)
        frontier = nxt


def defect_estimate(psi: CountingQuasimorphism, length_bound: int) -> float:
    """Largest additivity error over all pairs of words of length <= length_bound.

    A lower bound on the true defect.
    """
    if length_bound < 1:
        raise ValueError("length_bound must be >= 1")
    words = list(words_up_to(psi.rank, length_bound))
    vals = {w.letters: brooks_value(psi, w) for w in words}
    best = 0
    for g, h in itertools.product(words, repeat=2):
        d = abs(brooks_value(psi, g * h) - vals[g.letters] - vals[h.letters])
        best = max(best, d)
    return float(best)


@dataclass(frozen=True)
class EssentialityWitness:
    alpha: ReducedWord
    beta: ReducedWord
    gap: float
    certified_gap: float
    n_used: int


def essentiality_witness(
    psi: CountingQuasimorphism, length_bound: int, n: int = 2**10
) -> EssentialityWitness | None:
    """First pair (shortlex) with ``|hpsi(a) + hpsi(b) - hpsi(ab)|`` certifiably positive.

    Homogenized values come from ``homogenize`` at power ``n``; the certified
    gap subtracts the three error bounds.  Returns None when nothing within
    ``length_bound`` is certified.
    """
    if length_bound < 1:
        return None
    words = [w for w in words_up_to(psi.rank, length_bound) if w]
    est = {}

    def hval(w):
        if w.letters not in est:
            est[w.letters] = homogenize(psi, w, n)
        return est[w.letters]

    for a, b in itertools.product(words, repeat=2):
        ea, eb, eab = hval(a), hval(b), hval(a * b) if a * b else None
        vab = eab.value if eab else 0.0
        err = ea.error_bound + eb.error_bound + (eab.error_bound if eab else 0.0)
        gap = abs(ea.value + eb.value - vab)
        if gap - err > 0:
            return EssentialityWitness(a, b, gap, gap - err, n)
    return None
