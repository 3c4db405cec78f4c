"""Numerical evaluation of the map-level quasimorphism and fragmentation bounds.

The integrand at ``x`` is the word quasimorphism of the loop class of
``x``'s canonical trajectory.  It vanishes outside the swept support, so only
sample points there are evaluated; everything else contributes exactly 0.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    MapWord,
    TubeTwist,
    bounding_rect,
    evaluate,
    support_measure_bound,
    swept_masks,
    trajectories,
)
from .fragmentation import FragmentationInfeasible, fragment_tube_twist
from .plane import PuncturedPlane, Rect, loop_words
from .words import CountingQuasimorphism, ReducedWord, brooks_value

CHUNK = 4096


@dataclass(frozen=True)
class QuadratureSpec:
    """How to integrate over the plane.

    ``mode`` is ``"grid"`` (midpoint rule on ``resolution`` x ``resolution``
    cells) or ``"monte-carlo"`` (``samples`` uniform points from ``seed``).
    ``region=None`` means the bounding box of the factor supports.
    """

    mode: str = "grid"
    resolution: int = 256
    samples: int = 100_000
    seed: int = 0
    region: Rect | None = None
    threads: int = 1
    homogenized_integrand: bool = True

    def __post_init__(self):
        if self.mode not in ("grid", "monte-carlo"):
            raise ValueError(f"unknown quadrature mode {self.mode!r}")
        if self.resolution < 1 or self.samples < 1 or self.threads < 1:
            raise ValueError("resolution, samples and threads must be positive")

    def resolve_region(self, *maps: MapWord) -> Rect | None:
        if self.region is not None:
            return self.region
        rects = [r for r in (bounding_rect(f) for f in maps) if r is not None]
        if not rects:
            return None
        return Rect(
            min(r.xmin for r in rects),
            max(r.xmax for r in rects),
            min(r.ymin for r in rects),
            max(r.ymax for r in rects),
        )


@dataclass(frozen=True)
class PsiValue:
    value: float
    statistical_error: float
    note: str = ""
    nudges: int = 0
    series: tuple = ()  # (k, Psi(f^k)/k) pairs when homogenizing
    truncation_error: float = 0.0

    def __post_init__(self):
        if not self.statistical_error >= 0:
            raise ValueError("statistical_error must be nonnegative")


@dataclass
class SampleSet:
    points: np.ndarray  # (N, 2)
    weight: float  # area per sample
    shape: tuple | None  # grid shape for the error estimate
    region: Rect
    mode: str


def sample_points(quad: QuadratureSpec, region: Rect) -> SampleSet:
    w, h = region.xmax - region.xmin, region.ymax - region.ymin
    if quad.mode == "grid":
        n = quad.resolution
        xs = region.xmin + (np.arange(n) + 0.5) * (w / n)
        ys = region.ymin + (np.arange(n) + 0.5) * (h / n)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        return SampleSet(pts, w * h / (n * n), (n, n), region, "grid")
    rng = np.random.default_rng(quad.seed)
    pts = np.column_stack(
        [rng.uniform(region.xmin, region.xmax, quad.samples), rng.uniform(region.ymin, region.ymax, quad.samples)]
    )
    return SampleSet(pts, w * h / quad.samples, None, region, "monte-carlo")


class _Integrand:
    """Word -> integrand value with a shared cache."""

    def __init__(self, psi: CountingQuasimorphism, homogenized: bool):
        self.psi = psi
        self.homogenized = homogenized
        self.cache: dict = {}

    def word(self, letters) -> float:
        v = self.cache.get(letters)
        if v is None:
            g = ReducedWord(letters, self.psi.rank)
            v = self.psi.stable_value(g) if self.homogenized else float(brooks_value(self.psi, g))
            self.cache[letters] = v
        return v


def _map_chunks(fn, pts, threads):
    chunks = [pts[i : i + CHUNK] for i in range(0, len(pts), CHUNK)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, chunks))
    return [fn(c) for c in chunks]


def _series_values(f: MapWord, pts, M, integrand: _Integrand, k_max: int, threads: int):
    """Integrand values of f, f^2, ..., f^k_max at ``pts``: shape (N, k_max), plus nudge count.

    Uses the cocycle ``[(f^k)_x] = [(f^{k-1})_x] [f_{f^{k-1}(x)}]``: one
    trajectory of ``f`` per point and power, and word products on the
    distinct step-word sequences only.
    """
    rank = M.rank

    def work(chunk):
        ids = np.empty((len(chunk), k_max), dtype=np.int64)
        table: dict = {}
        cur = chunk
        nudged = 0
        for j in range(k_max):
            words, nn = loop_words(M, trajectories(f, cur, M))
            nudged += nn
            ids[:, j] = [table.setdefault(w, len(table)) for w in words]
            if j + 1 < k_max:
                cur = evaluate(f, cur)
        rev = [None] * len(table)
        for w, i in table.items():
            rev[i] = ReducedWord(w, rank)
        rows, inverse = np.unique(ids, axis=0, return_inverse=True)
        vals = np.empty((len(rows), k_max))
        for r, row in enumerate(rows):
            acc = ReducedWord.identity(rank)
            for j, i in enumerate(row):
                acc = acc * rev[i]
                vals[r, j] = integrand.word(acc.letters)
        return vals[inverse.ravel()], nudged

    out = _map_chunks(work, pts, threads)
    if not out:
        return np.zeros((0, k_max)), 0
    return np.concatenate([o[0] for o in out]), sum(o[1] for o in out)


def _direct_values(f: MapWord, pts, M, integrand: _Integrand, threads: int):
    def work(chunk):
        words, nn = loop_words(M, trajectories(f, chunk, M))
        return np.array([integrand.word(w) for w in words], dtype=float), nn

    out = _map_chunks(work, pts, threads)
    if not out:
        return np.zeros(0), 0
    return np.concatenate([o[0] for o in out]), sum(o[1] for o in out)


def _integrate(samples: SampleSet, values: np.ndarray) -> tuple[float, float]:
    """(integral, error estimate) from per-sample values (zeros included).

    Grid: the integrand is piecewise constant, so the midpoint rule errs only
    in cells cut by a jump; each neighbor pair with a jump contributes half
    the jump times a cell area.  Monte Carlo: area times the standard error.
    The sum is correctly rounded, hence independent of evaluation order.
    """
    total = math.fsum(values.tolist()) * samples.weight
    if samples.mode == "grid":
        V = values.reshape(samples.shape)
        jumps = math.fsum(np.abs(np.diff(V, axis=0)).ravel().tolist()) + math.fsum(
            np.abs(np.diff(V, axis=1)).ravel().tolist()
        )
        return total, 0.5 * jumps * samples.weight
    n = len(values)
    area = samples.weight * n
    sd = float(np.std(values, ddof=1)) if n > 1 else 0.0
    return total, area * sd / math.sqrt(n)


def _note(samples: SampleSet, n_eval: int) -> str:
    r = samples.region
    if samples.mode == "grid":
        desc = f"grid {samples.shape[0]}x{samples.shape[1]} midpoint"
    else:
        desc = f"monte-carlo {len(samples.points)} samples"
    return f"{desc} on [{r.xmin:.6g},{r.xmax:.6g}]x[{r.ymin:.6g},{r.ymax:.6g}], {n_eval} integrand evaluations"


def _check_rank(psi, M):
    if psi.rank != M.rank:
        raise ValueError(f"quasimorphism rank {psi.rank} != number of punctures {M.rank}")


def psi_integral(f: MapWord, psi: CountingQuasimorphism, M: PuncturedPlane, quad: QuadratureSpec = QuadratureSpec()) -> PsiValue:
    """Integral over the plane of the integrand of ``f``'s loop classes."""
    _check_rank(psi, M)
    region = quad.resolve_region(f)
    if region is None or not len(f):
        return PsiValue(0.0, 0.0, "identity map")
    samples = sample_points(quad, region)
    vals, nudges = evaluate_integrand(f, psi, M, samples.points, quad)
    value, err = _integrate(samples, vals)
    return PsiValue(value, err, _note(samples, int((vals != 0).sum())), nudges)


def evaluate_integrand(f: MapWord, psi, M, pts, quad: QuadratureSpec):
    """Per-point integrand values (0 outside the swept support) and nudge count."""
    moved, _ = swept_masks(f, pts)
    vals = np.zeros(len(pts))
    integrand = _Integrand(psi, quad.homogenized_integrand)
    inner, nudges = _direct_values(f, pts[moved], M, integrand, quad.threads)
    vals[moved] = inner
    return vals, nudges


def power_series(f: MapWord, psi, M, k_max: int, quad: QuadratureSpec = QuadratureSpec()):
    """Estimates of Psi(f^k) for k = 1..k_max on one sample set.

    Returns (values, errors, samples, nudges) with arrays of length k_max.
    """
    _check_rank(psi, M)
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    region = quad.resolve_region(f)
    if region is None or not len(f):
        return np.zeros(k_max), np.zeros(k_max), None, 0
    samples = sample_points(quad, region)
    # the supports of f^k are those of f, so one swept mask serves every power
    moved, _ = swept_masks(f, samples.points)
    integrand = _Integrand(psi, quad.homogenized_integrand)
    inner, nudges = _series_values(f, samples.points[moved], M, integrand, k_max, quad.threads)
    values = np.zeros(k_max)
    errors = np.zeros(k_max)
    full = np.zeros(len(samples.points))
    for k in range(k_max):
        full[:] = 0.0
        full[moved] = inner[:, k]
        values[k], errors[k] = _integrate(samples, full)
    return values, errors, samples, nudges


def homogenized_psi(f: MapWord, psi, M, k_max: int, quad: QuadratureSpec = QuadratureSpec()) -> PsiValue:
    """``Psi(f^k_max) / k_max`` with the series ``k -> Psi(f^k)/k``.

    ``statistical_error`` is the quadrature error divided by ``k_max``.
    ``truncation_error`` bounds the distance to the limit:
    ``|Psi(f^k)/k - limit| <= defect_bound * mu(supp f) / k``.
    """
    values, errors, samples, nudges = power_series(f, psi, M, k_max, quad)
    ks = np.arange(1, k_max + 1)
    series = tuple((int(k), float(v / k)) for k, v in zip(ks, values))
    trunc = psi.defect_bound * support_measure_bound(f).value / k_max
    note = "identity map" if samples is None else _note(samples, -1).rsplit(",", 1)[0]
    return PsiValue(float(values[-1] / k_max), float(errors[-1] / k_max), note, nudges, series, trunc)


# ---------------------------------------------------------------- defect audit


@dataclass
class DefectAudit:
    delta: float  # Psi(fg) - Psi(f) - Psi(g)
    mu_U: float  # estimate of the measure where both isotopies act
    defect_bound: float
    quadrature_error: float  # sum of the three reported errors
    upper_f: int | None
    upper_g: int | None
    passed: bool
    chain_certified: bool
    margin: float
    values: tuple = ()

    @property
    def bound(self) -> float:
        return self.defect_bound * self.mu_U + 3 * self.quadrature_error


def relative_defect_audit(f: MapWord, g: MapWord, psi, M, quad: QuadratureSpec = QuadratureSpec()) -> DefectAudit:
    """Check ``|Psi(fg) - Psi(f) - Psi(g)| <= D * mu(U) + 3 * error``.

    All three integrals and the estimate of ``mu(U)`` use the same samples.
    ``U`` is the set of points whose trajectory under ``g`` moves and whose
    image then moves under ``f``: outside it one of the two loop classes in
    the cocycle is trivial and the integrand is additive.
    """
    _check_rank(psi, M)
    fg = f * g
    region = quad.resolve_region(fg)
    if region is None:
        return DefectAudit(0.0, 0.0, psi.defect_bound, 0.0, 0, 0, True, True, 0.0)
    q = QuadratureSpec(quad.mode, quad.resolution, quad.samples, quad.seed, region, quad.threads, quad.homogenized_integrand)
    samples = sample_points(q, region)
    pts = samples.points
    ints = []
    for h in (fg, f, g):
        vals, _ = evaluate_integrand(h, psi, M, pts, q)
        ints.append(_integrate(samples, vals))
    (v_fg, e_fg), (v_f, e_f), (v_g, e_g) = ints
    moved_g, gx = swept_masks(g, pts)
    moved_f, _ = swept_masks(f, gx)
    inU = moved_g & moved_f
    mu_U = float(inU.sum()) * samples.weight
    delta = v_fg - v_f - v_g
    err = e_fg + e_f + e_g
    bound = psi.defect_bound * mu_U + 3 * err
    try:
        uf, ug = frag_upper_bound(f), frag_upper_bound(g)
    except FragmentationInfeasible:
        uf = ug = None
    chain = uf is not None and psi.defect_bound * mu_U <= psi.defect_bound * min(uf, ug) + 1e-12
    passed = abs(delta) <= bound
    return DefectAudit(delta, mu_U, psi.defect_bound, err, uf, ug, passed, chain, bound - abs(delta), (v_fg, v_f, v_g))


# ---------------------------------------------------------------- fragmentation bounds

_PIECE_COUNTS: dict = {}


def _piece_count(prim) -> int:
    key = id(prim)
    hit = _PIECE_COUNTS.get(key)
    if hit is not None and hit[0] is prim:
        return hit[1]
    n = len(fragment_tube_twist(prim))
    _PIECE_COUNTS[key] = (prim, n)
    return n


def frag_upper_bound(f: MapWord) -> int:
    """Number of disc-supported pieces in an explicit factorization of ``f``."""
    return sum(_piece_count(prim) for prim, _ in f.factors)


def frag_lower_bound(f: MapWord, psi, M, quad: QuadratureSpec = QuadratureSpec(), k_max: int = 20) -> float:
    """``(|hPsi(f)| - error) / (3 D)``, floored at 0; ``error`` includes truncation."""
    return _lower_rate(homogenized_psi(f, psi, M, k_max, quad), psi)


def _lower_rate(hp: PsiValue, psi) -> float:
    return max(0.0, (abs(hp.value) - hp.statistical_error - hp.truncation_error) / (3 * psi.defect_bound))


@dataclass(frozen=True)
class FragReport:
    k: int
    psi_power: float  # Psi(f^k)
    lower_bound: float
    upper_bound: int | None
    lower_provenance: str
    upper_provenance: str

    @property
    def certified(self) -> bool:
        return self.upper_bound is not None

    @property
    def ratio(self) -> float | None:
        if self.upper_bound is None or self.upper_bound == 0:
            return None
        return self.lower_bound / self.upper_bound


@dataclass
class StableNormReport:
    rows: list
    rate: float  # certified lower bound on the stable norm
    psi_bar: PsiValue
    defect_bound: float
    pieces_per_power: int | None
    upper_note: str

    @property
    def consistent(self) -> bool:
        return all(r.upper_bound is None or r.lower_bound <= r.upper_bound for r in self.rows)

    def fitted_slope(self) -> float:
        k = np.array([r.k for r in self.rows], dtype=float)
        lo = np.array([r.lower_bound for r in self.rows])
        return float(np.dot(k, lo) / np.dot(k, k))


def stable_norm_report(f: MapWord, psi, M, k_max: int, quad: QuadratureSpec = QuadratureSpec()) -> StableNormReport:
    """Lower bounds ``k * rate`` against explicit upper bounds for ``f^k``, k = 1..k_max."""
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    values, errors, _, _ = power_series(f, psi, M, k_max, quad)
    trunc = psi.defect_bound * support_measure_bound(f).value / k_max
    hp = PsiValue(
        float(values[-1] / k_max),
        float(errors[-1] / k_max),
        "",
        series=tuple((k + 1, float(values[k] / (k + 1))) for k in range(k_max)),
        truncation_error=trunc,
    )
    rate = _lower_rate(hp, psi)
    prov = f"|hPsi|={abs(hp.value):.12g} err={hp.statistical_error:.3g}+{trunc:.3g} D={psi.defect_bound:.12g}"
    try:
        per = frag_upper_bound(f)
        note = "explicit fragmentation"
    except FragmentationInfeasible as exc:
        per, note = None, f"uncertified: {exc}"
    rows = []
    for k in range(1, k_max + 1):
        upper = None if per is None else frag_upper_bound(f**k)
        rows.append(FragReport(k, float(values[k - 1]), k * rate, upper, prov, note))
    return StableNormReport(rows, rate, hp, psi.defect_bound, per, note)


# ---------------------------------------------------------------- essential claim


class PreconditionError(ValueError):
    pass


def _support_overlap(fa: MapWord, fb: MapWord) -> float:
    from .dynamics import region_overlap

    total = 0.0
    ra = {id(p): p.support() for p, _ in fa.factors}
    rb = {id(p): p.support() for p, _ in fb.factors}
    for a in ra.values():
        for b in rb.values():
            total += region_overlap(a, b)
    return total


def _peripheral(f: MapWord) -> float:
    seen, total = set(), 0.0
    for p, _ in f.factors:
        if id(p) in seen:
            continue
        seen.add(id(p))
        total += p.peripheral_measure if isinstance(p, TubeTwist) else p.support_measure
    return total


@dataclass
class EssentialReport:
    combination: float  # hPsi(fa) - hPsi(fa fb) + hPsi(fb)
    gap: float
    overlap: float
    delta_hat: float
    threshold: float  # gap * overlap - delta_hat
    error: float
    passed: bool
    degenerate: bool
    values: tuple = ()

    @property
    def margin(self) -> float:
        return abs(self.combination) - self.error


def essential_claim_check(
    fa: MapWord, fb: MapWord, psi, M, quad: QuadratureSpec = QuadratureSpec(), k_max: int = 8, gap: float | None = None
) -> EssentialReport:
    """Non-additivity of the homogenized integral on two overlapping twists.

    ``error`` collects the quadrature errors of the three homogenized
    values; ``delta_hat`` adds the peripheral-band measures (scaled by the
    defect bound) on which core classes are not exact.
    """
    if not len(fb) or not len(fa):
        return EssentialReport(0.0, gap or 0.0, 0.0, 0.0, 0.0, 0.0, False, True)
    overlap = _support_overlap(fa, fb)
    if overlap <= 0:
        raise PreconditionError("supports of the two maps do not overlap")
    if gap is None:
        from .words import essentiality_witness

        wit = essentiality_witness(psi, 2)
        gap = wit.gap if wit else 0.0
    region = quad.resolve_region(fa, fb)
    q = QuadratureSpec(quad.mode, quad.resolution, quad.samples, quad.seed, region, quad.threads, quad.homogenized_integrand)
    ha = homogenized_psi(fa, psi, M, k_max, q)
    hab = homogenized_psi(fa * fb, psi, M, k_max, q)
    hb = homogenized_psi(fb, psi, M, k_max, q)
    comb = ha.value - hab.value + hb.value
    err = sum(h.statistical_error for h in (ha, hab, hb))
    delta_hat = psi.defect_bound * (_peripheral(fa) + _peripheral(fb)) + err
    threshold = gap * overlap - delta_hat
    passed = abs(comb) - err > 0
    return EssentialReport(comb, gap, overlap, delta_hat, threshold, err, passed, False, (ha, hab, hb))
