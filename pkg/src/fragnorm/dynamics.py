"""Area-preserving primitive maps of the plane and their compositions.

Every primitive here is a radial twist about a center: in polar coordinates
``(theta, r)`` it is ``(theta, r) -> (theta + angle(r), r)``, which preserves
area for any profile ``angle``.  The canonical isotopy scales the profile,
``s -> angle(r) * s`` for ``s`` in [0, 1].

* :class:`TubeTwist` - push map along a circle: profile ``2*pi*turns`` on a
  core band, smooth ramps to 0 at both edges of the annulus.
* :class:`HamiltonianShear` - time-``strength`` flow of ``H(x, y) = y f(y)``
  with ``f`` the bell function, on the band ``|y| < y0`` of an embedded tube.
* :class:`BallMap` - rotation by a bump profile inside a disc of area <= 1.

A :class:`MapWord` is a product ``f_1 f_2 ... f_n`` acting right to left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import bisect

from .plane import Annulus, Disc, GeometryError, PuncturedPlane, Rect, lebesgue_measure

Y0 = math.sqrt(2 - math.sqrt(3))
MAX_STEP_ANGLE = math.pi / 4


def smoothstep(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def bell(y):
    """``exp(-1/(1-y^2))`` on (-1, 1), zero elsewhere."""
    y = np.asarray(y, dtype=float)
    inside = np.abs(y) < 1
    with np.errstate(divide="ignore", over="ignore"):
        val = np.exp(-1.0 / np.where(inside, 1 - y * y, 1.0))
    out = np.where(inside, val, 0.0)
    return out if out.ndim else float(out)


def bell_shear(y):
    """``f(y) + y f'(y)`` for the bell function; ``f' = -2y f / (1-y^2)^2``."""
    y = np.asarray(y, dtype=float)
    inside = np.abs(y) < 1
    w = np.where(inside, 1 - y * y, 1.0)
    out = np.where(inside, bell(y) * (1 - 2 * y * y / (w * w)), 0.0)
    return out if out.ndim else float(out)


def y0_solve(tolerance: float = 1e-12) -> float:
    """Positive root of :func:`bell_shear` on (0, 1), by bisection."""
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    return bisect(bell_shear, 0.1, 0.9, xtol=tolerance, rtol=4 * np.finfo(float).eps, maxiter=500)


class RadialTwist:
    """Common machinery for primitives of the form (theta, r) -> (theta + angle(r), r)."""

    center: np.ndarray

    def angle(self, r):
        raise NotImplementedError

    def support(self):
        raise NotImplementedError

    @property
    def support_measure(self) -> float:
        return lebesgue_measure(self.support())

    @property
    def max_angle(self) -> float:
        raise NotImplementedError

    def is_trivial(self) -> bool:
        return self.max_angle == 0.0

    def rotate(self, pts, theta):
        pts = np.asarray(pts, dtype=float)
        c = self.center
        dx, dy = pts[..., 0] - c[0], pts[..., 1] - c[1]
        cs, sn = np.cos(theta), np.sin(theta)
        out = np.stack([c[0] + cs * dx - sn * dy, c[1] + sn * dx + cs * dy], axis=-1)
        # points that do not turn stay bit-identical
        return np.where((np.asarray(theta) == 0)[..., None], pts, out)

    def radius_of(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.hypot(pts[..., 0] - self.center[0], pts[..., 1] - self.center[1])

    def apply(self, pts, exponent: int = 1):
        return self.rotate(pts, exponent * self.angle(self.radius_of(pts)))

    def steps_needed(self, pts, exponent, M: PuncturedPlane | None) -> int:
        """Substeps so each chord turns <= pi/4 and keeps every puncture on its arc's side."""
        r = self.radius_of(pts)
        a = np.abs(self.angle(r))
        moving = a > 0
        if not moving.any():
            return 0
        m = np.ceil(a / MAX_STEP_ANGLE)
        if M is not None:
            rho = np.hypot(M.punctures[:, 0] - self.center[0], M.punctures[:, 1] - self.center[1])
            rr = r[moving]
            # largest puncture radius strictly inside each point's circle
            inner = np.where(rho[None, :] < rr[:, None] - M.clearance, rho[None, :], 0.0).max(axis=1)
            ratio = np.clip((inner + M.clearance) / rr, 0.0, 1.0 - 1e-15)
            half = np.arccos(ratio)  # chord of angle 2*half stays outside radius inner+clearance
            m[moving] = np.maximum(m[moving], np.ceil(a[moving] / (2 * half)))
        return int(m.max())

    def path(self, pts, exponent, m):
        """Polyline samples of the canonical isotopy, shape (N, m+1, 2)."""
        pts = np.asarray(pts, dtype=float)
        theta = exponent * self.angle(self.radius_of(pts))
        s = np.linspace(0.0, 1.0, m + 1)
        return self.rotate(pts[:, None, :], theta[:, None] * s[None, :])

    def contains(self, pts):
        return self.support().contains(pts)


def _annulus_radii(r_inner, r_outer):
    if not 0 <= r_inner < r_outer:
        raise ValueError("need 0 <= r_inner < r_outer")


@dataclass(frozen=True, eq=False)
class TubeTwist(RadialTwist):
    """Push map along the circle of radius ~ (r_inner + r_outer)/2 about ``center``.

    ``core_fraction`` is the share of the annulus area on which the angle is
    exactly ``2*pi*turns``; the rest is split evenly between the two ramps.
    """

    center: np.ndarray
    r_inner: float
    r_outer: float
    turns: float = 1
    core_fraction: float = 0.9

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(2))
        _annulus_radii(self.r_inner, self.r_outer)
        if self.r_inner <= 0:
            raise ValueError("a tube twist needs r_inner > 0")
        if not 0 < self.core_fraction < 1:
            raise ValueError("core_fraction must lie in (0, 1)")

    @property
    def core_radii(self) -> tuple[float, float]:
        u_in, u_out = self.r_inner**2, self.r_outer**2
        ramp = 0.5 * (1 - self.core_fraction) * (u_out - u_in)
        return math.sqrt(u_in + ramp), math.sqrt(u_out - ramp)

    def angle(self, r):
        r = np.asarray(r, dtype=float)
        u = r * r
        u_in, u_out = self.r_inner**2, self.r_outer**2
        ramp = 0.5 * (1 - self.core_fraction) * (u_out - u_in)
        up = smoothstep((u - u_in) / ramp)
        down = smoothstep((u_out - u) / ramp)
        return 2 * math.pi * self.turns * np.minimum(up, down)

    @property
    def max_angle(self) -> float:
        return abs(2 * math.pi * self.turns)

    def support(self):
        return Annulus(tuple(self.center), self.r_inner, self.r_outer)

    @property
    def core_measure(self) -> float:
        return self.core_fraction * self.support_measure

    @property
    def peripheral_measure(self) -> float:
        return (1 - self.core_fraction) * self.support_measure


@dataclass(frozen=True, eq=False)
class HamiltonianShear(RadialTwist):
    """Flow of ``H = y f(y)`` on a tube S^1 x [-1, 1] laid out as an annulus.

    The tube coordinate ``y`` is affine in ``r^2`` between ``r_inner`` (y=-1)
    and ``r_outer`` (y=1), so the embedding scales area by a constant.  The
    vector field ``(f + y f') d/dx`` is cut off outside ``|y| < y0``; the
    time-``strength`` map turns a circle at height ``y`` by
    ``2*pi*strength*(f + y f')(y)``.
    """

    center: np.ndarray
    r_inner: float
    r_outer: float
    strength: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(2))
        _annulus_radii(self.r_inner, self.r_outer)

    def tube_height(self, r):
        u_in, u_out = self.r_inner**2, self.r_outer**2
        return 2 * (np.asarray(r, dtype=float) ** 2 - u_in) / (u_out - u_in) - 1

    def angle(self, r):
        y = self.tube_height(r)
        return np.where(np.abs(y) < Y0, 2 * math.pi * self.strength * bell_shear(y), 0.0)

    @property
    def max_angle(self) -> float:
        return abs(2 * math.pi * self.strength * math.exp(-1))

    def support(self):
        u_in, u_out = self.r_inner**2, self.r_outer**2
        mid, half = 0.5 * (u_in + u_out), 0.5 * (u_out - u_in) * Y0
        lo = math.sqrt(max(mid - half, 0.0))
        if lo == 0.0:
            return Disc(tuple(self.center), math.sqrt(mid + half))
        return Annulus(tuple(self.center), lo, math.sqrt(mid + half))


@dataclass(frozen=True, eq=False)
class BallMap(RadialTwist):
    """Rotation about ``center`` by ``2*pi*turns`` near the middle, decaying to 0 at ``radius``."""

    center: np.ndarray
    radius: float
    turns: float = 0.25

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(2))
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if math.pi * self.radius**2 > 1 + 1e-12:
            raise ValueError("a ball map must live in a disc of measure <= 1")

    def angle(self, r):
        u = (np.asarray(r, dtype=float) / self.radius) ** 2
        return 2 * math.pi * self.turns * (1 - smoothstep(u))

    @property
    def max_angle(self) -> float:
        return abs(2 * math.pi * self.turns)

    def support(self):
        return Disc(tuple(self.center), self.radius)


def check_in_plane(M: PuncturedPlane, prim: RadialTwist) -> None:
    """Raise unless the primitive's support stays clear of every puncture."""
    reg = prim.support()
    rho = np.hypot(M.punctures[:, 0] - prim.center[0], M.punctures[:, 1] - prim.center[1])
    lo = reg.r_inner if isinstance(reg, Annulus) else 0.0
    hi = reg.r_outer if isinstance(reg, Annulus) else reg.radius
    bad = (rho > lo - M.clearance) & (rho < hi + M.clearance)
    if bad.any():
        raise GeometryError(f"support of {type(prim).__name__} meets puncture(s) {list(np.flatnonzero(bad) + 1)}")


@dataclass(frozen=True)
class MapWord:
    """Product ``f_1 ... f_n`` of primitives with exponents +-1; ``f_n`` acts first."""

    factors: tuple = ()

    def __post_init__(self):
        facs = []
        for item in self.factors:
            prim, e = item if isinstance(item, tuple) else (item, 1)
            if e not in (1, -1):
                raise ValueError("exponents must be +1 or -1")
            facs.append((prim, e))
        object.__setattr__(self, "factors", tuple(facs))

    @classmethod
    def of(cls, *prims) -> "MapWord":
        return cls(tuple(prims))

    def __mul__(self, other: "MapWord") -> "MapWord":
        return MapWord(self.factors + other.factors)

    def inverse(self) -> "MapWord":
        return MapWord(tuple((p, -e) for p, e in reversed(self.factors)))

    def __pow__(self, k: int) -> "MapWord":
        base = self if k >= 0 else self.inverse()
        return MapWord(base.factors * abs(k))

    def __len__(self):
        return len(self.factors)

    def primitives(self) -> list:
        return [p for p, _ in self.factors]

    def evaluate(self, pts):
        return evaluate(self, pts)


def evaluate(f: MapWord, pts):
    out = np.asarray(pts, dtype=float)
    for prim, e in reversed(f.factors):
        out = prim.apply(out, e)
    return out


def trajectories(f: MapWord, pts, M: PuncturedPlane | None = None) -> np.ndarray:
    """Sampled canonical isotopy for a batch of points, shape (N, T, 2).

    Factors run right to left, each through its own scaled-profile isotopy.
    The last sample equals ``evaluate(f, pts)`` exactly.
    """
    cur = np.atleast_2d(np.asarray(pts, dtype=float))
    pieces = [cur[:, None, :]]
    for prim, e in reversed(f.factors):
        m = prim.steps_needed(cur, e, M)
        if m == 0:
            continue
        seg = prim.path(cur, e, m)
        pieces.append(seg[:, 1:])
        cur = seg[:, -1]
    return np.concatenate(pieces, axis=1)


def trajectory(f: MapWord, x, M: PuncturedPlane | None = None) -> np.ndarray:
    """Polyline of one point's canonical isotopy (repeated samples removed)."""
    tr = trajectories(f, np.asarray(x, dtype=float)[None], M)[0]
    keep = np.ones(len(tr), dtype=bool)
    keep[1:] = np.any(tr[1:] != tr[:-1], axis=1)
    return tr[keep]


def swept_masks(f: MapWord, pts) -> tuple[np.ndarray, np.ndarray]:
    """(points whose canonical trajectory moves through some support, their images)."""
    cur = np.asarray(pts, dtype=float)
    mask = np.zeros(cur.shape[:-1], dtype=bool)
    for prim, e in reversed(f.factors):
        inside = prim.contains(cur)
        mask |= inside
        cur = prim.apply(cur, e)
    return mask, cur


@dataclass(frozen=True)
class SupportMeasure:
    value: float
    exact: bool

    @property
    def flag(self) -> str:
        return "exact" if self.exact else "upper"


def _disc_lens(c1, r1, c2, r2) -> float:
    """Area of the intersection of two discs."""
    if r1 <= 0 or r2 <= 0:
        return 0.0
    d = math.dist(c1, c2)
    if d >= r1 + r2:
        return 0.0
    if d <= abs(r1 - r2):
        return math.pi * min(r1, r2) ** 2
    a1 = r1 * r1 * math.acos((d * d + r1 * r1 - r2 * r2) / (2 * d * r1))
    a2 = r2 * r2 * math.acos((d * d + r2 * r2 - r1 * r1) / (2 * d * r2))
    tri = 0.5 * math.sqrt(max((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2), 0.0))
    return a1 + a2 - tri


def _radii(reg):
    return (reg.r_inner, reg.r_outer) if isinstance(reg, Annulus) else (0.0, reg.radius)


def region_overlap(a, b) -> float:
    """Exact area of the intersection of two annuli/discs."""
    ai, ao = _radii(a)
    bi, bo = _radii(b)
    ca, cb = a.center, b.center
    return (
        _disc_lens(ca, ao, cb, bo)
        - _disc_lens(ca, ai, cb, bo)
        - _disc_lens(ca, ao, cb, bi)
        + _disc_lens(ca, ai, cb, bi)
    )


def support_measure_bound(f: MapWord) -> SupportMeasure:
    """Measure of the union of factor supports.

    Exact when no three distinct supports share a point (checked pairwise
    plus a conservative triple test); otherwise the plain sum as an upper bound.
    """
    regs = []
    for prim, _ in f.factors:
        reg = prim.support()
        if reg not in regs:
            regs.append(reg)
    if not regs:
        return SupportMeasure(0.0, True)
    total = sum(lebesgue_measure(r) for r in regs)
    overlaps = {}
    for i in range(len(regs)):
        for j in range(i + 1, len(regs)):
            ov = region_overlap(regs[i], regs[j])
            if ov > 0:
                overlaps[i, j] = ov
    if not overlaps:
        return SupportMeasure(total, True)
    # a triple overlap is possible only if three supports pairwise overlap
    for i, j in overlaps:
        for k in range(j + 1, len(regs)):
            if (i, k) in overlaps and (j, k) in overlaps:
                return SupportMeasure(total, False)
    return SupportMeasure(total - sum(overlaps.values()), True)


def bounding_rect(f: MapWord, pad: float = 0.0) -> Rect | None:
    regs = [p.support() for p, _ in f.factors]
    if not regs:
        return None
    xs0, xs1, ys0, ys1 = [], [], [], []
    for reg in regs:
        r = _radii(reg)[1]
        cx, cy = reg.center
        xs0.append(cx - r)
        xs1.append(cx + r)
        ys0.append(cy - r)
        ys1.append(cy + r)
    return Rect(min(xs0) - pad, max(xs1) + pad, min(ys0) - pad, max(ys1) + pad)


def area_defect(f: MapWord, region: Rect, n_samples: int, h: float = 1e-6, seed: int = 0) -> float:
    """Largest |det Df - 1| over random points of ``region``.

    Derivatives use the five-point central stencil at step ``h``; the plain
    two-point stencil loses too much to cancellation on steep shears.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.uniform([region.xmin, region.ymin], [region.xmax, region.ymax], size=(n_samples, 2))

    def deriv(e):
        return (
            -evaluate(f, x + 2 * e) + 8 * evaluate(f, x + e) - 8 * evaluate(f, x - e) + evaluate(f, x - 2 * e)
        ) / (12 * h)

    dfx = deriv(np.array([h, 0.0]))
    dfy = deriv(np.array([0.0, h]))
    det = dfx[:, 0] * dfy[:, 1] - dfx[:, 1] * dfy[:, 0]
    return float(np.abs(det - 1).max())


def make_push_map(
    M: PuncturedPlane,
    enclose: Sequence[int],
    area_budget: float,
    core_fraction: float,
    turns: float = 1,
    center=None,
    r_inner: float | None = None,
) -> TubeTwist:
    """Tube twist whose core circle goes once around exactly the punctures in ``enclose``.

    ``enclose`` holds 1-based puncture indices.  The circle is centered at
    their centroid unless ``center`` is given; ``r_inner`` defaults to the
    larger of 1.25 x the farthest enclosed puncture and ``sqrt(budget/3pi)``.
    """
    if not area_budget > 0:
        raise ValueError("area_budget must be positive")
    if not 0 < core_fraction < 1:
        raise ValueError("core_fraction must lie in (0, 1)")
    idx = [i - 1 for i in enclose]
    if any(i < 0 or i >= M.rank for i in idx) or len(set(idx)) != len(idx):
        raise ValueError(f"bad puncture indices {list(enclose)}")
    c = np.mean(M.punctures[idx], axis=0) if center is None else np.asarray(center, dtype=float)
    rho = np.hypot(M.punctures[:, 0] - c[0], M.punctures[:, 1] - c[1])
    far = float(rho[idx].max()) if idx else 0.0
    if r_inner is None:
        r_inner = max(1.25 * far, math.sqrt(area_budget / (3 * math.pi)))
    r_outer = math.sqrt(r_inner**2 + area_budget / math.pi)
    others = [i for i in range(M.rank) if i not in idx]
    if far >= r_inner - M.clearance:
        raise GeometryError("an enclosed puncture lies in the annulus")
    if others and rho[others].min() <= r_outer + M.clearance:
        raise GeometryError("annulus would meet or enclose a puncture outside the requested set")
    return TubeTwist(c, r_inner, r_outer, turns, core_fraction)
