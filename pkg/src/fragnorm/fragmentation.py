"""Constructive fragmentation of radial twists into pieces supported in discs.

Write ``v = r^2 / 2`` so that area is ``dtheta dv``.  A radial twist with
angle profile ``a(v)`` is the time-one map of the Hamiltonian ``H`` with
``H' = a``; it is a product of disc-supported maps only if ``H`` can be
chosen compactly supported in the annulus, i.e. when the flux
``int a(v) dv`` vanishes.  Each piece is compactly supported in its disc and
so carries zero flux; a tube twist (``a >= 0``) or a cut-off shear therefore
cannot be fragmented at all, and :func:`fragment_tube_twist` reports that
instead of producing something approximate.

For zero-flux twists (:class:`HamiltonianTwist`) the scheme is exact:

1. radial split ``H = sum_j rho_j H`` with a smooth partition of unity, so
   the twist is a product of commuting band twists of small area;
2. each band twist is an ``m``-th power of a small twist ``S``;
3. ``S = (S h^-1) h`` where ``h`` is the symplectic map with generating
   function ``theta V + chi(theta) G(V)``, equal to the identity near one
   slit and to ``S`` near the opposite slit.  Both factors are supported in
   the band minus a sector, which is a topological disc.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import BallMap, MapWord, RadialTwist, evaluate, smoothstep
from .plane import Annulus, PuncturedPlane

SLIT_HALF_WIDTH = math.pi / 4


class FragmentationInfeasible(ValueError):
    pass


def smoothstep_deriv(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    ts = np.where(inside, t, 0.5)
    a = np.exp(-1.0 / ts)
    b = np.exp(-1.0 / (1.0 - ts))
    da = a / ts**2
    db = -b / (1.0 - ts) ** 2
    d = (da * (a + b) - a * (da + db)) / (a + b) ** 2
    return np.where(inside, d, 0.0)


_T = np.linspace(0.0, 1.0, 200_001)
SMOOTHSTEP_SLOPE = float(smoothstep_deriv(_T).max())


@dataclass(frozen=True, eq=False)
class HamiltonianTwist(RadialTwist):
    """Zero-flux twist: time-one map of a radial bump Hamiltonian.

    ``H(v) = c * s(t) * s(1 - t)`` with ``s`` the smooth step and ``t`` the
    position across the annulus in the ``v`` coordinate.  The angle profile
    ``H'`` turns the inner half one way and the outer half the other way;
    ``c`` is scaled so the largest turn is ``2*pi*turns``.
    """

    center: np.ndarray
    r_inner: float
    r_outer: float
    turns: float = 1.0
    _c: float = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(2))
        if not 0 <= self.r_inner < self.r_outer:
            raise ValueError("need 0 <= r_inner < r_outer")
        object.__setattr__(self, "_c", 1.0)
        t = np.linspace(0, 1, 20_001)
        peak = np.abs(self._unit_deriv(t)).max() / self.v_width
        object.__setattr__(self, "_c", 2 * math.pi * self.turns / peak)

    @property
    def v_range(self):
        return 0.5 * self.r_inner**2, 0.5 * self.r_outer**2

    @property
    def v_width(self):
        a, b = self.v_range
        return b - a

    @staticmethod
    def _unit(t):
        return smoothstep(2 * t) * smoothstep(2 * (1 - t))

    @staticmethod
    def _unit_deriv(t):
        return 2 * smoothstep_deriv(2 * t) * smoothstep(2 * (1 - t)) - 2 * smoothstep(2 * t) * smoothstep_deriv(2 * (1 - t))

    def hamiltonian(self, v):
        t = (np.asarray(v, dtype=float) - self.v_range[0]) / self.v_width
        return self._c * self._unit(t)

    def hamiltonian_deriv(self, v):
        t = (np.asarray(v, dtype=float) - self.v_range[0]) / self.v_width
        return self._c * self._unit_deriv(t) / self.v_width

    def angle(self, r):
        return self.hamiltonian_deriv(0.5 * np.asarray(r, dtype=float) ** 2)

    @property
    def max_angle(self) -> float:
        return abs(2 * math.pi * self.turns)

    def support(self):
        return Annulus(tuple(self.center), self.r_inner, self.r_outer)


def flux(prim: RadialTwist, n: int = 200_001) -> float:
    """Area swept across a ray from the center, ``int angle dv`` (trapezoid rule)."""
    reg = prim.support()
    lo = reg.r_inner if isinstance(reg, Annulus) else 0.0
    hi = reg.r_outer if isinstance(reg, Annulus) else reg.radius
    v = np.linspace(0.5 * lo * lo, 0.5 * hi * hi, n)
    a = prim.angle(np.sqrt(2 * v))
    return float(np.trapezoid(a, v))


def _chi(theta, alpha, w):
    """1-periodic-in-2pi cutoff: 0 within w of alpha, 1 within w of alpha + pi."""
    phi = np.mod(np.asarray(theta, dtype=float) - alpha, 2 * math.pi)
    back = phi > math.pi
    t = np.where(back, 2 * math.pi - phi, phi)
    u = (t - w) / (math.pi - 2 * w)
    val = smoothstep(u)
    d = smoothstep_deriv(u) / (math.pi - 2 * w)
    return val, np.where(back, -d, d)


def _newton(resid, x, max_iter=50):
    """Solve ``resid(x) = 0`` pointwise; converged points leave the active set."""
    idx = np.arange(len(x))
    for _ in range(max_iter):
        if not len(idx):
            break
        f, df = resid(x[idx], idx)
        step = f / df
        x[idx] -= step
        idx = idx[np.abs(step) > 1e-15 * (1 + np.abs(x[idx]))]
    return x


CHI_SLOPE = SMOOTHSTEP_SLOPE / (math.pi - 2 * SLIT_HALF_WIDTH)


@dataclass(frozen=True)
class BandGenerator:
    """``G(v) = eps * rho(v) * H(v)``: compactly supported on [va, vb]."""

    twist: HamiltonianTwist
    lo_edge: float | None  # partition-of-unity rise at [lo_edge, lo_edge + overlap]
    hi_edge: float | None  # fall at [hi_edge, hi_edge + overlap]
    overlap: float
    eps: float
    va: float
    vb: float

    def rho(self, v):
        r = np.ones_like(np.asarray(v, dtype=float))
        dr = np.zeros_like(r)
        if self.lo_edge is not None:
            t = (v - self.lo_edge) / self.overlap
            s, ds = smoothstep(t), smoothstep_deriv(t) / self.overlap
            dr = dr * s + r * ds
            r = r * s
        if self.hi_edge is not None:
            t = (v - self.hi_edge) / self.overlap
            s, ds = 1 - smoothstep(t), -smoothstep_deriv(t) / self.overlap
            dr = dr * s + r * ds
            r = r * s
        return r, dr

    def __call__(self, v, s=1.0):
        v = np.asarray(v, dtype=float)
        r, dr = self.rho(v)
        H = self.twist.hamiltonian(v)
        dH = self.twist.hamiltonian_deriv(v)
        return s * self.eps * r * H, s * self.eps * (dr * H + r * dH)


@dataclass(frozen=True, eq=False)
class SlitPiece:
    """One half of a small band twist, supported in the band minus a sector.

    ``kind == "head"`` is the generating-function map ``h``; ``"tail"`` is
    ``S h^-1`` with ``S`` the band twist step.  ``tail * head == S``.
    """

    gen: BandGenerator
    kind: str
    alpha: float = math.pi / 2
    w: float = SLIT_HALF_WIDTH

    @property
    def center(self):
        return self.gen.twist.center

    def support(self):
        return Annulus(tuple(self.center), math.sqrt(2 * self.gen.va), math.sqrt(2 * self.gen.vb))

    @property
    def disc_measure(self) -> float:
        """Area of the band minus the sector this piece fixes (a topological disc)."""
        band = 2 * math.pi * (self.gen.vb - self.gen.va)
        return band * (1 - self.w / math.pi)

    @property
    def support_measure(self) -> float:
        return self.disc_measure

    def contains(self, pts):
        return self.support().contains(pts)

    # polar helpers
    def _polar(self, pts):
        pts = np.asarray(pts, dtype=float)
        d = pts - self.center
        return np.arctan2(d[..., 1], d[..., 0]), 0.5 * (d[..., 0] ** 2 + d[..., 1] ** 2)

    def _cart(self, theta, v, like):
        r = np.sqrt(2 * v)
        out = np.stack([self.center[0] + r * np.cos(theta), self.center[1] + r * np.sin(theta)], axis=-1)
        return out

    def _h(self, theta, v, s):
        chi, dchi = _chi(theta, self.alpha, self.w)

        def resid(V, idx):
            G, dG = self.gen(V, s)
            return V + dchi[idx] * G - v[idx], 1 + dchi[idx] * dG

        V = _newton(resid, v.copy())
        _, dG = self.gen(V, s)
        return theta + chi * dG, V

    def _h_inv(self, Theta, V, s):
        G, dG = self.gen(V, s)

        def resid(theta, idx):
            chi, dchi = _chi(theta, self.alpha, self.w)
            return theta + chi * dG[idx] - Theta[idx], 1 + dchi * dG[idx]

        theta = _newton(resid, Theta.copy())
        _, dchi = _chi(theta, self.alpha, self.w)
        return theta, V + dchi * G

    def _act(self, pts, exponent, s):
        pts = np.asarray(pts, dtype=float)
        moving = self.contains(pts)
        out = pts.copy()
        if not moving.any():
            return out
        theta, v = self._polar(pts[moving])
        if (self.kind == "head") == (exponent == 1):
            # h, or the inverse of the tail: h S^-1
            if self.kind == "tail":
                theta = theta - self.gen(v, s)[1]
            theta, v = self._h(theta, v, s)
        else:
            # h^-1, or the tail: S h^-1
            theta, v = self._h_inv(theta, v, s)
            if self.kind == "tail":
                theta = theta + self.gen(v, s)[1]
        out[moving] = self._cart(theta, v, pts)
        return out

    def apply(self, pts, exponent: int = 1):
        return self._act(pts, exponent, 1.0)

    @property
    def max_angle(self) -> float:
        return self.gen.eps * self.gen_max

    @property
    def gen_max(self) -> float:
        v = np.linspace(self.gen.va, self.gen.vb, 4001)
        return float(np.abs(self.gen(v, 1.0)[1] / self.gen.eps).max())

    def steps_needed(self, pts, exponent, M: PuncturedPlane | None) -> int:
        if not self.contains(pts).any():
            return 0
        # angular motion is at most max_angle; chords must clear the hole
        m = max(1, math.ceil(self.max_angle / (math.pi / 8)))
        return m

    def path(self, pts, exponent, m):
        pts = np.asarray(pts, dtype=float)
        s = np.linspace(0.0, 1.0, m + 1)
        frames = [pts] + [self._act(pts, exponent, si) for si in s[1:]]
        return np.stack(frames, axis=1)


def _band_count(width_v, max_piece, w):
    keep = 1 - w / math.pi
    for nb in range(1, 100_000):
        base = width_v / nb
        overlap = base
        if 2 * math.pi * (base + overlap) * keep <= max_piece:
            return nb, base, overlap
    raise FragmentationInfeasible("piece budget too small for the band scheme")


def fragment_tube_twist(f, max_piece_measure: float = 1.0, M: PuncturedPlane | None = None) -> list:
    """Ordered disc-supported pieces whose product (leftmost last) equals ``f``.

    Raises :class:`FragmentationInfeasible` for twists with nonzero flux,
    naming any punctures enclosed by the twist.
    """
    if isinstance(f, BallMap):
        if f.support_measure > max_piece_measure:
            raise FragmentationInfeasible("ball map exceeds the piece budget")
        return [f]
    if isinstance(f, SlitPiece):
        return [f]
    if f.is_trivial():
        return []
    if not isinstance(f, HamiltonianTwist):
        F = flux(f)
        msg = f"{type(f).__name__} has flux {F:.6g} != 0; every disc-supported piece has zero flux"
        if M is not None:
            reg = f.support()
            rho = np.hypot(*(M.punctures - f.center).T)
            inner = reg.r_inner if isinstance(reg, Annulus) else 0.0
            enclosed = [int(i) + 1 for i in np.flatnonzero(rho < inner)]
            if enclosed:
                msg += f" (it winds around puncture(s) {enclosed}, so no fragmentation exists in M)"
        raise FragmentationInfeasible(msg)
    va, vb = f.v_range
    nb, base, overlap = _band_count(vb - va, max_piece_measure, SLIT_HALF_WIDTH)
    pieces = []
    for j in range(nb):
        lo = va + j * base if j > 0 else None
        hi = va + (j + 1) * base if j < nb - 1 else None
        band_lo = va if lo is None else lo
        band_hi = vb if hi is None else hi + overlap
        unit = BandGenerator(f, lo, hi, overlap, 1.0, band_lo, band_hi)
        v = np.linspace(band_lo, band_hi, 20_001)
        amax = float(np.abs(unit(v)[1]).max()) * 1.05
        if amax == 0:
            continue
        # small steps keep the generating function invertible and the slit open
        m = max(1, math.ceil(amax * max(2 * CHI_SLOPE, 2 / SLIT_HALF_WIDTH)))
        gen = BandGenerator(f, lo, hi, overlap, 1.0 / m, band_lo, band_hi)
        head = SlitPiece(gen, "head")
        tail = SlitPiece(gen, "tail")
        for _ in range(m):
            pieces += [tail, head]
    return pieces


@dataclass
class FragmentCheck:
    n_pieces: int
    max_deviation: float
    max_piece_measure: float
    passed: bool


def verify_fragmentation(f, pieces, n_samples=10_000, seed=0, tol=1e-9, max_piece_measure=1.0) -> FragmentCheck:
    """Compare the product of ``pieces`` with ``f`` at random points of its support box."""
    reg = f.support()
    R = reg.r_outer if isinstance(reg, Annulus) else reg.radius
    rng = np.random.default_rng(seed)
    x = f.center + rng.uniform(-1.05 * R, 1.05 * R, (n_samples, 2))
    target = f.apply(x)
    got = evaluate(MapWord(tuple(pieces)), x)
    dev = float(np.abs(got - target).max()) if len(x) else 0.0
    meas = max((p.support_measure for p in pieces), default=0.0)
    return FragmentCheck(len(pieces), dev, meas, dev <= tol and meas <= max_piece_measure)
