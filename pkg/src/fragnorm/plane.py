"""The punctured plane R^2 minus {p_1..p_k}, its cut system and loop words.

Each puncture carries a cut ray (vertically downward by default).  A path
spells a word in pi_1 = F_k by listing its transversal ray crossings, signed so
that a small counterclockwise circle around p_i reads as generator i.

Polylines are plain ``(n, 2)`` float arrays.  The batched kernel
:func:`crossing_words` works on ``(N, V, 2)`` stacks so that quadrature can
read thousands of loops per call; the scalar functions are thin wrappers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .words import ReducedWord

DETOUR_REL = 1e-6  # puncture clearance, relative to the domain scale
NUDGE_REL = 1e-9  # displacement of a vertex that sits on a cut ray
ON_RAY_REL = 1e-13  # |side| below this counts as "on the ray"


class GeometryError(ValueError):
    pass


class DegenerateCrossingError(GeometryError):
    """A polyline vertex lies on a cut ray."""


class PunctureHitError(GeometryError):
    """A polyline passes through (within tolerance of) a puncture."""


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def _rays_intersect(p, d, q, e, tol):
    # rays p + t d, q + s e with t, s >= 0
    den = _cross(d[0], d[1], e[0], e[1])
    w = q - p
    if abs(den) < 1e-14:
        if abs(_cross(w[0], w[1], d[0], d[1])) > tol:
            return False
        # collinear: disjoint only if they point away from each other
        return not (np.dot(w, d) < 0 and np.dot(d, e) < 0)
    t = _cross(w[0], w[1], e[0], e[1]) / den
    s = _cross(w[0], w[1], d[0], d[1]) / den
    return t >= -tol and s >= -tol


@dataclass(frozen=True, eq=False)
class PuncturedPlane:
    punctures: np.ndarray
    basepoint: np.ndarray
    ray_dirs: np.ndarray | None = None
    scale: float = field(init=False)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.punctures, dtype=float))
        z = np.asarray(self.basepoint, dtype=float).reshape(2)
        if pts.shape[1] != 2 or len(pts) == 0:
            raise GeometryError("punctures must be a nonempty list of 2D points")
        k = len(pts)
        allpts = np.vstack([pts, z])
        scale = max(float(np.ptp(allpts, axis=0).max()), 1.0)
        object.__setattr__(self, "scale", scale)
        for i in range(k):
            for j in range(i + 1, k):
                if np.linalg.norm(pts[i] - pts[j]) <= DETOUR_REL * scale:
                    raise GeometryError(f"punctures {i + 1} and {j + 1} coincide")
        if self.ray_dirs is None:
            dirs = np.tile([0.0, -1.0], (k, 1))
            for i in range(k):
                for j in range(i + 1, k):
                    if abs(pts[i, 0] - pts[j, 0]) <= DETOUR_REL * scale:
                        raise GeometryError(
                            f"punctures {i + 1} and {j + 1} are vertically aligned; "
                            "give explicit ray directions"
                        )
        else:
            dirs = np.atleast_2d(np.asarray(self.ray_dirs, dtype=float))
            if dirs.shape != (k, 2):
                raise GeometryError("need one ray direction per puncture")
            dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
        for i in range(k):
            for j in range(i + 1, k):
                if _rays_intersect(pts[i], dirs[i], pts[j], dirs[j], DETOUR_REL * scale):
                    raise GeometryError(f"cut rays {i + 1} and {j + 1} intersect")
        for i in range(k):
            rel = z - pts[i]
            if np.linalg.norm(rel) <= DETOUR_REL * scale:
                raise GeometryError("basepoint is a puncture")
            if abs(_cross(dirs[i, 0], dirs[i, 1], rel[0], rel[1])) <= DETOUR_REL * scale and np.dot(rel, dirs[i]) > 0:
                raise GeometryError(f"basepoint lies on cut ray {i + 1}")
        pts.setflags(write=False)
        dirs.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "punctures", pts)
        object.__setattr__(self, "ray_dirs", dirs)
        object.__setattr__(self, "basepoint", z)

    @property
    def rank(self) -> int:
        return len(self.punctures)

    @property
    def clearance(self) -> float:
        return DETOUR_REL * self.scale

    @property
    def nudge(self) -> float:
        return NUDGE_REL * self.scale

    def identity_word(self) -> ReducedWord:
        return ReducedWord.identity(self.rank)


def _seg_point_dist2(P, Q, c):
    """Squared distance from point c to segments P->Q (arrays (..., 2))."""
    d = Q - P
    L2 = np.einsum("...i,...i->...", d, d)
    t = np.einsum("...i,...i->...", c - P, d) / np.where(L2 > 0, L2, 1.0)
    t = np.clip(t, 0.0, 1.0)
    proj = P + t[..., None] * d
    r = c - proj
    return np.einsum("...i,...i->...", r, r)


@dataclass
class CrossingResult:
    words: list  # tuple of letters per polyline (unreduced crossing sequence is reduced here)
    on_ray: np.ndarray  # (N, V) bool, vertex sits on some cut ray
    hit: np.ndarray  # (N,) bool, passes through a puncture


def crossing_words(M: PuncturedPlane, polys: np.ndarray) -> CrossingResult:
    """Read the crossing word of each polyline in a ``(N, V, 2)`` stack.

    Rows flagged in ``on_ray`` or ``hit`` get an empty word; callers decide
    whether to nudge or raise.
    """
    polys = np.asarray(polys, dtype=float)
    N, V, _ = polys.shape
    k = M.rank
    P, Q = polys[:, :-1], polys[:, 1:]
    S = V - 1
    on_ray = np.zeros((N, V), dtype=bool)
    hit = np.zeros(N, dtype=bool)
    letters = np.zeros((N, S, k), dtype=np.int16)
    keys = np.full((N, S, k), np.inf)
    seg_idx = np.arange(S, dtype=float)[None, :]
    tol_side = ON_RAY_REL * M.scale
    clear2 = M.clearance**2
    for i in range(k):
        p = M.punctures[i]
        d = M.ray_dirs[i]
        rel = polys - p
        side = d[0] * rel[..., 1] - d[1] * rel[..., 0]
        along = rel[..., 0] * d[0] + rel[..., 1] * d[1]
        on_ray |= (np.abs(side) <= tol_side) & (along >= -tol_side)
        hit |= (_seg_point_dist2(P, Q, p) <= clear2).any(axis=1)
        sP, sQ = side[:, :-1], side[:, 1:]
        opp = ((sP < 0) & (sQ > 0)) | ((sP > 0) & (sQ < 0))
        with np.errstate(invalid="ignore", divide="ignore"):
            u = np.where(opp, sP / (sP - sQ), 0.0)
        aP, aQ = along[:, :-1], along[:, 1:]
        t = aP + u * (aQ - aP)
        cross = opp & (t > 0)
        letters[..., i] = np.where(cross, np.where(sQ > sP, i + 1, -(i + 1)), 0)
        keys[..., i] = np.where(cross, seg_idx + u, np.inf)
    bad = on_ray.any(axis=1) | hit
    flatL = letters.reshape(N, S * k)
    flatK = keys.reshape(N, S * k)
    order = np.argsort(flatK, axis=1, kind="stable")
    sortedL = np.take_along_axis(flatL, order, axis=1)
    counts = (flatL != 0).sum(axis=1)
    words = [()] * N
    width = int(counts.max()) if N else 0
    if width:
        block = sortedL[:, :width]
        uniq, inverse = np.unique(block, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).reshape(-1)
        reduced = [ReducedWord(tuple(int(x) for x in row if x != 0), k).letters for row in uniq]
        words = [reduced[j] for j in inverse]
    for n in np.flatnonzero(bad):
        words[n] = ()
    return CrossingResult(words, on_ray, hit)


def nudge_on_ray(M: PuncturedPlane, poly: np.ndarray, on_ray: np.ndarray) -> np.ndarray:
    """Move each flagged vertex by the nudge distance along its outgoing segment."""
    poly = np.array(poly, dtype=float)
    eps = M.nudge
    for v in np.flatnonzero(on_ray):
        j = v + 1 if v + 1 < len(poly) else v - 1
        step = poly[j] - poly[v]
        n = np.linalg.norm(step)
        if n == 0:
            # zero-length neighbour; look further along
            others = np.flatnonzero(np.linalg.norm(poly - poly[v], axis=1) > 0)
            if len(others) == 0:
                continue
            step = poly[others[0]] - poly[v]
            n = np.linalg.norm(step)
        poly[v] = poly[v] + min(eps, 0.5 * n) * step / n
    return poly


def path_word(M: PuncturedPlane, poly) -> ReducedWord:
    """Word of a single polyline; raises on degenerate input instead of nudging."""
    poly = np.asarray(poly, dtype=float).reshape(-1, 2)
    if len(poly) == 1:
        poly = np.vstack([poly, poly])
    res = crossing_words(M, poly[None])
    if res.hit[0]:
        raise PunctureHitError("polyline passes through a puncture")
    if res.on_ray[0].any():
        raise DegenerateCrossingError(f"vertex {int(np.flatnonzero(res.on_ray[0])[0])} lies on a cut ray")
    return ReducedWord(res.words[0], M.rank)


def basepoint_path(M: PuncturedPlane, x) -> np.ndarray:
    """Straight segment z -> x, detouring at radius 2*clearance around punctures it grazes."""
    x = np.asarray(x, dtype=float).reshape(2)
    z = M.basepoint
    delta = M.clearance
    dists = np.linalg.norm(M.punctures - x, axis=1)
    if (dists <= 2 * delta).any():
        raise PunctureHitError("point coincides with a puncture")
    if np.array_equal(x, z):
        return z[None].copy()
    seg = x - z
    L = np.linalg.norm(seg)
    u = seg / L
    nrm = np.array([-u[1], u[0]])
    detours = []
    for p in M.punctures:
        if _seg_point_dist2(z, x, p) <= delta**2:
            s = float(np.dot(p - z, u))
            side = _cross(u[0], u[1], *(p - z))
            sgn = 1.0 if side > 0 else -1.0  # collinear: go around on the right
            off = -sgn * 2 * delta * nrm
            detours.append((s, p + off - 2 * delta * u, p + off + 2 * delta * u))
    detours.sort(key=lambda t: t[0])
    verts = [z] + [v for _, a, b in detours for v in (a, b)] + [x]
    return np.array(verts)


def basepoint_paths(M: PuncturedPlane, xs: np.ndarray) -> np.ndarray:
    """Batched :func:`basepoint_path`, padded to ``(N, 2 + 2k, 2)``.

    Padding repeats ``z`` at the front, which adds only zero-length segments.
    """
    xs = np.asarray(xs, dtype=float)
    N = len(xs)
    k = M.rank
    z = M.basepoint
    out = np.empty((N, 2 + 2 * k, 2))
    out[:] = z
    out[:, -1] = xs
    near = np.zeros(N, dtype=bool)
    for p in M.punctures:
        near |= _seg_point_dist2(np.broadcast_to(z, xs.shape), xs, p) <= M.clearance**2
    for n in np.flatnonzero(near):
        path = basepoint_path(M, xs[n])
        out[n, -len(path):] = path
        out[n, : -len(path)] = z
    return out


def winding_numbers(closed_poly, centers) -> np.ndarray:
    """Winding number of a closed polyline around each center, by summed signed angles."""
    poly = np.asarray(closed_poly, dtype=float)
    out = []
    for c in np.atleast_2d(centers):
        r = poly - c
        a, b = r[:-1], r[1:]
        ang = np.arctan2(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0], (a * b).sum(axis=1))
        out.append(int(round(ang.sum() / (2 * math.pi))))
    return np.array(out)


def closed_loop(M: PuncturedPlane, x, trajectory, fx) -> np.ndarray:
    """The polyline gamma_x . trajectory . reverse(gamma_fx)."""
    trajectory = np.asarray(trajectory, dtype=float).reshape(-1, 2)
    x = np.asarray(x, dtype=float)
    fx = np.asarray(fx, dtype=float)
    if np.linalg.norm(trajectory[0] - x) > 1e-12 * M.scale or np.linalg.norm(trajectory[-1] - fx) > 1e-12 * M.scale:
        raise GeometryError("trajectory endpoints do not match x and f(x)")
    return np.vstack([basepoint_path(M, x), trajectory[1:], basepoint_path(M, fx)[::-1][1:]])


def loop_class(M: PuncturedPlane, x, trajectory, fx) -> ReducedWord:
    """Class of the loop based at z that runs out to x, along the trajectory, and back."""
    return path_word(M, closed_loop(M, x, trajectory, fx))


def loop_words(M: PuncturedPlane, trajs: np.ndarray, max_nudges: int = 3) -> tuple[list, int]:
    """Batched loop classes for trajectories stacked as ``(N, T, 2)``.

    Vertices landing on a cut ray are nudged and the loop re-read; returns
    the letter tuples and the number of loops that needed a nudge.
    """
    trajs = np.asarray(trajs, dtype=float)
    head = basepoint_paths(M, trajs[:, 0])
    tail = basepoint_paths(M, trajs[:, -1])[:, ::-1]
    loops = np.concatenate([head, trajs[:, 1:], tail[:, 1:]], axis=1)
    res = crossing_words(M, loops)
    words = res.words
    if res.hit.any():
        raise PunctureHitError(f"{int(res.hit.sum())} loops pass through a puncture")
    bad = np.flatnonzero(res.on_ray.any(axis=1))
    for n in bad:
        loop, flags = loops[n], res.on_ray[n]
        for _ in range(max_nudges):
            loop = nudge_on_ray(M, loop, flags)
            r = crossing_words(M, loop[None])
            if r.hit[0]:
                raise PunctureHitError("nudged loop passes through a puncture")
            flags = r.on_ray[0]
            if not flags.any():
                words[n] = r.words[0]
                break
        else:
            raise DegenerateCrossingError("could not nudge loop off the cut rays")
    return words, len(bad)


# ---------------------------------------------------------------- regions


@dataclass(frozen=True)
class Rect:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def contains(self, pts):
        pts = np.asarray(pts)
        return (pts[..., 0] >= self.xmin) & (pts[..., 0] <= self.xmax) & (pts[..., 1] >= self.ymin) & (pts[..., 1] <= self.ymax)


@dataclass(frozen=True)
class Disc:
    center: tuple[float, float]
    radius: float

    def contains(self, pts):
        r = np.linalg.norm(np.asarray(pts) - np.asarray(self.center), axis=-1)
        return r < self.radius


@dataclass(frozen=True)
class Annulus:
    center: tuple[float, float]
    r_inner: float
    r_outer: float

    def contains(self, pts):
        r = np.linalg.norm(np.asarray(pts) - np.asarray(self.center), axis=-1)
        return (r > self.r_inner) & (r < self.r_outer)


def lebesgue_measure(region) -> float:
    if isinstance(region, Rect):
        return (region.xmax - region.xmin) * (region.ymax - region.ymin)
    if isinstance(region, Disc):
        return math.pi * region.radius**2
    if isinstance(region, Annulus):
        return math.pi * (region.r_outer**2 - region.r_inner**2)
    raise TypeError(f"no area formula for {type(region).__name__}")


def bounding_box(region) -> Rect:
    if isinstance(region, Rect):
        return region
    r = region.radius if isinstance(region, Disc) else region.r_outer
    cx, cy = region.center
    return Rect(cx - r, cx + r, cy - r, cy + r)
