"""Outer approximations of uncertainty regions and joint-uncertainty limits.

A sweep walks the outcome simplex of the pre test on an exact rational grid;
each grid point contributes the interval of post-test measure values allowed
by the majorization sandwich.  Swapping the roles of the two tests gives a
second region, and intersecting the two rasterized memberships tightens the
approximation.  Scalar extrema over sweeps (additive uncertainty constants,
two-sided joint-measure limits) are refined by bounded 1-d searches along
simplex edges, so coarse grids still deliver several exact digits.

Dimension-2 sweeps use the constructive closed-form bounds instead of conic
solves; pass ``method="sdp"`` to force the solver path.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import cip
from .measures import JointMeasureSpec, MeasureSpec, evaluate_joint
from .quantum import MeasurementBasis

RASTER_DEFAULT = 512
_REFINE_XATOL = 1e-12


@dataclass(frozen=True)
class SimplexGrid:
    """Exact rational grid on the probability simplex.

    Points are the integer compositions of ``resolution`` into ``dimension``
    parts, divided by ``resolution``; enumeration is lexicographic, so sweep
    outputs are reproducible byte for byte.  Resolution 1 degenerates to the
    barycenter.  With ``include_boundary=False`` every coordinate stays
    strictly positive (compositions with parts >= 1).
    """

    dimension: int
    resolution: int
    include_boundary: bool = True

    def __post_init__(self):
        if self.dimension < 2:
            raise ValueError("dimension must be >= 2")
        if self.resolution < 1:
            raise ValueError("resolution must be >= 1")

    def points(self) -> np.ndarray:
        m, n = self.resolution, self.dimension
        if m == 1:
            return np.full((1, n), 1.0 / n)
        if self.include_boundary:
            combos = _compositions(m, n, minimum=0)
        else:
            if m < n:
                raise ValueError("interior grid needs resolution >= dimension")
            combos = _compositions(m, n, minimum=1)
        return np.array(list(combos), dtype=np.float64) / m


def _compositions(total: int, parts: int, *, minimum: int):
    if parts == 1:
        if total >= minimum:
            yield (total,)
        return
    for first in range(minimum, total - minimum * (parts - 1) + 1):
        for rest in _compositions(total - first, parts - 1, minimum=minimum):
            yield (first,) + rest


@dataclass(frozen=True)
class RegionSample:
    """One sweep point: the pre-test value and the allowed post-test interval."""

    p: np.ndarray
    f_value: float
    g_low: float
    g_high: float


@dataclass
class SweepResult:
    samples: list[RegionSample]
    failures: list[tuple[int, str]] = field(default_factory=list)


def _bounds_rt(pre: MeasurementBasis, p, post: MeasurementBasis, method: str,
               options: cip.SolverOptions | None) -> tuple[np.ndarray, np.ndarray]:
    if method not in ("auto", "closed", "sdp"):
        raise ValueError(f"method must be auto|closed|sdp, got {method!r}")
    if method == "closed" or (method == "auto" and pre.n == 2):
        r, t, _, _ = cip.qubit_bounds_vectors(pre, p, post)
        return r, t
    bs = cip.bounds(pre, p, post, options=options)
    return bs.r, bs.t


def fine_grained_interval(pre: MeasurementBasis, p, post: MeasurementBasis,
                          f: MeasureSpec, g: MeasureSpec, *, method: str = "auto",
                          options: cip.SolverOptions | None = None) -> RegionSample:
    """Interval of g values compatible with observing ``p`` on the pre test.

    Schur concavity orders the ends: the upper bound vector minimizes g, the
    lower bound vector maximizes it.
    """
    pv = np.asarray(p, dtype=np.float64)
    r, t = _bounds_rt(pre, pv, post, method, options)
    return RegionSample(p=pv, f_value=f(pv), g_low=g(t), g_high=g(r))


def _indexed_map(fun, items, parallel: int):
    if parallel <= 1:
        return [fun(x) for x in items]
    with ThreadPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(fun, items))


def sweep_region(pre: MeasurementBasis, post: MeasurementBasis,
                 f: MeasureSpec, g: MeasureSpec, grid: SimplexGrid, *,
                 method: str = "auto", options: cip.SolverOptions | None = None,
                 parallel: int = 1) -> SweepResult:
    """One :class:`RegionSample` per grid point, in grid order."""
    if grid.dimension != pre.n:
        raise ValueError(f"grid dimension {grid.dimension} vs basis dimension {pre.n}")
    points = grid.points()

    def work(args):
        idx, pv = args
        try:
            return idx, fine_grained_interval(pre, pv, post, f, g,
                                              method=method, options=options), None
        except Exception as exc:  # noqa: BLE001 - per-point failures are recorded
            return idx, None, f"{type(exc).__name__}: {exc}"

    out = _indexed_map(work, list(enumerate(points)), parallel)
    samples = [s for _, s, _ in out if s is not None]
    failures = [(i, msg) for i, _, msg in out if msg is not None]
    return SweepResult(samples=samples, failures=failures)


@dataclass(frozen=True)
class MultiSample:
    """Sweep point with one interval per post measurement."""

    p: np.ndarray
    f_value: float
    intervals: tuple[tuple[float, float], ...]


def multi_measurement_sweep(pre: MeasurementBasis, posts, f: MeasureSpec, gs,
                            grid: SimplexGrid, *, method: str = "auto",
                            options: cip.SolverOptions | None = None,
                            parallel: int = 1) -> list[MultiSample]:
    """Independent bound intervals for several post tests at each grid point."""
    posts = list(posts)
    gs = list(gs)
    if len(posts) != len(gs):
        raise ValueError(f"{len(posts)} post measurements vs {len(gs)} measures")
    for post in posts:
        if post.n != pre.n:
            raise ValueError("all measurements must share one dimension")
    points = grid.points()

    def work(args):
        _, pv = args
        ivs = []
        for post, g in zip(posts, gs):
            r, t = _bounds_rt(pre, pv, post, method, options)
            ivs.append((g(t), g(r)))
        return MultiSample(p=pv, f_value=f(pv), intervals=tuple(ivs))

    return _indexed_map(work, list(enumerate(points)), parallel)


# ---------------------------------------------------------------------------
# refined extrema over sweeps
# ---------------------------------------------------------------------------

def _refine_simplex_min(fun, p0: np.ndarray, step: float, *, rounds: int = 2):
    """Local 1-d bounded searches along simplex edge directions."""
    p = p0.copy()
    best = fun(p)
    for _ in range(rounds):
        for i, j in itertools.combinations(range(p.size), 2):
            lo = max(-p[i], -step)
            hi = min(p[j], step)
            if hi - lo <= 1e-15:
                continue

            def line(s, i=i, j=j):
                q = p.copy()
                q[i] += s
                q[j] -= s
                np.clip(q, 0.0, None, out=q)
                return fun(q / q.sum())

            res = minimize_scalar(line, bounds=(lo, hi), method="bounded",
                                  options={"xatol": _REFINE_XATOL})
            if res.fun < best:
                best = float(res.fun)
                p[i] += res.x
                p[j] -= res.x
                np.clip(p, 0.0, None, out=p)
                p /= p.sum()
    return best, p


def additive_minimum(pre: MeasurementBasis, posts, f: MeasureSpec, gs,
                     grid: SimplexGrid, *, method: str = "auto",
                     options: cip.SolverOptions | None = None,
                     refine: bool = True, parallel: int = 1) -> tuple[float, np.ndarray]:
    """Minimum over the sweep of f(p) plus the post-test lower interval ends.

    This is the tangent-line intercept of the outer approximation: a valid
    state-independent lower bound on the summed uncertainties.
    """
    posts = list(posts)
    gs = list(gs)
    samples = multi_measurement_sweep(pre, posts, f, gs, grid, method=method,
                                      options=options, parallel=parallel)
    totals = [s.f_value + sum(iv[0] for iv in s.intervals) for s in samples]
    idx = int(np.argmin(totals))
    best, witness = totals[idx], samples[idx].p.copy()
    if refine:
        def objective(p):
            total = f(p)
            for post, g in zip(posts, gs):
                _, t = _bounds_rt(pre, p, post, method, options)
                total += g(t)
            return total

        step = 2.0 / max(grid.resolution, 1)
        best, witness = _refine_simplex_min(objective, witness, step)
    return best, witness


def optimal_additive_constant(pre: MeasurementBasis, post: MeasurementBasis,
                              f: MeasureSpec, g: MeasureSpec, grid: SimplexGrid, *,
                              method: str = "auto",
                              options: cip.SolverOptions | None = None,
                              refine: bool = True, parallel: int = 1) -> float:
    """Additive uncertainty constant min over p of f(p) + g(t(p))."""
    value, _ = additive_minimum(pre, [post], f, [g], grid, method=method,
                                options=options, refine=refine, parallel=parallel)
    return value


@dataclass(frozen=True)
class JointBounds:
    """State-independent two-sided limits for a joint-uncertainty measure."""

    a: float
    b: float
    witness_a: tuple[str, np.ndarray]
    witness_b: tuple[str, np.ndarray]


def joint_bounds(pre: MeasurementBasis, post: MeasurementBasis,
                 joint: JointMeasureSpec, grid: SimplexGrid, *,
                 method: str = "auto", options: cip.SolverOptions | None = None,
                 refine: bool = True, parallel: int = 1) -> JointBounds:
    """Upper limit a and lower limit b for the joint measure over all states.

    The forward sweep bounds the post-test argument by its sandwich; the
    swapped sweep bounds the pre-test argument.  Each side contributes one
    candidate extremum and the tighter one wins.
    """
    step = 2.0 / max(grid.resolution, 1)

    def side_extrema(first: MeasurementBasis, second: MeasurementBasis, tag: str):
        # J evaluated with the swept vector in the position named by ``tag``
        def low(p):
            _, t = _bounds_rt(first, p, second, method, options)
            return evaluate_joint(joint, p, t) if tag == "forward" else evaluate_joint(joint, t, p)

        def high(p):
            r, _ = _bounds_rt(first, p, second, method, options)
            return evaluate_joint(joint, p, r) if tag == "forward" else evaluate_joint(joint, r, p)

        pts = grid.points()
        lows = _indexed_map(low, list(pts), parallel)
        highs = _indexed_map(high, list(pts), parallel)
        i_lo, i_hi = int(np.argmin(lows)), int(np.argmax(highs))
        b_val, b_wit = lows[i_lo], pts[i_lo].copy()
        a_val, a_wit = highs[i_hi], pts[i_hi].copy()
        if refine:
            b_val, b_wit = _refine_simplex_min(low, b_wit, step)
            neg, a_wit = _refine_simplex_min(lambda p: -high(p), a_wit, step)
            a_val = -neg
        return (a_val, a_wit), (b_val, b_wit)

    (a_f, a_fw), (b_f, b_fw) = side_extrema(pre, post, "forward")
    (a_s, a_sw), (b_s, b_sw) = side_extrema(post, pre, "swapped")
    if a_f <= a_s:
        a, wit_a = a_f, ("forward", a_fw)
    else:
        a, wit_a = a_s, ("swapped", a_sw)
    if b_f >= b_s:
        b, wit_b = b_f, ("forward", b_fw)
    else:
        b, wit_b = b_s, ("swapped", b_sw)
    return JointBounds(a=a, b=b, witness_a=wit_a, witness_b=wit_b)


def evaluate_joint_side(pre: MeasurementBasis, post: MeasurementBasis,
                        joint: JointMeasureSpec, side: str, p, *, bound: str,
                        method: str = "auto",
                        options: cip.SolverOptions | None = None) -> float:
    """Re-evaluate a joint-bound witness independently of the sweep."""
    pv = np.asarray(p, dtype=np.float64)
    first, second = (pre, post) if side == "forward" else (post, pre)
    r, t = _bounds_rt(first, pv, second, method, options)
    partner = t if bound == "low" else r
    if side == "forward":
        return evaluate_joint(joint, pv, partner)
    return evaluate_joint(joint, partner, pv)


# ---------------------------------------------------------------------------
# rasterized membership and the swapped-role intersection
# ---------------------------------------------------------------------------

@dataclass
class RasterRegion:
    """Boolean membership raster over [0, f_max] x [0, g_max]."""

    mask: np.ndarray
    f_max: float
    g_max: float

    @property
    def resolution(self) -> int:
        return self.mask.shape[0]

    def _index(self, value: float, top: float) -> int:
        r = self.resolution
        return int(np.clip(round(value / top * (r - 1)), 0, r - 1)) if top > 0 else 0

    def contains(self, f_value: float, g_value: float, *, slack_cells: int = 1) -> bool:
        fi = self._index(f_value, self.f_max)
        gi = self._index(g_value, self.g_max)
        lo_f, hi_f = max(0, fi - slack_cells), min(self.resolution, fi + slack_cells + 1)
        lo_g, hi_g = max(0, gi - slack_cells), min(self.resolution, gi + slack_cells + 1)
        return bool(self.mask[lo_f:hi_f, lo_g:hi_g].any())


def swapped_and_intersected(pre: MeasurementBasis, post: MeasurementBasis,
                            f: MeasureSpec, g: MeasureSpec, grid: SimplexGrid, *,
                            raster: int = RASTER_DEFAULT, method: str = "auto",
                            options: cip.SolverOptions | None = None,
                            parallel: int = 1) -> RasterRegion:
    """Rasterized intersection of the two swept outer approximations.

    The two sweeps live in different parameterizations (one fixes the pre
    vector, the other the post vector), so the intersection is taken on a
    shared (f, g) raster; the cell size is the only approximation introduced.
    """
    f_max = f(np.full(pre.n, 1.0 / pre.n))
    g_max = g(np.full(post.n, 1.0 / post.n))

    def to_idx(value, top):
        return int(np.clip(round(value / top * (raster - 1)), 0, raster - 1)) if top > 0 else 0

    # between simplex-adjacent samples the true region contains a continuum
    # of segments, so the span between their rasterized segments is painted
    # as well; this only ever enlarges the outer approximation
    adjacency = 2.5 / max(grid.resolution, 1)

    def paint(samples, swap: bool) -> np.ndarray:
        mask = np.zeros((raster, raster), dtype=bool)
        prev = None
        for s in samples:
            fixed = to_idx(s.f_value, g_max if swap else f_max)
            top = f_max if swap else g_max
            lo, hi = to_idx(s.g_low, top), to_idx(s.g_high, top)
            cell = (fixed, fixed, lo, hi)
            if prev is not None and np.abs(s.p - prev[0]).sum() <= adjacency:
                pf0, pf1, pl, ph = prev[1]
                cell = (min(fixed, pf0), max(fixed, pf1), min(lo, pl), max(hi, ph))
            a0, a1, b0, b1 = (min(cell[0], fixed), max(cell[1], fixed),
                              min(cell[2], lo), max(cell[3], hi))
            if swap:
                mask[b0:b1 + 1, a0:a1 + 1] = True
            else:
                mask[a0:a1 + 1, b0:b1 + 1] = True
            prev = (s.p, (fixed, fixed, lo, hi))
        return mask

    fwd = paint(sweep_region(pre, post, f, g, grid, method=method, options=options,
                             parallel=parallel).samples, swap=False)
    swp = paint(sweep_region(post, pre, g, f, grid, method=method, options=options,
                             parallel=parallel).samples, swap=True)
    return RasterRegion(mask=fwd & swp, f_max=f_max, g_max=g_max)
