"""Complementary-information bounds pipeline.

Given a pre-test basis, its observed outcome distribution, and a post-test
basis, every compatible post-test distribution q is sandwiched between a
unique majorization-minimal vector r and a majorization-maximal vector t.
The raw upper partial sums come from one expectation maximization per
outcome subset; the raw lower partial sums from one epigraph minimization
per cardinality.  The optimal upper bound applies the least-concave-majorant
averaging to the raw upper vector.

Solver noise handling: all partial sums are reported on their certified
sides, then repaired to exact monotone/concave shape by running maxima and
flattening.  Both repairs move the reported curves toward (never past) the
true ones, so the sandwich property survives floating-point error.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import quantum, sdp
from .majorization import flatten, majorized_by, prob_vector, sort_descending
from .quantum import FeasibleSetSpec, MeasurementBasis

JOINT_DIM_CAP = 4


@dataclass
class SolverOptions:
    """Knobs forwarded to every conic solve in the pipeline."""

    tol_gap: float = sdp.TOL_GAP
    tol_feas: float = sdp.TOL_FEAS
    max_iter: int = sdp.MAX_ITER
    mehrotra: bool = False

    def kwargs(self) -> dict:
        return {"tol_gap": self.tol_gap, "tol_feas": self.tol_feas,
                "max_iter": self.max_iter, "mehrotra": self.mehrotra}


@dataclass
class BoundSet:
    """The (r, s_raw, t) triple for one (pre-basis, p, post-basis) instance."""

    p: np.ndarray
    r: np.ndarray
    s_raw: np.ndarray
    t: np.ndarray
    flatten_applied: bool
    certificates: dict = field(default_factory=dict)
    solver_stats: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "p": self.p.tolist(),
            "r": self.r.tolist(),
            "s_raw": self.s_raw.tolist(),
            "t": self.t.tolist(),
            "flatten_applied": self.flatten_applied,
            "solver_stats": self.solver_stats,
        }


class _StatsCollector:
    def __init__(self):
        self.solves = 0
        self.iterations = 0
        self.max_gap = 0.0
        self.max_primal_residual = 0.0
        self.statuses: dict[str, int] = {}
        self.failures: list[str] = []

    def record(self, sol: sdp.SdpSolution | None, context: str) -> None:
        if sol is None:  # closed-form shortcut, nothing solved
            return
        self.solves += 1
        self.iterations += sol.iterations
        self.max_gap = max(self.max_gap, sol.duality_gap)
        self.max_primal_residual = max(self.max_primal_residual, sol.primal_residual)
        self.statuses[sol.status] = self.statuses.get(sol.status, 0) + 1
        if sol.status != "optimal":
            self.failures.append(f"{context}: status={sol.status}")

    def as_dict(self) -> dict:
        return {"solves": self.solves, "iterations": self.iterations,
                "max_duality_gap": self.max_gap,
                "max_primal_residual": self.max_primal_residual,
                "statuses": dict(sorted(self.statuses.items()))}

    def raise_on_failures(self, what: str) -> None:
        if self.failures:
            raise sdp.SdpError(f"{what}: {len(self.failures)} subproblem(s) failed: "
                               + "; ".join(self.failures))


def _monotone_unit_cumulative(vals: np.ndarray) -> np.ndarray:
    """Repair a cumulative sequence: clip to [0, 1], running max, end pinned at 1."""
    c = np.clip(vals, 0.0, 1.0)
    c = np.maximum.accumulate(c)
    c[-1] = 1.0
    return c


def upper_raw_s(pre: MeasurementBasis, p, post: MeasurementBasis, *,
                options: SolverOptions | None = None,
                certificates_for=(), _certs: dict | None = None,
                _stats: _StatsCollector | None = None) -> np.ndarray:
    """Raw upper vector: successive differences of the maximal partial sums.

    Entry k-1 of the cumulative sequence is the largest total weight any
    cardinality-k outcome subset of the post test can carry over the feasible
    set; the final sum is pinned at 1.  The output differences need not be
    nonincreasing for dimension >= 4.
    """
    options = options or SolverOptions()
    stats = _stats if _stats is not None else _StatsCollector()
    spec = FeasibleSetSpec(pre, prob_vector(p))
    n = spec.n
    wanted = set(certificates_for)
    cum = np.empty(n)
    for k in range(1, n):
        subsets, ops = sdp.subset_effects(spec, post, k)
        best, best_state = -math.inf, None
        for subset, op in zip(subsets, ops):
            res = sdp.max_expectation(spec, op, **options.kwargs())
            stats.record(res.solution, f"s_{k} subset {subset}")
            if res.value > best:
                best, best_state = res.value, res.state
        cum[k - 1] = best
        if k in wanted and _certs is not None:
            _certs[("s", k)] = best_state
    cum[n - 1] = 1.0
    stats.raise_on_failures("upper_raw_s")
    cum = _monotone_unit_cumulative(cum)
    return np.diff(np.concatenate(([0.0], cum)))


def lower_r(pre: MeasurementBasis, p, post: MeasurementBasis, *,
            options: SolverOptions | None = None,
            certificates_for=(), _certs: dict | None = None,
            _stats: _StatsCollector | None = None) -> np.ndarray:
    """Optimal lower vector: differences of the minimal worst-subset sums.

    The cumulative sequence is concave in exact arithmetic; the flatten pass
    only removes solver noise, never changes the values beyond it.
    """
    options = options or SolverOptions()
    stats = _stats if _stats is not None else _StatsCollector()
    spec = FeasibleSetSpec(pre, prob_vector(p))
    n = spec.n
    wanted = set(certificates_for)
    cum = np.empty(n)
    for k in range(1, n):
        res = sdp.min_max_gamma(spec, post, k, **options.kwargs())
        stats.record(res.solution, f"r_{k}")
        cum[k - 1] = res.value
        if k in wanted and _certs is not None:
            _certs[("r", k)] = res.state
    cum[n - 1] = 1.0
    stats.raise_on_failures("lower_r")
    cum = _monotone_unit_cumulative(cum)
    return flatten(np.diff(np.concatenate(([0.0], cum))))


def optimal_t(s_raw) -> np.ndarray:
    """Optimal upper vector: least concave majorant of the raw upper sums."""
    return flatten(s_raw)


def bounds(pre: MeasurementBasis, p, post: MeasurementBasis, *,
           options: SolverOptions | None = None,
           certificates_for=()) -> BoundSet:
    """Full pipeline: r, raw s, and flattened t for one instance."""
    options = options or SolverOptions()
    stats = _StatsCollector()
    certs: dict = {}
    pv = prob_vector(p)
    s_raw = upper_raw_s(pre, pv, post, options=options,
                        certificates_for=certificates_for, _certs=certs, _stats=stats)
    r = lower_r(pre, pv, post, options=options,
                certificates_for=certificates_for, _certs=certs, _stats=stats)
    t = optimal_t(s_raw)
    applied = not np.allclose(t, s_raw, rtol=0.0, atol=1e-12)
    return BoundSet(p=pv, r=r, s_raw=s_raw, t=t, flatten_applied=applied,
                    certificates=certs, solver_stats=stats.as_dict())


# ---------------------------------------------------------------------------
# closed forms for a single qubit
# ---------------------------------------------------------------------------

def qubit_closed_form(lam: float, theta: float) -> tuple[float, float]:
    """First entries (r1, s1) of the qubit bounds, from the branch formulas.

    The pre test is the computational basis with outcome weights
    (lam, 1 - lam), lam in the open interval (0, 1/2); the post test is the
    real rotation by ``theta`` in [0, pi/2].  The r1 branch is selected by
    comparing cot(2 theta) against +-2 sqrt(lam (1-lam)) / (1 - 2 lam), the
    s1 branch by theta against pi/4.
    """
    if not 0.0 < lam < 0.5:
        raise ValueError(f"lam must lie strictly inside (0, 1/2), got {lam}")
    if not 0.0 <= theta <= math.pi / 2:
        raise ValueError(f"theta must lie in [0, pi/2], got {theta}")
    return _qubit_r1(lam, theta), _qubit_s1(lam, theta)


def _qubit_s1(lam: float, theta: float) -> float:
    sl, cl = math.sqrt(lam), math.sqrt(1.0 - lam)
    st, ct = math.sin(theta), math.cos(theta)
    if theta < math.pi / 4:
        return (sl * st + cl * ct) ** 2
    return (cl * st + sl * ct) ** 2


def _qubit_r1(lam: float, theta: float) -> float:
    sl, cl = math.sqrt(lam), math.sqrt(1.0 - lam)
    st, ct = math.sin(theta), math.cos(theta)
    if lam >= 0.5:
        return 0.5
    s2t = math.sin(2.0 * theta)
    cot2t = math.inf if theta < math.pi / 4 else -math.inf
    if abs(s2t) > 1e-15:
        cot2t = math.cos(2.0 * theta) / s2t
    edge = 2.0 * math.sqrt(lam * (1.0 - lam)) / (1.0 - 2.0 * lam)
    if cot2t < -edge:
        return (cl * st - sl * ct) ** 2
    if cot2t > edge:
        return (sl * st - cl * ct) ** 2
    return 0.5


def qubit_bounds_vectors(pre: MeasurementBasis, p, post: MeasurementBasis
                         ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Constructive qubit bounds for arbitrary bases: (r, t, state_r, state_t).

    Works in the pre-test frame, where the feasible set is the disk of
    off-diagonal values c with |c| <= sqrt(p1 p2).  The first post-test
    outcome weight is affine in c, so its achievable range and the states
    attaining the extremes are explicit; the bounds follow because the two
    outcome weights always sum to 1.
    """
    pv = prob_vector(p)
    if pre.n != 2 or post.n != 2:
        raise quantum.DimensionMismatchError("constructive qubit bounds need dimension 2")
    w = quantum.effect_vectors(pre, post)  # rows: post vectors in the pre frame
    a, b = w[0, 0], w[0, 1]
    alpha = pv[0] * abs(a) ** 2 + pv[1] * abs(b) ** 2
    radius = math.sqrt(pv[0] * pv[1])
    amp = abs(a) * abs(b)
    phase = np.exp(-1j * np.angle(np.conj(a) * b)) if amp > 0 else 1.0

    def state_for(c):
        core = np.array([[pv[0], c], [np.conj(c), pv[1]]], dtype=np.complex128)
        return pre.vectors.T @ core @ pre.vectors.conj()

    lo, hi = alpha - 2 * radius * amp, alpha + 2 * radius * amp
    # upper side: push the first outcome weight as far from 1/2 as possible
    if abs(hi - 0.5) >= abs(lo - 0.5):
        t1, c_t = hi, radius * phase
    else:
        t1, c_t = lo, -radius * phase
    t1 = max(t1, 1.0 - t1)
    # lower side: pull it as close to 1/2 as the disk allows
    if lo <= 0.5 <= hi:
        r1 = 0.5
        c_r = ((0.5 - alpha) / (2 * amp)) * phase if amp > 0 else 0.0
    elif lo > 0.5:
        r1, c_r = lo, -radius * phase
    else:
        r1, c_r = 1.0 - hi, radius * phase
    r = np.array([r1, 1.0 - r1])
    t = np.array([t1, 1.0 - t1])
    return r, t, state_for(c_r), state_for(c_t)


# ---------------------------------------------------------------------------
# baseline bounds from the joint projector set
# ---------------------------------------------------------------------------

@dataclass
class BaselineBounds:
    """State-independent reference bounds built from the joint basis set."""

    w_plus: np.ndarray
    w_times: np.ndarray
    mu_constant: float
    w_plus_rho: np.ndarray | None = None


def mu_bound(pre: MeasurementBasis, post: MeasurementBasis) -> float:
    """Entropic incompatibility constant -2 log2 of the maximal overlap."""
    return -2.0 * math.log2(quantum.max_overlap(pre, post))


def _joint_vectors(pre: MeasurementBasis, post: MeasurementBasis,
                   dim_cap: int) -> np.ndarray:
    if pre.n != post.n:
        raise quantum.DimensionMismatchError(f"dimensions differ: {pre.n} vs {post.n}")
    if pre.n > dim_cap:
        raise sdp.SubsetCapError(
            f"dimension {pre.n} exceeds the joint-subset cap {dim_cap}; "
            "raise dim_cap explicitly if the combinatorics are acceptable")
    return np.vstack([pre.vectors, post.vectors])


def _joint_x_values(vectors: np.ndarray, upto: int) -> np.ndarray:
    """x_k = max over cardinality-k subsets of the top projector-sum eigenvalue."""
    two_n = vectors.shape[0]
    xs = np.empty(upto)
    for k in range(1, upto + 1):
        best = -math.inf
        for idx in itertools.combinations(range(two_n), k):
            v = vectors[list(idx)]
            s = v.T @ v.conj()
            best = max(best, float(np.linalg.eigvalsh(s)[-1].real))
        xs[k - 1] = best
    return xs


def dsmur_w_plus(pre: MeasurementBasis, post: MeasurementBasis, *,
                 dim_cap: int = JOINT_DIM_CAP) -> np.ndarray:
    """Direct-sum baseline: differences of the joint operator-norm sums.

    Every cardinality beyond n+1 saturates at 2, so the tail of the length-2n
    output is zero and the total mass is 2.
    """
    vecs = _joint_vectors(pre, post, dim_cap)
    n = pre.n
    xs = _joint_x_values(vecs, n + 1)
    w = np.diff(np.concatenate(([0.0], xs)))
    return np.concatenate([w, np.zeros(n - 1)])


def uur_w_times(pre: MeasurementBasis, post: MeasurementBasis, *,
                dim_cap: int = JOINT_DIM_CAP) -> np.ndarray:
    """Direct-product baseline: quarter-differences of squared joint norms."""
    vecs = _joint_vectors(pre, post, dim_cap)
    n = pre.n
    xs = _joint_x_values(vecs, n + 1)
    sq = xs[1:] ** 2  # x_2 .. x_{n+1}
    w = 0.25 * np.diff(np.concatenate(([0.0], sq)))
    return np.concatenate([w, np.zeros(n * n - n)])


def spectrum_w_plus(pre: MeasurementBasis, post: MeasurementBasis, spectrum, *,
                    dim_cap: int = JOINT_DIM_CAP) -> np.ndarray:
    """Spectrum-aware direct-sum baseline.

    y_k pairs the sorted state spectrum with the sorted eigenvalues of each
    cardinality-k joint partial sum and keeps the best pairing.
    """
    spec_v = np.asarray(spectrum, dtype=np.float64)
    if spec_v.min() < -1e-12 or abs(spec_v.sum() - 1.0) > 1e-9:
        raise ValueError("spectrum must be a probability vector")
    if np.any(np.diff(spec_v) > 1e-12):
        raise ValueError("spectrum must be nonincreasing")
    vecs = _joint_vectors(pre, post, dim_cap)
    two_n = vecs.shape[0]
    ys = np.empty(two_n)
    for k in range(1, two_n + 1):
        best = -math.inf
        for idx in itertools.combinations(range(two_n), k):
            v = vecs[list(idx)]
            s = v.T @ v.conj()
            ev = np.sort(np.linalg.eigvalsh(s).real)[::-1]
            best = max(best, float(spec_v @ ev))
        ys[k - 1] = best
    return np.diff(np.concatenate(([0.0], ys)))


def baselines(pre: MeasurementBasis, post: MeasurementBasis, spectrum=None, *,
              dim_cap: int = JOINT_DIM_CAP) -> BaselineBounds:
    """All reference bounds for one measurement pair."""
    extra = None if spectrum is None else spectrum_w_plus(pre, post, spectrum, dim_cap=dim_cap)
    return BaselineBounds(
        w_plus=dsmur_w_plus(pre, post, dim_cap=dim_cap),
        w_times=uur_w_times(pre, post, dim_cap=dim_cap),
        mu_constant=mu_bound(pre, post),
        w_plus_rho=extra,
    )


# ---------------------------------------------------------------------------
# one-shot convertibility from partial knowledge
# ---------------------------------------------------------------------------

def convertibility(bound_set: BoundSet, x, direction: str) -> str:
    """Tri-valued conversion verdict against the computed bounds.

    ``from``: can a state described by ``x`` be converted into the tested
    one?  Certified yes when x is majorized by the lower bound; certified no
    when x fails to be majorized by the upper bound (it then cannot be
    majorized by any compatible vector); otherwise the observed statistics
    cannot decide.  ``to`` mirrors the logic for conversions out of the
    tested state.  The "no" branch is sound, never complete.
    """
    xv = prob_vector(x)
    if xv.size != bound_set.r.size:
        raise ValueError(f"dimension mismatch: {xv.size} vs {bound_set.r.size}")
    if direction == "from":
        if majorized_by(xv, bound_set.r):
            return "yes"
        if not majorized_by(xv, bound_set.t):
            return "no"
        return "lack_of_information"
    if direction == "to":
        if majorized_by(bound_set.t, xv):
            return "yes"
        if not majorized_by(bound_set.r, xv):
            return "no"
        return "lack_of_information"
    raise ValueError(f"direction must be 'from' or 'to', got {direction!r}")


def trivial_bounds(n: int) -> tuple[np.ndarray, np.ndarray]:
    """The information-free sandwich: uniform below, point mass above."""
    u = np.full(n, 1.0 / n)
    ell = np.zeros(n)
    ell[0] = 1.0
    return u, ell


def overlap_row_bounds(pre: MeasurementBasis, post: MeasurementBasis, j: int) -> np.ndarray:
    """Deterministic-outcome shortcut: sorted overlap row of outcome ``j``."""
    row = quantum.overlap_matrix(pre, post)[j]
    return sort_descending(row)
