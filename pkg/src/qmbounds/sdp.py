"""Dense primal-dual interior-point solver for small conic programs.

The cone is a product of real symmetric PSD blocks and a nonnegative orthant
block.  The solver is an infeasible-start path-following method with
Nesterov-Todd scaling; with the default centering factor 0.5 it reaches a
1e-8 duality gap in a few dozen iterations on the matrix sizes used here
(dimension <= 16, a handful of constraints).

Complex Hermitian programs are handled through the standard real embedding
h -> [[Re h, -Im h], [Im h, Re h]]: the embedded feasible set is an exact
relaxation (any feasible real point maps back to a feasible Hermitian matrix
with identical objective), and traces double, which is compensated by a
factor 1/2 on objectives and constraints.  Purely real instances skip the
embedding, mirroring the fact that real measurement data admits a real
optimizer.

Two problem shapes are exposed on top of the core: maximizing a Hermitian
expectation over all states with a prescribed diagonal, and the epigraph
minimization of the largest among a family of expectations.  Both apply the
support reduction of :mod:`.quantum` first, so the solver always starts from
a strictly feasible interior.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import quantum
from .quantum import FeasibleSetSpec

TOL_GAP = 1e-8
TOL_FEAS = 1e-8
MAX_ITER = 200
SIGMA = 0.5
STEP_FRACTION = 0.98
SUBSET_DIM_CAP = 10

_REAL_TOL = 1e-13


class SdpError(RuntimeError):
    """Solver failed to produce a certified solution."""


class SubsetCapError(ValueError):
    """Subset enumeration would exceed the configured dimension cap."""


# ---------------------------------------------------------------------------
# problem and solution containers
# ---------------------------------------------------------------------------

@dataclass
class SdpProblem:
    """Standard-form conic program over PSD blocks and a nonnegative block.

    minimize/maximize  sum_b <obj_psd[b], X_b> + obj_lin . x
    subject to         sum_b <con_psd[i][b], X_b> + con_lin[i] . x = rhs[i]
                       X_b PSD, x >= 0
    """

    psd_dims: tuple[int, ...]
    nonneg_dim: int
    obj_psd: tuple[np.ndarray, ...]
    obj_lin: np.ndarray
    con_psd: tuple[tuple[np.ndarray, ...], ...]
    con_lin: np.ndarray
    rhs: np.ndarray
    sense: str = "min"

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")
        self.rhs = np.asarray(self.rhs, dtype=np.float64)
        if not np.all(np.isfinite(self.rhs)):
            raise ValueError("rhs has non-finite entries")
        m = self.rhs.size
        self.obj_lin = np.asarray(self.obj_lin, dtype=np.float64).reshape(self.nonneg_dim)
        self.con_lin = np.asarray(self.con_lin, dtype=np.float64).reshape(m, self.nonneg_dim)
        for b, d in enumerate(self.psd_dims):
            for tag, op in [("objective", self.obj_psd[b])] + [
                    (f"constraint {i}", self.con_psd[i][b]) for i in range(m)]:
                if op.shape != (d, d) or np.abs(op - op.T).max() > 1e-10:
                    raise ValueError(f"{tag} block {b} is not symmetric of dimension {d}")
        total = sum(d * d for d in self.psd_dims) + self.nonneg_dim
        if m > total:
            raise ValueError(f"{m} constraints exceed the variable dimension {total}")

    @property
    def num_constraints(self) -> int:
        return self.rhs.size


@dataclass
class SdpSolution:
    """Certified iterate returned by :func:`solve`."""

    primal_psd: list[np.ndarray]
    primal_lin: np.ndarray
    dual: np.ndarray
    objective_value: float
    dual_value: float
    duality_gap: float
    primal_residual: float
    dual_residual: float
    iterations: int
    status: str
    sense: str
    iteration_log: list[dict] = field(repr=False, default_factory=list)
    certificate: np.ndarray | None = None

    def certified_bound(self) -> float:
        """Value on the safe side of the true optimum.

        For a minimization this is a lower bound on the optimum, for a
        maximization an upper bound; used wherever the result feeds a
        majorization bound that must stay valid under solver error.
        """
        if self.sense == "min":
            return min(self.objective_value, self.dual_value)
        return max(self.objective_value, self.dual_value)


# ---------------------------------------------------------------------------
# core solver
# ---------------------------------------------------------------------------

def _floored(ev: np.ndarray, rel: float = 1e-16) -> np.ndarray:
    """Eigenvalues floored relative to the largest, capping condition numbers."""
    return np.clip(ev, max(float(ev[-1]), 1e-30) * rel, None)


def _nt_scaling(x_blk: np.ndarray, z_blk: np.ndarray) -> np.ndarray:
    """Scaling point W with W Z W = X for PSD X, Z."""
    ex, ux = np.linalg.eigh(x_blk)
    xh = (ux * np.sqrt(_floored(ex))) @ ux.T
    mid = xh @ z_blk @ xh
    em, um = np.linalg.eigh(0.5 * (mid + mid.T))
    mid_is = (um / np.sqrt(_floored(em))) @ um.T
    w = xh @ mid_is @ xh
    return 0.5 * (w + w.T)


def _step_to_boundary_psd(x_blk: np.ndarray, dx_blk: np.ndarray) -> float:
    """Largest alpha with X + alpha dX still PSD.

    Eigendecomposition instead of Cholesky: near convergence the iterate can
    be ill-conditioned enough for a factorization to fail outright, while a
    floored eigenvalue scaling always yields a usable estimate (the caller's
    fractional step absorbs the floor's tiny optimism).
    """
    ex, ux = np.linalg.eigh(x_blk)
    top = max(float(ex[-1]), 1e-30)
    ex = np.clip(ex, top * 1e-14, None)
    isq = ux / np.sqrt(ex)
    s = isq.T @ dx_blk @ isq
    lam = float(np.linalg.eigvalsh(0.5 * (s + s.T)).min())
    return math.inf if lam >= 0.0 else -1.0 / lam


def _step_to_boundary_lin(x: np.ndarray, dx: np.ndarray) -> float:
    neg = dx < 0.0
    if not np.any(neg):
        return math.inf
    return float(np.min(-x[neg] / dx[neg]))


def solve(problem: SdpProblem, *, tol_gap: float = TOL_GAP, tol_feas: float = TOL_FEAS,
          max_iter: int = MAX_ITER, sigma: float = SIGMA,
          mehrotra: bool = False) -> SdpSolution:
    """Solve ``problem`` to the requested gap and feasibility tolerances.

    Returns status ``optimal`` when both residuals and the complementarity
    gap are below tolerance, ``max_iter`` with the best iterate otherwise,
    and ``infeasible`` (with a normalized dual ray as certificate) when the
    dual objective diverges while staying dual-feasible.
    """
    sense = problem.sense
    flip = -1.0 if sense == "max" else 1.0
    dims = problem.psd_dims
    nb = len(dims)
    nl = problem.nonneg_dim
    m = problem.num_constraints
    b_vec = problem.rhs

    c_psd = [flip * problem.obj_psd[k] for k in range(nb)]
    c_lin = flip * problem.obj_lin
    a_stacks = [np.ascontiguousarray(np.stack([problem.con_psd[i][k] for i in range(m)]))
                if m else np.zeros((0, dims[k], dims[k])) for k in range(nb)]
    a_lin = problem.con_lin

    nu = float(sum(dims) + nl)
    x_psd = [np.eye(d) for d in dims]
    z_psd = [np.eye(d) for d in dims]
    x_lin = np.ones(nl)
    z_lin = np.ones(nl)
    y = np.zeros(m)

    scale_b = 1.0 + float(np.abs(b_vec).max(initial=0.0))
    scale_c = 1.0 + max([float(np.abs(c).max(initial=0.0)) for c in c_psd] +
                        [float(np.abs(c_lin).max(initial=0.0))])

    log: list[dict] = []
    status = "max_iter"
    certificate = None
    it = 0
    stalled = 0

    def apply_a(xp, xl):
        out = np.zeros(m)
        for k in range(nb):
            out += a_stacks[k].reshape(m, -1) @ xp[k].ravel()
        if nl:
            out += a_lin @ xl
        return out

    def apply_at(yv):
        blocks = [np.tensordot(yv, a_stacks[k], axes=(0, 0)) for k in range(nb)]
        lin = a_lin.T @ yv if nl else np.zeros(0)
        return blocks, lin

    for it in range(1, max_iter + 1):
        at_psd, at_lin = apply_at(y)
        rp = b_vec - apply_a(x_psd, x_lin)
        rd_psd = [c_psd[k] - z_psd[k] - at_psd[k] for k in range(nb)]
        rd_lin = c_lin - z_lin - at_lin if nl else np.zeros(0)

        comp = sum(float(np.tensordot(x_psd[k], z_psd[k])) for k in range(nb))
        comp += float(x_lin @ z_lin)
        mu = comp / nu
        pobj = sum(float(np.tensordot(c_psd[k], x_psd[k])) for k in range(nb))
        pobj += float(c_lin @ x_lin)
        dobj = float(b_vec @ y)

        feas_p = float(np.abs(rp).max(initial=0.0)) / scale_b
        feas_d = max([float(np.abs(r).max(initial=0.0)) for r in rd_psd] +
                     [float(np.abs(rd_lin).max(initial=0.0))]) / scale_c

        log.append({"iter": it, "mu": mu, "primal_obj": flip * pobj, "dual_obj": flip * dobj,
                    "primal_feas": feas_p, "dual_feas": feas_d})

        if comp <= tol_gap * max(1.0, abs(pobj)) and feas_p <= tol_feas and feas_d <= tol_feas:
            status = "optimal"
            break
        if dobj > 1e9 * scale_c and feas_d <= 10 * tol_feas and feas_p > tol_feas:
            status = "infeasible"
            certificate = y / max(1.0, float(np.abs(y).max()))
            break
        if not (math.isfinite(mu) and math.isfinite(feas_p) and math.isfinite(feas_d)):
            break  # numerical breakdown; report the last finite iterate
        if stalled >= 8:
            break  # steps have collapsed; more iterations cannot help

        w_psd = [_nt_scaling(x_psd[k], z_psd[k]) for k in range(nb)]
        w2_lin = x_lin / z_lin if nl else np.zeros(0)

        # everything that does not depend on the centering factor is shared
        # between the predictor and the corrector: one Schur factorization
        # and one scaled-residual pass per iteration
        zinv_psd = []
        schur = np.zeros((m, m))
        h_base = rp.copy()
        a_of_zinv = np.zeros(m)
        for k in range(nb):
            ez, uz = np.linalg.eigh(z_psd[k])
            zi = (uz / _floored(ez)) @ uz.T
            zinv_psd.append(zi)
            flat = a_stacks[k].reshape(m, -1)
            waw = (w_psd[k][None, :, :] @ a_stacks[k]) @ w_psd[k]
            schur += flat @ waw.reshape(m, -1).T
            wrw = w_psd[k] @ rd_psd[k] @ w_psd[k]
            h_base += flat @ (wrw + x_psd[k]).ravel()
            a_of_zinv += flat @ zi.ravel()
        zinv_lin = 1.0 / z_lin if nl else np.zeros(0)
        if nl:
            schur += (a_lin * w2_lin) @ a_lin.T
            h_base += a_lin @ (w2_lin * rd_lin + x_lin)
            a_of_zinv += a_lin @ zinv_lin

        ell = None
        jitter = 0.0
        base = max(1e-30, float(np.trace(schur)) / max(m, 1))
        for attempt in range(6):
            try:
                ell = np.linalg.cholesky(schur + jitter * np.eye(m))
                break
            except np.linalg.LinAlgError:
                jitter = base * 10.0 ** (attempt - 13)

        def solve_schur(h):
            if ell is not None:
                return np.linalg.solve(ell.T, np.linalg.solve(ell, h))
            return np.linalg.lstsq(schur, h, rcond=None)[0]  # pragma: no cover

        def newton_step(sig):
            dy = solve_schur(h_base - sig * mu * a_of_zinv)
            dat_psd, dat_lin = apply_at(dy)
            dz_psd = [rd_psd[k] - dat_psd[k] for k in range(nb)]
            dz_lin = rd_lin - dat_lin if nl else np.zeros(0)
            dx_psd = []
            for k in range(nb):
                dxk = sig * mu * zinv_psd[k] - x_psd[k] - w_psd[k] @ dz_psd[k] @ w_psd[k]
                dx_psd.append(0.5 * (dxk + dxk.T))
            dx_lin = sig * mu * zinv_lin - x_lin - w2_lin * dz_lin if nl else np.zeros(0)
            return dx_psd, dx_lin, dy, dz_psd, dz_lin

        sig = sigma
        if mehrotra:
            dxa, dxl, _, dza, dzl = newton_step(0.0)
            ap = min([1.0] + [_step_to_boundary_psd(x_psd[k], dxa[k]) for k in range(nb)] +
                     ([_step_to_boundary_lin(x_lin, dxl)] if nl else []))
            ad = min([1.0] + [_step_to_boundary_psd(z_psd[k], dza[k]) for k in range(nb)] +
                     ([_step_to_boundary_lin(z_lin, dzl)] if nl else []))
            comp_aff = sum(float(np.tensordot(x_psd[k] + ap * dxa[k], z_psd[k] + ad * dza[k]))
                           for k in range(nb))
            if nl:
                comp_aff += float((x_lin + ap * dxl) @ (z_lin + ad * dzl))
            ratio = min(1.0, max(0.0, comp_aff / max(comp, 1e-300)))
            sig = min(0.99, max(1e-4, ratio ** 3))

        dx_psd, dx_lin, dy, dz_psd, dz_lin = newton_step(sig)

        alpha_p = min([1.0] + [_step_to_boundary_psd(x_psd[k], dx_psd[k]) for k in range(nb)] +
                      ([_step_to_boundary_lin(x_lin, dx_lin)] if nl else []))
        alpha_d = min([1.0] + [_step_to_boundary_psd(z_psd[k], dz_psd[k]) for k in range(nb)] +
                      ([_step_to_boundary_lin(z_lin, dz_lin)] if nl else []))
        alpha_p = min(1.0, STEP_FRACTION * alpha_p)
        alpha_d = min(1.0, STEP_FRACTION * alpha_d)
        stalled = stalled + 1 if max(alpha_p, alpha_d) < 1e-8 else 0

        for k in range(nb):
            x_psd[k] = x_psd[k] + alpha_p * dx_psd[k]
            z_psd[k] = z_psd[k] + alpha_d * dz_psd[k]
        if nl:
            x_lin = x_lin + alpha_p * dx_lin
            z_lin = z_lin + alpha_d * dz_lin
        y = y + alpha_d * dy

    pobj = sum(float(np.tensordot(c_psd[k], x_psd[k])) for k in range(nb)) + float(c_lin @ x_lin)
    dobj = float(b_vec @ y)
    rp = b_vec - apply_a(x_psd, x_lin)
    at_psd, at_lin = apply_at(y)
    feas_p = float(np.abs(rp).max(initial=0.0)) / scale_b
    feas_d = max([float(np.abs(c_psd[k] - z_psd[k] - at_psd[k]).max(initial=0.0)) for k in range(nb)] +
                 [float(np.abs(c_lin - z_lin - at_lin).max(initial=0.0)) if nl else 0.0]) / scale_c

    return SdpSolution(
        primal_psd=x_psd,
        primal_lin=x_lin,
        dual=flip * y,
        objective_value=flip * pobj,
        dual_value=flip * dobj,
        duality_gap=abs(pobj - dobj),
        primal_residual=feas_p,
        dual_residual=feas_d,
        iterations=it,
        status=status,
        sense=sense,
        iteration_log=log,
        certificate=certificate,
    )


# ---------------------------------------------------------------------------
# Hermitian embedding and the two program shapes
# ---------------------------------------------------------------------------

def _is_real(*mats, tol: float = _REAL_TOL) -> bool:
    return all(float(np.abs(m.imag).max(initial=0.0)) <= tol for m in mats)


def _embed_op(h: np.ndarray, real_mode: bool) -> np.ndarray:
    """Operator acting on the (possibly embedded) real symmetric variable.

    Chosen so that <embed(h), X> equals Tr(h rho) exactly, with X the real
    image of rho; the embedding doubles traces, hence the factor 1/2.
    """
    if real_mode:
        hr = h.real
        return 0.5 * (hr + hr.T)
    re, im = h.real, h.imag
    return 0.5 * np.block([[re, -im], [im, re]])


def _recover_state(x_blk: np.ndarray, real_mode: bool, m: int) -> np.ndarray:
    if real_mode:
        return x_blk.astype(np.complex128)
    a = x_blk[:m, :m]
    d = x_blk[m:, m:]
    lower = x_blk[m:, :m]
    upper = x_blk[:m, m:]
    return 0.5 * (a + d) + 0.5j * (lower - upper)


@dataclass
class _Reduction:
    """Feasible set rewritten in the coordinates of its support."""

    support: np.ndarray
    target: np.ndarray
    frame: np.ndarray        # support rows of the pre-test basis
    real_mode: bool
    dim: int                 # variable block dimension seen by the solver

    def reduce_operator(self, h: np.ndarray) -> np.ndarray:
        return self.frame.conj() @ h @ self.frame.T

    def lift_state(self, core: np.ndarray) -> np.ndarray:
        return self.frame.T @ core @ self.frame.conj()


def _reduce(spec: FeasibleSetSpec, *operators: np.ndarray) -> tuple[_Reduction, list[np.ndarray]]:
    supp = spec.support()
    frame = spec.basis.vectors[supp]
    red = [frame.conj() @ op @ frame.T for op in operators]
    m = supp.size
    real_mode = _is_real(frame) and all(_is_real(r) for r in red)
    dim = m if real_mode else 2 * m
    return _Reduction(supp, spec.target[supp], frame, real_mode, dim), red


def _diag_constraints(red: _Reduction, nonneg_dim: int):
    m = red.support.size
    cons = []
    for j in range(m):
        e = np.zeros((m, m), dtype=np.complex128)
        e[j, j] = 1.0
        cons.append((_embed_op(e, red.real_mode),))
    con_lin = np.zeros((m, nonneg_dim))
    return cons, con_lin, red.target.copy()


@dataclass
class ExpectationResult:
    """Outcome of maximizing one Hermitian expectation over the feasible set."""

    value: float
    state: np.ndarray
    solution: SdpSolution | None


def max_expectation(spec: FeasibleSetSpec, a_op: np.ndarray, *,
                    tol_gap: float = TOL_GAP, tol_feas: float = TOL_FEAS,
                    max_iter: int = MAX_ITER, mehrotra: bool = False) -> ExpectationResult:
    """Maximize Tr(A rho) over states with the prescribed diagonal.

    ``value`` is taken on the certified side (an upper bound on the true
    maximum, within the gap tolerance of it); ``state`` is the feasible
    optimizer lifted back to the original frame.
    """
    a_op = np.asarray(a_op, dtype=np.complex128)
    n = spec.n
    if a_op.shape != (n, n):
        raise quantum.DimensionMismatchError(f"operator shape {a_op.shape} vs dimension {n}")
    if np.abs(a_op - a_op.conj().T).max() > 1e-10:
        raise ValueError("objective operator must be Hermitian")
    red, (a_red,) = _reduce(spec, a_op)
    m = red.support.size
    if m == 1:
        state = red.lift_state(np.ones((1, 1), dtype=np.complex128))
        return ExpectationResult(float(a_red[0, 0].real), state, None)

    cons, con_lin, rhs = _diag_constraints(red, 0)
    problem = SdpProblem(
        psd_dims=(red.dim,), nonneg_dim=0,
        obj_psd=(_embed_op(a_red, red.real_mode),), obj_lin=np.zeros(0),
        con_psd=tuple(cons), con_lin=con_lin, rhs=rhs, sense="max")
    sol = solve(problem, tol_gap=tol_gap, tol_feas=tol_feas, max_iter=max_iter,
                mehrotra=mehrotra)
    if sol.status == "infeasible":
        raise SdpError("expectation program reported infeasible; certificate attached")
    core = _recover_state(sol.primal_psd[0], red.real_mode, m)
    return ExpectationResult(sol.certified_bound(), red.lift_state(core), sol)


@dataclass
class GammaResult:
    """Outcome of the epigraph program for one subset cardinality."""

    value: float
    state: np.ndarray
    solution: SdpSolution | None
    subsets: list[tuple[int, ...]]


def subset_effects(spec: FeasibleSetSpec, post: quantum.MeasurementBasis, k: int,
                   *, dim_cap: int = SUBSET_DIM_CAP) -> tuple[list[tuple[int, ...]], list[np.ndarray]]:
    """All cardinality-k partial projector sums of the post-test basis.

    Enumeration is lexicographic; callers must not depend on the order for
    their results (the epigraph program below is symmetric under it).
    """
    n = spec.n
    if post.n != n:
        raise quantum.DimensionMismatchError(f"dimensions differ: {n} vs {post.n}")
    if not 1 <= k <= n:
        raise ValueError(f"subset cardinality {k} out of range for dimension {n}")
    if n > dim_cap:
        raise SubsetCapError(
            f"dimension {n} exceeds the subset-enumeration cap {dim_cap}; "
            "raise dim_cap explicitly if the combinatorics are acceptable")
    subsets = list(itertools.combinations(range(n), k))
    ops = [quantum.projector_partial_sum(post, idx) for idx in subsets]
    return subsets, ops


def min_max_gamma(spec: FeasibleSetSpec, post: quantum.MeasurementBasis, k: int, *,
                  tol_gap: float = TOL_GAP, tol_feas: float = TOL_FEAS,
                  max_iter: int = MAX_ITER, mehrotra: bool = False,
                  dim_cap: int = SUBSET_DIM_CAP,
                  _subset_order: list[int] | None = None) -> GammaResult:
    """Minimize the largest cardinality-k expectation over the feasible set.

    Epigraph form: one scalar bound variable dominates every subset
    expectation through a nonnegative slack.  ``value`` is certified from
    below (a valid lower bound on every compatible outcome's partial sum).
    """
    n = spec.n
    subsets, ops = subset_effects(spec, post, k, dim_cap=dim_cap)
    if _subset_order is not None:
        subsets = [subsets[i] for i in _subset_order]
        ops = [ops[i] for i in _subset_order]
    red, ops_red = _reduce(spec, *ops)
    m = red.support.size
    if m == 1:
        core = np.ones((1, 1), dtype=np.complex128)
        val = max(float(op[0, 0].real) for op in ops_red)
        return GammaResult(val, red.lift_state(core), None, subsets)

    ns = len(subsets)
    nonneg = 1 + ns  # gamma then one slack per subset
    cons, con_lin, rhs = _diag_constraints(red, nonneg)
    con_psd = list(cons)
    extra_lin = []
    zero_blk = np.zeros((red.dim, red.dim))
    for si, op in enumerate(ops_red):
        con_psd.append((_embed_op(op, red.real_mode),))
        row = np.zeros(nonneg)
        row[0] = -1.0
        row[1 + si] = 1.0
        extra_lin.append(row)
    con_lin = np.vstack([con_lin, np.array(extra_lin)])
    rhs = np.concatenate([rhs, np.zeros(ns)])
    obj_lin = np.zeros(nonneg)
    obj_lin[0] = 1.0

    problem = SdpProblem(
        psd_dims=(red.dim,), nonneg_dim=nonneg,
        obj_psd=(zero_blk,), obj_lin=obj_lin,
        con_psd=tuple(con_psd), con_lin=con_lin, rhs=rhs, sense="min")
    sol = solve(problem, tol_gap=tol_gap, tol_feas=tol_feas, max_iter=max_iter,
                mehrotra=mehrotra)
    if sol.status == "infeasible":
        raise SdpError("epigraph program reported infeasible; certificate attached")
    core = _recover_state(sol.primal_psd[0], red.real_mode, m)
    return GammaResult(sol.certified_bound(), red.lift_state(core), sol, subsets)


def problem_to_json_dict(problem: SdpProblem) -> dict:
    """Documented dump of a problem (dense row-major blocks) for cross-checks."""
    return {
        "sense": problem.sense,
        "psd_dims": list(problem.psd_dims),
        "nonneg_dim": problem.nonneg_dim,
        "objective": {
            "psd_blocks": [blk.tolist() for blk in problem.obj_psd],
            "nonneg": problem.obj_lin.tolist(),
        },
        "constraints": [
            {
                "psd_blocks": [problem.con_psd[i][b].tolist() for b in range(len(problem.psd_dims))],
                "nonneg": problem.con_lin[i].tolist(),
                "rhs": float(problem.rhs[i]),
            }
            for i in range(problem.num_constraints)
        ],
    }
