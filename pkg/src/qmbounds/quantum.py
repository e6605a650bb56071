"""Complex Hermitian linear algebra for measurement statistics at small dimension.

Measurement bases are stored as complex matrices whose *rows* are the basis
vectors.  Density matrices are plain complex arrays validated by
:func:`density_matrix`.  The feasible-state sampler draws states whose
diagonal in a given basis matches a prescribed outcome distribution; it is
the verification oracle used throughout the test suite.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .majorization import prob_vector

logger = logging.getLogger(__name__)

# wide enough to accept bases printed to 4 decimal places, which carry Gram
# deviations up to a few 1e-4 before the automatic re-orthonormalization
TOL_ORTHO = 5e-4
MAX_DIM = 16


class QuantumError(ValueError):
    """Base error for this module."""


class DimensionMismatchError(QuantumError):
    """Operands live in different dimensions."""


class RankDeficientError(QuantumError):
    """Input vectors do not span the space."""


def gram_deviation(vectors) -> float:
    """Max-norm distance of the Gram matrix from the identity."""
    v = np.asarray(vectors, dtype=np.complex128)
    return float(np.abs(v @ v.conj().T - np.eye(v.shape[0])).max())


def orthonormalize(vectors, *, rank_tol: float = 1e-8) -> np.ndarray:
    """Nearest orthonormal frame to ``vectors`` (rows), via the polar factor.

    Raises :class:`RankDeficientError` when the rows are linearly dependent
    at ``rank_tol``.
    """
    v = np.asarray(vectors, dtype=np.complex128)
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise QuantumError(f"expected a square stack of vectors, got shape {v.shape}")
    u, s, wt = np.linalg.svd(v)
    if s.min() < rank_tol * max(1.0, s.max()):
        raise RankDeficientError(f"input rows are rank deficient (smallest singular value {s.min():.2e})")
    return u @ wt


@dataclass(frozen=True)
class MeasurementBasis:
    """Ordered orthonormal basis; ``vectors[j]`` is the j-th measurement vector."""

    vectors: np.ndarray
    label: str = ""

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    def projector(self, j: int) -> np.ndarray:
        v = self.vectors[j]
        return np.outer(v, v.conj())


def basis(vectors, label: str = "", *, tol_ortho: float = TOL_ORTHO,
          max_dim: int = MAX_DIM) -> MeasurementBasis:
    """Build a :class:`MeasurementBasis`, re-orthonormalizing when needed.

    Inputs within ``tol_ortho`` of orthonormal are accepted; any nonzero
    deviation is repaired through the polar factor and logged.  Deviations
    beyond ``tol_ortho`` raise.
    """
    v = np.asarray(vectors, dtype=np.complex128).copy()
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise QuantumError(f"a basis must be a square set of vectors, got shape {v.shape}")
    if v.shape[0] > max_dim:
        raise QuantumError(f"dimension {v.shape[0]} exceeds the cap {max_dim}")
    dev = gram_deviation(v)
    if dev > tol_ortho:
        raise QuantumError(f"vectors are not orthonormal: Gram deviation {dev:.2e} > {tol_ortho:.0e}")
    if dev > 1e-13:
        v = orthonormalize(v)
        logger.warning("basis %r re-orthonormalized (Gram deviation %.2e -> %.2e)",
                       label, dev, gram_deviation(v))
    v.setflags(write=False)
    return MeasurementBasis(vectors=v, label=label)


def hermitian_part(mat) -> np.ndarray:
    m = np.asarray(mat, dtype=np.complex128)
    return 0.5 * (m + m.conj().T)


def density_matrix(mat, *, tol_herm: float = 1e-12, tol_trace: float = 1e-9,
                   tol_psd: float = 1e-9) -> np.ndarray:
    """Validate ``mat`` as a density matrix and return a complex copy."""
    m = np.asarray(mat, dtype=np.complex128).copy()
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise QuantumError(f"expected a square matrix, got shape {m.shape}")
    if np.abs(m - m.conj().T).max() > tol_herm:
        raise QuantumError("matrix is not Hermitian within tolerance")
    tr = np.trace(m).real
    if abs(tr - 1.0) > tol_trace:
        raise QuantumError(f"trace is {tr!r}, not 1 within {tol_trace:.0e}")
    evmin = float(np.linalg.eigvalsh(hermitian_part(m)).min())
    if evmin < -tol_psd:
        raise QuantumError(f"minimum eigenvalue {evmin:.3e} below -{tol_psd:.0e}")
    return m


def born_probabilities(rho, meas: MeasurementBasis) -> np.ndarray:
    """Outcome distribution of measuring ``rho`` in ``meas``."""
    r = np.asarray(rho, dtype=np.complex128)
    if r.shape != (meas.n, meas.n):
        raise DimensionMismatchError(f"state shape {r.shape} vs basis dimension {meas.n}")
    v = meas.vectors
    p = np.einsum("ja,ab,jb->j", v.conj(), r, v, optimize=True).real
    np.clip(p, 0.0, 1.0, out=p)
    return p


def projector_partial_sum(meas: MeasurementBasis, subset) -> np.ndarray:
    """Sum of the rank-1 projectors of ``meas`` over ``subset`` (0-based)."""
    idx = sorted(set(int(i) for i in subset))
    if not idx:
        raise QuantumError("subset must be nonempty")
    if idx[0] < 0 or idx[-1] >= meas.n:
        raise QuantumError(f"subset {idx} out of range for dimension {meas.n}")
    v = meas.vectors[idx]
    return v.T @ v.conj()


def overlap_matrix(m1: MeasurementBasis, m2: MeasurementBasis) -> np.ndarray:
    """Doubly stochastic matrix of squared overlaps |<u_j|v_k>|^2."""
    if m1.n != m2.n:
        raise DimensionMismatchError(f"dimensions differ: {m1.n} vs {m2.n}")
    return np.abs(m1.vectors.conj() @ m2.vectors.T) ** 2


def max_overlap(m1: MeasurementBasis, m2: MeasurementBasis) -> float:
    """Maximal overlap max |<u_j|v_k>| between two bases."""
    return float(np.sqrt(overlap_matrix(m1, m2).max()))


@dataclass(frozen=True)
class FeasibleSetSpec:
    """All states whose diagonal in ``basis`` equals ``target``."""

    basis: MeasurementBasis
    target: np.ndarray = field(repr=False)

    def __post_init__(self):
        t = prob_vector(self.target)
        if t.size != self.basis.n:
            raise DimensionMismatchError(f"target length {t.size} vs basis dimension {self.basis.n}")
        object.__setattr__(self, "target", t)

    @property
    def n(self) -> int:
        return self.basis.n

    def support(self) -> np.ndarray:
        """Indices with strictly positive target mass."""
        return np.nonzero(self.target > 0.0)[0]


def effect_vectors(meas: MeasurementBasis, post: MeasurementBasis,
                   support=None) -> np.ndarray:
    """Coordinates of the post-measurement vectors in the ``meas`` frame.

    Row l holds (<u_j|v_l>)_j restricted to ``support``.  A state with matrix
    ``rho`` in the ``meas`` frame assigns outcome l the probability
    ``w_l^dagger rho w_l``.  With full support the effects are an orthonormal
    frame again; on a restricted support they form general rank-1 effects
    that still sum to the identity of the subspace.
    """
    if meas.n != post.n:
        raise DimensionMismatchError(f"dimensions differ: {meas.n} vs {post.n}")
    w = meas.vectors.conj() @ post.vectors.T  # w[j, l] = <u_j|v_l>
    if support is not None:
        w = w[np.asarray(support, dtype=int)]
    return w.T.copy()


def sample_feasible_state(spec: FeasibleSetSpec, seed, *,
                          require_full_support: bool = False) -> np.ndarray:
    """Random state whose diagonal in ``spec.basis`` equals ``spec.target``.

    A random full-rank positive matrix is conjugated by the diagonal map that
    rescales its diagonal onto the target; zero target entries force the
    corresponding rows and columns to vanish, so they are handled by sampling
    on the support and embedding back.  Deterministic for a fixed seed; no
    uniformity over the feasible set is implied.
    """
    rng = np.random.default_rng(seed)
    n = spec.n
    supp = spec.support()
    if supp.size < n and require_full_support:
        raise QuantumError("target has zero entries; full-dimension sampling is impossible")
    m = supp.size
    g = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    sigma = g @ g.conj().T
    d = np.sqrt(spec.target[supp] / sigma.diagonal().real)
    core = sigma * np.outer(d, d)
    rho_m = np.zeros((n, n), dtype=np.complex128)
    rho_m[np.ix_(supp, supp)] = core
    v = spec.basis.vectors
    return v.T @ rho_m @ v.conj()


def random_density(seed, n: int, rank: int) -> np.ndarray:
    """Normalized Gram matrix of ``rank`` random complex Gaussian vectors."""
    if not 1 <= rank <= n:
        raise QuantumError(f"rank must lie in [1, {n}], got {rank}")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_basis(seed, n: int, label: str = "") -> MeasurementBasis:
    """Haar-like random orthonormal basis from a complex Gaussian QR."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(g)
    q = q * (np.diagonal(r) / np.abs(np.diagonal(r)))
    return basis(q.T, label=label)
