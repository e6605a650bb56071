"""Majorization order on probability vectors and its complete-lattice operations.

Probability vectors are plain float64 numpy arrays validated by
:func:`prob_vector`.  All comparisons run on cumulative sums of the sorted
entries (Lorenz curves); ``x`` majorized by ``y`` means every partial sum of
the ``k`` largest entries of ``x`` stays below the corresponding sum of ``y``.
The simplex under this order is a complete lattice: :func:`meet` and
:func:`join` compute the unique infimum/supremum of two vectors, and
:func:`flatten` computes the least concave majorant of a cumulative sequence
(the averaging construction that turns any partial-sum bound into the optimal
nonincreasing one).

All functions are pure; returned arrays are freshly allocated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TOL_NEG = 1e-12
TOL_SUM = 1e-9
TOL_CMP = 1e-10

_MAX_FLATTEN_STEPS_FACTOR = 4


class DimensionMismatchError(ValueError):
    """Operands have incompatible lengths."""


class InvalidVectorError(ValueError):
    """Input violates the probability-vector contract."""


def prob_vector(entries, *, tol_neg: float = TOL_NEG, tol_sum: float = TOL_SUM) -> np.ndarray:
    """Validate ``entries`` as a probability vector and return a float64 copy.

    Entries in ``[-tol_neg, 0)`` are clamped to zero; anything more negative,
    a non-finite value, or a total farther than ``tol_sum`` from 1 raises
    :class:`InvalidVectorError`.
    """
    v = np.asarray(entries, dtype=np.float64).copy()
    if v.ndim != 1 or v.size < 1:
        raise InvalidVectorError(f"expected a nonempty 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidVectorError("vector has non-finite entries")
    if v.min() < -tol_neg:
        raise InvalidVectorError(f"entry {v.min():.3e} below -{tol_neg:.0e}")
    np.clip(v, 0.0, None, out=v)
    total = v.sum()
    if abs(total - 1.0) > tol_sum:
        raise InvalidVectorError(f"entries sum to {total!r}, not 1 within {tol_sum:.0e}")
    return v


def sort_descending(v) -> np.ndarray:
    """Entries of ``v`` rearranged in nonincreasing order."""
    return np.sort(np.asarray(v, dtype=np.float64))[::-1]


@dataclass(frozen=True)
class LorenzCurve:
    """Cumulative sums of the k largest entries, k = 0..n, starting at 0."""

    values: tuple[float, ...]

    @property
    def points(self) -> list[tuple[int, float]]:
        return list(enumerate(self.values))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    def is_concave(self, tol: float = TOL_CMP) -> bool:
        return bool(np.all(np.diff(self.as_array(), 2) <= tol))


def cumulative(v) -> LorenzCurve:
    """Lorenz curve of ``v``: point k holds the sum of its k largest entries."""
    c = np.concatenate(([0.0], np.cumsum(sort_descending(v))))
    return LorenzCurve(tuple(c.tolist()))


def _check_same_dim(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape != y.shape:
        raise DimensionMismatchError(f"dimension mismatch: {x.shape} vs {y.shape}")


def majorized_by(x, y, *, tol: float = TOL_CMP) -> bool:
    """True iff ``x`` is majorized by ``y`` (ties count as comparable)."""
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    _check_same_dim(xs, ys)
    cx = np.cumsum(sort_descending(xs))
    cy = np.cumsum(sort_descending(ys))
    return bool(np.all(cx <= cy + tol))


def weakly_majorized_by(x, y, *, tol: float = TOL_CMP) -> bool:
    """All n partial-sum inequalities, including k = n (no mass constraint)."""
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    _check_same_dim(xs, ys)
    if xs.min() < -TOL_NEG or ys.min() < -TOL_NEG:
        raise InvalidVectorError("weak majorization requires nonnegative entries")
    cx = np.cumsum(sort_descending(xs))
    cy = np.cumsum(sort_descending(ys))
    return bool(np.all(cx <= cy + tol))


def flatten(s, *, tol_neg: float = TOL_NEG, tol_sum: float = TOL_SUM) -> np.ndarray:
    """Least concave majorant of the cumulative sequence of ``s``.

    ``s`` need not be nonincreasing.  Repeatedly locate the smallest index j
    whose entry exceeds its predecessor, find the greatest i <= j-1 whose
    preceding entry dominates the block average a of entries i..j (the entry
    before position 1 acts as a +inf sentinel, so i = 1 is always admissible),
    and replace entries i..j by a.  The fixed point is nonincreasing, its
    cumulative curve is concave and dominates the cumulative sums of ``s``,
    and it is minimal: any nonincreasing z whose partial sums dominate those
    of ``s`` majorizes the result.

    The index searches compare exactly (no tolerance): accepting a block
    whose average only dominates the preceding entry within a tolerance
    plants a new ascent right behind the merge, and the iteration can then
    cycle; with exact comparisons every replacement merges at least two
    blocks, so the loop ends after at most n - 1 of them.
    """
    t = np.asarray(s, dtype=np.float64).copy()
    if t.ndim != 1 or t.size < 1:
        raise InvalidVectorError(f"expected a nonempty 1-d vector, got shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise InvalidVectorError("vector has non-finite entries")
    if t.min() < -tol_neg:
        raise InvalidVectorError(f"entry {t.min():.3e} below -{tol_neg:.0e}")
    np.clip(t, 0.0, None, out=t)
    if abs(t.sum() - 1.0) > tol_sum:
        raise InvalidVectorError(f"entries sum to {t.sum()!r}, not 1 within {tol_sum:.0e}")

    n = t.size
    max_steps = _MAX_FLATTEN_STEPS_FACTOR * n * n + 8
    for _ in range(max_steps):
        ascents = np.nonzero(t[1:] > t[:-1])[0]
        if ascents.size == 0:
            return t
        j = int(ascents[0]) + 1  # 0-based position of the offending entry
        for i in range(j - 1, -1, -1):
            a = t[i:j + 1].mean()
            if i == 0 or t[i - 1] >= a:
                t[i:j + 1] = a
                break
    raise RuntimeError("flatten failed to reach a fixed point")  # pragma: no cover


def meet(x, y) -> np.ndarray:
    """Greatest lower bound of ``x`` and ``y`` under majorization.

    Successive differences of the pointwise minimum of the two Lorenz curves;
    the minimum of concave curves is concave, so no correction is needed.
    """
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    _check_same_dim(xs, ys)
    cx = np.cumsum(sort_descending(xs))
    cy = np.cumsum(sort_descending(ys))
    return np.diff(np.concatenate(([0.0], np.minimum(cx, cy))))


def join(x, y) -> np.ndarray:
    """Least upper bound of ``x`` and ``y``: flattened pointwise-max curve."""
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    _check_same_dim(xs, ys)
    cx = np.cumsum(sort_descending(xs))
    cy = np.cumsum(sort_descending(ys))
    diffs = np.diff(np.concatenate(([0.0], np.maximum(cx, cy))))
    return flatten(diffs, tol_sum=max(TOL_SUM, 2e-9 * xs.size))


def direct_sum(x, y) -> np.ndarray:
    """Concatenation of ``x`` and ``y`` (total mass 2, not renormalized)."""
    return np.concatenate((np.asarray(x, dtype=np.float64),
                           np.asarray(y, dtype=np.float64)))


def direct_product(x, y) -> np.ndarray:
    """All pairwise products, sorted in nonincreasing order (mass 1)."""
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    return np.sort(np.outer(xs, ys).ravel())[::-1]


@dataclass(frozen=True)
class MarginalPair:
    """A (pre-side, post-side) pair of probability vectors."""

    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "left", prob_vector(self.left))
        object.__setattr__(self, "right", prob_vector(self.right))


def right_marginal_leq(a: MarginalPair, b: MarginalPair, *, tol: float = TOL_CMP) -> bool:
    """Left components equal entrywise and a.right majorized by b.right."""
    _check_same_dim(a.left, b.left)
    if not np.all(np.abs(a.left - b.left) <= tol):
        return False
    return majorized_by(a.right, b.right, tol=tol)


def left_marginal_leq(a: MarginalPair, b: MarginalPair, *, tol: float = TOL_CMP) -> bool:
    """Right components equal entrywise and a.left majorized by b.left."""
    _check_same_dim(a.right, b.right)
    if not np.all(np.abs(a.right - b.right) <= tol):
        return False
    return majorized_by(a.left, b.left, tol=tol)
