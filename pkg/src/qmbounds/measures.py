"""Uncertainty quantifiers of the Renyi family and joint-uncertainty measures.

All entropies use base-2 logarithms.  Orders are positive reals; 1 selects
the Shannon limit and ``inf`` the min-entropy.  Entries below 1e-15 are
treated as exact zeros inside the sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .majorization import direct_product, direct_sum, prob_vector

ZERO_CUTOFF = 1e-15
_SHANNON_WINDOW = 1e-12

JOINT_KINDS = ("sum", "product", "on_direct_sum", "on_direct_product")


@dataclass(frozen=True)
class MeasureSpec:
    """A Renyi-family quantifier with a fixed order (log base 2)."""

    order: float
    family: str = "renyi"

    def __post_init__(self):
        if self.family != "renyi":
            raise ValueError(f"unsupported measure family {self.family!r}")
        if not self.order > 0:
            raise ValueError(f"order must be positive, got {self.order}")

    def __call__(self, p) -> float:
        return renyi(p, self.order)

    def raw(self, x) -> float:
        return _renyi_raw(np.asarray(x, dtype=np.float64), self.order)

    def spec_string(self) -> str:
        if math.isinf(self.order):
            return "renyi:inf"
        return f"renyi:{self.order:g}"


def parse_measure(text: str) -> MeasureSpec:
    """Parse the CLI syntax ``renyi:<order>`` ('inf' accepted)."""
    try:
        family, _, order_text = text.partition(":")
        if family.strip() != "renyi" or not order_text:
            raise ValueError
        order = math.inf if order_text.strip() == "inf" else float(order_text)
    except ValueError:
        raise ValueError(f"cannot parse measure spec {text!r}; expected 'renyi:<order>'") from None
    return MeasureSpec(order=order)


def _renyi_raw(x: np.ndarray, order: float) -> float:
    """Renyi sum formula on a nonnegative vector of arbitrary total mass."""
    v = x[x > ZERO_CUTOFF]
    if v.size == 0:
        return 0.0
    if math.isinf(order):
        return float(-np.log2(v.max()))
    if abs(order - 1.0) <= _SHANNON_WINDOW:
        return float(-(v * np.log2(v)).sum())
    top = v.max()
    # factor out the largest entry so huge orders cannot underflow
    s = float(((v / top) ** order).sum())
    return float((order / (1.0 - order)) * np.log2(top) + np.log2(s) / (1.0 - order))


def renyi(p, order: float) -> float:
    """Renyi entropy of a probability vector, in bits; clamped to [0, log2 n]."""
    if not order > 0:
        raise ValueError(f"order must be positive, got {order}")
    v = prob_vector(p)
    h = _renyi_raw(v, order)
    return float(min(max(h, 0.0), math.log2(v.size) if v.size > 1 else 0.0)) + 0.0


def shannon(p) -> float:
    return renyi(p, 1.0)


def min_entropy(p) -> float:
    return renyi(p, math.inf)


@dataclass(frozen=True)
class JointMeasureSpec:
    """A two-argument uncertainty measure assembled from Renyi components.

    ``sum`` and ``product`` combine f(p) and g(q) with two components;
    ``on_direct_sum`` / ``on_direct_product`` apply a single component to the
    concatenation (mass 2) or the product distribution of the pair.  On the
    concatenation the Renyi formula is evaluated raw; it is nonnegative there
    for orders <= 1 (the orders used in this artifact).
    """

    kind: str
    components: tuple[MeasureSpec, ...]

    def __post_init__(self):
        if self.kind not in JOINT_KINDS:
            raise ValueError(f"kind must be one of {JOINT_KINDS}, got {self.kind!r}")
        needed = 2 if self.kind in ("sum", "product") else 1
        if len(self.components) != needed:
            raise ValueError(f"kind {self.kind!r} needs {needed} component(s), "
                             f"got {len(self.components)}")


def evaluate_joint(spec: JointMeasureSpec, p, q) -> float:
    """Value of the joint measure on the pair (p, q)."""
    pv = prob_vector(p)
    qv = prob_vector(q)
    if spec.kind == "sum":
        f, g = spec.components
        return f(pv) + g(qv)
    if spec.kind == "product":
        f, g = spec.components
        return f(pv) * g(qv)
    (f,) = spec.components
    if spec.kind == "on_direct_sum":
        return f.raw(direct_sum(pv, qv))
    return f(direct_product(pv, qv))


def schur_concavity_probe(measure: MeasureSpec, trials: int, seed) -> dict:
    """Sample comparable pairs x majorized by y and count monotonicity failures.

    Pairs are produced by mixing a random vector with random pairwise
    averaging steps, which only moves it down the majorization order; a valid
    uncertainty quantifier must not decrease along the way.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    violations = 0
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 7))
        y = rng.dirichlet(np.ones(n))
        x = _random_mixing(y, rng)
        margin = measure(x) - measure(y)
        worst = min(worst, margin)
        if margin < -1e-10:
            violations += 1
    return {"trials": trials, "violations": violations, "worst_margin": worst}


def _random_mixing(y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Apply a few random T-transforms; the result is majorized by ``y``."""
    x = y.copy()
    for _ in range(int(rng.integers(1, 5))):
        i, j = rng.choice(x.size, size=2, replace=False)
        lam = rng.uniform(0.0, 0.5)
        xi, xj = x[i], x[j]
        x[i] = (1 - lam) * xi + lam * xj
        x[j] = lam * xi + (1 - lam) * xj
    return x
