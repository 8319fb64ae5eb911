"""Norms on graded vectors and the weighted graded loss."""
from __future__ import annotations

import numpy as np

from .grading import GradingSignature, as_grade, parse_grade, render_grade
from .gspace import GradedVector, SignatureMismatch


class LossWeights(dict):
    """Positive per-grade weights keyed by the grades of one signature."""

    def __init__(self, sig: GradingSignature, weights):
        if not isinstance(weights, dict):
            weights = dict(zip(sig.grades, weights))
        weights = {as_grade(g) if not isinstance(g, str) else parse_grade(g, sig.variant): float(w)
                   for g, w in weights.items()}
        if set(weights) != set(sig.grades):
            raise SignatureMismatch(
                f"weights for {sorted(map(str, weights))} do not cover {sig}")
        bad = [g for g, w in weights.items() if not w > 0]
        if bad:
            raise ValueError(f"loss weights must be positive; got {weights[bad[0]]} at grade {bad[0]}")
        super().__init__((g, weights[g]) for g in sig.grades)
        self.sig = sig

    @classmethod
    def uniform(cls, sig: GradingSignature, value: float = 1.0) -> "LossWeights":
        return cls(sig, {g: value for g in sig.grades})

    def scaled(self, c: float) -> "LossWeights":
        return LossWeights(self.sig, {g: c * w for g, w in self.items()})

    def to_json(self) -> dict:
        return {"loss_weights": {render_grade(g): w for g, w in self.items()}}

    @classmethod
    def from_json(cls, sig: GradingSignature, obj: dict) -> "LossWeights":
        return cls(sig, obj.get("loss_weights", obj))


def _check_weights(v: GradedVector, w: LossWeights):
    if w.sig != v.sig:
        raise SignatureMismatch(f"weights for {w.sig} used on vector over {v.sig}")


def block_norms(v: GradedVector) -> np.ndarray:
    return np.array([np.linalg.norm(v.blocks[g]) for g in v.sig.grades])


def euclidean_norm(v: GradedVector) -> float:
    return float(np.sqrt(sum(np.dot(b, b) for b in v.blocks.values())))


def homogeneous_exponents(r: int, rule: str = "scaling") -> list:
    """Exponents for the grades in ascending order.

    ``"scaling"`` uses ``2r / i`` for the i-th grade, so that the graded
    dilation ``(t v_1, t^2 v_2, ..., t^r v_r)`` scales the norm by ``|t|``
    for every ``r``.  ``"literal"`` uses ``2r, 2r-2, ..., 2``; the two agree
    for ``r <= 2`` and the literal rule loses the dilation law from ``r = 3``.
    """
    if rule == "scaling":
        return [2.0 * r / i for i in range(1, r + 1)]
    if rule == "literal":
        return [2.0 * (r - i + 1) for i in range(1, r + 1)]
    raise ValueError(f"unknown exponent rule {rule!r}")


def homogeneous_norm(v: GradedVector, rule: str = "scaling") -> float:
    """``(sum_i ||v_i||^{e_i})^{1/2r}`` with grades ranked ascending, ``r`` = number of grades.

    ``rule="grade"`` instead takes ``r`` to be the largest grade and gives
    grade ``q`` the exponent ``2r/q``; the matching dilation is then the
    weighted scalar action itself.
    """
    norms = block_norms(v)
    if rule == "grade":
        q = np.array([g.exponent for g in v.sig.grades])
        if np.any(q <= 0):
            raise ValueError("grade rule needs positive grades")
        r = q.max()
        return float(np.sum(norms ** (2.0 * r / q)) ** (1.0 / (2 * r)))
    r = len(v.sig)
    e = np.array(homogeneous_exponents(r, rule))
    return float(np.sum(norms ** e) ** (1.0 / (2 * r)))


def dilation(t: float, v: GradedVector) -> GradedVector:
    """The graded automorphism scaling the i-th grade (ascending rank) by ``t**i``."""
    return GradedVector(v.sig, {g: t ** (i + 1) * v.blocks[g] for i, g in enumerate(v.sig.grades)})


def weighted_norm(v: GradedVector, w: LossWeights) -> float:
    _check_weights(v, w)
    return float(np.sqrt(sum(w[g] * np.dot(b, b) for g, b in v.blocks.items())))


def graded_loss(pred: GradedVector, truth: GradedVector, w: LossWeights) -> float:
    """``sum_i w_i |pred_i - truth_i|^2`` summed over every coordinate of each grade."""
    pred._check(truth)
    _check_weights(pred, w)
    total = 0.0
    for g in pred.sig.grades:
        d = pred.blocks[g] - truth.blocks[g]
        total += w[g] * float(np.dot(d, d))
    return total


def graded_loss_gradient(pred: GradedVector, truth: GradedVector, w: LossWeights) -> GradedVector:
    pred._check(truth)
    _check_weights(pred, w)
    return GradedVector(pred.sig, {g: 2.0 * w[g] * (pred.blocks[g] - truth.blocks[g])
                                   for g in pred.sig.grades})


def norm_equivalence_bounds(w: LossWeights) -> tuple:
    """Constants (c, C) with ``c ||u|| <= ||u||_w <= C ||u||``."""
    vals = np.array(list(w.values()))
    return float(np.sqrt(vals.min())), float(np.sqrt(vals.max()))


def loss_lipschitz_bound(w: LossWeights, radius: float) -> float:
    """Lipschitz constant of the loss in the prediction on a ball of ``radius``.

    Both prediction and truth are assumed to lie within ``radius`` of the
    origin in Euclidean norm, so each residual is at most ``2 * radius`` and
    the gradient norm is at most ``2 * w_max * 2 * radius``.
    """
    return 4.0 * max(w.values()) * float(radius)
