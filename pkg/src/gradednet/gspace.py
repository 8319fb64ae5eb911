"""Graded vectors over the reals and the operations on graded spaces."""
from __future__ import annotations

from collections import defaultdict

import numpy as np

from .grading import (
    INTEGER, RATIONAL, Grade, GradingSignature, VariantMismatch, as_grade, grade_add,
    parse_grade, render_grade,
)


class SignatureMismatch(ValueError):
    pass


class DomainError(ValueError):
    """The scalar action is undefined for this (lambda, grade) combination."""


def _freeze(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64).reshape(-1)
    a.setflags(write=False)
    return a


class GradedVector:
    """A grade-indexed family of real coordinate blocks.

    ``blocks`` maps each grade of ``sig`` to a 1-D array of length ``sig.dim(grade)``.
    Instances are immutable; arithmetic returns new vectors.
    """

    __slots__ = ("sig", "blocks")

    def __init__(self, sig: GradingSignature, blocks):
        if not isinstance(blocks, dict):
            blocks = dict(zip(sig.grades, blocks))
        blocks = {as_grade(g): _freeze(b) for g, b in blocks.items()}
        if set(blocks) != set(sig.grades):
            raise SignatureMismatch(
                f"blocks for grades {sorted(map(str, blocks))} do not match {sig}")
        for g, d in sig:
            if blocks[g].shape != (d,):
                raise SignatureMismatch(f"block at grade {g} has length {blocks[g].size}, expected {d}")
        self.sig = sig
        self.blocks = {g: blocks[g] for g in sig.grades}

    @classmethod
    def zeros(cls, sig: GradingSignature) -> "GradedVector":
        return cls(sig, {g: np.zeros(d) for g, d in sig})

    @classmethod
    def from_flat(cls, sig: GradingSignature, flat) -> "GradedVector":
        flat = np.asarray(flat, dtype=np.float64).reshape(-1)
        if flat.size != sig.total_dim:
            raise SignatureMismatch(f"flat vector of length {flat.size} for {sig}")
        off = sig.offsets()
        return cls(sig, {g: flat[off[g]:off[g] + d] for g, d in sig})

    def flat(self) -> np.ndarray:
        return np.concatenate([self.blocks[g] for g in self.sig.grades])

    def __getitem__(self, grade) -> np.ndarray:
        return self.blocks[as_grade(grade)]

    def with_block(self, grade, values) -> "GradedVector":
        b = dict(self.blocks)
        b[as_grade(grade)] = values
        return GradedVector(self.sig, b)

    def _check(self, other: "GradedVector"):
        if not isinstance(other, GradedVector):
            raise TypeError(f"expected GradedVector, got {type(other).__name__}")
        if other.sig != self.sig:
            raise SignatureMismatch(f"{self.sig} vs {other.sig}")

    def __add__(self, other):
        self._check(other)
        return GradedVector(self.sig, {g: self.blocks[g] + other.blocks[g] for g in self.sig.grades})

    def __sub__(self, other):
        self._check(other)
        return GradedVector(self.sig, {g: self.blocks[g] - other.blocks[g] for g in self.sig.grades})

    def __neg__(self):
        return GradedVector(self.sig, {g: -b for g, b in self.blocks.items()})

    def __mul__(self, c):
        c = float(c)
        return GradedVector(self.sig, {g: c * b for g, b in self.blocks.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, GradedVector) or other.sig != self.sig:
            return False
        return all(np.array_equal(self.blocks[g], other.blocks[g]) for g in self.sig.grades)

    def __hash__(self):
        return hash((self.sig, self.flat().tobytes()))

    def __repr__(self):
        inner = ", ".join(f"{g}: {np.array2string(b, precision=4)}" for g, b in self.blocks.items())
        return f"GradedVector({inner})"

    def allclose(self, other, rtol=1e-12, atol=0.0) -> bool:
        self._check(other)
        return bool(np.allclose(self.flat(), other.flat(), rtol=rtol, atol=atol))

    def to_json(self) -> dict:
        return {
            "sig": self.sig.to_json(),
            "blocks": {render_grade(g): self.blocks[g].tolist() for g in self.sig.grades},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GradedVector":
        sig = GradingSignature.from_json(obj["sig"])
        blocks = {parse_grade(k, sig.variant): v for k, v in obj["blocks"].items()}
        return cls(sig, blocks)


def _action_factor(lam: float, g: Grade) -> float:
    if g.kind == INTEGER:
        return lam ** g.value
    if g.kind == RATIONAL:
        if lam < 0 and g.value.denominator != 1:
            raise DomainError(f"lambda={lam} < 0 is undefined for rational grade {g}")
        return lam ** float(g.value) if g.value.denominator != 1 else lam ** int(g.value)
    raise DomainError(f"no real scalar action on {g.kind} grades")


def scalar_action(lam: float, v: GradedVector) -> GradedVector:
    """Weighted action: the block at grade q is scaled by ``lam ** q``."""
    lam = float(lam)
    if lam == 0.0:
        raise DomainError("lambda must be non-zero")
    return GradedVector(v.sig, {g: _action_factor(lam, g) * b for g, b in v.blocks.items()})


def action_factors(lam: float, sig: GradingSignature) -> dict:
    if lam == 0.0:
        raise DomainError("lambda must be non-zero")
    return {g: _action_factor(float(lam), g) for g in sig.grades}


def inner_product(u: GradedVector, v: GradedVector) -> float:
    u._check(v)
    return float(sum(np.dot(u.blocks[g], v.blocks[g]) for g in u.sig.grades))


def direct_sum_signature(a: GradingSignature, b: GradingSignature) -> GradingSignature:
    if a.variant != b.variant:
        raise VariantMismatch(f"direct sum of {a.variant} and {b.variant} signatures")
    dims = defaultdict(int)
    for g, d in list(a) + list(b):
        dims[g] += d
    return GradingSignature(dims.items())


def direct_sum(u: GradedVector, v: GradedVector) -> GradedVector:
    """Per-grade concatenation; the block of ``u`` precedes that of ``v``."""
    sig = direct_sum_signature(u.sig, v.sig)
    blocks = {}
    for g in sig.grades:
        parts = [w.blocks[g] for w in (u, v) if g in w.sig]
        blocks[g] = np.concatenate(parts)
    return GradedVector(sig, blocks)


def tensor_component_dims(a: GradingSignature, b: GradingSignature) -> dict:
    """Dimensions of each graded component of the tensor product of two graded spaces."""
    if a.variant != b.variant:
        raise VariantMismatch(f"tensor product of {a.variant} and {b.variant} signatures")
    dims = defaultdict(int)
    for ga, da in a:
        for gb, db in b:
            dims[grade_add(ga, gb)] += da * db
    return dict(sorted(dims.items(), key=lambda kv: kv[0].value))
