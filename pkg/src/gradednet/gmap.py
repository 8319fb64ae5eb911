"""Graded linear maps, block kernels and structural checks on dense matrices.

Two operator types share one block interface (``pairs``, ``apply``,
``apply_transpose``, ``with_pairs``) so the network code can train either:

* :class:`GradedLinearMap` is homogeneous of a fixed degree ``d``: the block
  for domain grade ``q`` lands in codomain grade ``q + d``.
* :class:`BlockKernel` stores an arbitrary set of ``(out_grade, in_grade)``
  blocks.  It models the kernel of a graded convolution and the dense
  read-out into a trivially graded output space.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grading import (
    INTEGER, Grade, GradingSignature, VariantMismatch, as_grade, grade_add, grade_from_json,
    grade_to_json, parse_grade, render_grade,
)
from .gspace import GradedVector, SignatureMismatch


def _matrix(m, shape) -> np.ndarray:
    m = np.array(m, dtype=np.float64)
    if m.ndim == 1 and shape[0] == 1:
        m = m.reshape(1, -1)
    if m.shape != tuple(shape):
        raise SignatureMismatch(f"block of shape {m.shape}, expected {tuple(shape)}")
    m.setflags(write=False)
    return m


class _BlockOperator:
    domain: GradingSignature
    codomain: GradingSignature

    def pairs(self) -> dict:
        raise NotImplementedError

    def with_pairs(self, pairs: dict):
        raise NotImplementedError

    def apply(self, v: GradedVector, counter=None) -> GradedVector:
        if v.sig != self.domain:
            raise SignatureMismatch(f"map domain {self.domain} applied to vector over {v.sig}")
        out = {g: np.zeros(d) for g, d in self.codomain}
        for (r, q), m in self.pairs().items():
            out[r] = out[r] + m @ v.blocks[q]
            if counter is not None:
                counter.add(m.size)
        return GradedVector(self.codomain, out)

    __call__ = apply

    def apply_transpose(self, w: GradedVector, counter=None) -> GradedVector:
        if w.sig != self.codomain:
            raise SignatureMismatch(f"transpose of map into {self.codomain} applied to {w.sig}")
        out = {g: np.zeros(d) for g, d in self.domain}
        for (r, q), m in self.pairs().items():
            out[q] = out[q] + m.T @ w.blocks[r]
            if counter is not None:
                counter.add(m.size)
        return GradedVector(self.domain, out)

    def to_dense(self) -> np.ndarray:
        full = np.zeros((self.codomain.total_dim, self.domain.total_dim))
        ro, co = self.codomain.offsets(), self.domain.offsets()
        for (r, q), m in self.pairs().items():
            full[ro[r]:ro[r] + m.shape[0], co[q]:co[q] + m.shape[1]] = m
        return full

    @property
    def parameter_count(self) -> int:
        return sum(m.size for m in self.pairs().values())


class GradedLinearMap(_BlockOperator):
    """Linear map with ``f(V_q)`` inside ``W_{q + degree}``.

    Domain grades whose image grade is absent from the codomain carry no block
    and map to zero.  Blocks not supplied for a valid grade are zero matrices.
    """

    def __init__(self, domain: GradingSignature, codomain: GradingSignature, blocks=None,
                 degree=None):
        if domain.variant != codomain.variant:
            raise VariantMismatch(f"map from {domain.variant} to {codomain.variant} grading")
        self.domain = domain
        self.codomain = codomain
        self.degree = Grade.zero(domain.variant) if degree is None else as_grade(degree)
        if self.degree.kind != domain.variant:
            raise VariantMismatch(f"degree {self.degree} is not a {domain.variant} grade")
        blocks = {as_grade(q): m for q, m in (blocks or {}).items()}
        self.blocks = {}
        for q, dq in domain:
            r = grade_add(q, self.degree)
            if r in codomain:
                shape = (codomain.dim(r), dq)
                self.blocks[q] = _matrix(blocks.pop(q), shape) if q in blocks else _matrix(np.zeros(shape), shape)
        if blocks:
            stray = ", ".join(map(str, blocks))
            raise SignatureMismatch(f"blocks at grades {stray} have no image grade in {codomain}")

    def pairs(self) -> dict:
        return {(grade_add(q, self.degree), q): m for q, m in self.blocks.items()}

    def with_pairs(self, pairs: dict) -> "GradedLinearMap":
        return GradedLinearMap(self.domain, self.codomain, {q: m for (_, q), m in pairs.items()},
                               self.degree)

    @classmethod
    def identity(cls, sig: GradingSignature) -> "GradedLinearMap":
        return cls(sig, sig, {g: np.eye(d) for g, d in sig})

    @classmethod
    def diagonal(cls, domain, codomain, values: dict) -> "GradedLinearMap":
        """Scalar-per-grade map; ``values[q]`` fills an identity-shaped block."""
        return cls(domain, codomain,
                   {q: float(c) * np.eye(codomain.dim(q), domain.dim(q)) for q, c in values.items()})

    @classmethod
    def random(cls, domain, codomain, rng, scale=1.0, degree=None) -> "GradedLinearMap":
        f = cls(domain, codomain, degree=degree)
        return f.with_pairs({k: scale * rng.standard_normal(m.shape) for k, m in f.pairs().items()})

    @classmethod
    def from_dense(cls, matrix, domain, codomain, degree=None, tol=0.0) -> "GradedLinearMap":
        report = check_graded(matrix, domain, codomain, degree, tol=tol)
        if not report.ok:
            raise ValueError(f"matrix is not graded: {report}")
        matrix = np.asarray(matrix, dtype=np.float64)
        f = cls(domain, codomain, degree=degree)
        ro, co = codomain.offsets(), domain.offsets()
        return f.with_pairs({
            (r, q): matrix[ro[r]:ro[r] + m.shape[0], co[q]:co[q] + m.shape[1]]
            for (r, q), m in f.pairs().items()
        })

    def _same_space(self, other):
        if (not isinstance(other, GradedLinearMap) or other.domain != self.domain
                or other.codomain != self.codomain or other.degree != self.degree):
            raise SignatureMismatch("maps live in different Hom spaces")

    def __add__(self, other):
        self._same_space(other)
        return GradedLinearMap(self.domain, self.codomain,
                               {q: m + other.blocks[q] for q, m in self.blocks.items()}, self.degree)

    def __mul__(self, c):
        return GradedLinearMap(self.domain, self.codomain,
                               {q: float(c) * m for q, m in self.blocks.items()}, self.degree)

    __rmul__ = __mul__

    def __repr__(self):
        return f"GradedLinearMap({self.domain} -> {self.codomain}, degree={self.degree})"

    def to_json(self) -> dict:
        return {
            "type": "graded",
            "domain": self.domain.to_json(),
            "codomain": self.codomain.to_json(),
            "degree": grade_to_json(self.degree),
            "blocks": {render_grade(q): m.tolist() for q, m in self.blocks.items()},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GradedLinearMap":
        dom = GradingSignature.from_json(obj["domain"])
        cod = GradingSignature.from_json(obj["codomain"])
        degree = grade_from_json(obj["degree"], dom.variant) if "degree" in obj else None
        blocks = {parse_grade(k, dom.variant): v for k, v in obj["blocks"].items()}
        return cls(dom, cod, blocks, degree)


def compose(g: GradedLinearMap, f: GradedLinearMap) -> GradedLinearMap:
    """``g after f``; the degree of the composite is the sum of the degrees."""
    if f.codomain != g.domain:
        raise SignatureMismatch(f"cannot compose: {f.codomain} vs {g.domain}")
    degree = grade_add(f.degree, g.degree)
    out = GradedLinearMap(f.domain, g.codomain, degree=degree)
    blocks = {}
    for q, fm in f.blocks.items():
        r = grade_add(q, f.degree)
        if r in g.blocks and q in out.blocks:
            blocks[q] = g.blocks[r] @ fm
    return GradedLinearMap(f.domain, g.codomain, blocks, degree)


class BlockKernel(_BlockOperator):
    """Operator given by blocks ``kappa(m, n)`` from input grade n to output grade m.

    Grades in the two signatures may be of different variants, which is how
    a graded space is read out into a trivially graded scalar space.
    """

    def __init__(self, domain: GradingSignature, codomain: GradingSignature, blocks=None):
        self.domain = domain
        self.codomain = codomain
        self.blocks = {}
        for (m, n), mat in (blocks or {}).items():
            m, n = as_grade(m), as_grade(n)
            if m not in codomain or n not in domain:
                raise SignatureMismatch(f"kernel block ({m},{n}) outside {codomain} x {domain}")
            self.blocks[(m, n)] = _matrix(mat, (codomain.dim(m), domain.dim(n)))

    @classmethod
    def full(cls, domain, codomain, rng=None, scale=1.0) -> "BlockKernel":
        """Every (m, n) pair present; random normal entries, or zeros without ``rng``."""
        make = (lambda s: np.zeros(s)) if rng is None else (lambda s: scale * rng.standard_normal(s))
        return cls(domain, codomain,
                   {(m, n): make((dm, dn)) for m, dm in codomain for n, dn in domain})

    @classmethod
    def from_dense(cls, matrix, domain, codomain) -> "BlockKernel":
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape != (codomain.total_dim, domain.total_dim):
            raise SignatureMismatch(f"matrix shape {matrix.shape} for {codomain} x {domain}")
        ro, co = codomain.offsets(), domain.offsets()
        return cls(domain, codomain, {
            (m, n): matrix[ro[m]:ro[m] + dm, co[n]:co[n] + dn]
            for m, dm in codomain for n, dn in domain
        })

    def pairs(self) -> dict:
        return dict(self.blocks)

    def with_pairs(self, pairs: dict) -> "BlockKernel":
        return BlockKernel(self.domain, self.codomain, pairs)

    def offdiagonal(self, tol=0.0) -> list:
        """Pairs m != n whose block has Frobenius norm above ``tol``."""
        return [(m, n) for (m, n), mat in self.blocks.items()
                if m != n and np.linalg.norm(mat) > tol]

    def __repr__(self):
        return f"BlockKernel({self.domain} -> {self.codomain}, {len(self.blocks)} blocks)"

    def to_json(self) -> dict:
        return {
            "type": "kernel",
            "domain": self.domain.to_json(),
            "codomain": self.codomain.to_json(),
            "blocks": [[render_grade(m), render_grade(n), mat.tolist()]
                       for (m, n), mat in self.blocks.items()],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BlockKernel":
        dom = GradingSignature.from_json(obj["domain"])
        cod = GradingSignature.from_json(obj["codomain"])
        return cls(dom, cod, {(parse_grade(m, cod.variant), parse_grade(n, dom.variant)): mat
                              for m, n, mat in obj["blocks"]})


def map_from_json(obj: dict):
    return BlockKernel.from_json(obj) if obj.get("type") == "kernel" else GradedLinearMap.from_json(obj)


@dataclass(frozen=True)
class GradedCheck:
    ok: bool
    grade_pair: tuple | None = None   # (codomain grade, domain grade) of worst offender
    max_abs_offblock: float = 0.0

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "ok"
        r, q = self.grade_pair
        return f"violation at (out {r}, in {q}), max |entry| = {self.max_abs_offblock:.3g}"


def check_graded(full_matrix, domain: GradingSignature, codomain: GradingSignature, degree=None,
                 tol: float = 0.0) -> GradedCheck:
    """Verify a dense matrix only couples grade q to grade q + degree."""
    a = np.asarray(full_matrix, dtype=np.float64)
    if a.shape != (codomain.total_dim, domain.total_dim):
        raise SignatureMismatch(f"matrix shape {a.shape}, expected "
                                f"({codomain.total_dim}, {domain.total_dim})")
    degree = Grade.zero(domain.variant) if degree is None else as_grade(degree)
    ro, co = codomain.offsets(), domain.offsets()
    worst, worst_pair = 0.0, None
    for q, dq in domain:
        target = grade_add(q, degree) if q.kind == degree.kind else None
        for r, dr in codomain:
            if r == target:
                continue
            block = a[ro[r]:ro[r] + dr, co[q]:co[q] + dq]
            m = float(np.max(np.abs(block)))
            if m > worst:
                worst, worst_pair = m, (r, q)
    if worst > tol:
        return GradedCheck(False, worst_pair, worst)
    return GradedCheck(True, None, worst)


# -- truncated polynomial module k[x] / (x^{N+1}) ----------------------------

def polynomial_signature(max_degree: int) -> GradingSignature:
    """Grades 0..max_degree, one monomial x^n per grade."""
    return GradingSignature((Grade.integer(n), 1) for n in range(max_degree + 1))


def shift_map(max_degree: int, by: int = 1) -> GradedLinearMap:
    """Multiplication by x^by: basis e_n goes to e_{n+by}, truncated."""
    sig = polynomial_signature(max_degree)
    return GradedLinearMap(sig, sig, {n: [[1.0]] for n in range(max_degree + 1 - by)},
                           degree=Grade.integer(by))


def diagonal_operator(max_degree: int, coeffs) -> GradedLinearMap:
    """Degree-0 map x^n -> coeffs[n] x^n (e.g. the Euler operator with coeffs = range)."""
    sig = polynomial_signature(max_degree)
    return GradedLinearMap(sig, sig, {n: [[float(c)]] for n, c in enumerate(coeffs)})


@dataclass(frozen=True)
class ModuleHomReport:
    ok: bool
    counterexample: tuple | None = None   # (a, m): f(x^a x^m) != x^a f(x^m)

    def __bool__(self):
        return self.ok


def _coeffs(v: GradedVector, max_degree: int) -> np.ndarray:
    return np.array([v.blocks[Grade.integer(n)][0] for n in range(max_degree + 1)])


def module_hom_defects(f: GradedLinearMap, max_degree: int, tol: float = 0.0) -> list:
    """All (a, m) with a + m and a + deg f + m within range where f fails to commute with x^a."""
    sig = polynomial_signature(max_degree)
    if f.domain != sig or f.codomain != sig:
        raise SignatureMismatch(f"module check needs a map on {sig}")
    if f.degree.kind != INTEGER:
        raise VariantMismatch("module check needs an integer-degree map")
    d = f.degree.value
    images = [_coeffs(f.apply(GradedVector.from_flat(sig, np.eye(max_degree + 1)[n])), max_degree)
              for n in range(max_degree + 1)]
    bad = []
    for a in range(max_degree + 1):
        for m in range(max_degree + 1 - a):
            if a + d + m > max_degree:
                continue
            lhs = images[a + m]
            rhs = np.zeros(max_degree + 1)
            rhs[a:] = images[m][:max_degree + 1 - a]   # multiply f(x^m) by x^a
            if np.max(np.abs(lhs - rhs)) > tol:
                bad.append((a, m))
    return bad


def check_module_hom(f: GradedLinearMap, max_degree: int) -> ModuleHomReport:
    """Check ``f(x^a . x^m) = x^a . f(x^m)`` on the truncated module, scanning (a, m) lexicographically."""
    bad = module_hom_defects(f, max_degree)
    return ModuleHomReport(not bad, bad[0] if bad else None)
