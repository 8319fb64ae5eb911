"""Numerical checks of graded equivariance for maps, layers, pooling and parity swaps.

The violation of ``f`` at a scalar ``lam`` and probe ``v`` is

    ||f(lam * v) - lam * f(v)|| / (1 + ||lam * f(v)||)

with ``*`` the weighted action on each side.  A single bad ``lam`` falsifies
equivariance; passing the probe set is confirmation, not proof, which is why
the structural checks (diagonal kernels, zero bias, singleton regions) come
alongside.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grading import INTEGER, PARITY, Grade, GradingSignature, as_grade
from .gmap import BlockKernel
from .gspace import DomainError, GradedVector, SignatureMismatch, scalar_action
from .network import GradedLayer, GradedNetwork
from .norms import euclidean_norm

EQUIVARIANT = "equivariant"
VIOLATED = "violated"
DEFAULT_TOL = 1e-9


def default_lambdas(*sigs: GradingSignature) -> list:
    """``0.5, 2, 3`` plus ``-1`` when every signature has integer grades."""
    lams = [0.5, 2.0, 3.0]
    if all(s.variant == INTEGER for s in sigs):
        lams.append(-1.0)
    return lams


def probe_vectors(sig: GradingSignature, n_random: int = 8, seed: int = 0) -> list:
    """Zero, every standard basis vector, then seeded Gaussian vectors."""
    rng = np.random.default_rng(seed)
    eye = np.eye(sig.total_dim)
    probes = [GradedVector.zeros(sig)]
    probes += [GradedVector.from_flat(sig, eye[i]) for i in range(sig.total_dim)]
    probes += [GradedVector.from_flat(sig, rng.standard_normal(sig.total_dim)) for _ in range(n_random)]
    return probes


@dataclass
class EquivarianceReport:
    verdict: str
    max_violation: float
    witness: tuple | None            # (lam, probe vector) of the largest violation
    per_lambda: dict = field(default_factory=dict)   # lam -> largest violation at that lam
    tol: float = DEFAULT_TOL

    @property
    def ok(self) -> bool:
        return self.verdict == EQUIVARIANT

    def __bool__(self):
        return self.ok

    def to_json(self) -> dict:
        wit = None
        if self.witness is not None:
            lam, v = self.witness
            wit = {"lambda": lam, "v": v.to_json()}
        return {"verdict": self.verdict, "max_violation": self.max_violation, "witness": wit,
                "per_lambda": {repr(float(k)): v for k, v in self.per_lambda.items()},
                "tol": self.tol}

    def summary(self) -> str:
        if self.witness is None:
            return f"{self.verdict}: no probes evaluated"
        lam = self.witness[0]
        parts = ", ".join(f"lambda={k:g}: {v:.3g}" for k, v in self.per_lambda.items())
        return (f"{self.verdict}: max violation {self.max_violation:.3g} at lambda={lam:g} "
                f"(tol {self.tol:g}); {parts}")


def violation(f, lam: float, v: GradedVector) -> float:
    ref = scalar_action(lam, f(v))
    got = f(scalar_action(lam, v))
    if got.sig != ref.sig:
        raise SignatureMismatch(f"map output {got.sig} vs {ref.sig}")
    return euclidean_norm(got - ref) / (1.0 + euclidean_norm(ref))


def check_map_equivariance(f, in_sig: GradingSignature, out_sig: GradingSignature | None = None,
                           lambdas=None, probes=None, n_random: int = 8, tol: float = DEFAULT_TOL,
                           seed: int = 0) -> EquivarianceReport:
    """Sample ``f(lam * v)`` against ``lam * f(v)`` over lambdas and probe vectors."""
    out_sig = in_sig if out_sig is None else out_sig
    lambdas = default_lambdas(in_sig, out_sig) if lambdas is None else [float(l) for l in lambdas]
    if probes is None:
        probes = probe_vectors(in_sig, n_random, seed)
    worst, witness, per = -1.0, None, {}
    for lam in lambdas:
        if lam == 0.0:
            raise DomainError("lambda = 0 is not in the multiplicative group")
        per[lam] = 0.0
        for v in probes:
            try:
                val = violation(f, lam, v)
            except DomainError as exc:
                raise DomainError(f"lambda={lam} on {in_sig} -> {out_sig}: {exc}") from exc
            if not np.isfinite(val):
                val = float("inf")
            per[lam] = max(per[lam], val)
            if val > worst:
                worst, witness = val, (lam, v)
    worst = max(worst, 0.0)
    verdict = EQUIVARIANT if worst <= tol else VIOLATED
    return EquivarianceReport(verdict, worst, witness, per, tol)


def check_network_equivariance(net: GradedNetwork, **kw) -> EquivarianceReport:
    return check_map_equivariance(net, net.input_sig, net.output_sig, **kw)


# -- structural checks ---------------------------------------------------------

@dataclass
class StructuralReport:
    ok: bool
    offenders: list = field(default_factory=list)
    numeric: EquivarianceReport | None = None
    note: str = ""

    def __bool__(self):
        return self.ok

    def to_json(self) -> dict:
        return {"ok": self.ok, "offenders": [[str(a) for a in o] if isinstance(o, tuple) else str(o)
                                             for o in self.offenders],
                "numeric": None if self.numeric is None else self.numeric.to_json(),
                "note": self.note}


def check_kernel_diagonality(kernel: BlockKernel, tol: float = 0.0, numeric: bool = True) -> StructuralReport:
    """Offending pairs ``(m, n)``, ``m != n``, whose block is nonzero.

    With ``numeric`` the induced linear map is also sampled for equivariance.
    """
    offenders = kernel.offdiagonal(tol)
    rep = None
    if numeric and kernel.domain.variant == kernel.codomain.variant and kernel.domain.variant != PARITY:
        rep = check_map_equivariance(kernel.apply, kernel.domain, kernel.codomain)
    return StructuralReport(not offenders, offenders, rep)


def bias_map(b: GradedVector):
    return lambda v: v + b


def check_bias_equivariance(b: GradedVector, lambdas=None, tol: float = DEFAULT_TOL) -> StructuralReport:
    """Translation by ``b`` is equivariant iff ``b = 0``; the numeric verdict must agree."""
    nonzero = [g for g in b.sig.grades if np.any(b.blocks[g] != 0)]
    rep = check_map_equivariance(bias_map(b), b.sig, b.sig, lambdas=lambdas, tol=tol)
    note = ""
    if rep.ok == bool(nonzero):
        note = "numeric verdict disagrees with the structural one (lambda set too small?)"
    return StructuralReport(not nonzero, nonzero, rep, note)


class Pooling:
    """Grade pooling: ``max`` over regions of grades or an ``avg`` with weights ``alpha[m, n]``.

    Pooled blocks must share the output block's dimension; max is elementwise.
    """

    def __init__(self, kind: str, sig: GradingSignature, regions=None, weights=None):
        if kind not in ("max", "avg"):
            raise ValueError(f"pooling kind must be 'max' or 'avg', got {kind!r}")
        self.kind, self.sig = kind, sig
        if kind == "max":
            if regions is None:
                regions = {g: [g] for g in sig.grades}
            self.regions = {as_grade(m): [as_grade(n) for n in r] for m, r in regions.items()}
            keys = self.regions
        else:
            if weights is None:
                raise ValueError("avg pooling needs weights")
            self.weights = {(as_grade(m), as_grade(n)): float(a) for (m, n), a in weights.items()}
            keys = {m for m, _ in self.weights}
        for m in keys:
            if m not in sig:
                raise SignatureMismatch(f"pooled grade {m} not in {sig}")
        pairs = ([(m, n) for m, r in self.regions.items() for n in r] if kind == "max"
                 else list(self.weights))
        for m, n in pairs:
            if n not in sig or sig.dim(n) != sig.dim(m):
                raise SignatureMismatch(f"cannot pool grade {n} into grade {m} of {sig}")
        self.out_sig = GradingSignature([(m, sig.dim(m)) for m in sorted(keys, key=lambda g: g.value)])

    def __call__(self, v: GradedVector) -> GradedVector:
        out = {}
        for m, d in self.out_sig:
            if self.kind == "max":
                out[m] = np.max(np.stack([v.blocks[n] for n in self.regions[m]]), axis=0)
            else:
                acc = np.zeros(d)
                for (mm, n), a in self.weights.items():
                    if mm == m:
                        acc = acc + a * v.blocks[n]
                out[m] = acc
        return GradedVector(self.out_sig, out)

    def structural_offenders(self) -> list:
        if self.kind == "max":
            return [(m, n) for m, r in self.regions.items() for n in r if n != m]
        return [(m, n) for (m, n), a in self.weights.items() if m != n and a != 0.0]


def check_pooling_equivariance(kind: str, sig: GradingSignature, regions=None, weights=None,
                               lambdas=None, tol: float = DEFAULT_TOL) -> StructuralReport:
    """Singleton regions (max) or diagonal weights (avg), confirmed numerically.

    Max pooling compares values, so only positive lambdas are sampled for it.
    """
    pool = Pooling(kind, sig, regions, weights)
    offenders = pool.structural_offenders()
    if lambdas is None:
        lambdas = [0.5, 2.0, 3.0] if kind == "max" else default_lambdas(sig)
    rep = check_map_equivariance(pool, sig, pool.out_sig, lambdas=lambdas, tol=tol)
    return StructuralReport(not offenders, offenders, rep)


# -- Z/2 swap ------------------------------------------------------------------

def swap(v: GradedVector) -> GradedVector:
    """The parity action of 1: exchange the even and odd blocks."""
    sig = v.sig
    if sig.variant != PARITY or len(sig) != 2:
        raise SignatureMismatch(f"swap needs an even+odd signature, got {sig}")
    e, o = Grade.parity(0), Grade.parity(1)
    if sig.dim(e) != sig.dim(o):
        raise SignatureMismatch(f"swap needs equal even/odd dims, got {sig}")
    return GradedVector(sig, {e: v.blocks[o], o: v.blocks[e]})


@dataclass
class SwapReport:
    ok: bool
    max_violation: float
    tied: list            # per layer: (weights tied, bias tied)

    def __bool__(self):
        return self.ok

    @property
    def diagnosis(self) -> str:
        if all(w and b for w, b in self.tied):
            return "all layers have tied even/odd blocks"
        bad = [i for i, (w, b) in enumerate(self.tied) if not (w and b)]
        return f"untied even/odd blocks in layer(s) {bad}"

    def to_json(self) -> dict:
        return {"ok": self.ok, "max_violation": self.max_violation,
                "tied": [{"weights": w, "bias": b} for w, b in self.tied],
                "diagnosis": self.diagnosis}


def _tied(layer: GradedLayer) -> tuple:
    e, o = Grade.parity(0), Grade.parity(1)
    blocks = {q: m for (r, q), m in layer.map.pairs().items() if r == q}
    off = [k for k in layer.map.pairs() if k[0] != k[1]]
    w_tied = (not off and e in blocks and o in blocks
              and np.array_equal(blocks[e], blocks[o]))
    b_tied = bool(np.array_equal(layer.bias.blocks[e], layer.bias.blocks[o]))
    return bool(w_tied), b_tied


def check_swap_equivariance(target, n_random: int = 8, seed: int = 0, tol: float = 0.0) -> SwapReport:
    """Check ``phi(swap x) == swap phi(x)`` for a parity-graded layer or network.

    Default tolerance is exact equality: tied blocks perform the same
    floating point operations on both sides.
    """
    layers = target.layers if isinstance(target, GradedNetwork) else [target]
    for layer in layers:
        swap(GradedVector.zeros(layer.domain))      # validates the signatures
        swap(GradedVector.zeros(layer.codomain))
    sig = layers[0].domain
    worst = 0.0
    for v in probe_vectors(sig, n_random, seed):
        lhs, rhs = target(swap(v)), swap(target(v))
        worst = max(worst, euclidean_norm(lhs - rhs) / (1.0 + euclidean_norm(rhs)))
    return SwapReport(worst <= tol, worst, [_tied(l) for l in layers])


# -- invariants ------------------------------------------------------------------

def genus2_target(x: GradedVector) -> float:
    """``x_2 / x_10^(1/5)``, the degree-zero quotient used by the genus-2 case study."""
    return float(x[2][0] / x[10][0] ** 0.2)


def invariance_error(fn, x: GradedVector, lambdas) -> float:
    """Largest relative change of a scalar function under the given (positive) lambdas."""
    base = fn(x)
    return max(abs(fn(scalar_action(l, x)) - base) / max(abs(base), 1e-300) for l in lambdas)
