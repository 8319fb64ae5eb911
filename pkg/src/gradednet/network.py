"""Graded layers and networks, graded ReLU, backpropagation and SGD training.

A layer computes ``a = g(W a_prev + b)`` where ``W`` is a block operator from
:mod:`gradednet.gmap`, ``b`` lives in the codomain and ``g`` acts on each
grade block separately.  The dense baseline is the same machinery over a
single trivially graded block.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .grading import Grade, GradingSignature
from .gmap import BlockKernel, GradedLinearMap, map_from_json
from .gspace import GradedVector, SignatureMismatch
from .norms import LossWeights, graded_loss, graded_loss_gradient

ACT_EPS = 1e-10


class ActivationKind(str, enum.Enum):
    GRADED_RELU = "graded_relu"               # |z|^(1/q), the literal max{0, |z|^(1/q)}
    POSITIVE_PART_GRADED_RELU = "positive_part_graded_relu"   # max{0, z}^(1/q)
    STANDARD_RELU = "relu"
    IDENTITY = "identity"

    @property
    def graded(self) -> bool:
        return self in (ActivationKind.GRADED_RELU, ActivationKind.POSITIVE_PART_GRADED_RELU)


def _root_order(g: Grade) -> float:
    q = g.exponent
    if q <= 0:
        raise ValueError(f"graded ReLU needs a positive grade, got {g}")
    return q


def _inv_roots(sig: GradingSignature, kind: ActivationKind):
    """Per-coordinate exponents 1/q for graded kinds, ``None`` otherwise."""
    if not kind.graded:
        return None
    return np.concatenate([np.full(d, 1.0 / _root_order(g)) for g, d in sig])


# Both the GradedVector API and the training engine route through these two
# functions so that elementwise results agree bit for bit.
def _activate(z: np.ndarray, inv, kind: ActivationKind) -> np.ndarray:
    if kind is ActivationKind.IDENTITY:
        return z.copy()
    if kind is ActivationKind.STANDARD_RELU:
        return np.maximum(z, 0.0)
    if kind is ActivationKind.GRADED_RELU:
        return np.abs(z) ** inv
    return np.maximum(z, 0.0) ** inv


def _activate_deriv(z: np.ndarray, inv, kind: ActivationKind, eps: float) -> np.ndarray:
    if kind is ActivationKind.IDENTITY:
        return np.ones_like(z)
    if kind is ActivationKind.STANDARD_RELU:
        return (z > 0).astype(np.float64)
    d = inv * np.maximum(np.abs(z), eps) ** (inv - 1.0)
    if kind is ActivationKind.GRADED_RELU:
        return d * np.sign(z)          # sign(0) = 0 gives the zero subgradient
    return np.where(z > 0, d, 0.0)


def graded_relu(z: GradedVector, kind=ActivationKind.GRADED_RELU) -> GradedVector:
    kind = ActivationKind(kind)
    return GradedVector.from_flat(z.sig, _activate(z.flat(), _inv_roots(z.sig, kind), kind))


def relu_derivative(z: GradedVector, kind=ActivationKind.GRADED_RELU, eps: float = ACT_EPS) -> GradedVector:
    kind = ActivationKind(kind)
    return GradedVector.from_flat(z.sig, _activate_deriv(z.flat(), _inv_roots(z.sig, kind), kind, eps))


@dataclass
class GradedLayer:
    map: GradedLinearMap | BlockKernel
    bias: GradedVector
    activation: ActivationKind = ActivationKind.GRADED_RELU

    def __post_init__(self):
        self.activation = ActivationKind(self.activation)
        if self.bias.sig != self.map.codomain:
            raise SignatureMismatch(f"bias over {self.bias.sig} for map into {self.map.codomain}")

    @property
    def domain(self) -> GradingSignature:
        return self.map.domain

    @property
    def codomain(self) -> GradingSignature:
        return self.map.codomain

    def __call__(self, x: GradedVector) -> GradedVector:
        return graded_relu(self.map.apply(x) + self.bias, self.activation)

    @property
    def parameter_count(self) -> int:
        return self.map.parameter_count + self.bias.sig.total_dim

    def to_json(self) -> dict:
        return {"map": self.map.to_json(), "bias": self.bias.to_json(),
                "activation": self.activation.value}

    @classmethod
    def from_json(cls, obj: dict) -> "GradedLayer":
        return cls(map_from_json(obj["map"]), GradedVector.from_json(obj["bias"]),
                   ActivationKind(obj["activation"]))


@dataclass
class Trace:
    inputs: list = field(default_factory=list)   # a_{l-1}
    pre: list = field(default_factory=list)      # z_l
    post: list = field(default_factory=list)     # a_l


@dataclass
class LayerGrad:
    weights: dict            # (out grade, in grade) -> matrix
    bias: GradedVector


class OpCounter:
    """Counts multiply-adds spent in block matrix products."""

    def __init__(self):
        self.total = 0

    def add(self, n: int):
        self.total += int(n)


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, index: int, loss: float):
        super().__init__(f"non-finite loss {loss} at epoch {epoch}, sample {index}")
        self.epoch, self.index, self.loss = epoch, index, loss


class GradedNetwork:
    """Composition of graded layers with chained signatures."""

    def __init__(self, layers):
        self.layers = list(layers)
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.codomain != b.domain:
                raise SignatureMismatch(f"layer {i} outputs {a.codomain} but layer {i + 1} "
                                        f"expects {b.domain}")

    @property
    def input_sig(self) -> GradingSignature:
        return self.layers[0].domain

    @property
    def output_sig(self) -> GradingSignature:
        return self.layers[-1].codomain

    @property
    def parameter_count(self) -> int:
        return sum(layer.parameter_count for layer in self.layers)

    def copy(self) -> "GradedNetwork":
        return type(self).from_json(self.to_json())

    def __call__(self, x: GradedVector) -> GradedVector:
        return self.forward(x)[0]

    def forward(self, x: GradedVector, counter: OpCounter | None = None):
        if not self.layers:
            return x, Trace()
        if x.sig != self.layers[0].domain:
            raise SignatureMismatch(f"network expects {self.layers[0].domain}, got {x.sig}")
        trace = Trace()
        a = x
        for layer in self.layers:
            z = layer.map.apply(a, counter) + layer.bias
            trace.inputs.append(a)
            trace.pre.append(z)
            a = graded_relu(z, layer.activation)
            trace.post.append(a)
        return a, trace

    def backward(self, trace: Trace, loss_grad: GradedVector, counter: OpCounter | None = None,
                 eps: float = ACT_EPS) -> list:
        """Per-layer gradients of the loss whose prediction-gradient is ``loss_grad``."""
        if len(trace.pre) != len(self.layers):
            raise SignatureMismatch("trace does not belong to this network")
        delta = loss_grad
        grads = [None] * len(self.layers)
        for l in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[l]
            z, a_prev = trace.pre[l], trace.inputs[l]
            if z.sig != layer.codomain or delta.sig != layer.codomain or a_prev.sig != layer.domain:
                raise SignatureMismatch(f"stale trace at layer {l}")
            gp = relu_derivative(z, layer.activation, eps)
            dz = {g: delta.blocks[g] * gp.blocks[g] for g in z.sig.grades}
            wg = {}
            for (r, q), m in layer.map.pairs().items():
                wg[(r, q)] = np.outer(dz[r], a_prev.blocks[q])
                if counter is not None:
                    counter.add(m.size)
            grads[l] = LayerGrad(wg, GradedVector(z.sig, dz))
            if l > 0:
                delta = layer.map.apply_transpose(GradedVector(z.sig, dz), counter)
        return grads

    def apply_updates(self, grads: list, eta: float, executor=None):
        """In-place SGD step; per-block updates may run on ``executor`` in any order."""
        for layer, g in zip(self.layers, grads):
            items = list(layer.map.pairs().items())

            def step(item, _g=g):
                key, m = item
                return key, m - eta * _g.weights[key]

            updated = dict(executor.map(step, items) if executor is not None else map(step, items))
            layer.map = layer.map.with_pairs(updated)
            layer.bias = layer.bias - g.bias * eta

    def to_json(self) -> dict:
        return {"format": "gradednet-network", "layers": [layer.to_json() for layer in self.layers]}

    @classmethod
    def from_json(cls, obj: dict) -> "GradedNetwork":
        if obj.get("format") == "gradednet-dense-baseline":
            return DenseBaseline.from_json(obj)
        return cls([GradedLayer.from_json(o) for o in obj["layers"]])


def trivial_signature(dim: int) -> GradingSignature:
    return GradingSignature([(Grade.integer(0), dim)])


class DenseBaseline(GradedNetwork):
    """Standard ReLU network on flattened coordinates.

    Inputs and outputs keep the graded signatures of the paired graded
    network so both see the same data and the same graded loss; internally
    every layer is one unconstrained dense block.
    """

    def __init__(self, layers, input_sig: GradingSignature, output_sig: GradingSignature):
        super().__init__(layers)
        self.graded_input_sig = input_sig
        self.graded_output_sig = output_sig
        if self.layers:
            if self.layers[0].domain.total_dim != input_sig.total_dim:
                raise SignatureMismatch("baseline input width differs from the graded input")
            if self.layers[-1].codomain.total_dim != output_sig.total_dim:
                raise SignatureMismatch("baseline output width differs from the graded output")

    @classmethod
    def from_matrices(cls, weights, biases, input_sig, output_sig, activations=None) -> "DenseBaseline":
        layers = []
        for i, (w, b) in enumerate(zip(weights, biases)):
            w = np.asarray(w, dtype=np.float64)
            dom, cod = trivial_signature(w.shape[1]), trivial_signature(w.shape[0])
            act = ActivationKind.STANDARD_RELU if activations is None else activations[i]
            layers.append(GradedLayer(BlockKernel.from_dense(w, dom, cod), GradedVector(cod, [b]), act))
        return cls(layers, input_sig, output_sig)

    @classmethod
    def random(cls, widths, input_sig, output_sig, rng, std) -> "DenseBaseline":
        ws, bs = [], []
        for din, dout in zip(widths, widths[1:]):
            ws.append(std * rng.standard_normal((dout, din)))
            bs.append(std * rng.standard_normal(dout))
        return cls.from_matrices(ws, bs, input_sig, output_sig)

    @property
    def input_sig(self):
        return self.graded_input_sig

    @property
    def output_sig(self):
        return self.graded_output_sig

    def forward(self, x: GradedVector, counter=None):
        if x.sig != self.graded_input_sig:
            raise SignatureMismatch(f"baseline expects {self.graded_input_sig}, got {x.sig}")
        flat_in = GradedVector.from_flat(self.layers[0].domain, x.flat())
        out, trace = GradedNetwork.forward(self, flat_in, counter)
        return GradedVector.from_flat(self.graded_output_sig, out.flat()), trace

    def backward(self, trace, loss_grad, counter=None, eps=ACT_EPS):
        flat = GradedVector.from_flat(self.layers[-1].codomain, loss_grad.flat())
        return GradedNetwork.backward(self, trace, flat, counter, eps)

    def to_json(self) -> dict:
        return {"format": "gradednet-dense-baseline",
                "input_sig": self.graded_input_sig.to_json(),
                "output_sig": self.graded_output_sig.to_json(),
                "layers": [layer.to_json() for layer in self.layers]}

    @classmethod
    def from_json(cls, obj: dict) -> "DenseBaseline":
        return cls([GradedLayer.from_json(o) for o in obj["layers"]],
                   GradingSignature.from_json(obj["input_sig"]),
                   GradingSignature.from_json(obj["output_sig"]))


def parameter_count(net) -> int:
    return 0 if net is None else net.parameter_count


def build_network(input_sig: GradingSignature, plan, rng, std: float) -> GradedNetwork:
    """Random network from a layer plan of ``(codomain sig, activation, map kind)`` entries.

    Map kinds: ``"graded"`` (degree-0 block-diagonal), ``"readout"`` (every
    input grade feeds every output grade, used for a trivially graded output).
    Weights and biases are drawn from ``Normal(0, std**2)``.
    """
    layers, dom = [], input_sig
    for entry in plan:
        cod, act = entry[0], ActivationKind(entry[1])
        kind = entry[2] if len(entry) > 2 else "graded"
        if kind == "graded":
            m = GradedLinearMap.random(dom, cod, rng, scale=std)
        elif kind == "readout":
            m = BlockKernel.full(dom, cod, rng, scale=std)
        else:
            raise ValueError(f"unknown map kind {kind!r}")
        bias = GradedVector(cod, {g: std * rng.standard_normal(d) for g, d in cod})
        layers.append(GradedLayer(m, bias, act))
        dom = cod
    return GradedNetwork(layers)


@dataclass
class TrainResult:
    net: GradedNetwork
    history: list


class _Engine:
    """Mutable flat-array mirror of a network used by :func:`train`.

    Performs the same floating point operations in the same order as
    ``forward`` / ``backward`` / ``apply_updates`` without building
    GradedVector objects per sample.
    """

    def __init__(self, net: GradedNetwork, weights: LossWeights):
        self.net = net
        self.layers = []
        for layer in net.layers:
            ro, co = layer.codomain.offsets(), layer.domain.offsets()
            blocks = [(slice(ro[r], ro[r] + m.shape[0]), slice(co[q], co[q] + m.shape[1]),
                       np.array(m), (r, q)) for (r, q), m in layer.map.pairs().items()]
            self.layers.append((blocks, layer.bias.flat().copy(), layer.codomain.total_dim,
                                layer.domain.total_dim, _inv_roots(layer.codomain, layer.activation),
                                layer.activation))
        out = net.output_sig
        if weights.sig != out:
            raise SignatureMismatch(f"weights for {weights.sig} used on outputs over {out}")
        off = out.offsets()
        self.out_slices = [(slice(off[g], off[g] + d), weights[g]) for g, d in out]

    def step(self, x: np.ndarray, y: np.ndarray, eta: float, counter=None) -> float:
        acts, pres = [x], []
        a = x
        for blocks, b, n_out, _, inv, kind in self.layers:
            z = np.zeros(n_out)
            for rs, qs, m, _ in blocks:
                z[rs] = z[rs] + m @ a[qs]
                if counter is not None:
                    counter.add(m.size)
            z = z + b
            a = _activate(z, inv, kind)
            pres.append(z)
            acts.append(a)
        loss = 0.0
        delta = np.empty_like(a)
        for sl, w in self.out_slices:
            d = a[sl] - y[sl]
            loss += w * float(np.dot(d, d))
            delta[sl] = 2.0 * w * (a[sl] - y[sl])
        if not math.isfinite(loss):
            return loss
        for l in range(len(self.layers) - 1, -1, -1):
            blocks, b, _, n_in, inv, kind = self.layers[l]
            dz = delta * _activate_deriv(pres[l], inv, kind, ACT_EPS)
            a_prev = acts[l]
            grads = [np.outer(dz[rs], a_prev[qs]) for rs, qs, _, _ in blocks]
            if l > 0:
                delta = np.zeros(n_in)
                for rs, qs, m, _ in blocks:
                    delta[qs] = delta[qs] + m.T @ dz[rs]
            if eta:
                for (_, _, m, _), g in zip(blocks, grads):
                    m -= eta * g
                b -= eta * dz
        return loss

    def export(self) -> GradedNetwork:
        net = self.net.copy()
        for layer, (blocks, b, *_rest) in zip(net.layers, self.layers):
            layer.map = layer.map.with_pairs({key: m for _, _, m, key in blocks})
            layer.bias = GradedVector.from_flat(layer.codomain, b)
        return net


def train(net: GradedNetwork, data, weights: LossWeights, eta: float, epochs: int,
          counter: OpCounter | None = None) -> TrainResult:
    """Per-sample SGD in dataset order; ``net`` itself is left untouched.

    ``history[e]`` is the mean per-sample loss seen during epoch ``e`` (each
    loss evaluated just before that sample's update).  Randomness lives only in
    the initial network, so identical inputs give bit-identical results.
    """
    if not (math.isfinite(eta) and eta >= 0):
        raise ValueError(f"learning rate must be finite and non-negative, got {eta}")
    if isinstance(epochs, bool) or not isinstance(epochs, int) or epochs < 1:
        raise ValueError(f"epochs must be an integer >= 1, got {epochs!r}")
    data = list(data)
    if not data:
        raise ValueError("empty dataset")
    for x, y in data[:1]:
        if x.sig != net.input_sig or y.sig != net.output_sig:
            raise SignatureMismatch("dataset signatures do not match the network")
    flat = [(x.flat(), y.flat()) for x, y in data]
    eng = _Engine(net, weights)
    history = []
    for epoch in range(epochs):
        total = 0.0
        for i, (x, y) in enumerate(flat):
            loss = eng.step(x, y, eta, counter)
            if not math.isfinite(loss):
                raise TrainingDiverged(epoch, i, loss)
            total += loss
        history.append(total / len(flat))
    return TrainResult(eng.export(), history)


def train_reference(net: GradedNetwork, data, weights: LossWeights, eta: float, epochs: int,
                    executor=None) -> TrainResult:
    """Same algorithm as :func:`train` written with the object-level API (slow)."""
    net = net.copy()
    history = []
    for epoch in range(epochs):
        total = 0.0
        for i, (x, y) in enumerate(data):
            pred, trace = net.forward(x)
            loss = graded_loss(pred, y, weights)
            if not math.isfinite(loss):
                raise TrainingDiverged(epoch, i, loss)
            total += loss
            grads = net.backward(trace, graded_loss_gradient(pred, y, weights))
            if eta:
                net.apply_updates(grads, eta, executor)
        history.append(total / len(data))
    return TrainResult(net, history)


def epoch_cost(net: GradedNetwork, n_samples: int) -> int:
    """Forward multiply-adds per epoch: N * sum over layers and blocks of d_out * d_in."""
    return n_samples * sum(m.size for layer in net.layers for m in layer.map.pairs().values())
