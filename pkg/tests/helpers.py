"""Test-side oracles shared by the unit and acceptance suites."""
import itertools
from collections import Counter

import numpy as np

from gradednet.gspace import GradedVector
from gradednet.network import GradedNetwork
from gradednet.norms import graded_loss, graded_loss_gradient


def get_params(net: GradedNetwork) -> np.ndarray:
    parts = []
    for layer in net.layers:
        parts += [m.ravel() for m in layer.map.pairs().values()]
        parts.append(layer.bias.flat())
    return np.concatenate(parts)


def set_params(net: GradedNetwork, theta) -> GradedNetwork:
    net = net.copy()
    pos = 0
    for layer in net.layers:
        pairs = {}
        for k, m in layer.map.pairs().items():
            pairs[k] = np.asarray(theta[pos:pos + m.size]).reshape(m.shape)
            pos += m.size
        layer.map = layer.map.with_pairs(pairs)
        n = layer.bias.sig.total_dim
        layer.bias = GradedVector.from_flat(layer.bias.sig, theta[pos:pos + n])
        pos += n
    assert pos == len(theta)
    return net


def flat_grads(net, grads) -> np.ndarray:
    parts = []
    for layer, g in zip(net.layers, grads):
        parts += [g.weights[k].ravel() for k in layer.map.pairs()]
        parts.append(g.bias.flat())
    return np.concatenate(parts)


def analytic_gradient(net, x, y, w) -> np.ndarray:
    pred, trace = net.forward(x)
    return flat_grads(net, net.backward(trace, graded_loss_gradient(pred, y, w)))


def fd_gradient(net, x, y, w, h=1e-6) -> np.ndarray:
    theta = get_params(net)
    out = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        lp = graded_loss(set_params(net, theta + e)(x), y, w)
        lm = graded_loss(set_params(net, theta - e)(x), y, w)
        out[i] = (lp - lm) / (2 * h)
    return out


def max_rel_err(a, b, floor=1e-9) -> float:
    a, b = np.asarray(a), np.asarray(b)
    den = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / den))


def min_abs_preactivation(net, x) -> float:
    _, trace = net.forward(x)
    return min(float(np.min(np.abs(z.flat()))) for z in trace.pre)


def random_fd_instance(seed: int, min_z: float = 0.1):
    """A random 3-layer graded network, input, target and weights with every |z| >= min_z."""
    from gradednet.grading import GradingSignature
    from gradednet.network import build_network
    from gradednet.norms import LossWeights

    a = GradingSignature([(1, 2), (2, 3), (3, 2)])
    b = GradingSignature([(1, 3), (2, 2), (3, 2)])
    c = GradingSignature([(1, 2), (2, 2), (3, 1)])
    d = GradingSignature([(1, 1), (2, 1), (3, 1)])
    plan = [(b, "graded_relu"), (c, "graded_relu"), (d, "identity")]
    rng = np.random.default_rng(seed)
    while True:
        net = build_network(a, plan, rng, std=1.0)
        x = GradedVector.from_flat(a, rng.standard_normal(a.total_dim))
        if min_abs_preactivation(net, x) >= min_z:
            y = GradedVector.from_flat(d, rng.standard_normal(d.total_dim))
            return net, x, y, LossWeights(d, [1.0, 2.0, 0.5])


# -- random families for the equivariance theorem suite ------------------------

def _int_sig(rng, equal_dims=False, min_grade=1):
    from gradednet.grading import GradingSignature

    n = int(rng.integers(2, 5))
    grades = sorted(rng.choice(np.arange(min_grade, 7), size=n, replace=False).tolist())
    d = int(rng.integers(1, 4))
    return GradingSignature([(g, d if equal_dims else int(rng.integers(1, 4))) for g in grades])


def _scaled_to_norm(m, rng):
    return m * (rng.uniform(0.01, 1.0) / np.linalg.norm(m))


def random_diagonal_kernel(rng):
    from gradednet.gmap import BlockKernel

    a = _int_sig(rng)
    b = _sig_like(a, rng)
    return BlockKernel(a, b, {(g, g): rng.standard_normal((b.dim(g), a.dim(g))) for g in a.grades})


def _sig_like(sig, rng):
    from gradednet.grading import GradingSignature

    return GradingSignature([(g, int(rng.integers(1, 4))) for g in sig.grades])


def random_offdiagonal_kernel(rng):
    """Diagonal blocks plus one off-diagonal block whose norm lies in [0.01, 1]."""
    k = random_diagonal_kernel(rng)
    grades = k.domain.grades
    i, j = rng.choice(len(grades), size=2, replace=False)
    m, n = grades[i], grades[j]
    pairs = k.pairs()
    pairs[(m, n)] = _scaled_to_norm(rng.standard_normal((k.codomain.dim(m), k.domain.dim(n))), rng)
    return k.with_pairs(pairs), (m, n)


def random_nonzero_bias(rng):
    from gradednet.gspace import GradedVector

    sig = _int_sig(rng)
    return GradedVector.from_flat(sig, _scaled_to_norm(rng.standard_normal(sig.total_dim), rng))


def random_graded_relu_layer(rng):
    from gradednet.gmap import GradedLinearMap
    from gradednet.gspace import GradedVector
    from gradednet.network import ActivationKind, GradedLayer

    a = _int_sig(rng, min_grade=2)
    f = GradedLinearMap.random(a, a, rng)
    return GradedLayer(f, GradedVector.zeros(a), ActivationKind.GRADED_RELU)


def random_multigrade_max_pool(rng):
    sig = _int_sig(rng, equal_dims=True)
    grades = list(sig.grades)
    k = int(rng.integers(2, len(grades) + 1))
    region = rng.choice(len(grades), size=k, replace=False).tolist()
    regions = {g: [g] for g in grades}
    target = grades[region[0]]
    regions[target] = [grades[i] for i in region]
    return sig, regions


def random_offdiagonal_avg_pool(rng):
    sig = _int_sig(rng, equal_dims=True)
    grades = list(sig.grades)
    weights = {(g, g): float(rng.uniform(0.1, 1.0)) for g in grades}
    i, j = rng.choice(len(grades), size=2, replace=False)
    weights[(grades[i], grades[j])] = float(rng.choice([-1, 1]) * rng.uniform(0.01, 1.0))
    return sig, weights


def brute_tensor_dims(a, b) -> dict:
    """Enumerate basis pairs e_i (x) f_j and bucket them by the grade of the pair."""
    basis_a = [g for g, d in a for _ in range(d)]
    basis_b = [g for g, d in b for _ in range(d)]
    return dict(Counter(ga + gb for ga, gb in itertools.product(basis_a, basis_b)))
