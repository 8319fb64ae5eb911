"""
A graded network by hand
========================

A two-layer network on V(2,4,6,10): one graded layer into V(2,4) with
the graded ReLU, then a linear readout into a single scalar.
"""

import numpy as np

from gradednet import GradedVector, GradingSignature, LossWeights
from gradednet.gmap import BlockKernel, GradedLinearMap
from gradednet.network import ActivationKind, GradedLayer, GradedNetwork
from gradednet.norms import graded_loss, graded_loss_gradient

in_sig = GradingSignature.of(2, 4, 6, 10)
hid = GradingSignature.of(2, 4)
out = GradingSignature.of(1)

# W1 keeps grades 2 and 4 and drops 6 and 10; the readout mixes both hidden grades
net = GradedNetwork([
    GradedLayer(GradedLinearMap.diagonal(in_sig, hid, {2: 0.8, 4: 0.6}),
                GradedVector(hid, [[0.1], [0.2]]), ActivationKind.GRADED_RELU),
    GradedLayer(BlockKernel(hid, out, {(1, 2): [[0.5]], (1, 4): [[0.3]]}),
                GradedVector(out, [[0.05]]), ActivationKind.STANDARD_RELU),
])

x = GradedVector(in_sig, [[1.0], [0.5], [0.2], [0.1]])
pred, trace = net.forward(x)
print("pre-activation:", trace.pre[0].flat())          # (0.9, 0.5)
print("hidden:        ", trace.post[0].flat())         # (0.9**(1/2), 0.5**(1/4))
print("prediction:    ", pred.flat())

# the target is the degree-zero quotient x2 / x10^(1/5)
y = GradedVector(out, [[1.0 / 0.1 ** 0.2]])
w = LossWeights.uniform(out)
print("truth:", y.flat(), " loss:", graded_loss(pred, y, w))

# one backward pass; each weight block gets its own gradient
grads = net.backward(trace, graded_loss_gradient(pred, y, w))
for i, g in enumerate(grads):
    for pair, m in g.weights.items():
        print(f"layer {i} block {pair[0]}<-{pair[1]}: {np.round(m, 5).tolist()}")

# dense view of W1: only the (2,2) and (4,4) entries can be nonzero
print(net.layers[0].map.to_dense())
