"""
Probing equivariance under the weighted scalar action
=====================================================

lambda acts on grade q by lambda**q.  A map commutes with the action
only if it keeps grades apart and stays linear inside each grade.
"""

import numpy as np

from gradednet import GradedVector, GradingSignature
from gradednet.equivariance import (
    check_bias_equivariance, check_map_equivariance, check_pooling_equivariance,
    check_swap_equivariance,
)
from gradednet.gmap import BlockKernel, GradedLinearMap
from gradednet.grading import Grade
from gradednet.network import ActivationKind, GradedLayer

rng = np.random.default_rng(0)
sig = GradingSignature([(1, 2), (2, 3), (4, 1)])

# a random grade-preserving map passes
f = GradedLinearMap.random(sig, sig, rng)
print(check_map_equivariance(f.apply, sig).summary())

# a single cross-grade entry breaks it
k = BlockKernel(GradingSignature.of(1, 2), GradingSignature.of(1, 2),
                {(1, 1): [[1.0]], (2, 2): [[1.0]], (1, 2): [[0.1]]})
print(check_map_equivariance(k.apply, k.domain).summary())

# so does a nonzero bias, and so does the graded ReLU on grades above 1
print("bias:", check_bias_equivariance(GradedVector(GradingSignature.of(2, 4), [[0.1], [0.0]])).to_json()["ok"])
layer = GradedLayer(GradedLinearMap.identity(sig), GradedVector.zeros(sig), ActivationKind.GRADED_RELU)
print(check_map_equivariance(layer, sig).summary())

# pooling: singleton regions are fine, pooling grade 4 into grade 2 is not
two_four = GradingSignature.of(2, 4)
print("max pool, singleton:", check_pooling_equivariance("max", two_four).ok)
print("max pool, {2,4}:    ", check_pooling_equivariance("max", two_four, regions={2: [2, 4]}).ok)

# parity swap: tied even/odd blocks commute with the swap, untied ones do not
E, O = Grade.parity(0), Grade.parity(1)
par = GradingSignature.parity(4, 4)
w = rng.standard_normal((4, 4))
tied = GradedLayer(GradedLinearMap(par, par, {E: w, O: w}), GradedVector.zeros(par), ActivationKind.STANDARD_RELU)
untied = GradedLayer(GradedLinearMap.diagonal(par, par, {E: 0.9, O: 0.8}), GradedVector.zeros(par),
                     ActivationKind.STANDARD_RELU)
for name, l in [("tied", tied), ("untied", untied)]:
    r = check_swap_equivariance(l)
    print(f"{name}: ok={r.ok} max violation={r.max_violation:.3g} ({r.diagnosis})")
