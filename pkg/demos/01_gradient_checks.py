"""
Checking hand-written backward passes
=====================================

Every layer in ``ncelm`` has a manual backward pass.  Here we compare each
one with central finite differences at a desk-sized scale and print the
worst relative error per tensor.
"""
import numpy as np

from ncelm.heads import HeadParams, NceBatchSample, nce_backward, nce_loss
from ncelm.oracle import compare_grads, finite_diff_grad, grad_check_suite, reports_to_text

###############################################################################
# A single NCE head by hand
# -------------------------
# Four words, a 3-dimensional context vector for two positions, and two noise
# words per position.

rng = np.random.default_rng(0)
head = HeadParams(rng.uniform(-1, 1, (4, 3)), rng.uniform(-1, 1, 4))
v = rng.uniform(-1, 1, (2, 3))
pn = np.array([0.4, 0.3, 0.2, 0.1])
ids = np.array([[1, 3], [0, 2]])
sample = NceBatchSample(targets=[2, 0], target_noise_probs=pn[[2, 0]], noise_ids=ids, noise_probs=pn[ids])

print("loss:", nce_loss(head, v, sample))

g_theta, g_bias, g_v, _ = nce_backward(head, v, sample)
numeric = finite_diff_grad(lambda: nce_loss(head, v, sample), {"theta": head.theta, "bias": head.bias, "v": v})
print(reports_to_text(compare_grads({"theta": g_theta, "bias": g_bias, "v": g_v}, numeric)))

###############################################################################
# The whole suite
# ---------------
# LSTM cell, two-layer stack with dropout masks held fixed, both heads and a
# complete embedding-to-head model.

reports = grad_check_suite()
print(reports_to_text(reports))
print("worst:", max(r.max_rel_err for r in reports))
