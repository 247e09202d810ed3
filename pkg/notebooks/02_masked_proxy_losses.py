"""
Masked proxy losses
===================

MP compares each class's reserved query with every in-batch centroid and
with the proxies of the classes that are *not* in the batch.  The proxies
of in-batch classes are masked out and only move through the regulator.
MMP replaces the query term by a multinomial form that weights hard
positives more.
"""

import numpy as np

from proxyforge.losses import LossHyperparams, mmp_l1m, mmp_loss, mp_l1, mp_loss, mpr_regulator
from proxyforge.losses.gradcheck import random_configuration

rng = np.random.default_rng(0)
batch, proxies, params = random_configuration(rng, dim=8, batch_classes=6, num_proxies=10)
print("batch classes:", batch.classes, " proxies:", len(proxies))

# %%
# The loss decomposes into query term + lambda * regulator, exactly.
hyper = LossHyperparams(lambda_balance=0.3)
total = mp_loss(batch, proxies, params, hyper)
l1 = mp_l1(batch, proxies, params)
l2 = mpr_regulator(batch, proxies, params)
print(f"MP  = {total.value:.6f} = {l1.value:.6f} + 0.3 * {l2.value:.6f}")
print(f"MMP = {mmp_loss(batch, proxies, params, hyper).value:.6f}")

# %%
# Every positive pair carries the same weight -1/|queries| under MP ...
print("MP positive weights :", l1.similarity_grads["positive"].round(6))

# ... while under MMP the weight grows as the positive similarity drops.
mmp = mmp_l1m(batch, proxies, params)
q = batch.instances[batch.query_indices]
q = q / np.linalg.norm(q, axis=1, keepdims=True)
s_pos = params.alpha * (np.sum(q * batch.centroids, axis=1) - params.beta)
for s, w in sorted(zip(s_pos, mmp.similarity_grads["positive"])):
    print(f"  s_pos = {s:7.3f}   weight = {w:.5f}")

# %%
# Masking: in-batch proxies get no gradient from the query term.
in_rows = proxies.rows_for(batch.classes)
print("query-term max |grad| on in-batch proxies :", np.abs(l1.grad_proxies[in_rows]).max())
print("full-loss max |grad| on in-batch proxies  :", np.abs(total.grad_proxies[in_rows]).max())
