"""
Minibatch samplers
==================

Balanced batches hold B/M classes with exactly M instances each; variable
batches hold floor(B/2.5) classes with 2 or 3 instances each, so their
expected size is B.  Each class reserves one random query.
"""

import numpy as np

from proxyforge.batching import SamplerConfig, epoch_iterator, sample_balanced, sample_variable

labels = np.repeat(np.arange(400), 3)          # 400 classes x 3 instances

batch = sample_balanced(labels, SamplerConfig("balanced", shots_per_class=2, expected_batch_size=400, seed=0))
print("balanced B=400:", len(batch), "instances,", len(batch.query_positions), "classes")

rng = np.random.default_rng(0)
config = SamplerConfig("variable", expected_batch_size=800, seed=0)
sizes = [len(sample_variable(labels, config, rng)) for _ in range(500)]
print("variable B=800:", config.classes_per_batch, "classes, mean size", np.mean(sizes), "range", min(sizes), max(sizes))

# %%
# An epoch visits every class before any class repeats.
small = np.repeat(np.arange(50), 20)
batches = list(epoch_iterator(small, SamplerConfig("balanced", 2, 20, seed=1), epoch=1))
seen = np.unique(np.concatenate([b.labels for b in batches]))
print(len(batches), "batches per epoch, classes covered:", len(seen))
