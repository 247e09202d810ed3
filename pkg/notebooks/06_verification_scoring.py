"""
Verification trials and EER
===========================

Each utterance is cut into 10 evenly spaced segments; a trial score is the
negated mean of the 10 x 10 distances between segment embeddings.  The
EER is read off the ROC polyline with linear interpolation.
"""

import numpy as np

from proxyforge.data import SyntheticDataset, generate_dataset
from proxyforge.evaluation import ScoreSet, build_trials, compute_eer, det_curve, score_trials
from proxyforge.instrument import counting
from proxyforge.trainer import ToyEmbedder

print("EER, perfect separation  :", compute_eer(ScoreSet(np.array([0.9, 0.8]), np.array([0.2, 0.1])))[0])
print("EER, 3 vs 3 hand example :", compute_eer(ScoreSet(np.array([0.9, 0.8, 0.3]), np.array([0.7, 0.2, 0.1])))[0])

# %%
# Score trials with an untrained embedder.
data = generate_dataset(SyntheticDataset(seed=0))
embedder = ToyEmbedder.init(64, 16, np.random.default_rng(0))
trials = build_trials(data.test, 200, seed=0)
with counting() as counter:
    scores = score_trials(trials, embedder, num_segments=10, segment_length=20, workers=4)
print("distance evaluations per trial:", counter.count // len(trials))

score_set = ScoreSet.from_trials(trials, scores)
eer, threshold = compute_eer(score_set)
print(f"untrained EER = {100 * eer:.1f}% at threshold {threshold:.4f}")
thr, far, frr = det_curve(score_set)
print("first DET points (threshold, FAR, FRR):")
for row in list(zip(thr, far, frr))[:3]:
    print("  ", np.round(row, 4))
