"""Verification-trial scoring and equal error rate.

A trial compares two utterances (frame sequences).  Each utterance is cut
into ``num_segments`` fixed-length segments at evenly spaced offsets that
span the whole sequence; the trial score is the negated mean of all
``num_segments ** 2`` Euclidean distances between the two sets of segment
embeddings, so that higher scores mean "same speaker".
"""

from __future__ import annotations

import contextvars
import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .embedding import l2_normalize, pairwise_distance
from .errors import EvaluationError, TrialTooShortError

Embedder = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Trial:
    utterance_a: np.ndarray
    utterance_b: np.ndarray
    is_target: bool
    label_a: int = -1
    label_b: int = -1


@dataclass(frozen=True)
class ScoreSet:
    target_scores: np.ndarray
    nontarget_scores: np.ndarray

    @classmethod
    def from_trials(cls, trials: Sequence[Trial], scores) -> "ScoreSet":
        scores = np.asarray(scores, dtype=np.float64)
        is_target = np.array([t.is_target for t in trials], dtype=bool)
        return cls(scores[is_target], scores[~is_target])


def segment_starts(length: int, num_segments: int, segment_length: int) -> np.ndarray:
    """Evenly spaced start offsets whose segments cover the full sequence."""
    if segment_length < 1 or num_segments < 1:
        raise ValueError("num_segments and segment_length must be positive")
    if length < segment_length:
        raise TrialTooShortError(f"utterance of {length} frames is shorter than a {segment_length}-frame segment")
    return np.round(np.linspace(0, length - segment_length, num_segments)).astype(np.int64)


def segment_features(frames: np.ndarray, num_segments: int, segment_length: int) -> np.ndarray:
    """Mean frame of every segment, shape ``(num_segments, feature_dim)``."""
    frames = np.asarray(frames, dtype=np.float64)
    starts = segment_starts(len(frames), num_segments, segment_length)
    csum = np.concatenate([np.zeros((1, frames.shape[1])), np.cumsum(frames, axis=0)])
    return (csum[starts + segment_length] - csum[starts]) / segment_length


def embed_utterance(frames: np.ndarray, embedder: Embedder, num_segments: int, segment_length: int) -> np.ndarray:
    return l2_normalize(embedder(segment_features(frames, num_segments, segment_length)))


def score_trial(trial: Trial, embedder: Embedder, num_segments: int = 10, segment_length: int = 20) -> float:
    """Negated mean pairwise distance between the two utterances' segment embeddings."""
    emb_a = embed_utterance(trial.utterance_a, embedder, num_segments, segment_length)
    emb_b = embed_utterance(trial.utterance_b, embedder, num_segments, segment_length)
    dist, _ = pairwise_distance(emb_a, emb_b)
    return -float(np.mean(dist))


def score_trials(
    trials: Sequence[Trial],
    embedder: Embedder,
    num_segments: int = 10,
    segment_length: int = 20,
    workers: int = 1,
) -> np.ndarray:
    """Scores in trial order; ``workers > 1`` fans out over a thread pool."""

    def one(trial: Trial) -> float:
        return score_trial(trial, embedder, num_segments, segment_length)

    if workers <= 1:
        return np.array([one(t) for t in trials], dtype=np.float64)
    # worker threads start with an empty context; carry over the active counter
    context = contextvars.copy_context()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.array(list(pool.map(lambda t: context.copy().run(one, t), trials)), dtype=np.float64)


def _check(scores: ScoreSet) -> tuple[np.ndarray, np.ndarray]:
    tar = np.sort(np.asarray(scores.target_scores, dtype=np.float64))
    non = np.sort(np.asarray(scores.nontarget_scores, dtype=np.float64))
    if len(tar) == 0 or len(non) == 0:
        raise EvaluationError("EER needs at least one target and one non-target score")
    return tar, non


def det_curve(scores: ScoreSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Operating points at every distinct score.

    At threshold ``t`` a trial is accepted when its score is ``>= t``:
    ``FAR = P(nontarget >= t)`` and ``FRR = P(target < t)``.
    """
    tar, non = _check(scores)
    thresholds = np.unique(np.concatenate([tar, non]))
    far = 1.0 - np.searchsorted(non, thresholds, side="left") / len(non)
    frr = np.searchsorted(tar, thresholds, side="left") / len(tar)
    return thresholds, far, frr


def compute_eer(scores: ScoreSet) -> tuple[float, float]:
    """Equal error rate and the threshold where FAR and FRR cross.

    The ROC polyline runs from (FAR=1, FRR=0) through the operating point of
    each distinct score to (FAR=0, FRR=1); the crossing is linearly
    interpolated between the two adjacent points that bracket it.
    """
    thresholds, far, frr = det_curve(scores)
    far = np.concatenate([[1.0], far, [0.0]])
    frr = np.concatenate([[0.0], frr, [1.0]])
    thr = np.concatenate([[thresholds[0]], thresholds, [thresholds[-1]]])
    gap = far - frr
    k = int(np.flatnonzero(gap <= 0)[0])
    if gap[k] == 0:
        return float(far[k]), float(thr[k])
    frac = gap[k - 1] / (gap[k - 1] - gap[k])
    eer = far[k - 1] + frac * (far[k] - far[k - 1])
    threshold = thr[k - 1] + frac * (thr[k] - thr[k - 1])
    return float(eer), float(threshold)


def build_trials(test_dataset, num_trials: int, seed: int) -> list[Trial]:
    """Alternating target / non-target pairs drawn from the held-out classes.

    Target pairs use two distinct utterances of one class; non-target pairs
    use utterances of two different classes.
    """
    labels = np.asarray(test_dataset.labels)
    classes = np.unique(labels)
    if len(classes) < 2:
        raise EvaluationError("trials need at least two test classes")
    by_class = {int(c): np.flatnonzero(labels == c) for c in classes}
    multi = np.array([c for c in classes if len(by_class[int(c)]) >= 2])
    if len(multi) == 0:
        raise EvaluationError("no test class has two utterances for a target trial")
    rng = np.random.default_rng(seed)
    trials = []
    for i in range(num_trials):
        if i % 2 == 0:
            c = int(rng.choice(multi))
            a, b = rng.choice(by_class[c], size=2, replace=False)
        else:
            ca, cb = rng.choice(classes, size=2, replace=False)
            a, b = rng.choice(by_class[int(ca)]), rng.choice(by_class[int(cb)])
        seq = test_dataset.sequences
        trials.append(Trial(seq[int(a)], seq[int(b)], i % 2 == 0, int(labels[a]), int(labels[b])))
    return trials


def write_scores_csv(path, trials: Sequence[Trial], scores) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["trial_id", "is_target", "score"])
        for i, (trial, score) in enumerate(zip(trials, scores)):
            writer.writerow([i, int(trial.is_target), repr(float(score))])


def write_det_csv(path, scores: ScoreSet) -> None:
    thresholds, far, frr = det_curve(scores)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["threshold", "far", "frr"])
        for row in zip(thresholds, far, frr):
            writer.writerow([repr(float(v)) for v in row])
