"""Synthetic open-set corpus standing in for a speaker dataset.

Every class has a random unit mean direction inside a ``latent_dim``
dimensional subspace of the feature space (the "speaker subspace"); noise
is isotropic over all feature dimensions, so an embedder has to learn the
subspace to generalize to unseen classes.  An
utterance is a sequence of frames scattered around an utterance centre,
which itself is scattered around its class mean; both scatters use
``cluster_spread`` as standard deviation per coordinate.  Train and test
classes are disjoint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import l2_normalize


@dataclass(frozen=True)
class SyntheticDataset:
    num_classes: int = 50
    instances_per_class: int = 20
    feature_dim: int = 64
    sequence_length_range: tuple[int, int] = (40, 80)
    cluster_spread: float = 0.12
    seed: int = 0
    num_test_classes: int = 10
    test_instances_per_class: int = 20
    latent_dim: int = 16

    def __post_init__(self) -> None:
        if self.feature_dim < 2:
            raise ValueError("feature_dim must be >= 2")
        if not 2 <= self.latent_dim <= self.feature_dim:
            raise ValueError("latent_dim must lie in [2, feature_dim]")
        if self.cluster_spread < 0:
            raise ValueError("cluster_spread must be >= 0")
        lo, hi = self.sequence_length_range
        if lo < 1 or hi < lo:
            raise ValueError("bad sequence_length_range")


@dataclass
class Dataset:
    sequences: list
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    def utterance_means(self) -> np.ndarray:
        return np.stack([s.mean(axis=0) for s in self.sequences])

    def crop_means(self, indices, length: int, rng: np.random.Generator) -> np.ndarray:
        """Mean frame of a random ``length``-frame crop of each utterance."""
        out = []
        for i in indices:
            seq = self.sequences[int(i)]
            span = min(length, len(seq))
            start = int(rng.integers(len(seq) - span + 1))
            out.append(seq[start:start + span].mean(axis=0))
        return np.stack(out)


@dataclass
class SplitData:
    """Training and held-out test classes (disjoint)."""

    train: Dataset
    test: Dataset

    def __post_init__(self) -> None:
        assert_disjoint(self.train, self.test)


def assert_disjoint(train: Dataset, test: Dataset) -> None:
    shared = np.intersect1d(train.classes, test.classes)
    if len(shared):
        raise ValueError(f"train and test share classes {shared.tolist()}")


def _make_split(rng, means, class_ids, per_class, cfg: SyntheticDataset) -> Dataset:
    lo, hi = cfg.sequence_length_range
    sequences, labels = [], []
    for mean, cls in zip(means, class_ids):
        for _ in range(per_class):
            centre = mean + cfg.cluster_spread * rng.standard_normal(cfg.feature_dim)
            length = int(rng.integers(lo, hi + 1))
            frames = centre + cfg.cluster_spread * rng.standard_normal((length, cfg.feature_dim))
            sequences.append(frames)
            labels.append(cls)
    return Dataset(sequences, np.array(labels, dtype=np.int64))


def generate_dataset(cfg: SyntheticDataset) -> SplitData:
    """Deterministic in ``cfg.seed``; test class ids follow the train ids."""
    rng = np.random.default_rng(cfg.seed)
    total = cfg.num_classes + cfg.num_test_classes
    basis, _ = np.linalg.qr(rng.standard_normal((cfg.feature_dim, cfg.latent_dim)))
    means = l2_normalize(rng.standard_normal((total, cfg.latent_dim))) @ basis.T
    ids = np.arange(total)
    train = _make_split(rng, means[: cfg.num_classes], ids[: cfg.num_classes], cfg.instances_per_class, cfg)
    test = _make_split(rng, means[cfg.num_classes:], ids[cfg.num_classes:], cfg.test_instances_per_class, cfg)
    return SplitData(train, test)


def nearest_class_mean_accuracy(dataset: Dataset) -> float:
    """Accuracy of assigning each utterance to the closest class mean."""
    feats = dataset.utterance_means()
    classes = dataset.classes
    centres = np.stack([feats[dataset.labels == c].mean(axis=0) for c in classes])
    d = ((feats[:, None, :] - centres[None, :, :]) ** 2).sum(axis=-1)
    return float(np.mean(classes[np.argmin(d, axis=1)] == dataset.labels))
