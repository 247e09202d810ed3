"""Class-structured minibatch sampling.

Two modes:

``balanced``
    ``B / M`` classes with exactly ``M`` instances each (the "-Balance"
    variants of MP/MMP).
``variable``
    ``floor(B / 2.5)`` classes, each with 2 or 3 instances drawn uniformly,
    so that ``B`` is the *expected* batch size.

Either way one instance per class is reserved as that class's query.
Samplers work on label arrays; any object with a ``labels`` attribute is
accepted as a dataset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import SamplerError

VARIABLE_SHOTS = (2, 3)
VARIABLE_MEAN_SHOTS = 2.5


@dataclass(frozen=True)
class SamplerConfig:
    mode: str = "balanced"
    shots_per_class: int = 2
    expected_batch_size: int = 8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("balanced", "variable"):
            raise SamplerError(f"unknown sampler mode {self.mode!r}")
        if self.mode == "balanced":
            if self.shots_per_class < 2:
                raise SamplerError("balanced sampling needs at least 2 shots per class")
            if self.expected_batch_size % self.shots_per_class:
                raise SamplerError("batch size must be divisible by shots_per_class")
        if self.expected_batch_size < 1:
            raise SamplerError("batch size must be positive")

    @property
    def classes_per_batch(self) -> int:
        if self.mode == "balanced":
            return self.expected_batch_size // self.shots_per_class
        return int(math.floor(self.expected_batch_size / VARIABLE_MEAN_SHOTS))


@dataclass(frozen=True)
class SampledBatch:
    """Dataset indices of one minibatch.

    ``query_positions[k]`` is the position within ``indices`` of the query
    reserved for the k-th sampled class.
    """

    indices: np.ndarray
    labels: np.ndarray
    query_positions: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)


def _labels_of(dataset) -> np.ndarray:
    return np.asarray(getattr(dataset, "labels", dataset))


def _members(labels: np.ndarray) -> dict[int, np.ndarray]:
    classes, inverse = np.unique(labels, return_inverse=True)
    order = np.argsort(inverse, kind="stable")
    bounds = np.cumsum(np.bincount(inverse, minlength=len(classes)))[:-1]
    return {int(c): idx for c, idx in zip(classes, np.split(order, bounds))}


def _assemble(chosen: list[tuple[int, np.ndarray]], rng: np.random.Generator) -> SampledBatch:
    indices, labels, queries = [], [], []
    offset = 0
    for cls, picked in chosen:
        indices.append(picked)
        labels.append(np.full(len(picked), cls, dtype=np.int64))
        queries.append(offset + int(rng.integers(len(picked))))
        offset += len(picked)
    return SampledBatch(np.concatenate(indices), np.concatenate(labels), np.array(queries, dtype=np.int64))


def _shot_counts(config: SamplerConfig, num_classes: int, rng: np.random.Generator) -> np.ndarray:
    if config.mode == "balanced":
        return np.full(num_classes, config.shots_per_class)
    return rng.choice(VARIABLE_SHOTS, size=num_classes)


def _min_shots(config: SamplerConfig) -> int:
    return config.shots_per_class if config.mode == "balanced" else max(VARIABLE_SHOTS)


def _eligible(members: dict[int, np.ndarray], config: SamplerConfig) -> np.ndarray:
    need = _min_shots(config)
    eligible = np.array(sorted(c for c, idx in members.items() if len(idx) >= need), dtype=np.int64)
    if len(eligible) < config.classes_per_batch or config.classes_per_batch < 1:
        raise SamplerError(
            f"need {config.classes_per_batch} classes with >= {need} instances, "
            f"dataset has {len(eligible)}"
        )
    return eligible


def _sample(dataset, config: SamplerConfig, rng: np.random.Generator) -> SampledBatch:
    members = _members(_labels_of(dataset))
    eligible = _eligible(members, config)
    classes = rng.choice(eligible, size=config.classes_per_batch, replace=False)
    shots = _shot_counts(config, len(classes), rng)
    chosen = [(int(c), rng.choice(members[int(c)], size=int(m), replace=False)) for c, m in zip(classes, shots)]
    return _assemble(chosen, rng)


def sample_balanced(dataset, config: SamplerConfig, rng: np.random.Generator | None = None) -> SampledBatch:
    """One batch of ``B / M`` classes with ``M`` distinct instances each."""
    if config.mode != "balanced":
        config = SamplerConfig("balanced", config.shots_per_class, config.expected_batch_size, config.seed)
    return _sample(dataset, config, rng if rng is not None else np.random.default_rng(config.seed))


def sample_variable(dataset, config: SamplerConfig, rng: np.random.Generator | None = None) -> SampledBatch:
    """One batch of ``floor(B / 2.5)`` classes with 2 or 3 instances each."""
    if config.mode != "variable":
        config = SamplerConfig("variable", config.shots_per_class, config.expected_batch_size, config.seed)
    return _sample(dataset, config, rng if rng is not None else np.random.default_rng(config.seed))


class _Cycler:
    """Draws distinct items without replacement, reshuffling when exhausted."""

    def __init__(self, items: np.ndarray, rng: np.random.Generator):
        self.items = np.asarray(items)
        self.rng = rng
        self.queue: list = []

    def take(self, k: int) -> np.ndarray:
        picked: list = []
        while len(picked) < k:
            if not self.queue:
                fresh = [x for x in self.rng.permutation(self.items).tolist() if x not in picked]
                self.queue.extend(fresh)
            picked.append(self.queue.pop(0))
        return np.array(picked, dtype=self.items.dtype)


def batches_per_epoch(num_instances: int, num_classes: int, config: SamplerConfig) -> int:
    """Enough batches to visit every class once and every instance about once."""
    if num_instances == 0:
        return 0
    by_classes = math.ceil(num_classes / config.classes_per_batch)
    by_instances = num_instances // config.expected_batch_size
    return max(by_classes, by_instances, 1)


def epoch_iterator(dataset, config: SamplerConfig, epoch: int = 0) -> Iterator[SampledBatch]:
    """Minibatches for one epoch, deterministic in ``(config.seed, epoch)``.

    Classes are drawn without replacement until every class has been
    visited, then reshuffled; instances within a class likewise.
    """
    labels = _labels_of(dataset)
    if len(labels) == 0:
        return
    members = _members(labels)
    eligible = _eligible(members, config)
    rng = np.random.default_rng([config.seed, epoch])
    class_cycle = _Cycler(eligible, rng)
    instance_cycles = {int(c): _Cycler(members[int(c)], rng) for c in eligible}
    for _ in range(batches_per_epoch(len(labels), len(eligible), config)):
        classes = class_cycle.take(config.classes_per_batch)
        shots = _shot_counts(config, len(classes), rng)
        chosen = [(int(c), instance_cycles[int(c)].take(int(m))) for c, m in zip(classes, shots)]
        yield _assemble(chosen, rng)
