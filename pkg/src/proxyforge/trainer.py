"""Desk-scale training loop.

A linear embedder maps mean-pooled frame crops to unit embeddings; the
chosen loss supplies gradients w.r.t. embeddings, proxies, alpha and beta;
vanilla SGD updates everything; after each epoch the test EER drives a
reduce-on-plateau learning-rate schedule.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .batching import SamplerConfig, epoch_iterator
from .data import SplitData, assert_disjoint
from .embedding import ALPHA_MIN, Minibatch, ProxyTable, SimilarityParams, init_proxies, l2_normalize
from .errors import TrainingDivergedError
from .evaluation import ScoreSet, build_trials, compute_eer, score_trials
from .losses import LOSS_NAMES, LossHyperparams, get_loss

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    loss_name: str = "mp"
    epochs: int = 20
    learning_rate: float = 0.2
    scheduler_factor: float = 0.8
    scheduler_patience: int = 3
    hyper: LossHyperparams = field(default_factory=LossHyperparams)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    seed: int = 0
    embedding_dim: int = 16
    segment_length: int = 20
    num_trials: int = 400
    num_segments: int = 10
    alpha_init: float = 10.0
    beta_init: float = 0.1

    def __post_init__(self) -> None:
        if self.loss_name not in LOSS_NAMES:
            raise ValueError(f"unknown loss {self.loss_name!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0 < self.scheduler_factor < 1:
            raise ValueError("scheduler_factor must lie in (0, 1)")
        if self.scheduler_patience < 1:
            raise ValueError("scheduler_patience must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class ToyEmbedder:
    """``normalize(W x + b)``."""

    weight: np.ndarray
    bias: np.ndarray

    @classmethod
    def init(cls, feature_dim: int, embedding_dim: int, rng: np.random.Generator) -> "ToyEmbedder":
        weight = rng.standard_normal((embedding_dim, feature_dim)) / np.sqrt(feature_dim)
        return cls(weight, np.zeros(embedding_dim))

    def forward(self, features: np.ndarray) -> np.ndarray:
        """Pre-normalization outputs."""
        return np.atleast_2d(features) @ self.weight.T + self.bias

    def __call__(self, features: np.ndarray) -> np.ndarray:
        return l2_normalize(self.forward(features))


@dataclass
class TrainedModel:
    embedder: ToyEmbedder
    proxies: ProxyTable
    params: SimilarityParams

    def state(self) -> dict:
        return {
            "weight": self.embedder.weight,
            "bias": self.embedder.bias,
            "proxies": self.proxies.proxies,
            "alpha": self.params.alpha,
            "beta": self.params.beta,
        }

    def with_state(self, state: dict) -> "TrainedModel":
        return TrainedModel(
            ToyEmbedder(np.asarray(state["weight"]), np.asarray(state["bias"])),
            ProxyTable(state["proxies"], self.proxies.class_ids),
            SimilarityParams(float(state["alpha"]), float(state["beta"])),
        )

    def save(self, path, **extra) -> None:
        np.savez(path, class_ids=self.proxies.class_ids, **self.state(), **extra)

    @classmethod
    def load(cls, path) -> "TrainedModel":
        with np.load(path) as z:
            return cls(
                ToyEmbedder(z["weight"], z["bias"]),
                ProxyTable(z["proxies"], z["class_ids"]),
                SimilarityParams(float(z["alpha"]), float(z["beta"])),
            )


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    loss: float
    lr: float
    eer_percent: float


@dataclass
class TrainResult:
    model: TrainedModel
    log: list[EpochMetrics]

    @property
    def final_eer(self) -> float:
        return self.log[-1].eer_percent if self.log else math.nan

    @property
    def best_eer(self) -> float:
        return min((m.eer_percent for m in self.log), default=math.nan)


class PlateauScheduler:
    """Multiply the learning rate by ``factor`` after ``patience`` epochs without improvement.

    Improvement means a strictly lower metric than the best so far.  The
    non-improvement count restarts after every reduction.
    """

    def __init__(self, lr: float, factor: float = 0.8, patience: int = 3):
        self.lr = lr
        self.factor = factor
        self.patience = patience
        self.best = math.inf
        self.bad_epochs = 0

    def step(self, metric: float) -> float:
        if metric < self.best:
            self.best = metric
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs >= self.patience:
                self.lr *= self.factor
                self.bad_epochs = 0
        return self.lr


def sgd_step(params: dict, grads: dict, lr: float, alpha_min: float = ALPHA_MIN) -> dict:
    """``p - lr * g`` for every entry of ``params``.

    ``alpha`` is clamped to at least ``alpha_min`` and ``proxies`` rows are
    re-normalized to unit length after the update.  Returns a new dict.
    """
    out = {}
    for name, value in params.items():
        grad = grads.get(name)
        updated = value if grad is None else value - lr * np.asarray(grad)
        if np.ndim(updated) == 0:
            updated = float(updated)
        out[name] = updated
    if "alpha" in out:
        out["alpha"] = max(float(out["alpha"]), alpha_min)
    if "proxies" in out:
        out["proxies"] = l2_normalize(out["proxies"])
    return out


def initial_model(config: TrainConfig, feature_dim: int, class_ids) -> TrainedModel:
    rng = np.random.default_rng([config.seed, 0])
    embedder = ToyEmbedder.init(feature_dim, config.embedding_dim, rng)
    proxies = init_proxies(len(class_ids), config.embedding_dim, config.seed, class_ids=class_ids)
    return TrainedModel(embedder, proxies, SimilarityParams(config.alpha_init, config.beta_init))


def evaluate_eer(model: TrainedModel, trials, num_segments: int, segment_length: int, workers: int = 1) -> float:
    scores = score_trials(trials, model.embedder, num_segments, segment_length, workers)
    eer, _ = compute_eer(ScoreSet.from_trials(trials, scores))
    return eer


def train(config: TrainConfig, dataset: SplitData, workers: int = 1) -> TrainResult:
    """Run ``config.epochs`` epochs of sample -> embed -> loss -> SGD.

    Only ``dataset.train`` reaches the optimizer; ``dataset.test`` is used
    for the per-epoch EER (scored on ``workers`` threads).

    Raises:
        TrainingDivergedError: if a batch loss or gradient becomes non-finite.
    """
    assert_disjoint(dataset.train, dataset.test)
    train_set = dataset.train
    feature_dim = train_set.sequences[0].shape[1]
    model = initial_model(config, feature_dim, train_set.classes)
    loss_fn = get_loss(config.loss_name)
    trials = build_trials(dataset.test, config.num_trials, config.seed)
    scheduler = PlateauScheduler(config.learning_rate, config.scheduler_factor, config.scheduler_patience)
    crop_rng = np.random.default_rng([config.seed, 1])
    history: list[EpochMetrics] = []

    for epoch in range(1, config.epochs + 1):
        lr = scheduler.lr
        losses = []
        for batch in epoch_iterator(train_set, config.sampler, epoch):
            feats = train_set.crop_means(batch.indices, config.segment_length, crop_rng)
            raw = model.embedder.forward(feats)
            out = loss_fn(Minibatch(raw, batch.labels, batch.query_positions), model.proxies, model.params, config.hyper)
            if not (np.isfinite(out.value) and np.all(np.isfinite(out.grad_embeddings))):
                raise TrainingDivergedError(epoch)
            grads = {
                "weight": out.grad_embeddings.T @ feats,
                "bias": out.grad_embeddings.sum(axis=0),
                "proxies": out.grad_proxies,
                "alpha": out.grad_alpha,
                "beta": out.grad_beta,
            }
            model = model.with_state(sgd_step(model.state(), grads, lr))
            losses.append(out.value)
        eer = 100.0 * evaluate_eer(model, trials, config.num_segments, config.segment_length, workers)
        mean_loss = float(np.mean(losses))
        history.append(EpochMetrics(epoch, mean_loss, lr, eer))
        scheduler.step(eer)
        log.info("epoch %d loss %.4f lr %.4g EER %.2f%%", epoch, mean_loss, lr, eer)
    return TrainResult(model, history)


def write_metrics_csv(path, history: list[EpochMetrics]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "loss", "lr", "eer_percent"])
        for m in history:
            writer.writerow([m.epoch, repr(m.loss), repr(m.lr), repr(m.eer_percent)])
