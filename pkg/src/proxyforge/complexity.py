"""Empirical check of per-epoch training cost.

One "comparison" is a single similarity or distance evaluation between two
vectors; building centroids is free.  :func:`count_epoch_comparisons` runs
a real epoch of a loss with a :class:`ComparisonCounter` attached and
returns the tally next to a closed-form prediction, and
:func:`fit_scaling` estimates the log-log growth rate over a grid.

Per batch with ``c`` classes of ``m_k`` instances (``n`` in total) and
``P`` proxies the predictions are::

    mp, mmp               c*c + c*(P - c) + c*c  (query/centroid, query/unmasked proxy, regulator)
    proxy_nca, anchor     n*P
    triplet               2 * sum_k m_k (m_k - 1) (n - m_k)   (two distances per triplet)
    prototypical, angular c*c
    ge2e                  n*(c + 1)
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .batching import SamplerConfig, batches_per_epoch, epoch_iterator
from .embedding import Minibatch, ProxyTable, SimilarityParams
from .errors import ProbeError, SamplerError
from .instrument import ComparisonCounter, counting
from .losses import LossHyperparams, get_loss

__all__ = [
    "ComparisonCounter",
    "ProbeResult",
    "ScalingReport",
    "count_epoch_comparisons",
    "fit_scaling",
    "fit_slope",
    "predict_batch_comparisons",
    "predict_epoch_comparisons",
    "write_scaling_csv",
]


def predict_batch_comparisons(loss_name: str, class_counts, num_proxies: int, lambda_balance: float = 0.3) -> int:
    m = np.asarray(class_counts, dtype=np.int64)
    c, n, p = len(m), int(m.sum()), int(num_proxies)
    get_loss(loss_name)
    if loss_name in ("mp", "mmp"):
        regulator = c * c if lambda_balance > 0 else 0
        return c * c + c * (p - c) + regulator
    if loss_name in ("proxy_nca", "proxy_anchor"):
        return n * p
    if loss_name == "triplet":
        return int(2 * np.sum(m * (m - 1) * (n - m)))
    if loss_name in ("prototypical", "angular_prototypical"):
        return c * c
    if loss_name == "ge2e":
        return n * (c + 1)
    raise ProbeError(f"no prediction for {loss_name!r}")


def _probe_labels(n: int, p: int) -> np.ndarray:
    """``n`` instances spread as evenly as possible over ``p`` classes."""
    return np.sort(np.arange(n) % p)


def _check(n: int, b: int, p: int, m: int) -> SamplerConfig:
    if min(n, b, p, m) < 0:
        raise SamplerError("sizes must be non-negative")
    if p < 1:
        raise SamplerError("need at least one class")
    config = SamplerConfig("balanced", m, b, 0)
    if config.classes_per_batch > p:
        raise SamplerError(f"batch needs {config.classes_per_batch} classes, only {p} exist")
    if n and n // p < m:
        raise SamplerError(f"{n} instances over {p} classes leave fewer than {m} per class")
    return config


def predict_epoch_comparisons(loss_name: str, n: int, b: int, p: int, m: int, lambda_balance: float = 0.3) -> int:
    """Closed form for a balanced epoch: batches per epoch times the per-batch cost."""
    config = _check(n, b, p, m)
    if n == 0:
        return 0
    batches = batches_per_epoch(n, p, config)
    per_batch = predict_batch_comparisons(loss_name, [m] * config.classes_per_batch, p, lambda_balance)
    return batches * per_batch


@dataclass(frozen=True)
class ProbeResult:
    count: int
    predicted: int


def count_epoch_comparisons(
    loss_name: str, n: int, b: int, p: int, m: int, seed: int = 0, dim: int = 8, hyper: LossHyperparams | None = None
) -> ProbeResult:
    """Run one instrumented balanced epoch over ``n`` instances of ``p`` classes.

    Args:
        loss_name: registry name of the loss.
        n: training-set size.
        b: batch size (``b / m`` classes per batch).
        p: number of classes, hence of proxies.
        m: instances per class in a batch.

    Raises:
        SamplerError: when no balanced batch can be drawn.
    """
    hyper = hyper or LossHyperparams()
    fn = get_loss(loss_name)
    predicted = predict_epoch_comparisons(loss_name, n, b, p, m, hyper.lambda_balance)
    if n == 0:
        return ProbeResult(0, 0)
    config = SamplerConfig("balanced", m, b, seed)
    rng = np.random.default_rng(seed)
    labels = _probe_labels(n, p)
    instances = rng.standard_normal((n, dim))
    proxies = ProxyTable(rng.standard_normal((p, dim)), np.arange(p))
    params = SimilarityParams()
    counter = ComparisonCounter()
    for batch in epoch_iterator(labels, config, epoch=0):
        mb = Minibatch(instances[batch.indices], batch.labels, batch.query_positions)
        with counting(counter):
            fn(mb, proxies, params, hyper)
    return ProbeResult(counter.count, predicted)


def fit_slope(values, counts) -> tuple[float, float]:
    """Least-squares slope of ``log(count)`` on ``log(value)`` and the RMS residual."""
    values = np.asarray(values, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)
    if len(values) < 4 or len(np.unique(values)) < 2:
        raise ProbeError("need at least 4 grid points with distinct values")
    if np.any(values <= 0) or np.any(counts <= 0):
        raise ProbeError("values and counts must be positive for a log-log fit")
    x, y = np.log(values), np.log(counts)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return float(slope), float(np.sqrt(np.mean(resid**2)))


@dataclass(frozen=True)
class ScalingReport:
    loss: str
    param: str
    values: tuple
    counts: tuple
    slope: float
    residual: float


def fit_scaling(loss_name: str, parameter_grid: dict, seed: int = 0) -> ScalingReport:
    """Sweep one of ``N``/``B``/``P``/``M`` with the others fixed and fit the growth rate.

    ``parameter_grid`` looks like ``{"param": "N", "values": [...],
    "fixed": {"B": 8, "P": 16, "M": 2}}``.  With ``"full_batch": true`` every
    epoch is a single batch holding the whole training set (``B = N`` and
    ``M = N / P``), i.e. exhaustive enumeration.
    """
    param = parameter_grid.get("param")
    values = list(parameter_grid.get("values", []))
    fixed = dict(parameter_grid.get("fixed", {}))
    if param not in ("N", "B", "P", "M"):
        raise ProbeError(f"cannot sweep {param!r}")
    if len(values) < 4:
        raise ProbeError("need at least 4 grid values")
    counts = []
    for v in values:
        sizes = {**fixed, param: v}
        if parameter_grid.get("full_batch"):
            if "N" not in sizes or "P" not in sizes:
                raise ProbeError("full_batch sweeps need N and P")
            sizes["B"] = sizes["N"]
            sizes["M"] = sizes["N"] // sizes["P"]
        try:
            result = count_epoch_comparisons(loss_name, sizes["N"], sizes["B"], sizes["P"], sizes["M"], seed=seed)
        except KeyError as exc:
            raise ProbeError(f"grid is missing a value for {exc.args[0]}") from None
        if result.count != result.predicted:
            raise ProbeError(f"{loss_name} at {sizes}: counted {result.count}, predicted {result.predicted}")
        counts.append(result.count)
    slope, residual = fit_slope(values, counts)
    return ScalingReport(loss_name, param, tuple(values), tuple(counts), slope, residual)


def write_scaling_csv(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["loss", "param", "value", "count"])
        for rep in reports:
            for v, c in zip(rep.values, rep.counts):
                writer.writerow([rep.loss, rep.param, v, c])
