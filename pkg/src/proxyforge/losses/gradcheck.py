"""Central finite-difference verification of the analytic gradients."""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from ..embedding import Minibatch, ProxyTable, SimilarityParams
from . import get_loss
from ._common import LossHyperparams, LossOutput

GROUPS = ("embeddings", "proxies", "alpha", "beta")


def finite_difference_gradient(
    loss_fn: Callable[[dict], float], inputs: Mapping[str, np.ndarray | float], epsilon: float = 1e-5
) -> dict[str, np.ndarray]:
    """``(f(x + eps) - f(x - eps)) / 2 eps`` for every coordinate of every input.

    ``inputs`` maps names to arrays or scalars; ``loss_fn`` receives a dict of
    the same shape.  Inputs are never modified in place.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    base = {k: np.array(v, dtype=np.float64) for k, v in inputs.items()}
    grads = {}
    for name, value in base.items():
        grad = np.zeros_like(value)
        flat = grad.reshape(-1)
        for i in range(value.size):
            shifted = dict(base)
            plus = value.copy()
            plus.reshape(-1)[i] += epsilon
            shifted[name] = plus
            f_plus = loss_fn(shifted)
            minus = value.copy()
            minus.reshape(-1)[i] -= epsilon
            shifted[name] = minus
            f_minus = loss_fn(shifted)
            flat[i] = (f_plus - f_minus) / (2.0 * epsilon)
        grads[name] = grad
    return grads


# Gradients below this magnitude are compared on an absolute scale; shift
# invariant losses have an exactly-zero beta gradient whose finite-difference
# estimate is pure round-off.
SCALE_FLOOR = 1e-4


def relative_error(analytic, numeric) -> float:
    """Largest absolute discrepancy, relative to the larger gradient magnitude.

    The magnitude is floored at :data:`SCALE_FLOOR`.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.max(np.abs(analytic), initial=0.0), np.max(np.abs(numeric), initial=0.0))
    err = np.max(np.abs(analytic - numeric), initial=0.0)
    return float(err / max(scale, SCALE_FLOOR))


def random_configuration(
    rng: np.random.Generator, dim: int = 8, batch_classes: int = 6, num_proxies: int = 10
) -> tuple[Minibatch, ProxyTable, SimilarityParams]:
    """A random, non-normalized batch with 2-3 shots per class and random queries."""
    classes = rng.choice(num_proxies, size=batch_classes, replace=False)
    shots = rng.integers(2, 4, size=batch_classes)
    labels = np.repeat(classes, shots)
    order = rng.permutation(len(labels))
    labels = labels[order]
    queries = np.array([rng.choice(np.flatnonzero(labels == c)) for c in classes])
    instances = rng.standard_normal((len(labels), dim))
    proxies = ProxyTable(rng.standard_normal((num_proxies, dim)), np.arange(num_proxies))
    params = SimilarityParams(alpha=float(rng.uniform(2.0, 15.0)), beta=float(rng.uniform(-0.2, 0.3)))
    return Minibatch(instances, labels, queries), proxies, params


def _as_inputs(batch: Minibatch, proxies: ProxyTable, params: SimilarityParams) -> dict:
    return {
        "embeddings": batch.instances,
        "proxies": proxies.proxies,
        "alpha": params.alpha,
        "beta": params.beta,
    }


def _rebuild(inputs: dict, batch: Minibatch, proxies: ProxyTable):
    return (
        Minibatch(inputs["embeddings"], batch.labels, batch.query_indices),
        ProxyTable(inputs["proxies"], proxies.class_ids),
        SimilarityParams(float(inputs["alpha"]), float(inputs["beta"])),
    )


def check_configuration(
    fn: Callable[..., LossOutput],
    batch: Minibatch,
    proxies: ProxyTable,
    params: SimilarityParams,
    hyper: LossHyperparams,
    epsilon: float = 1e-5,
) -> dict[str, float]:
    """Relative error per parameter group for one configuration."""
    out = fn(batch, proxies, params, hyper)

    def value(inputs: dict) -> float:
        return fn(*_rebuild(inputs, batch, proxies), hyper).value

    numeric = finite_difference_gradient(value, _as_inputs(batch, proxies, params), epsilon)
    analytic = {
        "embeddings": out.grad_embeddings,
        "proxies": out.grad_proxies,
        "alpha": out.grad_alpha,
        "beta": out.grad_beta,
    }
    return {g: relative_error(analytic[g], numeric[g]) for g in GROUPS}


def check_gradients(
    loss_name: str,
    seed: int = 0,
    trials: int = 20,
    epsilon: float = 1e-5,
    hyper: LossHyperparams | None = None,
) -> dict[str, float]:
    """Worst relative error per parameter group over ``trials`` random configurations."""
    fn = get_loss(loss_name)
    hyper = hyper or LossHyperparams()
    rng = np.random.default_rng(seed)
    worst = dict.fromkeys(GROUPS, 0.0)
    for _ in range(trials):
        batch, proxies, params = random_configuration(rng)
        errors = check_configuration(fn, batch, proxies, params, hyper, epsilon)
        for g, e in errors.items():
            worst[g] = max(worst[g], e)
    return worst
