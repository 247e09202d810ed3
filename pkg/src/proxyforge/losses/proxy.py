"""Proxy NCA and Proxy Anchor baselines."""

from __future__ import annotations

import numpy as np

from ..embedding import ProxyTable, pairwise_distance, pairwise_dot
from ..errors import EmptyDenominatorError
from ._common import GradAccumulator, LossHyperparams, LossOutput, log_sum_exp


def proxy_nca_loss(instances: np.ndarray, labels, proxies: ProxyTable) -> LossOutput:
    """Mean of ``d(x, p_own) + log sum_{other classes} exp(-d(x, p))``.

    ``d`` is the Euclidean distance between length-normalized vectors, and
    the denominator covers the proxies of every class other than the
    instance's own.
    """
    if len(proxies) < 2:
        raise EmptyDenominatorError("Proxy NCA needs at least two proxies")
    labels = np.asarray(labels)
    acc = GradAccumulator(instances, proxies)
    n = acc.x.shape[0]
    own = proxies.rows_for(labels)
    dist, diff = pairwise_distance(acc.x, acc.p)
    is_own = np.zeros(dist.shape, dtype=bool)
    is_own[np.arange(n), own] = True
    lse, weights = log_sum_exp(-dist, ~is_own)
    value = np.mean(dist[np.arange(n), own] + lse)

    g_dist = np.where(is_own, 1.0, -weights) / n
    with np.errstate(invalid="ignore", divide="ignore"):
        direction = np.where(dist[..., None] > 0, diff / dist[..., None], 0.0)
    weighted = g_dist[..., None] * direction
    acc.gx += weighted.sum(axis=1)
    acc.gp -= weighted.sum(axis=0)
    return acc.finish(value)


def proxy_anchor_loss(
    instances: np.ndarray, labels, proxies: ProxyTable, hyper: LossHyperparams | None = None
) -> LossOutput:
    """Proxy Anchor loss on plain cosine similarity.

    Positive part averaged over proxies whose class is present in the batch,
    negative part over all proxies; ``hyper.anchor_scale`` and
    ``hyper.anchor_margin`` are the scale and margin.
    """
    hyper = hyper or LossHyperparams()
    scale, margin = hyper.anchor_scale, hyper.anchor_margin
    labels = np.asarray(labels)
    acc = GradAccumulator(instances, proxies)
    cos = pairwise_dot(acc.x, acc.p)
    positive = labels[:, None] == proxies.class_ids[None, :]

    # rows are proxies
    pos_lse, pos_w = log_sum_exp(-scale * (cos.T - margin), positive.T, with_one=True)
    neg_lse, neg_w = log_sum_exp(scale * (cos.T + margin), ~positive.T, with_one=True)
    with_pos = positive.any(axis=0)
    n_pos = max(int(with_pos.sum()), 1)
    n_all = len(proxies)
    value = pos_lse[with_pos].sum() / n_pos + neg_lse.sum() / n_all

    g_cos = (-scale * pos_w.T) / n_pos + (scale * neg_w.T) / n_all
    acc.gx += g_cos @ acc.p
    acc.gp += g_cos.T @ acc.x
    return acc.finish(value)
