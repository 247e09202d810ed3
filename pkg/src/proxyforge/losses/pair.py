"""Pair- and centroid-based baselines: Triplet, Prototypical, Angular
Prototypical and GE2E (softmax variant).

None of these touch proxies; the registry pads their proxy gradient with
zeros.
"""

from __future__ import annotations

import numpy as np

from ..embedding import Minibatch, SimilarityParams, pairwise_distance, pairwise_dot, rowwise_dot, rowwise_sq_distance
from ..errors import EmptyDenominatorError, NoTripletError
from ._common import GradAccumulator, LossHyperparams, LossOutput, log_sum_exp


def enumerate_triplets(labels) -> np.ndarray:
    """All ``(anchor, positive, negative)`` index triples, shape ``(T, 3)``."""
    labels = np.asarray(labels)
    idx = np.arange(len(labels))
    chunks = []
    for a in idx:
        pos = idx[(labels == labels[a]) & (idx != a)]
        neg = idx[labels != labels[a]]
        if len(pos) == 0 or len(neg) == 0:
            continue
        pp, nn = np.meshgrid(pos, neg, indexing="ij")
        chunks.append(np.stack([np.full(pp.size, a), pp.ravel(), nn.ravel()], axis=1))
    if not chunks:
        return np.zeros((0, 3), dtype=np.int64)
    return np.concatenate(chunks).astype(np.int64)


def triplet_loss(instances: np.ndarray, labels, hyper: LossHyperparams | None = None) -> LossOutput:
    """Mean hinge ``max(0, |a-p|^2 - |a-n|^2 + margin)`` over every valid triplet."""
    hyper = hyper or LossHyperparams()
    triplets = enumerate_triplets(labels)
    if len(triplets) == 0:
        raise NoTripletError("batch holds no (anchor, positive, negative) triple")
    acc = GradAccumulator(instances)
    a, p, n = triplets.T
    d_ap, diff_ap = rowwise_sq_distance(acc.x[a], acc.x[p])
    d_an, diff_an = rowwise_sq_distance(acc.x[a], acc.x[n])
    hinge = d_ap - d_an + hyper.triplet_margin
    active = (hinge > 0).astype(np.float64)[:, None] / len(triplets)
    value = np.mean(np.maximum(hinge, 0.0))

    np.add.at(acc.gx, a, 2.0 * active * (diff_ap - diff_an))
    np.add.at(acc.gx, p, -2.0 * active * diff_ap)
    np.add.at(acc.gx, n, 2.0 * active * diff_an)
    return acc.finish(value)


def _require_two_classes(batch: Minibatch) -> None:
    if batch.num_classes < 2:
        raise EmptyDenominatorError("need at least two classes in the batch")


def prototypical_loss(batch: Minibatch, params: SimilarityParams | None = None) -> LossOutput:
    """Cross-entropy of each query over centroids, logits ``-|q - c|^2``.

    Centroids are plain means of the normalized support instances (no
    re-normalization), as in the original formulation.  ``params`` is
    accepted for a uniform signature and ignored.
    """
    _require_two_classes(batch)
    acc = GradAccumulator(batch.instances)
    support = batch.support_matrix()
    protos = support @ acc.x
    q = acc.x[batch.query_indices]
    dist, diff = pairwise_distance(q, protos)
    logits = -dist * dist
    c = batch.num_classes
    lse, weights = log_sum_exp(logits)
    value = np.mean(-np.diag(logits) + lse)

    g = weights / c
    g[np.diag_indices(c)] -= 1.0 / c
    acc.gx[batch.query_indices] += np.einsum("kj,kjd->kd", g, -2.0 * diff)
    acc.gx += support.T @ np.einsum("kj,kjd->jd", g, 2.0 * diff)
    return acc.finish(value)


def angular_prototypical_loss(batch: Minibatch, params: SimilarityParams) -> LossOutput:
    """Cross-entropy of each query over unit centroids under the scaled cosine."""
    _require_two_classes(batch)
    acc = GradAccumulator(batch.instances)
    cent, cent_back = acc.centroids(batch.support_matrix())
    q = acc.x[batch.query_indices]
    dots = pairwise_dot(q, cent)
    sims = params.alpha * (dots - params.beta)
    c = batch.num_classes
    lse, weights = log_sum_exp(sims)
    value = np.mean(-np.diag(sims) + lse)

    g = weights / c
    g[np.diag_indices(c)] -= 1.0 / c
    d = acc.similarity_backward(dots, g, params)
    acc.gx[batch.query_indices] += d @ cent
    cent_back(d.T @ q)
    return acc.finish(value)


def ge2e_loss(batch: Minibatch, params: SimilarityParams) -> LossOutput:
    """GE2E softmax loss: every instance against every class centroid.

    The instance's own-class centroid leaves the instance itself out; the
    other centroids average all their members.  The full-class centroid of
    the instance's own class is still evaluated (and then replaced), so an
    instance costs ``C + 1`` comparisons.
    """
    _require_two_classes(batch)
    acc = GradAccumulator(batch.instances)
    labels = batch.labels
    classes = batch.classes
    n, c = len(labels), len(classes)
    member = labels[None, :] == classes[:, None]
    own = np.argmax(member, axis=0)

    full_support = member / member.sum(axis=1, keepdims=True)
    cent_full, back_full = acc.centroids(full_support)
    same = labels[:, None] == labels[None, :]
    np.fill_diagonal(same, False)
    self_support = same / same.sum(axis=1, keepdims=True)
    cent_self, back_self = acc.centroids(self_support)

    dots_full = pairwise_dot(acc.x, cent_full)
    dots_self = rowwise_dot(acc.x, cent_self)
    sims = params.alpha * (dots_full - params.beta)
    rows = np.arange(n)
    sims[rows, own] = params.alpha * (dots_self - params.beta)
    lse, weights = log_sum_exp(sims)
    value = np.mean(-sims[rows, own] + lse)

    g = weights / n
    g[rows, own] -= 1.0 / n
    g_self = g[rows, own].copy()
    g[rows, own] = 0.0
    d_full = acc.similarity_backward(dots_full, g, params)
    d_self = acc.similarity_backward(dots_self, g_self, params)
    acc.gx += d_full @ cent_full + d_self[:, None] * cent_self
    back_full(d_full.T @ acc.x)
    back_self(d_self[:, None] * acc.x)
    return acc.finish(value)
