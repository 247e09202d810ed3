"""Masked Proxy (MP) and Multinomial Masked Proxy (MMP) losses.

Each class in the minibatch contributes one reserved query.  The query is
compared with the leave-one-out centroids of every in-batch class
(entity-to-entity) and with the proxies of classes *absent* from the batch
(entity-to-proxy); the proxies of in-batch classes are masked out of that
term.  A regulator term then pulls each masked proxy towards its own class
centroid so that those proxies still get updated.

The softmax-like query term is implemented exactly as written: the positive
similarity appears in the numerator only, never in the denominator.  As a
consequence the derivative of :func:`mp_l1` with respect to each positive
similarity is the constant ``-1/|X_Q|``.
"""

from __future__ import annotations

import numpy as np

from ..embedding import Minibatch, ProxyTable, SimilarityParams, pairwise_dot
from ..errors import EmptyDenominatorError
from ._common import GradAccumulator, LossHyperparams, LossOutput, batch_class_mask, log_sum_exp


class _QueryView:
    """Query/centroid/unmasked-proxy similarities shared by MP and MMP."""

    def __init__(self, acc: GradAccumulator, batch: Minibatch, proxies: ProxyTable, params: SimilarityParams):
        self.acc = acc
        self.params = params
        self.queries = batch.query_indices
        self.q = acc.x[self.queries]
        self.cent, self._cent_back = acc.centroids(batch.support_matrix())
        _, self.out_rows = batch_class_mask(batch, proxies)
        self.unmasked = acc.p[self.out_rows]
        self.dot_qc = pairwise_dot(self.q, self.cent)
        self.dot_qp = pairwise_dot(self.q, self.unmasked)
        self.s_qc = params.alpha * (self.dot_qc - params.beta)
        self.s_qp = params.alpha * (self.dot_qp - params.beta)
        self.num_classes = len(self.queries)
        self.off_diag = ~np.eye(self.num_classes, dtype=bool)

    @property
    def positive(self) -> np.ndarray:
        return np.diag(self.s_qc).copy()

    def backward(self, g_qc: np.ndarray, g_qp: np.ndarray) -> None:
        acc = self.acc
        d_qc = acc.similarity_backward(self.dot_qc, g_qc, self.params)
        d_qp = acc.similarity_backward(self.dot_qp, g_qp, self.params)
        acc.gx[self.queries] += d_qc @ self.cent + d_qp @ self.unmasked
        self._cent_back(d_qc.T @ self.q)
        acc.gp[self.out_rows] += d_qp.T @ self.q


def _mp_query_terms(view: _QueryView) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if view.num_classes == 1 and len(view.out_rows) == 0:
        raise EmptyDenominatorError("single-class batch with no unmasked proxies")
    negatives = np.concatenate([view.s_qc, view.s_qp], axis=1)
    mask = np.concatenate([view.off_diag, np.ones(view.s_qp.shape, dtype=bool)], axis=1)
    lse, weights = log_sum_exp(negatives, mask)
    return view.positive, lse, weights


def mp_query_loss(query_position: int, batch: Minibatch, proxies: ProxyTable, params: SimilarityParams) -> float:
    """Loss of a single reserved query (given by its position in the batch)."""
    where = np.flatnonzero(batch.query_indices == query_position)
    if len(where) != 1:
        raise ValueError(f"position {query_position} is not a reserved query of the batch")
    view = _QueryView(GradAccumulator(batch.instances, proxies), batch, proxies, params)
    positive, lse, _ = _mp_query_terms(view)
    k = where[0]
    return float(-positive[k] + lse[k])


def mp_l1(batch: Minibatch, proxies: ProxyTable, params: SimilarityParams) -> LossOutput:
    """Mean over the reserved queries of the masked-proxy query loss."""
    acc = GradAccumulator(batch.instances, proxies)
    view = _QueryView(acc, batch, proxies, params)
    positive, lse, weights = _mp_query_terms(view)
    c = view.num_classes
    value = np.mean(-positive + lse)

    g_qc = weights[:, :c] / c
    g_qc[np.diag_indices(c)] = -1.0 / c
    g_qp = weights[:, c:] / c
    view.backward(g_qc, g_qp)
    return acc.finish(value, positive=np.diag(g_qc).copy())


def mpr_regulator(batch: Minibatch, proxies: ProxyTable, params: SimilarityParams) -> LossOutput:
    """Pull each in-batch proxy towards its class centroid, away from the others.

    The denominator for proxy ``p_i`` runs over the centroids of the other
    in-batch classes only.
    """
    c = batch.num_classes
    if c < 2:
        raise EmptyDenominatorError("regulator needs at least two classes in the batch")
    acc = GradAccumulator(batch.instances, proxies)
    cent, cent_back = acc.centroids(batch.support_matrix())
    in_rows, _ = batch_class_mask(batch, proxies)
    pin = acc.p[in_rows]
    # dots[j, i] = c_j . p_i
    dots = pairwise_dot(cent, pin)
    sims = params.alpha * (dots - params.beta)
    per_proxy = sims.T
    off_diag = ~np.eye(c, dtype=bool)
    lse, weights = log_sum_exp(per_proxy, off_diag)
    value = np.mean(-np.diag(per_proxy) + lse)

    g = weights / c
    g[np.diag_indices(c)] = -1.0 / c
    d = acc.similarity_backward(dots, g.T, params)
    cent_back(d @ pin)
    acc.gp[in_rows] += d.T @ cent
    return acc.finish(value)


def mp_loss(
    batch: Minibatch, proxies: ProxyTable, params: SimilarityParams, hyper: LossHyperparams | None = None
) -> LossOutput:
    """``mp_l1 + lambda * mpr_regulator``; the regulator is skipped when lambda is 0."""
    hyper = hyper or LossHyperparams()
    out = mp_l1(batch, proxies, params)
    if hyper.lambda_balance == 0:
        return out
    return out.combine(mpr_regulator(batch, proxies, params), hyper.lambda_balance)


def mmp_l1m(batch: Minibatch, proxies: ProxyTable, params: SimilarityParams) -> LossOutput:
    """Multinomial form of the query loss.

    Three parts:
      * ``log(1 + sum_k exp(-s(q_k, c_k)))``, one log pooled over all queries;
      * mean over queries of ``log(1 + sum exp s(q_k, c_j))`` over other centroids;
      * mean over queries of ``log(1 + sum exp s(q_k, p))`` over unmasked proxies.

    Harder positives (lower similarity) get larger weight in the first part.
    """
    acc = GradAccumulator(batch.instances, proxies)
    view = _QueryView(acc, batch, proxies, params)
    c = view.num_classes
    pos_lse, pos_w = log_sum_exp(-view.positive[None, :], with_one=True)
    cent_lse, cent_w = log_sum_exp(view.s_qc, view.off_diag, with_one=True)
    prox_lse, prox_w = log_sum_exp(view.s_qp, with_one=True)
    value = pos_lse[0] + np.mean(cent_lse) + np.mean(prox_lse)

    g_qc = cent_w / c
    g_qc[np.diag_indices(c)] = -pos_w[0]
    g_qp = prox_w / c
    view.backward(g_qc, g_qp)
    return acc.finish(value, positive=-pos_w[0].copy())


def mmp_loss(
    batch: Minibatch, proxies: ProxyTable, params: SimilarityParams, hyper: LossHyperparams | None = None
) -> LossOutput:
    hyper = hyper or LossHyperparams()
    out = mmp_l1m(batch, proxies, params)
    if hyper.lambda_balance == 0:
        return out
    return out.combine(mpr_regulator(batch, proxies, params), hyper.lambda_balance)
