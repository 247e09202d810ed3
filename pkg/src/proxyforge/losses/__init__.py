"""Loss functions with hand-derived gradients.

Every loss is reachable through :data:`LOSSES` with the uniform signature
``fn(batch, proxies, params, hyper) -> LossOutput``; gradients are taken
w.r.t. the raw (pre-normalization) instances and proxies.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..embedding import Minibatch, ProxyTable, SimilarityParams
from ._common import TEXT_LAMBDA, LossHyperparams, LossOutput, log_sum_exp
from .masked import mmp_l1m, mmp_loss, mp_l1, mp_loss, mp_query_loss, mpr_regulator
from .pair import angular_prototypical_loss, enumerate_triplets, ge2e_loss, prototypical_loss, triplet_loss
from .proxy import proxy_anchor_loss, proxy_nca_loss

LossFn = Callable[[Minibatch, ProxyTable, SimilarityParams, LossHyperparams], LossOutput]


def _pad_proxies(out: LossOutput, proxies: ProxyTable) -> LossOutput:
    out.grad_proxies = np.zeros_like(proxies.proxies)
    return out


LOSSES: dict[str, LossFn] = {
    "mp": lambda b, p, s, h: mp_loss(b, p, s, h),
    "mmp": lambda b, p, s, h: mmp_loss(b, p, s, h),
    "proxy_nca": lambda b, p, s, h: proxy_nca_loss(b.instances, b.labels, p),
    "proxy_anchor": lambda b, p, s, h: proxy_anchor_loss(b.instances, b.labels, p, h),
    "triplet": lambda b, p, s, h: _pad_proxies(triplet_loss(b.instances, b.labels, h), p),
    "prototypical": lambda b, p, s, h: _pad_proxies(prototypical_loss(b, s), p),
    "angular_prototypical": lambda b, p, s, h: _pad_proxies(angular_prototypical_loss(b, s), p),
    "ge2e": lambda b, p, s, h: _pad_proxies(ge2e_loss(b, s), p),
}

LOSS_NAMES = tuple(LOSSES)
USES_PROXIES = frozenset({"mp", "mmp", "proxy_nca", "proxy_anchor"})
USES_SIMILARITY_PARAMS = frozenset({"mp", "mmp", "angular_prototypical", "ge2e"})


def get_loss(name: str) -> LossFn:
    try:
        return LOSSES[name]
    except KeyError:
        raise KeyError(f"unknown loss {name!r}; choose from {', '.join(LOSS_NAMES)}") from None


__all__ = [
    "LOSSES",
    "LOSS_NAMES",
    "TEXT_LAMBDA",
    "USES_PROXIES",
    "USES_SIMILARITY_PARAMS",
    "LossHyperparams",
    "LossOutput",
    "angular_prototypical_loss",
    "enumerate_triplets",
    "ge2e_loss",
    "get_loss",
    "log_sum_exp",
    "mmp_l1m",
    "mmp_loss",
    "mp_l1",
    "mp_loss",
    "mp_query_loss",
    "mpr_regulator",
    "prototypical_loss",
    "proxy_anchor_loss",
    "proxy_nca_loss",
    "triplet_loss",
]
