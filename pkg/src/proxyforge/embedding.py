"""Vector primitives shared by every loss.

Length normalization (with its backward pass), the affine-scaled cosine
similarity ``s(u, v) = alpha * (u.v - beta)``, leave-one-out class
centroids, and the proxy table.  All arithmetic is float64.

Pairwise evaluations are routed through :func:`pairwise_dot`,
:func:`pairwise_distance`, :func:`rowwise_dot` and
:func:`rowwise_sq_distance` so that :mod:`proxyforge.instrument` can count
them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import instrument
from .errors import DegenerateClassError, NormalizationError

ALPHA_MIN = 1e-3


def l2_normalize(v) -> np.ndarray:
    """Scale ``v`` to unit Euclidean length.

    Accepts a single vector or a 2-D array (normalized row by row).

    Raises:
        NormalizationError: if any vector is all zeros or non-finite.
    """
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise NormalizationError("cannot normalize a non-finite vector")
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise NormalizationError("cannot normalize a zero vector")
    return v / norms


def normalize_rows(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-normalize ``v`` and also return the row norms (for the backward pass)."""
    v = np.asarray(v, dtype=np.float64)
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise NormalizationError("cannot normalize a zero vector")
    return v / norms, norms


def normalize_backward(unit: np.ndarray, norms: np.ndarray, grad_unit: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. raw rows given the gradient w.r.t. their normalized versions.

    For ``y = v / |v|`` the Jacobian is ``(I - y y^T) / |v|``.
    """
    radial = np.sum(unit * grad_unit, axis=-1, keepdims=True)
    return (grad_unit - unit * radial) / norms


@dataclass
class SimilarityParams:
    """Learnable scale ``alpha`` and bias ``beta`` of the scaled cosine."""

    alpha: float = 10.0
    beta: float = 0.1

    def clamped(self, alpha_min: float = ALPHA_MIN) -> "SimilarityParams":
        return SimilarityParams(max(self.alpha, alpha_min), self.beta)


def scaled_cosine(u, v, params: SimilarityParams) -> float:
    """``alpha * (u.v - beta)`` for unit vectors ``u`` and ``v``."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    instrument.record(1)
    return float(params.alpha * (np.dot(u, v) - params.beta))


def pairwise_dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """All inner products ``a_i . b_j`` as an ``(len(a), len(b))`` matrix."""
    instrument.record(a.shape[0] * b.shape[0])
    return a @ b.T


def rowwise_dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Inner products of matching rows."""
    instrument.record(a.shape[0])
    return np.einsum("ij,ij->i", a, b)


def pairwise_distance(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Euclidean distances between all rows of ``a`` and ``b``.

    Returns the ``(len(a), len(b))`` distance matrix and the difference
    tensor ``a_i - b_j`` (needed for gradients).  Differences are formed
    explicitly rather than through ``2 - 2 a.b`` to keep precision near 0.
    """
    instrument.record(a.shape[0] * b.shape[0])
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1)), diff


def rowwise_sq_distance(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    instrument.record(a.shape[0])
    diff = a - b
    return np.sum(diff * diff, axis=-1), diff


@dataclass
class ProxyTable:
    """One learnable proxy vector per training class.

    ``proxies`` holds the raw (not necessarily unit) vectors; losses
    normalize them on use.
    """

    proxies: np.ndarray
    class_ids: np.ndarray
    _lookup: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.proxies = np.asarray(self.proxies, dtype=np.float64)
        self.class_ids = np.asarray(self.class_ids, dtype=np.int64)
        if self.proxies.ndim != 2 or self.proxies.shape[0] != self.class_ids.shape[0]:
            raise ValueError("need exactly one proxy row per class id")
        if len(np.unique(self.class_ids)) != len(self.class_ids):
            raise ValueError("proxy class ids must be distinct")
        self._lookup = {int(c): i for i, c in enumerate(self.class_ids)}

    def __len__(self) -> int:
        return self.proxies.shape[0]

    @property
    def dim(self) -> int:
        return self.proxies.shape[1]

    def rows_for(self, labels) -> np.ndarray:
        """Row index of the proxy for each label."""
        try:
            return np.array([self._lookup[int(c)] for c in np.atleast_1d(labels)], dtype=np.int64)
        except KeyError as exc:
            raise KeyError(f"no proxy for class {exc.args[0]}") from None

    def copy(self) -> "ProxyTable":
        return ProxyTable(self.proxies.copy(), self.class_ids.copy())


def init_proxies(num_classes: int, dim: int, seed: int, class_ids=None) -> ProxyTable:
    """Proxies drawn uniformly on the unit sphere (normalized Gaussian draws)."""
    if num_classes < 1 or dim < 2:
        raise ValueError("need num_classes >= 1 and dim >= 2")
    rng = np.random.default_rng(seed)
    draws = l2_normalize(rng.standard_normal((num_classes, dim)))
    ids = np.arange(num_classes) if class_ids is None else np.asarray(class_ids)
    return ProxyTable(draws, ids)


@dataclass
class Minibatch:
    """Instances, labels and the reserved query of every class.

    ``query_indices[k]`` is the position (within the batch) of the query
    reserved for class ``classes[k]``; class order throughout the losses is
    the order of ``query_indices``.
    """

    instances: np.ndarray
    labels: np.ndarray
    query_indices: np.ndarray

    def __post_init__(self) -> None:
        self.instances = np.atleast_2d(np.asarray(self.instances, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.query_indices = np.asarray(self.query_indices, dtype=np.int64)
        if self.labels.shape != (self.instances.shape[0],):
            raise ValueError("one label per instance required")
        classes = self.labels[self.query_indices]
        distinct, counts = np.unique(self.labels, return_counts=True)
        if len(classes) != len(distinct) or set(classes.tolist()) != set(distinct.tolist()):
            raise ValueError("query_indices must hold exactly one index per distinct label")
        if np.any(counts < 2):
            bad = distinct[counts < 2].tolist()
            raise DegenerateClassError(f"classes {bad} have a single instance; no centroid possible")

    @property
    def classes(self) -> np.ndarray:
        return self.labels[self.query_indices]

    @property
    def num_classes(self) -> int:
        return len(self.query_indices)

    def support_matrix(self) -> np.ndarray:
        """``(C, N)`` averaging matrix over each class's non-query instances."""
        support = self.labels[None, :] == self.classes[:, None]
        support[np.arange(self.num_classes), self.query_indices] = False
        return support / support.sum(axis=1, keepdims=True)

    @property
    def centroids(self) -> np.ndarray:
        return leave_one_out_centroids(self)


def leave_one_out_centroids(batch: Minibatch) -> np.ndarray:
    """Unit-length mean of each class's instances, excluding its query.

    Instances are normalized before averaging.  Rows follow ``batch.classes``.
    """
    unit = l2_normalize(batch.instances)
    return l2_normalize(batch.support_matrix() @ unit)
