import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from proxyforge.embedding import (
    Minibatch,
    ProxyTable,
    SimilarityParams,
    init_proxies,
    l2_normalize,
    leave_one_out_centroids,
    normalize_backward,
    normalize_rows,
    scaled_cosine,
)
from proxyforge.errors import DegenerateClassError, NormalizationError

from conftest import make_batch

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
vectors = arrays(np.float64, st.integers(2, 12), elements=finite).filter(lambda v: np.linalg.norm(v) > 1e-3)


def test_normalize_three_four_five():
    np.testing.assert_allclose(l2_normalize([3.0, 4.0]), [0.6, 0.8], atol=1e-15)


def test_normalize_unit_vector_unchanged():
    np.testing.assert_array_equal(l2_normalize([1.0, 0.0, 0.0]), [1.0, 0.0, 0.0])


def test_normalize_zero_vector_raises():
    with pytest.raises(NormalizationError):
        l2_normalize([0.0, 0.0])


def test_normalize_rejects_nan():
    with pytest.raises(NormalizationError):
        l2_normalize([np.nan, 1.0])


def test_normalize_rows_independently():
    out = l2_normalize(np.array([[3.0, 4.0], [0.0, 2.0]]))
    np.testing.assert_allclose(out, [[0.6, 0.8], [0.0, 1.0]])


@given(vectors)
def test_normalize_idempotent(v):
    once = l2_normalize(v)
    np.testing.assert_allclose(l2_normalize(once), once, atol=1e-12)


@given(vectors, st.floats(1e-3, 1e3))
def test_normalize_scale_invariant(v, scale):
    np.testing.assert_allclose(l2_normalize(scale * v), l2_normalize(v), atol=1e-9)


def test_normalize_backward_matches_finite_difference():
    rng = np.random.default_rng(0)
    v = rng.standard_normal((3, 5))
    g = rng.standard_normal((3, 5))
    unit, norms = normalize_rows(v)
    analytic = normalize_backward(unit, norms, g)
    eps = 1e-6
    numeric = np.zeros_like(v)
    for idx in np.ndindex(v.shape):
        plus, minus = v.copy(), v.copy()
        plus[idx] += eps
        minus[idx] -= eps
        numeric[idx] = (np.sum(g * l2_normalize(plus)) - np.sum(g * l2_normalize(minus))) / (2 * eps)
    np.testing.assert_allclose(analytic, numeric, atol=1e-8)


def test_scaled_cosine_identical_at_default_init():
    u = l2_normalize([1.0, 2.0, 3.0])
    assert scaled_cosine(u, u, SimilarityParams(alpha=10.0, beta=0.1)) == pytest.approx(9.0, abs=1e-12)


def test_scaled_cosine_orthogonal():
    assert scaled_cosine([1.0, 0.0], [0.0, 1.0], SimilarityParams(10.0, 0.1)) == pytest.approx(-1.0)


def test_scaled_cosine_antipodal():
    assert scaled_cosine([1.0, 0.0], [-1.0, 0.0], SimilarityParams(1.0, 0.0)) == -1.0


@settings(max_examples=50)
@given(vectors, st.floats(1e-3, 50), st.floats(-1, 1))
def test_scaled_cosine_symmetric(v, alpha, beta):
    u = l2_normalize(v)
    w = l2_normalize(np.roll(v, 1) + 0.5)
    p = SimilarityParams(alpha, beta)
    assert scaled_cosine(u, w, p) == scaled_cosine(w, u, p)


def test_similarity_params_clamp():
    assert SimilarityParams(alpha=-5.0).clamped().alpha == pytest.approx(1e-3)


def test_centroid_single_remaining_vector():
    batch = make_batch([[1.0, 0.0], [0.0, 1.0]], [0, 0], [1])
    np.testing.assert_allclose(leave_one_out_centroids(batch), [[1.0, 0.0]], atol=1e-12)


def test_centroid_identical_vectors():
    batch = make_batch([[0.6, 0.8], [0.6, 0.8]], [0, 0], [0])
    np.testing.assert_allclose(leave_one_out_centroids(batch), [[0.6, 0.8]], atol=1e-12)


def test_centroid_excludes_query():
    batch = make_batch([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]], [0, 0, 0], [1])
    np.testing.assert_allclose(leave_one_out_centroids(batch), [[1.0, 0.0]], atol=1e-12)


def test_centroid_of_k_identical_unit_vectors():
    v = l2_normalize(np.arange(1.0, 7.0))
    batch = make_batch(np.tile(v, (5, 1)), [4] * 5, [2])
    np.testing.assert_allclose(leave_one_out_centroids(batch)[0], v, atol=1e-9)


def test_centroids_follow_query_order():
    batch = make_batch([[1, 0], [1, 0.1], [0, 1], [0.1, 1]], [7, 7, 3, 3], [2, 0])
    cents = leave_one_out_centroids(batch)
    assert list(batch.classes) == [3, 7]
    assert cents[0][1] > cents[0][0] and cents[1][0] > cents[1][1]


def test_single_instance_class_is_degenerate():
    with pytest.raises(DegenerateClassError):
        make_batch([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]], [0, 1, 1], [0, 1])


def test_query_indices_must_cover_each_class_once():
    with pytest.raises(ValueError):
        Minibatch(np.eye(4), np.array([0, 0, 1, 1]), np.array([0, 1]))


def test_init_proxies_unit_rows():
    table = init_proxies(5, 8, 42)
    assert table.proxies.shape == (5, 8)
    np.testing.assert_allclose(np.linalg.norm(table.proxies, axis=1), 1.0, atol=1e-9)


def test_init_proxies_deterministic():
    a, b = init_proxies(5, 8, 42), init_proxies(5, 8, 42)
    assert a.proxies.tobytes() == b.proxies.tobytes()


def test_init_proxies_minimal():
    table = init_proxies(1, 2, 0)
    assert table.proxies.shape == (1, 2)
    assert np.linalg.norm(table.proxies[0]) == pytest.approx(1.0)


def test_proxy_table_lookup():
    table = ProxyTable(np.eye(3), [10, 20, 30])
    assert table.rows_for([30, 10]).tolist() == [2, 0]
    with pytest.raises(KeyError):
        table.rows_for([5])
