import csv

import numpy as np
import pytest

from proxyforge.complexity import (
    count_epoch_comparisons,
    fit_scaling,
    fit_slope,
    predict_batch_comparisons,
    predict_epoch_comparisons,
    write_scaling_csv,
)
from proxyforge.embedding import Minibatch, ProxyTable, SimilarityParams
from proxyforge.errors import ProbeError, SamplerError
from proxyforge.instrument import ComparisonCounter, counting, record
from proxyforge.losses import LOSS_NAMES, LossHyperparams, get_loss


def _single_batch(c, m, p, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(c), m)
    batch = Minibatch(rng.standard_normal((c * m, 8)), labels, np.arange(c) * m)
    return batch, ProxyTable(rng.standard_normal((p, 8)), np.arange(p))


def _count(name, batch, proxies, hyper=None):
    with counting() as counter:
        get_loss(name)(batch, proxies, SimilarityParams(), hyper or LossHyperparams())
    return counter.count


def test_mp_hand_enumeration():
    batch, proxies = _single_batch(4, 2, 10)
    # 4 queries x (1 positive + 3 other centroids + 6 unmasked proxies) + 4 x 4 regulator
    assert _count("mp", batch, proxies) == 56
    assert predict_batch_comparisons("mp", [2] * 4, 10) == 56


def test_mp_without_regulator():
    batch, proxies = _single_batch(4, 2, 10)
    assert _count("mp", batch, proxies, LossHyperparams(lambda_balance=0.0)) == 40
    assert predict_batch_comparisons("mp", [2] * 4, 10, lambda_balance=0.0) == 40


@pytest.mark.parametrize("c", [2, 3, 5, 9])
def test_prototypical_is_c_squared(c):
    batch, proxies = _single_batch(c, 2, c + 3)
    assert _count("prototypical", batch, proxies) == c * c


@pytest.mark.parametrize("name", LOSS_NAMES)
@pytest.mark.parametrize("shape", [(3, 2, 5), (4, 3, 4), (5, 2, 12)])
def test_single_batch_counts_match_prediction(name, shape):
    c, m, p = shape
    batch, proxies = _single_batch(c, m, p)
    assert _count(name, batch, proxies) == predict_batch_comparisons(name, [m] * c, p)


@pytest.mark.parametrize("name", LOSS_NAMES)
def test_epoch_counts_match_prediction(name):
    result = count_epoch_comparisons(name, 120, 8, 12, 2)
    assert result.count == result.predicted > 0


def test_epoch_count_value():
    result = count_epoch_comparisons("mp", 20, 8, 10, 2)
    assert result.predicted == predict_epoch_comparisons("mp", 20, 8, 10, 2) == 168
    assert result.count == 168


def test_empty_epoch():
    result = count_epoch_comparisons("mp", 0, 8, 10, 2)
    assert (result.count, result.predicted) == (0, 0)


def test_infeasible_probe():
    with pytest.raises(SamplerError):
        count_epoch_comparisons("mp", 40, 8, 3, 2)
    with pytest.raises(SamplerError):
        count_epoch_comparisons("mp", 10, 8, 10, 2)


def test_counter_reset_and_nesting():
    outer = ComparisonCounter()
    with counting(outer):
        record(3)
        with counting() as inner:
            record(5)
        record(1)
    assert outer.count == 4 and inner.count == 5
    outer.reset()
    assert outer.count == 0
    record(10)  # no active counter: ignored


def test_fit_slope_constant_is_zero():
    slope, resid = fit_slope([1, 2, 4, 8], [7, 7, 7, 7])
    assert slope == pytest.approx(0.0, abs=1e-12) and resid == pytest.approx(0.0, abs=1e-12)


def test_fit_slope_power_law():
    values = np.array([3.0, 5.0, 10.0, 40.0])
    slope, _ = fit_slope(values, 2.0 * values**2.5)
    assert slope == pytest.approx(2.5, abs=1e-12)


@pytest.mark.parametrize(
    "values,counts", [([1, 2, 3], [1, 2, 3]), ([2, 2, 2, 2], [1, 2, 3, 4]), ([1, 2, 3, 4], [0, 1, 2, 3])]
)
def test_fit_slope_degenerate(values, counts):
    with pytest.raises(ProbeError):
        fit_slope(values, counts)


def test_mp_linear_in_n():
    grid = {"param": "N", "values": [160, 320, 640, 1280], "fixed": {"B": 8, "P": 16, "M": 2}}
    report = fit_scaling("mp", grid)
    assert report.slope == pytest.approx(1.0, abs=0.1)


def test_mp_affine_in_p():
    values = [16, 32, 48, 64, 80]
    counts = [count_epoch_comparisons("mmp", 640, 8, p, 2).count for p in values]
    coeffs, residual, *_ = np.polyfit(values, counts, 1, full=True)
    assert residual.size == 0 or residual[0] < 1e-6 * np.mean(counts) ** 2
    np.testing.assert_allclose(np.polyval(coeffs, values), counts, rtol=1e-12)


def test_triplet_cubic_full_batch():
    grid = {"param": "N", "values": [16, 24, 32, 48], "fixed": {"P": 2}, "full_batch": True}
    assert fit_scaling("triplet", grid).slope == pytest.approx(3.0, abs=0.2)


def test_bad_grids():
    with pytest.raises(ProbeError):
        fit_scaling("mp", {"param": "Q", "values": [1, 2, 3, 4]})
    with pytest.raises(ProbeError):
        fit_scaling("mp", {"param": "N", "values": [16, 32], "fixed": {"B": 8, "P": 4, "M": 2}})
    with pytest.raises(ProbeError):
        fit_scaling("mp", {"param": "N", "values": [16, 32, 48, 64], "fixed": {"B": 8}})


def test_scaling_csv(tmp_path):
    grid = {"param": "N", "values": [40, 80, 120, 160], "fixed": {"B": 8, "P": 8, "M": 2}}
    write_scaling_csv(tmp_path / "s.csv", [fit_scaling("prototypical", grid)])
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert rows[0] == ["loss", "param", "value", "count"]
    assert [r[2] for r in rows[1:]] == ["40", "80", "120", "160"]
