import numpy as np
import pytest

from proxyforge.batching import (
    SamplerConfig,
    batches_per_epoch,
    epoch_iterator,
    sample_balanced,
    sample_variable,
)
from proxyforge.embedding import Minibatch
from proxyforge.errors import SamplerError


def labels_for(num_classes, per_class):
    return np.repeat(np.arange(num_classes), per_class)


def check_batch(batch, labels):
    assert np.array_equal(labels[batch.indices], batch.labels)
    assert len(np.unique(batch.indices)) == len(batch.indices)
    # every batch is a valid minibatch: >= 2 instances and exactly one query per class
    Minibatch(np.ones((len(batch), 2)), batch.labels, batch.query_positions)


def test_balanced_small_batch():
    labels = labels_for(10, 5)
    batch = sample_balanced(labels, SamplerConfig("balanced", 2, 8, seed=1))
    check_batch(batch, labels)
    assert len(batch) == 8
    assert len(batch.query_positions) == 4
    assert np.all(np.unique(batch.labels, return_counts=True)[1] == 2)


def test_balanced_four_hundred():
    labels = labels_for(250, 3)
    batch = sample_balanced(labels, SamplerConfig("balanced", 2, 400))
    assert len(np.unique(batch.labels)) == 200 and len(batch) == 400


def test_balanced_infeasible():
    with pytest.raises(SamplerError):
        sample_balanced(labels_for(3, 5), SamplerConfig("balanced", 2, 8))


def test_balanced_needs_enough_instances_per_class():
    with pytest.raises(SamplerError):
        sample_balanced(labels_for(10, 2), SamplerConfig("balanced", 3, 9))


@pytest.mark.parametrize("bad", [dict(mode="random"), dict(shots_per_class=1), dict(expected_batch_size=7)])
def test_config_validation(bad):
    args = dict(mode="balanced", shots_per_class=2, expected_batch_size=8)
    args.update(bad)
    with pytest.raises(SamplerError):
        SamplerConfig(**args)


@pytest.mark.parametrize("b,classes", [(800, 320), (400, 160), (20, 8)])
def test_variable_class_count(b, classes):
    assert SamplerConfig("variable", expected_batch_size=b).classes_per_batch == classes


def test_variable_eight_hundred():
    labels = labels_for(400, 3)
    batch = sample_variable(labels, SamplerConfig("variable", expected_batch_size=800, seed=2))
    check_batch(batch, labels)
    c = len(np.unique(batch.labels))
    assert c == 320
    assert 2 * c <= len(batch) <= 3 * c


def test_variable_shot_mean():
    labels = labels_for(40, 3)
    config = SamplerConfig("variable", expected_batch_size=20, seed=0)
    rng = np.random.default_rng(0)
    shots = []
    for _ in range(10_000):
        batch = sample_variable(labels, config, rng)
        shots.append(np.unique(batch.labels, return_counts=True)[1])
    shots = np.concatenate(shots)
    assert set(shots.tolist()) == {2, 3}
    assert abs(shots.mean() - 2.5) <= 0.02


def test_variable_needs_three_instances():
    with pytest.raises(SamplerError):
        sample_variable(labels_for(20, 2), SamplerConfig("variable", expected_batch_size=10))


def test_query_is_random_member():
    labels = labels_for(4, 6)
    seen = set()
    config = SamplerConfig("balanced", 3, 12)
    rng = np.random.default_rng(0)
    for _ in range(50):
        batch = sample_balanced(labels, config, rng)
        seen.update(int(q % 3) for q in batch.query_positions)
    assert seen == {0, 1, 2}


def test_epoch_covers_every_class_and_most_instances():
    labels = labels_for(50, 20)
    config = SamplerConfig("balanced", 2, 20, seed=4)
    batches = list(epoch_iterator(labels, config, epoch=1))
    assert len(batches) == batches_per_epoch(len(labels), 50, config) == 50
    used = np.concatenate([b.indices for b in batches])
    assert set(labels[used].tolist()) == set(range(50))
    # every instance of a class is drawn once before any repeats
    counts = np.bincount(used, minlength=len(labels))
    assert counts.max() - counts.min() <= 1
    for b in batches:
        check_batch(b, labels)


def test_epoch_is_deterministic_and_epochs_differ():
    labels = labels_for(12, 6)
    config = SamplerConfig("variable", expected_batch_size=10, seed=9)
    a = [b.indices.tolist() for b in epoch_iterator(labels, config, 3)]
    b = [b.indices.tolist() for b in epoch_iterator(labels, config, 3)]
    c = [b.indices.tolist() for b in epoch_iterator(labels, config, 4)]
    assert a == b and a != c


def test_empty_dataset_epoch():
    assert list(epoch_iterator(np.array([], dtype=int), SamplerConfig())) == []
    assert batches_per_epoch(0, 0, SamplerConfig()) == 0


def test_sampler_accepts_dataset_objects(small_split):
    batch = sample_balanced(small_split.train, SamplerConfig("balanced", 2, 8))
    check_batch(batch, small_split.train.labels)
