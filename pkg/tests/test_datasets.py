import struct
from collections import Counter

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from darcs.datasets import (LabeledDataset, PartitionPlan, class_means, generate_synthetic, load_idx,
                            partition, write_idx)
from darcs.errors import IdxFormatError, InvalidInputError
from darcs.numerics import ModelSpec, evaluate_accuracy, local_train


def test_synthetic_is_deterministic():
    a = generate_synthetic(1000, 20, 4, 7)
    b = generate_synthetic(1000, 20, 4, 7)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.labels, b.labels)


@given(seed=st.integers(0, 10**6))
def test_synthetic_classes_balanced(seed):
    counts = Counter(generate_synthetic(1000, 20, 4, seed).labels.tolist())
    assert sorted(counts.values()) == [250] * 4


@given(n=st.integers(3, 200), c=st.integers(2, 6))
def test_synthetic_balance_within_one(n, c):
    if n < c:
        return
    counts = np.bincount(generate_synthetic(n, 8, c, 0).labels, minlength=c)
    assert counts.max() - counts.min() <= 1


def test_class_means_have_norm_three():
    m = class_means(20, 4, seed=3)
    np.testing.assert_allclose(np.linalg.norm(m, axis=1), 3.0, rtol=1e-12)


def test_full_batch_linear_model_reaches_090():
    data = generate_synthetic(1000, 20, 4, 0)
    shards, val = partition(data, 1, PartitionPlan(classes_per_vehicle=4, seed=0))
    spec = ModelSpec(20, 4, learning_rate=0.5, local_epochs=200, batch_size=len(shards[0]))
    theta, _ = local_train(np.zeros(spec.num_params), shards[0], spec, np.random.default_rng(0))
    assert evaluate_accuracy(theta, val, spec) >= 0.9


def _pixel_fixture(n=4):
    return (np.arange(n * 28 * 28) % 256).astype(np.uint8).reshape(n, 28, 28), np.arange(n) % 10


def test_load_idx_round_trip(tmp_path):
    imgs, labels = _pixel_fixture()
    write_idx(imgs, labels, tmp_path / "i", tmp_path / "l")
    data = load_idx(tmp_path / "i", tmp_path / "l")
    assert len(data) == 4 and data.input_dim == 784
    assert data.features.min() >= 0 and data.features.max() <= 1
    np.testing.assert_allclose(data.features, imgs.reshape(4, -1) / 255.0)
    np.testing.assert_array_equal(data.labels, labels)


def test_load_idx_gzip(tmp_path):
    import gzip
    imgs, labels = _pixel_fixture()
    write_idx(imgs, labels, tmp_path / "i", tmp_path / "l")
    for name in ("i", "l"):
        (tmp_path / f"{name}.gz").write_bytes(gzip.compress((tmp_path / name).read_bytes()))
    assert len(load_idx(tmp_path / "i.gz", tmp_path / "l.gz")) == 4


def test_labels_with_images_magic(tmp_path):
    imgs, labels = _pixel_fixture()
    write_idx(imgs, labels, tmp_path / "i", tmp_path / "l")
    raw = bytearray((tmp_path / "l").read_bytes())
    raw[:4] = struct.pack(">I", 0x00000803)
    (tmp_path / "l").write_bytes(bytes(raw))
    with pytest.raises(IdxFormatError, match="labels magic"):
        load_idx(tmp_path / "i", tmp_path / "l")


def test_bad_images_magic(tmp_path):
    imgs, labels = _pixel_fixture()
    write_idx(imgs, labels, tmp_path / "i", tmp_path / "l")
    raw = bytearray((tmp_path / "i").read_bytes())
    raw[3] = 0x01
    (tmp_path / "i").write_bytes(bytes(raw))
    with pytest.raises(IdxFormatError, match="images magic"):
        load_idx(tmp_path / "i", tmp_path / "l")


def test_count_mismatch(tmp_path):
    imgs, _ = _pixel_fixture(10)
    write_idx(imgs, np.zeros(9), tmp_path / "i", tmp_path / "l")
    with pytest.raises(IdxFormatError, match="count mismatch"):
        load_idx(tmp_path / "i", tmp_path / "l")


def test_truncated_images(tmp_path):
    imgs, labels = _pixel_fixture()
    write_idx(imgs, labels, tmp_path / "i", tmp_path / "l")
    (tmp_path / "i").write_bytes((tmp_path / "i").read_bytes()[:-5])
    with pytest.raises(IdxFormatError, match="images data"):
        load_idx(tmp_path / "i", tmp_path / "l")


def _rows(ds):
    return Counter(map(tuple, np.column_stack([ds.features, ds.labels]).tolist()))


@given(vehicles=st.integers(1, 30), cpv=st.integers(1, 4), seed=st.integers(0, 1000),
       n=st.integers(200, 600))
def test_partition_conservation(vehicles, cpv, seed, n):
    assume(vehicles * cpv >= 4)
    data = generate_synthetic(n, 3, 4, seed)
    shards, val = partition(data, vehicles, PartitionPlan(cpv, seed))
    assert sum(len(s) for s in shards) + len(val) == len(data)
    union = sum((_rows(s) for s in shards), Counter()) + _rows(val)
    assert union == _rows(data)
    assert all(len(s) >= 1 for s in shards)
    for s in shards:
        assert len(set(s.labels.tolist())) <= cpv


def test_partition_is_deterministic():
    data = generate_synthetic(400, 5, 4, 1)
    a, va = partition(data, 10, PartitionPlan(2, 9))
    b, vb = partition(data, 10, PartitionPlan(2, 9))
    for x, y in zip(a + [va], b + [vb]):
        np.testing.assert_array_equal(x.features, y.features)


def test_validation_is_ten_percent_per_class():
    data = generate_synthetic(1000, 20, 4, 0)
    _, val = partition(data, 25, PartitionPlan(2, 0))
    assert np.bincount(val.labels).tolist() == [25, 25, 25, 25]


@given(seed=st.integers(0, 1000), vehicles=st.integers(4, 30))
def test_label_skew_gives_disjoint_vehicles(seed, vehicles):
    shards, _ = partition(generate_synthetic(1000, 5, 4, seed), vehicles, PartitionPlan(2, seed))
    sets = [set(s.labels.tolist()) for s in shards]
    assert any(not (a & b) for i, a in enumerate(sets) for b in sets[i + 1:])


def test_iid_upper_bound_allows_all_classes():
    shards, _ = partition(generate_synthetic(1000, 5, 4, 0), 5, PartitionPlan(4, 0))
    assert any(len(set(s.labels.tolist())) == 4 for s in shards)


def test_shards_cannot_cover_classes():
    with pytest.raises(InvalidInputError, match="cannot cover"):
        partition(generate_synthetic(400, 3, 4, 0), 1, PartitionPlan(2, 0))


def test_too_few_samples():
    with pytest.raises(InvalidInputError):
        partition(generate_synthetic(8, 3, 4, 0), 1, PartitionPlan(2, 0))
    with pytest.raises(InvalidInputError):
        partition(generate_synthetic(40, 3, 4, 0), 30, PartitionPlan(2, 0))


def test_invalid_generator_args():
    with pytest.raises(InvalidInputError):
        generate_synthetic(10, 0, 4, 0)
    with pytest.raises(InvalidInputError):
        generate_synthetic(3, 5, 4, 0)
    with pytest.raises(InvalidInputError):
        LabeledDataset(np.zeros((2, 2)), np.array([0]))
