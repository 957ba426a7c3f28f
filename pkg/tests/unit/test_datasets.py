"""
Unit tests for dataset ingestion: IDX, CSV, synthetic sets and config-driven loading.
"""
import math
import struct

import numpy as np
import pytest

from src.core.config import DataConfig
from src.persistence.datasets import (
    CsvSchema,
    Dataset,
    load_csv,
    load_csv_splits,
    load_dataset,
    load_idx,
    read_idx,
    synth_gaussian_pairs,
    synth_images,
    write_idx,
)
from src.utils.errors import CsvFormatError, DatasetError, IdxFormatError


def write_bytes(path, magic: int, dims, payload: bytes):
    header = struct.pack(">I", magic) + struct.pack(f">{len(dims)}I", *dims)
    path.write_bytes(header + payload)
    return path


# --- IDX ---


def test_idx_image_bytes_scale_to_unit_interval(tmp_path):
    path = write_bytes(tmp_path / "images.idx", 0x00000803, (1, 2, 2), bytes([0, 255, 128, 64]))
    data = load_idx(path)
    assert data.samples.shape == (1, 1, 2, 2)
    np.testing.assert_allclose(data.samples.ravel(), [0.0, 1.0, 128 / 255, 64 / 255])


def test_idx_labels(tmp_path):
    images = write_bytes(tmp_path / "images.idx", 0x00000803, (3, 1, 1), bytes([1, 2, 3]))
    labels = write_bytes(tmp_path / "labels.idx", 0x00000801, (3,), bytes([0, 1, 2]))
    data = load_idx(images, labels, split="test")
    np.testing.assert_array_equal(data.labels, [0, 1, 2])
    assert data.split == "test"


def test_idx_errors(tmp_path):
    empty = tmp_path / "empty.idx"
    empty.write_bytes(b"")
    with pytest.raises(IdxFormatError):
        read_idx(empty)
    with pytest.raises(IdxFormatError):
        read_idx(write_bytes(tmp_path / "magic.idx", 0x00000903, (1,), b"\x00"))
    with pytest.raises(IdxFormatError):
        read_idx(write_bytes(tmp_path / "short.idx", 0x00000803, (2, 2, 2), bytes(7)))
    with pytest.raises(IdxFormatError):
        read_idx(write_bytes(tmp_path / "huge.idx", 0x00000803, (65536, 65536, 2), b""))
    with pytest.raises(DatasetError):
        read_idx(tmp_path / "missing.idx")


def test_write_idx_round_trips_bytes(tmp_path):
    raw = np.arange(12, dtype=np.uint8).reshape(3, 2, 2)
    np.testing.assert_array_equal(read_idx(write_idx(tmp_path / "x.idx", raw)), raw)


# --- CSV ---


def test_csv_min_max_normalization(tmp_path):
    path = tmp_path / "train.csv"
    path.write_text("a,b,label\n0,3,1\n5,3,0\n10,3,1\n", encoding="utf-8")
    data, stats = load_csv(path, CsvSchema(label_column="label"))
    np.testing.assert_allclose(data.samples[:, 0], [0.0, 0.5, 1.0])
    np.testing.assert_array_equal(data.samples[:, 1], [0.0, 0.0, 0.0])
    np.testing.assert_array_equal(data.labels, [1, 0, 1])


def test_csv_test_split_uses_train_statistics(tmp_path):
    train, test = tmp_path / "train.csv", tmp_path / "test.csv"
    train.write_text("a\n0\n10\n", encoding="utf-8")
    test.write_text("a\n5\n20\n-4\n", encoding="utf-8")
    _, test_data = load_csv_splits(train, test, CsvSchema())
    np.testing.assert_allclose(test_data.samples[:, 0], [0.5, 1.0, 0.0])


@pytest.mark.parametrize(
    "content",
    ["a,b\n1,x\n", "a,b\n1,2,3\n", "a,b\n", ""],
)
def test_csv_format_errors(tmp_path, content):
    path = tmp_path / "bad.csv"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(CsvFormatError):
        load_csv(path, CsvSchema())


def test_csv_missing_columns(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(CsvFormatError):
        load_csv(path, CsvSchema(feature_columns=["a", "c"]))


# --- Datasets ---


def test_dataset_clips_and_checks_labels():
    data = Dataset(np.array([[1.5, -0.2]]))
    np.testing.assert_array_equal(data.samples, [[1.0, 0.0]])
    with pytest.raises(DatasetError):
        Dataset(np.zeros((2, 3)), labels=np.zeros(3))
    with pytest.raises(DatasetError):
        Dataset(np.zeros(3))


def test_concat_and_subset(tiny_train):
    doubled = tiny_train.concat(tiny_train)
    assert len(doubled) == 2 * len(tiny_train)
    np.testing.assert_array_equal(doubled.samples[len(tiny_train) :], tiny_train.samples)
    assert len(tiny_train.subset([0, 2])) == 2
    with pytest.raises(DatasetError):
        tiny_train.concat(Dataset(np.zeros((1, 3))))


def test_synthetic_images_are_deterministic():
    a, b = synth_images(5, (1, 6, 6), seed=2), synth_images(5, (1, 6, 6), seed=2)
    np.testing.assert_array_equal(a.samples, b.samples)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert a.samples.min() >= 0.0 and a.samples.max() <= 1.0
    with pytest.raises(DatasetError):
        synth_images(2, (6, 6), seed=0)


def test_gaussian_pairs():
    independent = synth_gaussian_pairs(0.0, 1, 20_000, seed=3)
    corr = np.corrcoef(independent.u[:, 0], independent.v[:, 0])[0, 1]
    assert abs(corr) <= 4 / math.sqrt(20_000)
    assert synth_gaussian_pairs(0.9, 1, 10, seed=0).analytic_mi == pytest.approx(-0.5 * math.log(0.19))
    assert synth_gaussian_pairs(0.9, 1, 10, seed=0).analytic_mi == pytest.approx(0.8304, abs=1e-4)
    first, second = synth_gaussian_pairs(0.5, 3, 50, seed=8), synth_gaussian_pairs(0.5, 3, 50, seed=8)
    np.testing.assert_array_equal(first.u, second.u)
    with pytest.raises(DatasetError):
        synth_gaussian_pairs(1.0, 1, 10, seed=0)


def test_load_dataset_subsets_idx_splits(tmp_path):
    images = write_idx(tmp_path / "train-images.idx", np.arange(10 * 4, dtype=np.uint8).reshape(10, 2, 2))
    test_images = write_idx(tmp_path / "test-images.idx", np.zeros((6, 2, 2), dtype=np.uint8))
    cfg = DataConfig(kind="idx", train_images=images, test_images=test_images, n_train=4, n_test=10)
    train, test = load_dataset(cfg, root_seed=1)
    assert len(train) == 4 and len(test) == 6
    assert train.split == "train" and test.split == "test"
    again, _ = load_dataset(cfg, root_seed=1)
    np.testing.assert_array_equal(train.samples, again.samples)


def test_load_dataset_synthetic_splits_differ():
    cfg = DataConfig(kind="synthetic", n_train=3, n_test=3, image_shape=[1, 4, 4])
    train, test = load_dataset(cfg, root_seed=0)
    assert train.sample_shape == (1, 4, 4)
    assert not np.array_equal(train.samples, test.samples)
