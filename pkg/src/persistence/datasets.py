"""
Dataset ingestion: IDX files, CSV tables and seeded synthetic sets.

All loaders return `Dataset`s whose samples are float64 and clamped to
[0, 1]. Normalization statistics for tabular data come from the training
split only.
"""
import csv
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from src.core.config import DataConfig
from src.utils import seeding
from src.utils.errors import CsvFormatError, DatasetError, IdxFormatError

logger = logging.getLogger(__name__)

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
IDX_UBYTE = 0x08
# Largest payload accepted from an IDX header
IDX_MAX_ELEMENTS = 2**31 - 1

Split = Literal["train", "test"]


@dataclass
class Dataset:
    """
    Equally shaped samples with optional labels.

    Attributes:
        samples: Array of shape (N, *sample_shape), values in [0, 1]
        labels: Optional integer labels, one per sample
        split: "train" or "test"
        provenance: Free-form note on where the data came from
    """

    samples: np.ndarray
    labels: Optional[np.ndarray] = None
    split: Split = "train"
    provenance: str = ""

    def __post_init__(self):
        self.samples = np.clip(np.asarray(self.samples, dtype=np.float64), 0.0, 1.0)
        if self.samples.ndim < 2:
            raise DatasetError("Samples need a leading sample axis", {"shape": self.samples.shape})
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (len(self.samples),):
                raise DatasetError(
                    "Labels do not align with samples",
                    {"samples": len(self.samples), "labels": self.labels.shape},
                )

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def sample_shape(self) -> Tuple[int, ...]:
        return tuple(self.samples.shape[1:])

    def subset(self, indices: Sequence[int]) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        labels = self.labels[idx] if self.labels is not None else None
        return Dataset(self.samples[idx], labels, self.split, self.provenance)

    def concat(self, other: "Dataset", provenance: Optional[str] = None) -> "Dataset":
        if other.sample_shape != self.sample_shape:
            raise DatasetError("Cannot concatenate datasets of different shapes", {"left": self.sample_shape, "right": other.sample_shape})
        labels = None
        if self.labels is not None and other.labels is not None:
            labels = np.concatenate([self.labels, other.labels])
        return Dataset(
            np.concatenate([self.samples, other.samples]),
            labels,
            self.split,
            provenance or f"{self.provenance}+{other.provenance}",
        )


@dataclass
class PairedDataset:
    """Paired vectors (u_i, v_i), used for MINE calibration."""

    u: np.ndarray
    v: np.ndarray
    rho: float
    analytic_mi: float
    provenance: str = ""

    def __len__(self) -> int:
        return len(self.u)


# --- IDX ---


def read_idx(path: Union[str, Path]) -> np.ndarray:
    """
    Parse an unsigned-byte IDX file into an array of its declared shape.

    Data format (big endian):
        u8 0 | u8 0 | u8 type (0x08) | u8 ndim
        u32[ndim] | dimension sizes
        u8[] | payload

    Raises:
        IdxFormatError: On bad magic, truncated data or oversized dimensions
        DatasetError: If the file does not exist
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError("Dataset file not found", {"path": str(path)})
    blob = path.read_bytes()
    if len(blob) < 4:
        raise IdxFormatError("Truncated IDX header", {"path": str(path), "bytes": len(blob)})
    magic = struct.unpack(">I", blob[:4])[0]
    if magic >> 16 != 0 or (magic >> 8) & 0xFF != IDX_UBYTE or magic & 0xFF == 0:
        raise IdxFormatError("Bad IDX magic number", {"path": str(path), "magic": hex(magic)})
    ndim = magic & 0xFF
    header_end = 4 + 4 * ndim
    if len(blob) < header_end:
        raise IdxFormatError("Truncated IDX header", {"path": str(path), "bytes": len(blob)})
    dims = struct.unpack(f">{ndim}I", blob[4:header_end])
    count = 1
    for d in dims:
        count *= d
        if count > IDX_MAX_ELEMENTS:
            raise IdxFormatError("IDX dimensions overflow", {"path": str(path), "dims": dims})
    if len(blob) - header_end < count:
        raise IdxFormatError(
            "Truncated IDX payload",
            {"path": str(path), "expected": count, "actual": len(blob) - header_end},
        )
    return np.frombuffer(blob, dtype=np.uint8, count=count, offset=header_end).reshape(dims).copy()


def write_idx(path: Union[str, Path], array: np.ndarray) -> Path:
    """Write a uint8 array as an IDX file; float input in [0, 1] is scaled to 0..255."""
    arr = np.asarray(array)
    if arr.dtype != np.uint8:
        arr = np.rint(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = struct.pack(">I", (IDX_UBYTE << 8) | arr.ndim) + struct.pack(f">{arr.ndim}I", *arr.shape)
    path.write_bytes(header + arr.tobytes())
    return path


def load_idx_labels(path: Union[str, Path]) -> np.ndarray:
    labels = read_idx(path)
    if labels.ndim != 1:
        raise IdxFormatError("Label files must be one-dimensional", {"path": str(path), "shape": labels.shape})
    return labels.astype(np.int64)


def load_idx(path: Union[str, Path], labels_path: Optional[Union[str, Path]] = None, split: Split = "train") -> Dataset:
    """
    Load an IDX image file (and optional label file) as a Dataset.

    Images of shape (N, H, W) become (N, 1, H, W) scaled to [0, 1].
    """
    raw = read_idx(path)
    if raw.ndim == 3:
        samples = raw[:, None, :, :].astype(np.float64) / 255.0
    elif raw.ndim >= 2:
        samples = raw.astype(np.float64) / 255.0
    else:
        raise IdxFormatError("Image files need a sample axis and at least one data axis", {"path": str(path), "shape": raw.shape})
    labels = load_idx_labels(labels_path) if labels_path is not None else None
    logger.info(f"Loaded {len(samples)} IDX samples of shape {samples.shape[1:]} from {path}")
    return Dataset(samples, labels, split, f"idx:{Path(path).name}")


# --- CSV ---


class CsvSchema(BaseModel):
    model_config = ConfigDict(extra="forbid")

    feature_columns: Optional[List[str]] = None
    label_column: Optional[str] = None


@dataclass
class MinMaxStats:
    minimum: np.ndarray
    maximum: np.ndarray

    def apply(self, features: np.ndarray) -> np.ndarray:
        span = self.maximum - self.minimum
        safe = np.where(span > 0, span, 1.0)
        scaled = np.where(span > 0, (features - self.minimum) / safe, 0.0)
        return np.clip(scaled, 0.0, 1.0)


def fit_minmax(features: np.ndarray) -> MinMaxStats:
    return MinMaxStats(features.min(axis=0), features.max(axis=0))


def read_csv_table(path: Union[str, Path], schema: CsvSchema) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """
    Read numeric features (and labels) from a CSV file with a header row.

    Raises:
        CsvFormatError: On non-numeric cells, ragged rows or unknown columns
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError("Dataset file not found", {"path": str(path)})
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError("CSV file is empty", {"path": str(path)})
        header = [h.strip() for h in header]
        wanted = schema.feature_columns or [h for h in header if h != schema.label_column]
        missing = [c for c in wanted + ([schema.label_column] if schema.label_column else []) if c not in header]
        if missing:
            raise CsvFormatError("CSV is missing columns", {"path": str(path), "missing": missing})
        feature_idx = [header.index(c) for c in wanted]
        label_idx = header.index(schema.label_column) if schema.label_column else None

        rows, labels = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvFormatError("Column count mismatch", {"path": str(path), "line": line_no, "expected": len(header), "actual": len(row)})
            try:
                rows.append([float(row[i]) for i in feature_idx])
                if label_idx is not None:
                    labels.append(int(float(row[label_idx])))
            except ValueError:
                raise CsvFormatError("Non-numeric cell", {"path": str(path), "line": line_no})
    if not rows:
        raise CsvFormatError("CSV file has no data rows", {"path": str(path)})
    features = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(features)):
        raise CsvFormatError("Non-finite cell", {"path": str(path)})
    return features, (np.asarray(labels, dtype=np.int64) if label_idx is not None else None)


def load_csv(
    path: Union[str, Path], schema: CsvSchema, stats: Optional[MinMaxStats] = None, split: Split = "train"
) -> Tuple[Dataset, MinMaxStats]:
    """
    Load a CSV split with per-feature min-max normalization.

    Args:
        path: CSV file with a header row
        schema: Which columns are features and which is the label
        stats: Normalization statistics; fitted on this file when None
            (pass the training split's statistics for the test split)
        split: Split tag

    Returns:
        (dataset, statistics used)
    """
    features, labels = read_csv_table(path, schema)
    if stats is None:
        stats = fit_minmax(features)
    elif stats.minimum.shape != (features.shape[1],):
        raise CsvFormatError("Column count mismatch with training split", {"expected": stats.minimum.shape[0], "actual": features.shape[1]})
    dataset = Dataset(stats.apply(features), labels, split, f"csv:{Path(path).name}")
    logger.info(f"Loaded {len(dataset)} CSV rows with {features.shape[1]} features from {path}")
    return dataset, stats


def load_csv_splits(train_path: Union[str, Path], test_path: Union[str, Path], schema: CsvSchema) -> Tuple[Dataset, Dataset]:
    train, stats = load_csv(train_path, schema, split="train")
    test, _ = load_csv(test_path, schema, stats=stats, split="test")
    return train, test


# --- Synthetic ---


def synth_images(n: int, shape: Sequence[int], seed: int, num_classes: int = 10, split: Split = "train") -> Dataset:
    """
    Seeded smooth blob images in [0, 1] with class labels.

    Each class owns a blob centre on a ring; samples jitter the centre and
    the width, so classes are separable but not trivially so.
    """
    if len(shape) != 3:
        raise DatasetError("Synthetic images need a (C, H, W) shape", {"shape": list(shape)})
    c, h, w = shape
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, num_classes, size=n)
    angles = 2.0 * np.pi * labels / num_classes
    radius = 0.25 * min(h, w)
    cy = (h - 1) / 2.0 + radius * np.sin(angles) + rng.normal(0.0, 0.05 * h, size=n)
    cx = (w - 1) / 2.0 + radius * np.cos(angles) + rng.normal(0.0, 0.05 * w, size=n)
    width = 0.12 * min(h, w) * rng.uniform(0.8, 1.2, size=n)
    yy, xx = np.mgrid[0:h, 0:w]
    d2 = (yy[None] - cy[:, None, None]) ** 2 + (xx[None] - cx[:, None, None]) ** 2
    blobs = np.exp(-d2 / (2.0 * width[:, None, None] ** 2))
    samples = np.repeat(blobs[:, None], c, axis=1)
    samples = samples + rng.normal(0.0, 0.02, size=samples.shape)
    return Dataset(np.clip(samples, 0.0, 1.0), labels, split, f"synthetic-images:seed={seed}")


def gaussian_mi(rho: float, dim: int) -> float:
    """Analytic MI (nats) of a dim-dimensional Gaussian pair with per-coordinate correlation rho."""
    return -0.5 * dim * float(np.log(1.0 - rho * rho))


def synth_gaussian_pairs(rho: float, dim: int, n: int, seed: int) -> PairedDataset:
    """
    n jointly Gaussian pairs with per-coordinate correlation rho, squashed
    into [0, 1] by the affine map z -> 0.5 + z / 10 (then clipped).

    Raises:
        DatasetError: If |rho| >= 1
    """
    if not -1.0 < rho < 1.0:
        raise DatasetError("Correlation must satisfy |rho| < 1", {"rho": rho})
    rng = np.random.default_rng(seed)
    z1 = rng.standard_normal((n, dim))
    z2 = rho * z1 + np.sqrt(1.0 - rho * rho) * rng.standard_normal((n, dim))
    squash = lambda z: np.clip(0.5 + z / 10.0, 0.0, 1.0)  # noqa: E731
    return PairedDataset(squash(z1), squash(z2), rho, gaussian_mi(rho, dim), f"gaussian-pairs:rho={rho},dim={dim},seed={seed}")


# --- Config-driven loading ---


def _take_subset(data: Dataset, n: int, rng: np.random.Generator) -> Dataset:
    if n >= len(data):
        return data
    return data.subset(np.sort(rng.choice(len(data), size=n, replace=False)))


def load_dataset(cfg: DataConfig, root_seed: int) -> Tuple[Dataset, Dataset]:
    """
    Load the (train, test) splits a run config describes, subset to n_train / n_test.

    Raises:
        DatasetError: If a referenced file is missing or malformed
    """
    if cfg.kind == "synthetic":
        seed = seeding.derive_seed(root_seed, seeding.DATA_SUBSET)
        train = synth_images(cfg.n_train, cfg.image_shape, seed, split="train")
        test = synth_images(cfg.n_test, cfg.image_shape, seed + 1, split="test")
        return train, test

    rng = seeding.stream(root_seed, seeding.DATA_SUBSET)
    if cfg.kind == "idx":
        train = load_idx(cfg.train_images, cfg.train_labels, split="train")
        test = load_idx(cfg.test_images, cfg.test_labels, split="test")
    else:
        schema = CsvSchema(feature_columns=cfg.feature_columns, label_column=cfg.label_column)
        train, test = load_csv_splits(cfg.csv_train, cfg.csv_test, schema)
    return _take_subset(train, cfg.n_train, rng), _take_subset(test, cfg.n_test, rng)
