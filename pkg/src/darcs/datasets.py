"""Synthetic data, IDX loading and label-shard partitioning."""
from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IdxFormatError, InvalidInputError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray  # (N, input_dim) float64
    labels: np.ndarray    # (N,) int64

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise InvalidInputError(f"features {X.shape} and labels {y.shape} do not line up")
        if len(y) < 1:
            raise InvalidInputError("dataset must hold at least one sample")
        if not np.all(np.isfinite(X)):
            raise InvalidInputError("non-finite feature values")
        if y.min() < 0:
            raise InvalidInputError("negative label")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return len(self.labels)

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(self.features[idx], self.labels[idx])


@dataclass(frozen=True)
class PartitionPlan:
    classes_per_vehicle: int = 2
    seed: int = 0
    scheme: str = "label-shards"
    validation_fraction: float = 0.1

    def __post_init__(self):
        if self.scheme != "label-shards":
            raise InvalidInputError(f"unknown partition scheme {self.scheme!r}")
        if self.classes_per_vehicle < 1:
            raise InvalidInputError("classes_per_vehicle must be >= 1")
        if not 0 < self.validation_fraction < 1:
            raise InvalidInputError("validation_fraction must be in (0, 1)")


def class_means(input_dim: int, num_classes: int, seed: int, norm: float = 3.0) -> np.ndarray:
    """Fixed class centres of the given norm, placed as a rotated regular simplex.

    The simplex keeps every pair of centres equally far apart, so no pair of
    classes is accidentally easier to confuse than another.
    """
    if num_classes > input_dim + 1:
        raise InvalidInputError("need input_dim >= num_classes - 1 for a simplex layout")
    rng = np.random.default_rng(seed)
    k = num_classes
    simplex = np.eye(k) - 1.0 / k  # rows centred, rank k-1
    # orthonormal basis of the (k-1)-dim row space, then a random embedding into R^d
    u, s, vt = np.linalg.svd(simplex)
    coords = u[:, : k - 1] * s[: k - 1]
    q, _ = np.linalg.qr(rng.standard_normal((input_dim, k - 1)))
    means = coords @ q.T
    means *= norm / np.linalg.norm(means, axis=1, keepdims=True)
    return means


def generate_synthetic(num_samples: int, input_dim: int, num_classes: int,
                       seed: int) -> LabeledDataset:
    if num_samples < 1 or input_dim < 1 or num_classes < 2:
        raise InvalidInputError("num_samples, input_dim must be >= 1 and num_classes >= 2")
    if num_samples < num_classes:
        raise InvalidInputError("num_samples must be >= num_classes")
    rng = np.random.default_rng(seed)
    means = class_means(input_dim, num_classes, seed)
    labels = rng.permutation(np.arange(num_samples) % num_classes)
    features = means[labels] + rng.standard_normal((num_samples, input_dim))
    return LabeledDataset(features, labels)


def _read_exact(fh, n: int, field: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise IdxFormatError(field, f"truncated: expected {n} bytes, got {len(data)}")
    return data


def _open(path):
    path = Path(path)
    return gzip.open(path, "rb") if path.suffix == ".gz" else open(path, "rb")


def load_idx(images_path, labels_path) -> LabeledDataset:
    """Read an IDX image/label pair (optionally gzipped); pixels scaled to [0, 1]."""
    with _open(images_path) as fh:
        magic, count, rows, cols = struct.unpack(">IIII", _read_exact(fh, 16, "images header"))
        if magic != IDX_IMAGES_MAGIC:
            raise IdxFormatError("images magic", f"expected 0x{IDX_IMAGES_MAGIC:08x}, got 0x{magic:08x}")
        pixels = _read_exact(fh, count * rows * cols, "images data")
    with _open(labels_path) as fh:
        magic, n_labels = struct.unpack(">II", _read_exact(fh, 8, "labels header"))
        if magic != IDX_LABELS_MAGIC:
            raise IdxFormatError("labels magic", f"expected 0x{IDX_LABELS_MAGIC:08x}, got 0x{magic:08x}")
        if n_labels != count:
            raise IdxFormatError("count mismatch", f"{count} images vs {n_labels} labels")
        labels = _read_exact(fh, n_labels, "labels data")
    X = np.frombuffer(pixels, dtype=np.uint8).reshape(count, rows * cols) / 255.0
    y = np.frombuffer(labels, dtype=np.uint8).astype(np.int64)
    return LabeledDataset(X, y)


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path) -> None:
    """Write uint8 images (N, rows, cols) and labels (N,) as an IDX pair."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, len(labels)))
        fh.write(labels.tobytes())


def _apportion(total: int, weights: np.ndarray) -> np.ndarray:
    """Largest-remainder split of ``total`` into integer parts proportional to ``weights``."""
    exact = total * weights / weights.sum()
    parts = np.floor(exact).astype(np.int64)
    short = total - parts.sum()
    order = np.argsort(-(exact - parts), kind="stable")
    parts[order[:short]] += 1
    return parts


def partition(dataset: LabeledDataset, num_vehicles: int,
              plan: PartitionPlan) -> tuple[list[LabeledDataset], LabeledDataset]:
    """Hold out a per-class validation slice and deal single-label shards to vehicles.

    Every class keeps ``floor(fraction * count)`` (at least one) samples for
    validation.  The rest is cut into ``num_vehicles * classes_per_vehicle``
    shards, each drawn from a single class, and shard ``s`` of the
    label-sorted list goes to vehicle ``s mod num_vehicles``; vehicle ids are
    then permuted by the plan seed.
    """
    if num_vehicles < 1:
        raise InvalidInputError("num_vehicles must be >= 1")
    rng = np.random.default_rng(plan.seed)
    y = dataset.labels
    classes = np.unique(y)

    val_idx, train_by_class = [], []
    for c in classes:
        idx = rng.permutation(np.flatnonzero(y == c))
        k = max(1, int(np.floor(plan.validation_fraction * len(idx))))
        if k >= len(idx):
            raise InvalidInputError(f"class {c} has too few samples for a validation holdout")
        val_idx.append(idx[:k])
        train_by_class.append(np.sort(idx[k:]))

    n_shards = num_vehicles * plan.classes_per_vehicle
    if n_shards < len(classes):
        raise InvalidInputError(
            f"{num_vehicles} vehicles x {plan.classes_per_vehicle} classes cannot cover {len(classes)} classes")
    sizes = np.array([len(t) for t in train_by_class], dtype=np.float64)
    per_class = _apportion(n_shards, sizes)
    # every present class needs a shard, and no shard may be empty
    while np.any(per_class == 0):
        donor = int(np.argmax(per_class))
        per_class[donor] -= 1
        per_class[int(np.argmin(per_class))] += 1
    if np.any(per_class > sizes):
        raise InvalidInputError("too few samples: some shard would be empty")

    shards = []
    for idx, k in zip(train_by_class, per_class):
        shards.extend(np.array_split(idx, k))

    owner_of_slot = rng.permutation(num_vehicles)
    buckets: list[list[np.ndarray]] = [[] for _ in range(num_vehicles)]
    for s, shard in enumerate(shards):
        buckets[owner_of_slot[s % num_vehicles]].append(shard)
    vehicle_shards = [dataset.subset(np.sort(np.concatenate(b))) for b in buckets]
    validation = dataset.subset(np.sort(np.concatenate(val_idx)))
    return vehicle_shards, validation
