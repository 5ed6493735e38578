"""MNIST IDX reading and balanced, reproducible subsets."""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

DATA_DIR_ENV = "VSQC_DATA_DIR"

FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


class DataFormatError(ValueError):
    """Bad magic number, truncated payload or out-of-range label."""


class PairingError(ValueError):
    """Image and label files disagree on the number of items."""


class QuotaError(ValueError):
    """A class has fewer samples than the requested quota."""


def _read_bytes(path) -> bytes:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def load_idx_images(path) -> np.ndarray:
    """Parse an IDX3 image file (plain or gzipped) into a ``(count, rows, cols)`` uint8 array."""
    raw = _read_bytes(path)
    if len(raw) < 16:
        raise DataFormatError(f"{path}: header truncated")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IMAGE_MAGIC:
        raise DataFormatError(f"{path}: magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}")
    expected = count * rows * cols
    if len(raw) - 16 < expected:
        raise DataFormatError(f"{path}: expected {expected} pixel bytes, found {len(raw) - 16}")
    return np.frombuffer(raw, dtype=np.uint8, count=expected, offset=16).reshape(count, rows, cols)


def load_idx_labels(path) -> np.ndarray:
    raw = _read_bytes(path)
    if len(raw) < 8:
        raise DataFormatError(f"{path}: header truncated")
    magic, count = struct.unpack(">II", raw[:8])
    if magic != LABEL_MAGIC:
        raise DataFormatError(f"{path}: magic {magic:#010x}, expected {LABEL_MAGIC:#010x}")
    if len(raw) - 8 < count:
        raise DataFormatError(f"{path}: expected {count} labels, found {len(raw) - 8}")
    labels = np.frombuffer(raw, dtype=np.uint8, count=count, offset=8)
    if labels.size and labels.max() > 9:
        raise DataFormatError(f"{path}: label {int(labels.max())} outside [0, 9]")
    return labels


def _locate(data_dir: Path, name: str) -> Path:
    for candidate in (name, name + ".gz", name.replace("-idx", ".idx"), name.replace("-idx", ".idx") + ".gz"):
        path = data_dir / candidate
        if path.exists():
            return path
    raise FileNotFoundError(f"no {name}[.gz] under {data_dir}")


def resolve_data_dir(data_dir=None) -> Path:
    """Explicit argument first, then ``$VSQC_DATA_DIR``, then ``./data/mnist``."""
    if data_dir is None:
        data_dir = os.environ.get(DATA_DIR_ENV, "data/mnist")
    path = Path(data_dir)
    if not path.is_dir():
        raise FileNotFoundError(f"MNIST directory {path} does not exist")
    return path


def load_split(data_dir, split: str) -> tuple[np.ndarray, np.ndarray]:
    """Load and pair the images and labels of ``split`` ("train" or "test")."""
    image_name, label_name = FILES[split]
    data_dir = Path(data_dir)
    images = load_idx_images(_locate(data_dir, image_name))
    labels = load_idx_labels(_locate(data_dir, label_name))
    if len(images) != len(labels):
        raise PairingError(f"{len(images)} images but {len(labels)} labels in {split} split")
    return images, labels


@dataclass
class Dataset:
    """Balanced subset with labels remapped to ``0..K-1``.

    ``class_ids[k]`` is the original digit behind relabeled class ``k``.
    """

    images: np.ndarray
    labels: np.ndarray
    class_ids: tuple[int, ...]
    split: str = "train"
    source_indices: np.ndarray = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n_classes(self) -> int:
        return len(self.class_ids)

    def original_labels(self) -> np.ndarray:
        return np.asarray(self.class_ids)[self.labels]


def build_subset(images, labels, class_ids, per_class: int, seed: int, split: str = "train", skip: int = 0) -> Dataset:
    """Take the first ``per_class`` samples of each class (after skipping ``skip``), relabel, shuffle.

    ``skip`` lets a validation subset be carved from the same file without
    overlapping the training subset.
    """
    class_ids = tuple(sorted(int(c) for c in class_ids))
    if len(set(class_ids)) != len(class_ids):
        raise ValueError(f"duplicate class ids in {class_ids}")
    labels = np.asarray(labels)
    chosen = []
    new_labels = []
    for k, digit in enumerate(class_ids):
        idx = np.flatnonzero(labels == digit)
        if len(idx) < skip + per_class:
            raise QuotaError(
                f"digit {digit}: {len(idx)} samples available, need {skip + per_class}"
            )
        chosen.append(idx[skip : skip + per_class])
        new_labels.append(np.full(per_class, k, dtype=np.int64))
    order = np.concatenate(chosen) if chosen else np.array([], dtype=np.int64)
    relabeled = np.concatenate(new_labels) if new_labels else np.array([], dtype=np.int64)
    perm = np.random.default_rng(seed).permutation(len(order))
    order, relabeled = order[perm], relabeled[perm]
    return Dataset(
        images=np.asarray(images)[order],
        labels=relabeled,
        class_ids=class_ids,
        split=split,
        source_indices=order,
    )


def load_task(data_dir, digits, n_train: int, n_test: int, seed: int, n_val: int = 0):
    """Balanced train/test (and optional validation) subsets for one digit task.

    The validation subset is drawn from the training file right after the
    training quota of each class, so the two never overlap.
    """
    data_dir = resolve_data_dir(data_dir)
    images, labels = load_split(data_dir, "train")
    test_images, test_labels = load_split(data_dir, "test")
    train = build_subset(images, labels, digits, n_train, seed, "train")
    test = build_subset(test_images, test_labels, digits, n_test, seed + 1, "test")
    val = None
    if n_val > 0:
        val = build_subset(images, labels, digits, n_val, seed + 2, "val", skip=n_train)
    return train, test, val
