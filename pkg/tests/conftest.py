import gzip
import os
import struct
from pathlib import Path

import numpy as np
import pytest

from vsqc.data import DATA_DIR_ENV, FILES

REPO_DATA = Path(__file__).resolve().parents[1] / "data" / "mnist"

_ACCEPTANCE_LINES = []


def record_acceptance(line: str) -> None:
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def write_idx_images(path, images, magic=0x803, gz=False, truncate=0):
    images = np.asarray(images, dtype=np.uint8)
    count = images.shape[0]
    rows, cols = images.shape[1:] if images.ndim == 3 else (28, 28)
    payload = struct.pack(">IIII", magic, count, rows, cols) + images.tobytes()
    if truncate:
        payload = payload[:-truncate]
    opener = gzip.open if gz else open
    with opener(path, "wb") as fh:
        fh.write(payload)
    return path


def write_idx_labels(path, labels, magic=0x801, gz=False, truncate=0):
    labels = np.asarray(labels, dtype=np.uint8)
    payload = struct.pack(">II", magic, len(labels)) + labels.tobytes()
    if truncate:
        payload = payload[:-truncate]
    opener = gzip.open if gz else open
    with opener(path, "wb") as fh:
        fh.write(payload)
    return path


def synthetic_digits(n_per_digit, seed, size=28):
    """Random non-blank images whose bright region depends on the digit, labels in file order 0..9 cycling."""
    rng = np.random.default_rng(seed)
    labels = np.tile(np.arange(10), n_per_digit)
    images = rng.integers(0, 40, size=(len(labels), size, size))
    for i, d in enumerate(labels):
        r = (d * size) // 10
        images[i, r : r + max(1, size // 10), :] = 200 + d
    return images.astype(np.uint8), labels


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def synthetic_mnist(tmp_path_factory):
    """A tiny MNIST-shaped IDX directory (28x28, 30 train / 10 test images per digit)."""
    root = tmp_path_factory.mktemp("mnist")
    for split, n in (("train", 30), ("test", 10)):
        images, labels = synthetic_digits(n, seed=len(split))
        image_name, label_name = FILES[split]
        write_idx_images(root / image_name, images)
        write_idx_labels(root / label_name, labels)
    return root


@pytest.fixture(scope="session")
def mnist_dir():
    """Real MNIST directory from ``$VSQC_DATA_DIR`` or ``data/mnist``; skips when absent."""
    for candidate in (os.environ.get(DATA_DIR_ENV), REPO_DATA):
        if candidate and Path(candidate).is_dir() and any(Path(candidate).iterdir()):
            return Path(candidate)
    pytest.skip("MNIST IDX files not found (set VSQC_DATA_DIR or fill data/mnist)")
