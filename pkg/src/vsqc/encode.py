"""Image to amplitude-encoded state conversion."""

from __future__ import annotations

import numpy as np

from .qsim import QuantumState


class EncodingError(ValueError):
    """Input cannot be turned into a valid amplitude-encoded state."""


class DegenerateInputError(EncodingError):
    """The vector has zero norm."""


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def flatten_and_pad(image, target_len: int) -> np.ndarray:
    """Row-major flatten ``image`` and zero-pad it to ``target_len`` entries."""
    pixels = np.asarray(image, dtype=float)
    if pixels.size and (pixels.min() < 0 or pixels.max() > 255):
        raise EncodingError("pixel values must lie in [0, 255]")
    flat = pixels.reshape(-1)
    if flat.size > target_len:
        raise EncodingError(f"image has {flat.size} pixels, more than target length {target_len}")
    out = np.zeros(target_len, dtype=float)
    out[: flat.size] = flat
    return out


def l2_normalize(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    norm = np.linalg.norm(x)
    if not norm > 0:
        raise DegenerateInputError("cannot normalize a zero vector")
    return x / norm


def amplitude_encode(x_norm, tol: float = 1e-10) -> QuantumState:
    """Load a unit-norm real vector of length ``2**n`` as the amplitudes of an n-qubit state."""
    x = np.asarray(x_norm, dtype=float)
    if x.ndim != 1 or not _is_power_of_two(x.size):
        raise EncodingError(f"length must be a power of two, got shape {x.shape}")
    if abs(np.linalg.norm(x) - 1.0) > tol:
        raise EncodingError(f"input norm {np.linalg.norm(x)!r} is not 1")
    n_qubits = x.size.bit_length() - 1
    return QuantumState(n_qubits, x.astype(complex))


def encode_image(image, n_qubits: int) -> QuantumState:
    return amplitude_encode(l2_normalize(flatten_and_pad(image, 2**n_qubits)))


def encode_batch(images, n_qubits: int) -> np.ndarray:
    """Vectorized encode of an ``(N, H, W)`` stack into real amplitudes of shape ``(N, 2**n)``.

    Same arithmetic as :func:`encode_image`, one row per image.
    """
    images = np.asarray(images, dtype=float)
    n = images.shape[0]
    flat = images.reshape(n, -1)
    target = 2**n_qubits
    if flat.shape[1] > target:
        raise EncodingError(f"images have {flat.shape[1]} pixels, more than {target}")
    out = np.zeros((n, target), dtype=float)
    out[:, : flat.shape[1]] = flat
    norms = np.linalg.norm(out, axis=1)
    if np.any(norms <= 0):
        raise DegenerateInputError(f"{int(np.sum(norms <= 0))} image(s) are all zero")
    return out / norms[:, None]


def one_hot(label: int, n_classes: int) -> np.ndarray:
    vec = np.zeros(n_classes)
    vec[label] = 1.0
    return vec
