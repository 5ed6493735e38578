"""Minimal pure-state statevector simulator.

Qubit 0 is the most significant bit of the amplitude index, so the basis
state ``|q0 q1 ... q_{n-1}>`` sits at index ``q0 * 2**(n-1) + ... + q_{n-1}``.
Gates are applied in place by viewing the amplitude vector as a
``(left, 2, right)`` tensor around the target axis; no ``2**n x 2**n``
operator is ever built here.

The kernels accept any array whose last axis has length ``2**n``, which lets
the same code push a whole batch of states (or the columns of an identity
matrix) through a circuit in one call.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

MAX_QUBITS = 24

SINGLE_QUBIT_KINDS = ("RX", "RY", "RZ", "H", "X")
PARAMETRIC_KINDS = ("RX", "RY", "RZ")
GATE_KINDS = SINGLE_QUBIT_KINDS + ("CNOT",)

_H = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)
_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


class SimulatorError(ValueError):
    """Base class for simulator input errors."""


class QubitIndexError(SimulatorError, IndexError):
    """A gate or window refers to a qubit the state does not have."""


class StateSizeError(SimulatorError):
    """Requested register size is outside the supported range."""


@dataclass(frozen=True)
class Gate:
    """One gate instance.

    ``targets`` holds one qubit index, or ``(control, target)`` for CNOT.
    ``angle`` is in radians and only meaningful for RX/RY/RZ.
    """

    kind: str
    targets: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise SimulatorError(f"unknown gate kind {self.kind!r}")
        arity = 2 if self.kind == "CNOT" else 1
        if len(self.targets) != arity:
            raise SimulatorError(f"{self.kind} takes {arity} qubit(s), got {self.targets}")
        if self.kind == "CNOT" and self.targets[0] == self.targets[1]:
            raise SimulatorError("CNOT control and target must differ")
        if self.kind in PARAMETRIC_KINDS and self.angle is None:
            raise SimulatorError(f"{self.kind} requires an angle")


def rx_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_matrix(theta: float) -> np.ndarray:
    return np.array(
        [[np.exp(-0.5j * theta), 0.0], [0.0, np.exp(0.5j * theta)]], dtype=complex
    )


CNOT_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


def gate_matrix(gate: Gate) -> np.ndarray:
    """Return the small unitary of ``gate`` (2x2, or 4x4 for CNOT with control as the high bit)."""
    if gate.kind == "RX":
        return rx_matrix(gate.angle)
    if gate.kind == "RY":
        return ry_matrix(gate.angle)
    if gate.kind == "RZ":
        return rz_matrix(gate.angle)
    if gate.kind == "H":
        return _H.copy()
    if gate.kind == "X":
        return _X.copy()
    return CNOT_MATRIX.copy()


@dataclass
class QuantumState:
    """Normalized amplitude vector over ``n_qubits`` qubits."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise StateSizeError(
                f"expected {2**self.n_qubits} amplitudes for {self.n_qubits} qubits, "
                f"got shape {self.amplitudes.shape}"
            )

    def copy(self) -> "QuantumState":
        return QuantumState(self.n_qubits, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def init_basis_state(n_qubits: int) -> QuantumState:
    """Return ``|0...0>`` on ``n_qubits`` qubits."""
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise StateSizeError(f"n_qubits must be an integer in [1, {MAX_QUBITS}], got {n_qubits!r}")
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[0] = 1.0
    return QuantumState(int(n_qubits), amps)


def _check_qubits(qubits: Iterable[int], n_qubits: int) -> None:
    for q in qubits:
        if not 0 <= q < n_qubits:
            raise QubitIndexError(f"qubit {q} out of range for {n_qubits}-qubit state")


def apply_single_qubit(amps: np.ndarray, n_qubits: int, qubit: int, matrix: np.ndarray) -> None:
    """Apply a 2x2 ``matrix`` to ``qubit`` of ``amps`` in place.

    ``amps`` may carry leading batch axes; the last axis must be ``2**n_qubits``.
    """
    view = amps.reshape(amps.shape[:-1] + (2**qubit, 2, 2 ** (n_qubits - qubit - 1)))
    a0 = view[..., 0, :].copy()
    a1 = view[..., 1, :]
    view[..., 0, :] = matrix[0, 0] * a0 + matrix[0, 1] * a1
    view[..., 1, :] = matrix[1, 0] * a0 + matrix[1, 1] * a1


def apply_single_qubit_batched(amps: np.ndarray, n_qubits: int, qubit: int, matrices: np.ndarray) -> None:
    """Like :func:`apply_single_qubit` with one 2x2 matrix per leading batch entry.

    ``amps`` has shape ``(B, ..., 2**n_qubits)`` and ``matrices`` ``(B, 2, 2)``.
    """
    batch = amps.shape[0]
    view = amps.reshape((batch, -1, 2**qubit, 2, 2 ** (n_qubits - qubit - 1)))
    m = matrices.reshape(batch, 1, 1, 2, 2)
    a0 = view[..., 0, :].copy()
    a1 = view[..., 1, :].copy()
    view[..., 0, :] = m[..., 0, 0, None] * a0 + m[..., 0, 1, None] * a1
    view[..., 1, :] = m[..., 1, 0, None] * a0 + m[..., 1, 1, None] * a1


def rotation_matrices(kind: str, angles) -> np.ndarray:
    """Stack of RX/RY/RZ matrices, shape ``(len(angles), 2, 2)``."""
    t = np.asarray(angles, dtype=float) / 2
    c, s = np.cos(t), np.sin(t)
    out = np.zeros(t.shape + (2, 2), dtype=complex)
    if kind == "RX":
        out[..., 0, 0] = c
        out[..., 1, 1] = c
        out[..., 0, 1] = -1j * s
        out[..., 1, 0] = -1j * s
    elif kind == "RY":
        out[..., 0, 0] = c
        out[..., 1, 1] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
    elif kind == "RZ":
        out[..., 0, 0] = c - 1j * s
        out[..., 1, 1] = c + 1j * s
    else:
        raise SimulatorError(f"{kind} is not a rotation")
    return out


def apply_cnot(amps: np.ndarray, n_qubits: int, control: int, target: int) -> None:
    """Flip ``target`` on the ``control = 1`` half of ``amps`` in place."""
    lo, hi = sorted((control, target))
    shape = amps.shape[:-1] + (
        2**lo,
        2,
        2 ** (hi - lo - 1),
        2,
        2 ** (n_qubits - hi - 1),
    )
    view = amps.reshape(shape)
    # axis -4 is the lower-index qubit, axis -2 the higher one
    if control == lo:
        sub = view[..., 1, :, :, :]
        tmp = sub[..., 0, :].copy()
        sub[..., 0, :] = sub[..., 1, :]
        sub[..., 1, :] = tmp
    else:
        sub = view[..., :, :, 1, :]
        tmp = sub[..., 0, :, :].copy()
        sub[..., 0, :, :] = sub[..., 1, :, :]
        sub[..., 1, :, :] = tmp


def apply_gate_array(amps: np.ndarray, n_qubits: int, gate: Gate, offset: int = 0) -> None:
    """Apply ``gate`` (qubits shifted by ``offset``) to a raw amplitude array in place."""
    qubits = tuple(q + offset for q in gate.targets)
    _check_qubits(qubits, n_qubits)
    if not amps.flags.c_contiguous:
        raise SimulatorError("amplitude array must be C-contiguous for in-place updates")
    if gate.kind == "CNOT":
        apply_cnot(amps, n_qubits, qubits[0], qubits[1])
    else:
        apply_single_qubit(amps, n_qubits, qubits[0], gate_matrix(gate))


def apply_gate(state: QuantumState, gate: Gate) -> QuantumState:
    """Apply ``gate`` to ``state`` in place and return the same state object."""
    apply_gate_array(state.amplitudes, state.n_qubits, gate)
    return state


def expectation_x_string(state: QuantumState, window_start: int, width: int) -> float:
    """Return ``<psi| I..I X^{(x)width} I..I |psi>`` for the window starting at ``window_start``.

    X on every qubit of the window maps local index ``k`` to ``2**width - 1 - k``,
    i.e. it reverses the window axis of the reshaped amplitudes.
    """
    return float(x_string_expectations(state.amplitudes, state.n_qubits, window_start, width))


def x_string_expectations(amps: np.ndarray, n_qubits: int, window_start: int, width: int):
    """Batched form of :func:`expectation_x_string`; returns one real per leading index."""
    if width < 1:
        raise SimulatorError("width must be positive")
    _check_qubits((window_start, window_start + width - 1), n_qubits)
    view = amps.reshape(
        amps.shape[:-1] + (2**window_start, 2**width, 2 ** (n_qubits - window_start - width))
    )
    flipped = view[..., ::-1, :]
    value = np.sum(np.conj(view) * flipped, axis=(-3, -2, -1))
    return np.real(value)


class ParameterCountError(SimulatorError):
    """Angle vector length does not match the template's slot count."""


def apply_window_circuit(state: QuantumState, template, theta, window_start: int) -> QuantumState:
    """Apply ``template`` to the qubits ``window_start .. window_start + n_qsc - 1`` in place.

    ``template`` is a :class:`vsqc.shadow.CircuitTemplate` (anything exposing
    ``n_qsc``, ``param_count`` and ``bind``); angles are read from ``theta`` by slot.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (template.param_count,):
        raise ParameterCountError(
            f"template needs {template.param_count} angles, got shape {theta.shape}"
        )
    if window_start < 0 or window_start + template.n_qsc > state.n_qubits:
        raise QubitIndexError(
            f"window [{window_start}, {window_start + template.n_qsc}) exceeds {state.n_qubits} qubits"
        )
    for gate in template.bind(theta):
        apply_gate_array(state.amplitudes, state.n_qubits, gate, offset=window_start)
    return state
