"""Sliding shadow circuits: templates, features and parameter-shift gradients.

A shadow circuit of width ``n_qsc`` is applied, with one shared set of angles,
at every window position ``i = 0 .. n - n_qsc`` of the register. The feature
at window ``i`` is the expectation of ``X (x) ... (x) X`` on that window.

Two evaluation routes are provided:

* :func:`extract_features` / :func:`feature_gradients` run the circuit on a
  copy of the full statevector for every window (and every shifted angle).
* :func:`window_rdms` + :func:`window_observable` reduce the same quantity to
  ``Tr(rho_i M(theta))`` with ``rho_i`` the reduced density matrix of window
  ``i`` and ``M = U^dagger X..X U``. This is what the training loop uses; the
  tests pin it to the statevector route.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qsim
from .qsim import Gate, QuantumState

VARIANTS = ("circuit1", "circuit2", "circuit3", "circuit4", "circuit5")
PARAMETER_SHIFT = np.pi / 2


class TemplateError(ValueError):
    """Unsupported variant or shape for a shadow circuit."""


@dataclass(frozen=True)
class TemplateGate:
    """A gate in a template; parametric gates carry a ``slot`` instead of an angle."""

    kind: str
    qubits: tuple[int, ...]
    slot: int | None = None


@dataclass(frozen=True)
class CircuitTemplate:
    variant: str
    n_qsc: int
    depth: int
    gates: tuple[TemplateGate, ...]

    @property
    def param_count(self) -> int:
        return sum(1 for g in self.gates if g.slot is not None)

    def bind(self, theta) -> list[Gate]:
        """Resolve slots against ``theta`` and return concrete gates."""
        return [
            Gate(g.kind, g.qubits, None if g.slot is None else float(theta[g.slot]))
            for g in self.gates
        ]


def window_count(n_qubits: int, n_qsc: int) -> int:
    return n_qubits - n_qsc + 1


class _Builder:
    def __init__(self):
        self.gates: list[TemplateGate] = []
        self.slot = 0

    def rot(self, kind: str, q: int) -> None:
        self.gates.append(TemplateGate(kind, (q,), self.slot))
        self.slot += 1

    def fixed(self, kind: str, *qubits: int) -> None:
        self.gates.append(TemplateGate(kind, tuple(qubits)))


def _normalize_variant(variant) -> str:
    name = str(variant).lower().replace("-", "").replace("_", "")
    if name.startswith("c") and name[1:].isdigit():
        name = "circuit" + name[1:]
    if name not in VARIANTS:
        raise TemplateError(f"unknown shadow circuit variant {variant!r}; expected one of {VARIANTS}")
    return name


def build_template(variant, n_qsc: int, depth: int) -> CircuitTemplate:
    """Build the gate program of one shadow-circuit variant.

    Accepts ``"circuit1"`` .. ``"circuit5"`` (``"C5"`` and ``"Circuit-5"`` also work).
    Ring entanglement is ``CNOT(q, (q + 1) % n_qsc)`` for every ``q``, which for
    ``n_qsc = 2`` is ``CNOT(0, 1)`` followed by ``CNOT(1, 0)``.
    """
    name = _normalize_variant(variant)
    if n_qsc < 2:
        raise TemplateError("n_qsc must be at least 2")
    if depth < 1:
        raise TemplateError("depth must be at least 1")

    qubits = range(n_qsc)
    b = _Builder()

    def chain():
        for q in range(n_qsc - 1):
            b.fixed("CNOT", q, q + 1)

    def ring():
        for q in qubits:
            b.fixed("CNOT", q, (q + 1) % n_qsc)

    def layer(kind):
        for q in qubits:
            b.rot(kind, q)

    head = {
        "circuit1": ("RX", "RY", "RX"),
        "circuit2": ("RX", "RY"),
        "circuit3": ("RX", "RY"),
        "circuit4": ("H", "RX", "RY", "RX"),
        "circuit5": ("RX", "RY", "RX"),
    }[name]
    for q in qubits:
        for kind in head:
            if kind == "H":
                b.fixed("H", q)
            else:
                b.rot(kind, q)

    for _ in range(depth):
        if name in ("circuit1", "circuit2"):
            chain()
            layer("RY")
        elif name == "circuit3":
            ring()
            layer("RY")
        else:
            ring()
            layer("RZ")
            layer("RY")

    return CircuitTemplate(name, n_qsc, depth, tuple(b.gates))


def _as_theta(template: CircuitTemplate, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (template.param_count,):
        raise qsim.ParameterCountError(
            f"template needs {template.param_count} angles, got shape {theta.shape}"
        )
    return theta


def extract_features(state: QuantumState, template: CircuitTemplate, theta) -> np.ndarray:
    """Shadow features of ``state`` by direct statevector simulation.

    For each window the circuit runs on a fresh copy of ``state``; the input is
    not modified.
    """
    theta = _as_theta(template, theta)
    if state.n_qubits < template.n_qsc:
        raise qsim.QubitIndexError(
            f"state has {state.n_qubits} qubits, fewer than the window width {template.n_qsc}"
        )
    n_win = window_count(state.n_qubits, template.n_qsc)
    out = np.empty(n_win)
    for i in range(n_win):
        work = state.copy()
        qsim.apply_window_circuit(work, template, theta, i)
        out[i] = qsim.expectation_x_string(work, i, template.n_qsc)
    return out


def feature_gradients(
    state: QuantumState, template: CircuitTemplate, theta, shift: float = PARAMETER_SHIFT
) -> np.ndarray:
    """Jacobian ``d o_i / d theta_l`` by the parameter-shift rule, shape ``(windows, params)``.

    Each column comes from ``[o(theta_l + s) - o(theta_l - s)] / 2`` with the
    slot restored afterwards. Only ``s = pi/2`` is exact for these gates; other
    values are accepted so callers can build a negative control.
    """
    theta = _as_theta(template, theta).copy()
    n_win = window_count(state.n_qubits, template.n_qsc)
    jac = np.empty((n_win, template.param_count))
    for slot in range(template.param_count):
        original = theta[slot]
        theta[slot] = original + shift
        plus = extract_features(state, template, theta)
        theta[slot] = original - shift
        minus = extract_features(state, template, theta)
        theta[slot] = original
        jac[:, slot] = (plus - minus) / 2
    return jac


# --- reduced-density-matrix route -------------------------------------------------


def template_unitary(template: CircuitTemplate, theta) -> np.ndarray:
    """Dense ``2**n_qsc`` square unitary of the template (qubit 0 most significant)."""
    theta = _as_theta(template, theta)
    return template_unitaries(template, theta[None, :])[0]


def template_unitaries(template: CircuitTemplate, thetas) -> np.ndarray:
    """Unitaries for a stack of angle vectors ``(B, param_count)``, shape ``(B, d, d)``."""
    thetas = np.asarray(thetas, dtype=float)
    if thetas.ndim != 2 or thetas.shape[1] != template.param_count:
        raise qsim.ParameterCountError(
            f"expected angle stack of shape (B, {template.param_count}), got {thetas.shape}"
        )
    n = template.n_qsc
    dim = 2**n
    # row j of each basis block evolves |j>, so the blocks end up holding U^T
    basis = np.broadcast_to(np.eye(dim, dtype=complex), (len(thetas), dim, dim)).copy()
    for g in template.gates:
        if g.slot is not None:
            mats = qsim.rotation_matrices(g.kind, thetas[:, g.slot])
            qsim.apply_single_qubit_batched(basis, n, g.qubits[0], mats)
        else:
            qsim.apply_gate_array(basis, n, Gate(g.kind, g.qubits))
    return np.swapaxes(basis, -1, -2).copy()


def x_string_matrix(width: int) -> np.ndarray:
    dim = 2**width
    return np.eye(dim)[::-1].astype(complex)


def window_observable(template: CircuitTemplate, theta) -> np.ndarray:
    """Heisenberg-picture observable ``U^dagger (X..X) U`` on one window."""
    return window_observables(template, _as_theta(template, theta)[None, :])[0]


def window_observables(template: CircuitTemplate, thetas) -> np.ndarray:
    u = template_unitaries(template, thetas)
    return np.conj(np.swapaxes(u, -1, -2)) @ x_string_matrix(template.n_qsc) @ u


def observable_shift_derivatives(
    template: CircuitTemplate, theta, shift: float = PARAMETER_SHIFT
) -> np.ndarray:
    """Parameter-shift derivatives of :func:`window_observable`, shape ``(params, d, d)``.

    Since every feature is linear in the observable, contracting these with a
    window's reduced density matrix gives the same numbers as
    :func:`feature_gradients`. All ``2 * params`` shifted circuits are built in
    one batched pass.
    """
    theta = _as_theta(template, theta)
    p = template.param_count
    offsets = shift * np.eye(p)
    obs = window_observables(template, np.concatenate([theta + offsets, theta - offsets]))
    return (obs[:p] - obs[p:]) / 2


def window_rdms(amplitudes, n_qubits: int, n_qsc: int) -> np.ndarray:
    """Reduced density matrices of every sliding window.

    ``amplitudes`` has shape ``(2**n,)`` or ``(batch, 2**n)``; the result has
    shape ``([batch,] windows, d, d)`` with ``d = 2**n_qsc``. Real inputs give
    real matrices.
    """
    amps = np.asarray(amplitudes)
    single = amps.ndim == 1
    if single:
        amps = amps[None, :]
    batch = amps.shape[0]
    dim = 2**n_qsc
    n_win = window_count(n_qubits, n_qsc)
    out = np.empty((batch, n_win, dim, dim), dtype=amps.dtype)
    for i in range(n_win):
        view = amps.reshape(batch, 2**i, dim, 2 ** (n_qubits - i - n_qsc))
        out[:, i] = np.einsum("baic,bajc->bij", view, np.conj(view))
    return out[0] if single else out


def features_from_rdms(rdms: np.ndarray, observable: np.ndarray) -> np.ndarray:
    """``Tr(rho_i M)`` for every window (and batch entry)."""
    return np.real(np.einsum("...ij,ji->...", rdms, observable))


def jacobian_from_rdms(rdms: np.ndarray, derivatives: np.ndarray) -> np.ndarray:
    """``Tr(rho_i dM_l)``; shape ``([batch,] windows, params)``."""
    return np.real(np.einsum("...ij,pji->...p", rdms, derivatives))


class ShadowLayer:
    """``n_shadow`` independent shadow circuits sharing one template.

    ``theta`` has shape ``(n_shadow, param_count)``. Features are laid out
    circuit-major, then window-major.
    """

    def __init__(self, template: CircuitTemplate, n_qubits: int, n_shadow: int = 1):
        if n_qubits < template.n_qsc:
            raise TemplateError("register narrower than the shadow circuit")
        if n_shadow < 1:
            raise TemplateError("n_shadow must be at least 1")
        self.template = template
        self.n_qubits = n_qubits
        self.n_shadow = n_shadow

    @property
    def n_windows(self) -> int:
        return window_count(self.n_qubits, self.template.n_qsc)

    @property
    def n_features(self) -> int:
        return self.n_shadow * self.n_windows

    @property
    def theta_shape(self) -> tuple[int, int]:
        return (self.n_shadow, self.template.param_count)

    def rdms(self, amplitudes) -> np.ndarray:
        return window_rdms(amplitudes, self.n_qubits, self.template.n_qsc)

    def features(self, rdms: np.ndarray, theta) -> np.ndarray:
        """Features of a batch of precomputed RDMs, shape ``(batch, n_features)``."""
        theta = np.asarray(theta, dtype=float).reshape(self.theta_shape)
        parts = [features_from_rdms(rdms, window_observable(self.template, t)) for t in theta]
        return np.concatenate(parts, axis=-1)

    def features_and_jacobian(self, rdms: np.ndarray, theta, shift: float = PARAMETER_SHIFT):
        """Features plus ``d feature / d theta``.

        The Jacobian has shape ``(batch, n_features, n_shadow, param_count)``;
        blocks coupling circuit ``s`` to another circuit's features are zero.
        """
        theta = np.asarray(theta, dtype=float).reshape(self.theta_shape)
        batch = rdms.shape[0]
        feats = np.empty((batch, self.n_features))
        jac = np.zeros((batch, self.n_features, *self.theta_shape))
        w = self.n_windows
        for s, t in enumerate(theta):
            feats[:, s * w : (s + 1) * w] = features_from_rdms(rdms, window_observable(self.template, t))
            derivs = observable_shift_derivatives(self.template, t, shift)
            jac[:, s * w : (s + 1) * w, s, :] = jacobian_from_rdms(rdms, derivs)
        return feats, jac

    def state_features(self, state: QuantumState, theta) -> np.ndarray:
        """Statevector-route features for a single state (reference path)."""
        theta = np.asarray(theta, dtype=float).reshape(self.theta_shape)
        return np.concatenate([extract_features(state, self.template, t) for t in theta])
