"""Finite-difference audit of the parameter-shift and analytic head gradients.

Used by the ``gradcheck`` command. Each draw builds a random real input state,
random angles, a random head and random labels, then compares

* the shadow feature Jacobian (RDM route and statevector route),
* ``d loss / d theta``, ``d loss / d W`` and ``d loss / d b`` for the sigmoid/MSE
  and softmax/CE losses

against central differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import head as fc
from .qsim import QuantumState
from .shadow import PARAMETER_SHIFT, ShadowLayer, build_template, feature_gradients
from .train import batch_loss_and_grads

DEFAULT_TOL = 1e-5


@dataclass
class GradcheckReport:
    max_deviation: float
    theta_deviation: np.ndarray  # per angle slot, max over draws and checks
    weight_deviation: float
    bias_deviation: float
    draws: int
    tol: float = DEFAULT_TOL
    by_check: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.max_deviation <= self.tol)


def central_difference(f, x, h: float = 1e-5) -> np.ndarray:
    """Derivative of ``f`` with respect to every entry of ``x``; trailing axes follow ``x``."""
    x = np.asarray(x, dtype=float)
    cols = []
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        cols.append((np.asarray(f(xp)) - np.asarray(f(xm))) / (2 * h))
    out = np.stack(cols, axis=-1)
    return out.reshape(out.shape[:-1] + x.shape)


def _loss(layer, rdms, labels, theta, params):
    return batch_loss_and_grads(rdms, labels, theta, params, layer)[0]


def run_gradcheck(
    n_qubits: int = 4,
    n_qsc: int = 2,
    depth: int = 2,
    variant: str = "circuit5",
    draws: int = 50,
    batch: int = 4,
    n_classes: int = 3,
    seed: int = 0,
    shift: float = PARAMETER_SHIFT,
    h: float = 1e-5,
    tol: float = DEFAULT_TOL,
) -> GradcheckReport:
    """Run ``draws`` randomized comparisons and collect the worst deviations.

    ``shift`` only exists so a corrupted shift constant can be fed in as a
    negative control.
    """
    layer = ShadowLayer(build_template(variant, n_qsc, depth), n_qubits)
    template = layer.template
    n_params = template.param_count
    rng = np.random.default_rng(seed)
    theta_dev = np.zeros(n_params)
    w_dev = b_dev = 0.0
    checks = {"jacobian_rdm": 0.0, "jacobian_statevector": 0.0, "loss_mse": 0.0, "loss_ce": 0.0}

    for _ in range(draws):
        amps = rng.normal(size=(batch, 2**n_qubits))
        amps /= np.linalg.norm(amps, axis=1, keepdims=True)
        rdms = layer.rdms(amps)
        theta = rng.uniform(0, 2 * np.pi, size=layer.theta_shape)

        _, jac = layer.features_and_jacobian(rdms, theta, shift=shift)
        fd_jac = central_difference(lambda t: layer.features(rdms, t), theta, h)
        dev = np.abs(jac - fd_jac).max(axis=(0, 1, 2))
        theta_dev = np.maximum(theta_dev, dev)
        checks["jacobian_rdm"] = max(checks["jacobian_rdm"], float(dev.max()))

        state = QuantumState(n_qubits, amps[0].astype(complex))
        sv_jac = feature_gradients(state, template, theta[0], shift=shift)
        dev = np.abs(sv_jac - fd_jac[0, :, 0, :]).max(axis=0)
        theta_dev = np.maximum(theta_dev, dev)
        checks["jacobian_statevector"] = max(checks["jacobian_statevector"], float(dev.max()))

        for name, k, labels in (
            ("loss_mse", 1, rng.integers(0, 2, size=batch)),
            ("loss_ce", n_classes, rng.integers(0, n_classes, size=batch)),
        ):
            params = fc.init_head(k, layer.n_features, rng, scale=1.0)
            _, d_theta, d_w, d_b = batch_loss_and_grads(rdms, labels, theta, params, layer, shift=shift)
            fd_theta = central_difference(lambda t: _loss(layer, rdms, labels, t, params), theta, h)
            fd_w = central_difference(
                lambda w: _loss(layer, rdms, labels, theta, fc.HeadParams(w, params.bias)), params.weights, h
            )
            fd_b = central_difference(
                lambda b: _loss(layer, rdms, labels, theta, fc.HeadParams(params.weights, b)), params.bias, h
            )
            dev_theta = np.abs(d_theta - fd_theta).max(axis=0)
            theta_dev = np.maximum(theta_dev, dev_theta)
            w_dev = max(w_dev, float(np.abs(d_w - fd_w).max()))
            b_dev = max(b_dev, float(np.abs(d_b - fd_b).max()))
            checks[name] = max(
                checks[name],
                float(dev_theta.max()),
                float(np.abs(d_w - fd_w).max()),
                float(np.abs(d_b - fd_b).max()),
            )

    worst = max(float(theta_dev.max()) if n_params else 0.0, w_dev, b_dev)
    return GradcheckReport(worst, theta_dev, w_dev, b_dev, draws, tol, checks)
