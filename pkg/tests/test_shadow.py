import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import central_difference, dense_shadow_feature, dense_window_unitary, random_state
from vsqc import qsim, shadow
from vsqc.qsim import QuantumState
from vsqc.shadow import ShadowLayer, build_template

HEAD_ROTATIONS = {"circuit1": 3, "circuit2": 2, "circuit3": 2, "circuit4": 3, "circuit5": 3}
LAYER_ROTATIONS = {"circuit1": 1, "circuit2": 1, "circuit3": 1, "circuit4": 2, "circuit5": 2}


def real_state(rng, n):
    v = rng.normal(size=2**n)
    return QuantumState(n, v / np.linalg.norm(v))


class TestTemplates:
    def test_circuit5_count(self):
        assert build_template("circuit5", 2, 3).param_count == 18

    def test_circuit1_count(self):
        assert build_template("circuit1", 2, 1).param_count == 8

    @pytest.mark.parametrize("variant", shadow.VARIANTS)
    @pytest.mark.parametrize("n_qsc, depth", [(2, 1), (3, 2), (4, 3)])
    def test_counts_all_variants(self, variant, n_qsc, depth):
        t = build_template(variant, n_qsc, depth)
        assert t.param_count == n_qsc * (HEAD_ROTATIONS[variant] + depth * LAYER_ROTATIONS[variant])

    @pytest.mark.parametrize("variant", shadow.VARIANTS)
    def test_slots_and_indices(self, variant):
        t = build_template(variant, 3, 2)
        slots = [g.slot for g in t.gates if g.slot is not None]
        assert slots == list(range(t.param_count))
        assert all(0 <= q < 3 for g in t.gates for q in g.qubits)

    def test_circuit5_program(self):
        t = build_template("circuit5", 2, 1)
        got = [(g.kind, g.qubits) for g in t.gates]
        assert got == [
            ("RX", (0,)), ("RY", (0,)), ("RX", (0,)),
            ("RX", (1,)), ("RY", (1,)), ("RX", (1,)),
            ("CNOT", (0, 1)), ("CNOT", (1, 0)),
            ("RZ", (0,)), ("RZ", (1,)),
            ("RY", (0,)), ("RY", (1,)),
        ]

    def test_chain_vs_ring(self):
        chain = [g.qubits for g in build_template("circuit2", 3, 1).gates if g.kind == "CNOT"]
        ring = [g.qubits for g in build_template("circuit3", 3, 1).gates if g.kind == "CNOT"]
        assert chain == [(0, 1), (1, 2)]
        assert ring == [(0, 1), (1, 2), (2, 0)]

    def test_circuit4_hadamards(self):
        t = build_template("circuit4", 2, 1)
        assert [g.kind for g in t.gates[:4]] == ["H", "RX", "RY", "RX"]

    @pytest.mark.parametrize("alias", ["C5", "Circuit-5", "circuit_5", "CIRCUIT5"])
    def test_aliases(self, alias):
        assert build_template(alias, 2, 1).variant == "circuit5"

    @pytest.mark.parametrize("args", [("circuit5", 2, 0), ("circuit5", 1, 1), ("circuit9", 2, 1), ("qcnn", 2, 1)])
    def test_rejected(self, args):
        with pytest.raises(shadow.TemplateError):
            build_template(*args)

    def test_template_unitary_matches_dense(self, rng):
        for variant in shadow.VARIANTS:
            t = build_template(variant, 3, 2)
            theta = rng.uniform(0, 2 * np.pi, t.param_count)
            np.testing.assert_allclose(
                shadow.template_unitary(t, theta), dense_window_unitary(t, theta, 0, 3), atol=1e-12
            )


class TestExtractFeatures:
    def test_window_count(self, rng):
        t = build_template("circuit5", 2, 3)
        assert shadow.extract_features(real_state(rng, 10), t, np.zeros(18)).shape == (9,)

    def test_zero_angles_zero_state(self):
        t = build_template("circuit5", 2, 3)
        np.testing.assert_allclose(
            shadow.extract_features(qsim.init_basis_state(6), t, np.zeros(18)), 0.0, atol=1e-15
        )

    @pytest.mark.parametrize("variant", shadow.VARIANTS)
    def test_matches_dense(self, rng, variant):
        t = build_template(variant, 2, 2)
        for _ in range(5):
            psi = random_state(rng, 4)
            theta = rng.uniform(0, 2 * np.pi, t.param_count)
            got = shadow.extract_features(QuantumState(4, psi), t, theta)
            want = [dense_shadow_feature(psi, t, theta, i, 4) for i in range(3)]
            assert np.max(np.abs(np.imag(want))) <= 1e-12
            assert np.max(np.abs(got - np.real(want))) <= 1e-10

    def test_input_not_mutated(self, rng):
        s = real_state(rng, 5)
        before = s.amplitudes.copy()
        t = build_template("circuit5", 2, 2)
        shadow.extract_features(s, t, rng.uniform(0, 6, t.param_count))
        np.testing.assert_array_equal(s.amplitudes, before)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), variant=st.sampled_from(shadow.VARIANTS))
    def test_range(self, seed, variant):
        rng = np.random.default_rng(seed)
        t = build_template(variant, 2, 2)
        o = shadow.extract_features(QuantumState(5, random_state(rng, 5)), t, rng.uniform(-10, 10, t.param_count))
        assert np.all(np.abs(o) <= 1 + 1e-12)

    def test_window_order_irrelevant(self, rng):
        t = build_template("circuit5", 2, 2)
        s = real_state(rng, 6)
        theta = rng.uniform(0, 6, t.param_count)
        full = shadow.extract_features(s, t, theta)
        for i in rng.permutation(5):
            work = s.copy()
            qsim.apply_window_circuit(work, t, theta, int(i))
            assert qsim.expectation_x_string(work, int(i), 2) == full[i]

    def test_two_pi_periodicity(self, rng):
        t = build_template("circuit5", 2, 2)
        s = real_state(rng, 4)
        theta = rng.uniform(0, 2 * np.pi, t.param_count)
        base = shadow.extract_features(s, t, theta)
        for slot in range(t.param_count):
            shifted = theta.copy()
            shifted[slot] += 2 * np.pi
            np.testing.assert_allclose(shadow.extract_features(s, t, shifted), base, atol=1e-10)

    def test_deterministic(self, rng):
        t = build_template("circuit5", 2, 3)
        s = real_state(rng, 8)
        theta = rng.uniform(0, 6, t.param_count)
        a = shadow.extract_features(s, t, theta)
        b = shadow.extract_features(s, t, theta)
        assert a.tobytes() == b.tobytes()

    def test_parameter_count_checked(self, rng):
        t = build_template("circuit5", 2, 1)
        with pytest.raises(qsim.ParameterCountError):
            shadow.extract_features(real_state(rng, 3), t, np.zeros(5))


class TestParameterShift:
    def test_matches_finite_difference_50_draws(self):
        t = build_template("circuit5", 2, 2)
        worst = 0.0
        for seed in range(50):
            rng = np.random.default_rng(seed)
            s = QuantumState(4, random_state(rng, 4))
            theta = rng.uniform(0, 2 * np.pi, t.param_count)
            jac = shadow.feature_gradients(s, t, theta)
            fd = central_difference(lambda th: shadow.extract_features(s, t, th), theta, h=1e-5)
            worst = max(worst, np.max(np.abs(jac - fd)))
        assert worst <= 1e-5

    @pytest.mark.parametrize("variant", shadow.VARIANTS)
    def test_all_variants(self, rng, variant):
        t = build_template(variant, 3, 1)
        s = QuantumState(4, random_state(rng, 4))
        theta = rng.uniform(0, 2 * np.pi, t.param_count)
        fd = central_difference(lambda th: shadow.extract_features(s, t, th), theta, h=1e-5)
        assert np.max(np.abs(shadow.feature_gradients(s, t, theta) - fd)) <= 1e-5

    def test_theta_restored(self, rng):
        t = build_template("circuit5", 2, 1)
        theta = rng.uniform(0, 6, t.param_count)
        before = theta.copy()
        shadow.feature_gradients(real_state(rng, 3), t, theta)
        np.testing.assert_array_equal(theta, before)

    def test_wrong_shift_is_wrong(self, rng):
        t = build_template("circuit5", 2, 1)
        s = real_state(rng, 3)
        theta = rng.uniform(0, 6, t.param_count)
        good = shadow.feature_gradients(s, t, theta)
        bad = shadow.feature_gradients(s, t, theta, shift=1.0)
        assert np.max(np.abs(good - bad)) > 1e-3


class TestReducedDensityRoute:
    @pytest.mark.parametrize("variant", shadow.VARIANTS)
    @pytest.mark.parametrize("n, n_qsc", [(4, 2), (5, 3), (6, 2)])
    def test_features_agree(self, rng, variant, n, n_qsc):
        t = build_template(variant, n_qsc, 2)
        layer = ShadowLayer(t, n)
        amps = rng.normal(size=(3, 2**n))
        amps /= np.linalg.norm(amps, axis=1, keepdims=True)
        theta = rng.uniform(0, 2 * np.pi, layer.theta_shape)
        fast = layer.features(layer.rdms(amps), theta)
        for row, a in zip(fast, amps):
            np.testing.assert_allclose(row, shadow.extract_features(QuantumState(n, a), t, theta[0]), atol=1e-12)

    def test_complex_states(self, rng):
        t = build_template("circuit4", 2, 2)
        psi = random_state(rng, 4)
        theta = rng.uniform(0, 6, t.param_count)
        rho = shadow.window_rdms(psi, 4, 2)
        fast = shadow.features_from_rdms(rho, shadow.window_observable(t, theta))
        np.testing.assert_allclose(fast, shadow.extract_features(QuantumState(4, psi), t, theta), atol=1e-12)

    def test_jacobian_agrees(self, rng):
        t = build_template("circuit5", 2, 3)
        layer = ShadowLayer(t, 6)
        amps = rng.normal(size=(2, 64))
        amps /= np.linalg.norm(amps, axis=1, keepdims=True)
        theta = rng.uniform(0, 2 * np.pi, layer.theta_shape)
        feats, jac = layer.features_and_jacobian(layer.rdms(amps), theta)
        for b in range(2):
            s = QuantumState(6, amps[b])
            np.testing.assert_allclose(feats[b], shadow.extract_features(s, t, theta[0]), atol=1e-12)
            np.testing.assert_allclose(jac[b, :, 0, :], shadow.feature_gradients(s, t, theta[0]), atol=1e-12)

    def test_rdm_is_density_matrix(self, rng):
        rho = shadow.window_rdms(random_state(rng, 5), 5, 2)
        assert rho.shape == (4, 4, 4)
        for r in rho:
            np.testing.assert_allclose(r, r.conj().T, atol=1e-15)
            assert np.trace(r).real == pytest.approx(1.0)
            assert np.linalg.eigvalsh(r).min() >= -1e-12

    def test_multiple_shadow_circuits_layout(self, rng):
        t = build_template("circuit5", 2, 1)
        layer = ShadowLayer(t, 5, n_shadow=2)
        assert layer.n_features == 8
        amps = rng.normal(size=(1, 32))
        amps /= np.linalg.norm(amps)
        theta = rng.uniform(0, 6, layer.theta_shape)
        feats, jac = layer.features_and_jacobian(layer.rdms(amps), theta)
        s = QuantumState(5, amps[0])
        np.testing.assert_allclose(feats[0, :4], shadow.extract_features(s, t, theta[0]), atol=1e-12)
        np.testing.assert_allclose(feats[0, 4:], shadow.extract_features(s, t, theta[1]), atol=1e-12)
        assert np.all(jac[0, :4, 1] == 0) and np.all(jac[0, 4:, 0] == 0)
        np.testing.assert_allclose(layer.state_features(s, theta), feats[0], atol=1e-12)

    def test_layer_rejects_bad_shapes(self):
        with pytest.raises(shadow.TemplateError):
            ShadowLayer(build_template("circuit5", 3, 1), 2)
        with pytest.raises(shadow.TemplateError):
            ShadowLayer(build_template("circuit5", 2, 1), 4, n_shadow=0)
