import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from qfes.circuit import Circuit
from qfes.gates import Gate
from qfes.open_system import (DEPHASE, SIGMA_MINUS, SIGMA_PLUS, ChannelError, GateNoiseProfile,
                              LindbladModel, QuantumChannel, StepTooLarge, amplitude_damping_channel,
                              apply_channel, dephasing_channel, depolarizing_channel, generator_norm,
                              gkls_evolve, gkls_step, gkls_superoperator, noisy_circuit_run)
from qfes.state import DensityMatrix, StateVector

from conftest import random_density


def random_model(rng, d, n_ops=3):
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    ops = [(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / d for _ in range(n_ops)]
    return LindbladModel((A + A.conj().T) / 2, [(L, float(rng.uniform(0, 1))) for L in ops])


PLUS = np.full((2, 2), 0.5, dtype=complex)
ONE = np.diag([0.0, 1.0]).astype(complex)


class TestAnalytic:
    def test_dephasing(self):
        nu = 0.7
        t = np.linspace(0, 5 / nu, 41)
        snaps = gkls_evolve(DensityMatrix(PLUS), LindbladModel(np.zeros((2, 2)), [(DEPHASE, nu)]), t[-1], 40)
        r = np.array([s.rho for s in snaps])
        np.testing.assert_allclose(r[:, 0, 1], 0.5 * np.exp(-nu * t), atol=1e-6)
        np.testing.assert_allclose(r[:, 0, 0], 0.5, atol=1e-12)

    def test_relaxation(self):
        nu = 1.3
        t = np.linspace(0, 5 / nu, 41)
        snaps = gkls_evolve(DensityMatrix(ONE), LindbladModel(np.zeros((2, 2)), [(SIGMA_MINUS, nu)]), t[-1], 40)
        r = np.array([s.rho for s in snaps])
        np.testing.assert_allclose(r[:, 1, 1].real, np.exp(-nu * t), atol=1e-6)

    def test_excitation(self):
        snaps = gkls_evolve(DensityMatrix(np.diag([1.0, 0.0])), LindbladModel(np.zeros((2, 2)), [(SIGMA_PLUS, 1.0)]), 2.0)
        assert snaps[-1].rho[1, 1].real == pytest.approx(1 - np.exp(-2.0), abs=1e-7)

    def test_closed_system_purity(self, rng):
        m = random_model(rng, 4, 0)
        psi = rng.normal(size=4) + 1j * rng.normal(size=4)
        psi /= np.linalg.norm(psi)
        snaps = gkls_evolve(DensityMatrix(np.outer(psi, psi.conj())), m, 3.0, 30)
        np.testing.assert_allclose([s.purity() for s in snaps], 1.0, atol=1e-8)

    @pytest.mark.parametrize("d", [2, 4, 8])
    def test_superoperator_oracle(self, rng, d):
        m = random_model(rng, d)
        rho = random_density(rng, d)
        got = gkls_evolve(DensityMatrix(rho), m, 0.8)[-1].rho
        ref = (expm(gkls_superoperator(m) * 0.8) @ rho.reshape(-1)).reshape(d, d)
        np.testing.assert_allclose(got, ref, atol=1e-8)


class TestCPTPNumerics:
    @pytest.mark.parametrize("d", [2, 4, 16])
    def test_thousand_steps(self, rng, d):
        m = random_model(rng, d)
        dt = 0.05 / generator_norm(m)
        rho = DensityMatrix(random_density(rng, d))
        for _ in range(1000):
            rho = gkls_step(rho, m, dt)
        assert abs(rho.trace() - 1) <= 1e-8
        assert rho.eigenvalues().min() >= -1e-6
        np.testing.assert_allclose(rho.rho, rho.rho.conj().T, atol=1e-12)

    def test_step_guard(self, rng):
        m = random_model(rng, 2)
        with pytest.raises(StepTooLarge):
            gkls_step(DensityMatrix(PLUS), m, 1.0 / generator_norm(m))

    def test_model_validation(self):
        with pytest.raises(ValueError):
            LindbladModel(np.array([[0, 1], [0, 0]]))
        with pytest.raises(ValueError):
            LindbladModel(np.zeros((2, 2)), [(DEPHASE, -0.1)])

    def test_rate_matrix_diagonalization(self, rng):
        F = [SIGMA_MINUS, DEPHASE]
        A = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        gamma = A @ A.conj().T
        m = LindbladModel.from_rate_matrix(np.zeros((2, 2)), F, gamma)
        rho = random_density(rng, 2)
        direct = sum(gamma[j, k] * (F[j] @ rho @ F[k].conj().T
                                    - 0.5 * (F[k].conj().T @ F[j] @ rho + rho @ F[k].conj().T @ F[j]))
                     for j in range(2) for k in range(2))
        from qfes.open_system import gkls_rhs
        np.testing.assert_allclose(gkls_rhs(rho, m), direct, atol=1e-12)
        with pytest.raises(ValueError):
            LindbladModel.from_rate_matrix(np.zeros((2, 2)), F, np.diag([1.0, -0.5]))


class TestChannels:
    def test_identity(self, rng):
        rho = DensityMatrix(random_density(rng, 3))
        np.testing.assert_allclose(apply_channel(rho, QuantumChannel([np.eye(3)])).rho, rho.rho, atol=1e-15)

    @given(st.floats(0, 1))
    def test_depolarizing(self, p):
        rho = random_density(np.random.default_rng(5), 3)
        out = apply_channel(DensityMatrix(rho), depolarizing_channel(3, p)).rho
        np.testing.assert_allclose(out, (1 - p) * rho + p * np.eye(3) / 3, atol=1e-12)

    def test_full_dephasing_is_diagonal(self, rng):
        rho = random_density(rng, 4)
        out = apply_channel(DensityMatrix(rho), dephasing_channel(4, 1.0)).rho
        np.testing.assert_allclose(out, np.diag(np.diag(rho)), atol=1e-15)

    @pytest.mark.parametrize("ch", [depolarizing_channel(4, 0.3), dephasing_channel(4, 0.6)])
    def test_fixed_point_and_purity(self, rng, ch):
        mixed = DensityMatrix.maximally_mixed(4)
        np.testing.assert_allclose(apply_channel(mixed, ch).rho, mixed.rho, atol=1e-12)
        rho = DensityMatrix(random_density(rng, 4))
        for _ in range(20):
            nxt = apply_channel(rho, ch)
            assert nxt.purity() <= rho.purity() + 1e-9
            assert abs(nxt.trace() - 1) <= 1e-10
            assert nxt.eigenvalues().min() >= -1e-9
            rho = nxt

    def test_incomplete_kraus(self):
        with pytest.raises(ChannelError):
            apply_channel(DensityMatrix(PLUS), QuantumChannel([0.5 * np.eye(2)]))
        with pytest.raises(ChannelError):
            depolarizing_channel(2, 1.5)

    @given(st.floats(0.01, 3.0))
    def test_dephasing_channel_matches_gkls(self, nut):
        rho = random_density(np.random.default_rng(11), 2)
        ch = apply_channel(DensityMatrix(rho), dephasing_channel(2, 1 - np.exp(-nut))).rho
        lb = gkls_evolve(DensityMatrix(rho), LindbladModel(np.zeros((2, 2)), [(DEPHASE, 1.0)]), nut)[-1].rho
        np.testing.assert_allclose(ch, lb, atol=1e-6)

    def test_amplitude_damping_matches_gkls(self):
        ch = apply_channel(DensityMatrix(ONE), amplitude_damping_channel(1 - np.exp(-0.9))).rho
        lb = gkls_evolve(DensityMatrix(ONE), LindbladModel(np.zeros((2, 2)), [(SIGMA_MINUS, 1.0)]), 0.9)[-1].rho
        np.testing.assert_allclose(ch, lb, atol=1e-7)


class TestGateNoise:
    def test_zero_rates(self):
        c = Circuit(3, [Gate("H", 0), Gate("CNOT", 1, 0), Gate("CNOT", 2, 0)])
        run = noisy_circuit_run(StateVector.zeros(3), c, GateNoiseProfile())
        np.testing.assert_allclose(run.fidelities, 1.0, atol=1e-9)

    def test_profile_validation(self):
        with pytest.raises(ValueError):
            GateNoiseProfile(dephase=-1.0)
        with pytest.raises(ValueError):
            GateNoiseProfile(gate_dephase_factor=-2)

    @staticmethod
    def _h_train(factor, n_gates=9, nu=0.2, tau=0.5):
        prof = GateNoiseProfile(dephase=nu, gate_dephase_factor=factor, single_qubit_time=tau)
        return noisy_circuit_run(StateVector.zeros(1), Circuit(1, [Gate("H", 0)] * n_gates), prof)

    def test_h_train_analytic(self):
        # H swaps x and z; only segments spent on the x axis dephase
        nu, tau = 0.2, 0.5
        for factor in (1.0, 3.0):
            run = self._h_train(factor, nu=nu, tau=tau)
            k = np.arange(1, 10)
            a = nu * factor * tau
            expected = 0.5 * (1 + np.exp(-((k + 1) // 2) * a))
            np.testing.assert_allclose(run.fidelities[1:], expected, atol=1e-6)

    def test_enhancement_triples_rate(self):
        r1, r3 = self._h_train(1.0), self._h_train(3.0)
        s1 = np.polyfit(np.arange(10), np.log(2 * r1.fidelities - 1), 1)[0]
        s3 = np.polyfit(np.arange(10), np.log(2 * r3.fidelities - 1), 1)[0]
        assert s3 / s1 == pytest.approx(3.0, rel=1e-5)

    def test_localized_state_insensitive_to_dephasing(self):
        prof = GateNoiseProfile(dephase=0.3, gate_dephase_factor=3)
        c = Circuit(2, [Gate("X", 0), Gate("X", 1)] * 4)
        loc = noisy_circuit_run(StateVector.basis("01"), c, prof)
        uni = noisy_circuit_run(StateVector.uniform(2), c, prof)
        np.testing.assert_allclose(loc.fidelities, 1.0, atol=1e-12)
        assert np.all(uni.fidelities[1:] < loc.fidelities[1:])
        assert np.all(np.diff(uni.fidelities) < 0)

    def test_active_qubits_get_enhanced_rates(self):
        prof = GateNoiseProfile(relax=0.1, dephase=0.2, gate_relax_factor=2, gate_dephase_factor=3)
        m = prof.model(2, active=[1])
        rates = sorted(nu for _, nu in m.collapse)
        assert rates == pytest.approx(sorted([0.1, 0.2, 0.2, 0.6]))
