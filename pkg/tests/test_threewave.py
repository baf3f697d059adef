import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from qfes.threewave import (ThreeWaveSubspace, build_subspace_hamiltonian, classical_moment_residual,
                            classical_threewave, coherent_subspace_state, hopping,
                            occupation_expectations, propagate, propagator, verify_moment_equation)

G = 0.3 + 0.4j


def _fock_oracle(s2, s3, g, cut):
    """Dense three-mode Fock-space Hamiltonian truncated at ``cut`` quanta per mode."""
    a = np.diag(np.sqrt(np.arange(1, cut)), 1)
    I = np.eye(cut)
    kron = lambda x, y, z: np.kron(np.kron(x, y), z)
    a1, a2, a3 = kron(a, I, I), kron(I, a, I), kron(I, I, a)
    return 1j * g * a1.conj().T @ a2 @ a3 - 1j * np.conj(g) * a1 @ a2.conj().T @ a3.conj().T


class TestSubspace:
    def test_dimension_and_labels(self):
        sub = ThreeWaveSubspace.canonical(5, 3)
        assert sub.D == 4
        occ = sub.occupations()
        np.testing.assert_array_equal(occ[0] + occ[1], 5)
        np.testing.assert_array_equal(occ[0] + occ[2], 3)

    def test_swap_keeps_caller_labels(self):
        sub = ThreeWaveSubspace.canonical(2, 6)
        assert sub.swapped and (sub.s2, sub.s3) == (6, 2)
        occ = sub.occupations()
        np.testing.assert_array_equal(occ[0] + occ[1], 2)
        np.testing.assert_array_equal(occ[0] + occ[2], 6)

    def test_rejects_bad_invariants(self):
        with pytest.raises(ValueError):
            ThreeWaveSubspace.canonical(-1, 2)
        with pytest.raises(ValueError):
            ThreeWaveSubspace.canonical(1.5, 2)

    def test_hopping_frozen(self):
        # H_{j+1/2} = sqrt(j (s3+1-j) (s2-s3+j)) for (4, 2)
        np.testing.assert_allclose(hopping(ThreeWaveSubspace.canonical(4, 2)), np.sqrt([6.0, 8.0]))

    @pytest.mark.parametrize("s2,s3", [(2, 1), (3, 3), (4, 2)])
    def test_matches_fock_space_block(self, s2, s3):
        H, sub = build_subspace_hamiltonian(s2, s3, G)
        cut = max(s2, s3) + 1
        Hf = _fock_oracle(s2, s3, G, cut)
        occ = sub.occupations().astype(int)
        idx = [(n1 * cut + n2) * cut + n3 for n1, n2, n3 in occ.T]
        np.testing.assert_allclose(H, Hf[np.ix_(idx, idx)], atol=1e-12)

    @given(st.integers(0, 12), st.integers(0, 12))
    def test_hermitian_tridiagonal(self, s2, s3):
        H, sub = build_subspace_hamiltonian(s2, s3, G)
        np.testing.assert_allclose(H, H.conj().T, atol=0)
        assert np.all(np.triu(H, 2) == 0) and np.all(np.diag(H) == 0)


class TestQuantumDynamics:
    def test_propagator_vs_expm(self):
        H, _ = build_subspace_hamiltonian(7, 5, G)
        np.testing.assert_allclose(propagator(H, 0.3), expm(-0.3j * H), atol=1e-12)

    @pytest.mark.parametrize("g", [1.0, G])
    def test_rabi(self, g):
        H, sub = build_subspace_hamiltonian(1, 1, g)
        traj = propagate(H, [1, 0], 1e-2, 500)
        t = 1e-2 * np.arange(501)
        np.testing.assert_allclose(np.abs(traj[:, 0]) ** 2, np.cos(abs(g) * t) ** 2, atol=1e-8)

    def test_fast_forward(self, rng):
        H, sub = build_subspace_hamiltonian(25, 19, G)
        assert sub.D == 20
        psi = rng.normal(size=20) + 1j * rng.normal(size=20)
        psi /= np.linalg.norm(psi)
        a = propagate(H, psi, 0.05, 100)
        b = propagate(H, psi, 0.05, 100, fast_forward=True)
        assert np.max(np.abs(a - b)) <= 1e-9

    def test_invariants_conserved(self):
        H, sub = build_subspace_hamiltonian(6, 4, G)
        traj = propagate(H, np.eye(sub.D)[2], 1e-2, 300)
        o = occupation_expectations(traj, sub)
        np.testing.assert_allclose(o["n1"] + o["n2"], 6, atol=1e-10)
        np.testing.assert_allclose(o["n1"] + o["n3"], 4, atol=1e-10)

    @pytest.mark.parametrize("s2,s3", [(1, 1), (3, 2), (8, 8)])
    def test_moment_equation(self, s2, s3):
        H, sub = build_subspace_hamiltonian(s2, s3, G)
        traj = propagate(H, np.eye(sub.D)[0], 1e-3, 2000)
        chk = verify_moment_equation(traj, sub, 1e-3)
        assert chk["residual"] <= 1e-4
        assert chk["mirror_2"] <= 1e-6 and chk["mirror_3"] <= 1e-6

    def test_moment_residual_is_second_order(self):
        H, sub = build_subspace_hamiltonian(8, 8, 1.0)
        r = [verify_moment_equation(propagate(H, np.eye(sub.D)[0], dt, int(2 / dt)), sub, dt)["residual"]
             for dt in (2e-3, 1e-3)]
        assert r[0] / r[1] == pytest.approx(4.0, rel=0.05)

    def test_spontaneous_term_matters(self):
        H, sub = build_subspace_hamiltonian(1, 1, 1.0)
        traj = propagate(H, [1, 0], 1e-3, 2000)
        assert verify_moment_equation(traj, sub, 1e-3, spontaneous=False)["residual"] > 1.0

    def test_occupation_shape_guard(self):
        _, sub = build_subspace_hamiltonian(3, 3)
        with pytest.raises(ValueError):
            occupation_expectations(np.ones((3, 2)), sub)


class TestClassical:
    def test_manley_rowe(self):
        a0 = np.array([1.0, 0.4 + 0.2j, 0.3 - 0.5j])
        traj = classical_threewave(a0, G, 1e-3, 10_000)
        n = np.abs(traj) ** 2
        assert np.max(np.abs(n[:, 0] + n[:, 1] - (n[0, 0] + n[0, 1]))) <= 1e-8
        assert np.max(np.abs(n[:, 0] + n[:, 2] - (n[0, 0] + n[0, 2]))) <= 1e-8
        assert classical_moment_residual(traj, G, 1e-3) <= 1e-5

    def test_step_guard(self):
        with pytest.raises(ValueError):
            classical_threewave([10, 10, 10], 1.0, 0.1, 5)

    def test_coherent_projection(self):
        sub = ThreeWaveSubspace.canonical(2, 5)
        c = coherent_subspace_state(sub, [1.0, 0.5, 0.7j])
        assert np.linalg.norm(c) == pytest.approx(1.0)
        assert c.size == sub.D

    def test_quantum_approaches_classical(self):
        """Max deviation of <n1>/s over the first classical oscillation shrinks with s."""
        dev = []
        for s in (2, 8, 32):
            a = np.sqrt(s) * np.array([np.sqrt(0.9), np.sqrt(0.1), np.sqrt(0.1) * np.exp(0.75j * np.pi)])
            dt = 0.01
            T = int(150 / np.sqrt(s) / dt)
            n1c = np.abs(classical_threewave(a, 1.0, dt, T)[:, 0]) ** 2
            H, sub = build_subspace_hamiltonian(s, s)
            n1q = occupation_expectations(propagate(H, coherent_subspace_state(sub, a), dt, T,
                                                    fast_forward=True), sub)["n1"]
            turns = np.where(np.diff(np.sign(np.diff(n1c))) != 0)[0] + 1
            dev.append(np.max(np.abs(n1q - n1c)[:turns[1] + 1]) / s)
        np.testing.assert_allclose(dev, [0.2724, 0.1240, 0.0340], atol=5e-4)
        assert dev[0] > dev[1] > dev[2]
