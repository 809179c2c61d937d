import itertools

import numpy as np
import pytest

from qbatt.battery import BatteryParams, build_h0
from qbatt.dynamics import QuantumState
from qbatt.ergotropy import (
    ErgotropyReport,
    dephase_energy_basis,
    ergotropy,
    ergotropy_split,
    internal_energy,
)

from conftest import random_density, random_state, random_unitary


def h0_for(n, omega0=1.0):
    return build_h0(BatteryParams.uniform(n, omega0=omega0, drive=0.0))


class TestInternalEnergy:
    def test_ground_is_zero(self):
        assert internal_energy(QuantumState.all_ground(2), h0_for(2)) == 0.0

    def test_all_excited(self):
        state = QuantumState.basis(2, 3)
        assert internal_energy(state, h0_for(2)) == pytest.approx(2.0)

    def test_maximally_mixed(self):
        rho = QuantumState(np.eye(2, dtype=complex) / 2)
        assert internal_energy(rho, h0_for(1)) == pytest.approx(0.5)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            internal_energy(QuantumState.all_ground(1), h0_for(2))

    def test_pure_vs_promoted_agree(self):
        rng = np.random.default_rng(0)
        for n in (1, 2, 3):
            psi = QuantumState(random_state(n, rng))
            rho = QuantumState(psi.density())
            h0 = h0_for(n)
            assert internal_energy(psi, h0) == pytest.approx(
                internal_energy(rho, h0), abs=1e-12
            )


class TestErgotropy:
    def test_pure_excited_single_cell(self):
        value, _ = ergotropy(QuantumState.basis(1, 1), h0_for(1))
        assert value == pytest.approx(1.0)

    def test_maximally_mixed_is_passive(self):
        for n in (1, 2, 3):
            rho = QuantumState(np.eye(2**n, dtype=complex) / 2**n)
            value, decomp = ergotropy(rho, h0_for(n))
            assert value == pytest.approx(0.0, abs=1e-12)

    def test_population_inverted_qubit(self):
        # diag(0.3, 0.7): optimal swap extracts 0.7 - 0.3 = 0.4
        rho = QuantumState(np.diag([0.3, 0.7]).astype(complex))
        value, decomp = ergotropy(rho, h0_for(1))
        assert value == pytest.approx(0.4)
        assert decomp.passive_energy == pytest.approx(0.3)

    def test_permutation_oracle(self):
        # exhaustive minimum over all pairings, dim <= 4
        rng = np.random.default_rng(11)
        for n in (1, 2):
            h0 = h0_for(n)
            energies = np.sort(h0.diagonal().real)
            for _ in range(20):
                rho = QuantumState(random_density(n, rng))
                value, decomp = ergotropy(rho, h0)
                probs = np.linalg.eigvalsh(rho.amplitudes)
                best = min(
                    float(np.dot(np.array(perm), energies))
                    for perm in itertools.permutations(probs)
                )
                assert decomp.passive_energy == pytest.approx(best, abs=1e-10)
                assert value == pytest.approx(
                    internal_energy(rho, h0) - best, abs=1e-10
                )

    def test_pure_state_shortcut(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            n = int(rng.integers(1, 4))
            psi = QuantumState(random_state(n, rng))
            h0 = h0_for(n)
            value, _ = ergotropy(psi, h0)
            assert value == pytest.approx(internal_energy(psi, h0), abs=1e-9)

    def test_unitary_invariance_of_passive_energy(self):
        rng = np.random.default_rng(37)
        for n in (1, 2, 3):
            h0 = h0_for(n)
            rho = random_density(n, rng)
            _, base = ergotropy(QuantumState(rho), h0)
            for _ in range(5):
                U = random_unitary(2**n, rng)
                rotated = QuantumState(U @ rho @ U.conj().T)
                _, rot = ergotropy(rotated, h0)
                assert rot.passive_energy == pytest.approx(
                    base.passive_energy, abs=1e-8
                )

    def test_degenerate_tiebreak_stable(self):
        # H0 is massively degenerate; a 1e-12 perturbation of rho must not
        # move the passive energy
        rng = np.random.default_rng(4)
        h0 = h0_for(3)
        rho = random_density(3, rng)
        _, a = ergotropy(QuantumState(rho), h0)
        bump = np.zeros((8, 8))
        bump[0, 0] = 1e-12
        rho_b = (rho + bump) / np.trace(rho + bump).real
        _, b = ergotropy(QuantumState(rho_b), h0)
        assert b.passive_energy == pytest.approx(a.passive_energy, abs=1e-10)

    def test_nonnegative(self):
        rng = np.random.default_rng(8)
        for _ in range(30):
            n = int(rng.integers(1, 4))
            rho = QuantumState(random_density(n, rng))
            value, _ = ergotropy(rho, h0_for(n))
            assert value >= -1e-9


class TestDephase:
    def test_diagonal_unchanged(self):
        rho = QuantumState(np.diag([0.25, 0.75]).astype(complex))
        out = dephase_energy_basis(rho, h0_for(1))
        assert np.allclose(out.amplitudes, rho.amplitudes)

    def test_plus_state(self):
        plus = QuantumState(np.array([1, 1]) / np.sqrt(2))
        out = dephase_energy_basis(plus, h0_for(1))
        assert np.allclose(out.amplitudes, np.diag([0.5, 0.5]))

    def test_idempotent(self):
        rng = np.random.default_rng(2)
        rho = QuantumState(random_density(2, rng))
        h0 = h0_for(2)
        once = dephase_energy_basis(rho, h0)
        twice = dephase_energy_basis(once, h0)
        assert np.allclose(once.amplitudes, twice.amplitudes)

    def test_trace_preserved_exactly(self):
        rng = np.random.default_rng(3)
        rho = random_density(2, rng)
        out = dephase_energy_basis(QuantumState(rho), h0_for(2))
        assert np.trace(out.amplitudes) == np.trace(np.diag(np.diag(rho)))


class TestSplit:
    def test_plus_state_fully_coherent(self):
        plus = QuantumState(np.array([1, 1]) / np.sqrt(2))
        rep = ergotropy_split(plus, h0_for(1))
        assert rep.total == pytest.approx(0.5)
        assert rep.incoherent == pytest.approx(0.0, abs=1e-12)
        assert rep.coherent == pytest.approx(0.5)

    def test_excited_state_fully_incoherent(self):
        rep = ergotropy_split(QuantumState.basis(1, 1), h0_for(1))
        assert rep.coherent == pytest.approx(0.0, abs=1e-12)

    def test_diagonal_mixed_state(self):
        rng = np.random.default_rng(6)
        p = rng.dirichlet(np.ones(4))
        rho = QuantumState(np.diag(p).astype(complex))
        rep = ergotropy_split(rho, h0_for(2))
        assert rep.coherent == pytest.approx(0.0, abs=1e-10)

    def test_split_sums_and_matches_dephase_route(self):
        rng = np.random.default_rng(9)
        for n in (1, 2, 3):
            h0 = h0_for(n)
            rho = QuantumState(random_density(n, rng))
            rep = ergotropy_split(rho, h0)
            assert rep.total == pytest.approx(rep.coherent + rep.incoherent, abs=1e-9)
            via_dephase, _ = ergotropy(dephase_energy_basis(rho, h0), h0)
            assert rep.incoherent == pytest.approx(via_dephase, abs=1e-10)
            assert rep.incoherent >= -1e-9
