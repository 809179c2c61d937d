"""Internal energy, passive states, and the coherent/incoherent ergotropy split."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import QuantumState
from .errors import ContractViolationError
from .operators import ManyBodyOperator

# integrator outputs tolerate positivity dips to 1e-6 (clipped here);
# anything larger signals a genuinely unphysical input
_PSD_SLACK = 1e-6
_IMAG_ATOL = 1e-10


@dataclass(frozen=True)
class PassiveDecomposition:
    """Spectral data behind a passive-state energy.

    probabilities: eigenvalues of rho sorted descending.
    energies: eigenvalues of H0 sorted ascending.
    passive_energy: sum of probabilities[i] * energies[i].
    """

    probabilities: np.ndarray
    energies: np.ndarray
    passive_energy: float

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        e = np.asarray(self.energies, dtype=float)
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {p.sum()}, expected 1")
        if np.any(np.diff(p) > 1e-12):
            raise ValueError("probabilities must be nonincreasing")
        if np.any(np.diff(e) < -1e-12):
            raise ValueError("energies must be nondecreasing")


@dataclass(frozen=True)
class ErgotropyReport:
    """Total ergotropy and its split into coherent and incoherent parts.

    The coherent part is defined by subtraction (total minus the ergotropy
    of the fully dephased state), mirroring how it is obtained from
    energy-basis measurements.
    """

    total: float
    incoherent: float
    coherent: float
    internal_energy: float


def _energy_levels(h0: ManyBodyOperator) -> np.ndarray:
    """Eigenvalues of the reference Hamiltonian, ascending."""
    if h0.is_diagonal():
        return np.sort(h0.diagonal().real)
    if not h0.hermitian:
        raise ContractViolationError("reference Hamiltonian must be hermitian")
    return np.linalg.eigvalsh(h0.dense())


def internal_energy(state: QuantumState, h0: ManyBodyOperator) -> float:
    """tr(rho H0); matrix-free for pure states."""
    if state.dim != h0.dim:
        raise ValueError(f"dimension mismatch: state {state.dim} vs H0 {h0.dim}")
    if state.is_pure:
        val = complex(np.vdot(state.amplitudes, h0.apply(state.amplitudes)))
    else:
        coo = h0.matrix.tocoo()
        val = complex(np.sum(coo.data * state.amplitudes[coo.col, coo.row]))
    if abs(val.imag) > _IMAG_ATOL * max(1.0, abs(val.real)):
        raise ContractViolationError(
            f"internal energy has imaginary residue {val.imag:.3e}"
        )
    return float(val.real)


def _rho_spectrum_desc(state: QuantumState) -> np.ndarray:
    if state.is_pure:
        probs = np.zeros(state.dim)
        probs[0] = 1.0
        return probs
    w = np.linalg.eigvalsh(state.amplitudes)
    if w[0] < -_PSD_SLACK:
        raise ValueError(f"density matrix has eigenvalue {w[0]:.3e}")
    w = np.clip(w, 0.0, None)
    # absorb integrator-level trace drift so the decomposition is exact
    return w[::-1] / w.sum()


def ergotropy(state: QuantumState, h0: ManyBodyOperator):
    """Maximum unitarily extractable work and its passive decomposition.

    Pair the state's eigenvalues (descending) with the energy levels
    (ascending); the passive energy is invariant under the ordering of
    degenerate levels. For a pure state with zero ground energy this
    reduces to the expectation of H0.
    """
    if state.dim != h0.dim:
        raise ValueError(f"dimension mismatch: state {state.dim} vs H0 {h0.dim}")
    probs = _rho_spectrum_desc(state)
    energies = _energy_levels(h0)
    passive = float(probs @ energies)
    value = internal_energy(state, h0) - passive
    decomp = PassiveDecomposition(probs, energies, passive)
    return value, decomp


def dephase_energy_basis(state: QuantumState, h0: ManyBodyOperator) -> QuantumState:
    """Zero all coherences of rho in the (computational) energy eigenbasis."""
    if not h0.is_diagonal():
        raise ContractViolationError(
            "dephasing assumes H0 diagonal in the computational basis"
        )
    return QuantumState(np.diag(state.populations().astype(complex)))


def diagonal_ergotropy(populations: np.ndarray, h0: ManyBodyOperator) -> float:
    """Ergotropy of the diagonal state with the given populations.

    Avoids materializing the dephased density matrix; equivalent to
    ergotropy(dephase_energy_basis(state)).
    """
    if not h0.is_diagonal():
        raise ContractViolationError(
            "diagonal ergotropy assumes H0 diagonal in the computational basis"
        )
    energies = _energy_levels(h0)
    probs = np.clip(np.sort(populations)[::-1], 0.0, None)
    total = probs.sum()
    if abs(total - 1.0) > _PSD_SLACK:
        raise ValueError(f"populations sum to {total}, expected 1")
    probs /= total
    diag_energy = float(populations @ h0.diagonal().real) / total
    return diag_energy - float(probs @ energies)


def ergotropy_split(state: QuantumState, h0: ManyBodyOperator) -> ErgotropyReport:
    """Split total ergotropy into incoherent and coherent parts."""
    total, _ = ergotropy(state, h0)
    incoherent = diagonal_ergotropy(state.populations(), h0)
    coherent = total - incoherent
    if coherent < -_PSD_SLACK:
        raise ContractViolationError(
            f"coherent ergotropy {coherent:.3e} fell below zero"
        )
    return ErgotropyReport(
        total=total,
        incoherent=incoherent,
        coherent=coherent,
        internal_energy=internal_energy(state, h0),
    )
