"""Time evolution of battery states.

Unitary propagation for pure states and a Lindblad master-equation
integrator for open-system density matrices. The charging Hamiltonian used
for evolution is the rotating-frame drive V alone; the reference
Hamiltonian enters only as the energy observable (an `include_h0` switch
at the orchestration layer adds it back for sensitivity studies).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.integrate import RK45

from .battery import BatteryParams
from .errors import CapacityError, IntegrationError
from .operators import ManyBodyOperator

NORM_ATOL = 1e-9
TRACE_ATOL = 1e-7

# Dense eigendecomposition propagator below this dimension; Taylor stepping
# above (memory stays O(dim) per state either way).
_DENSE_PROP_CAP = 1 << 10

# evolve_* refuse to materialize traces beyond this many bytes; callers
# needing larger runs stream states instead.
TRACE_BYTES_CAP = 1 << 30

# Open-system density matrices are integrated densely up to this register
# size; larger chains fall back to the pure-state mode.
LINDBLAD_CELL_CAP = 10


@dataclass
class QuantumState:
    """Pure state vector or density matrix over the computational basis."""

    amplitudes: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.amplitudes, dtype=complex)
        if arr.ndim not in (1, 2):
            raise ValueError("state must be a vector or a square matrix")
        if arr.ndim == 2 and arr.shape[0] != arr.shape[1]:
            raise ValueError(f"density matrix must be square, got {arr.shape}")
        self.amplitudes = arr

    @property
    def kind(self) -> str:
        return "pure" if self.amplitudes.ndim == 1 else "mixed"

    @property
    def is_pure(self) -> bool:
        return self.amplitudes.ndim == 1

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def n_cells(self) -> int:
        return self.dim.bit_length() - 1

    @classmethod
    def all_ground(cls, n_cells: int) -> "QuantumState":
        vec = np.zeros(1 << n_cells, dtype=complex)
        vec[0] = 1.0
        return cls(vec)

    @classmethod
    def basis(cls, n_cells: int, index: int) -> "QuantumState":
        vec = np.zeros(1 << n_cells, dtype=complex)
        vec[index] = 1.0
        return cls(vec)

    def validate(self, psd_check: bool = False):
        if self.is_pure:
            drift = abs(np.vdot(self.amplitudes, self.amplitudes).real - 1.0)
            if drift > NORM_ATOL:
                raise ValueError(f"pure state norm drifts by {drift:.3e}")
        else:
            rho = self.amplitudes
            tr = np.trace(rho)
            if abs(tr - 1.0) > NORM_ATOL:
                raise ValueError(f"density matrix trace {tr} is not 1")
            herm = np.abs(rho - rho.conj().T).max()
            if herm > 1e-10:
                raise ValueError(f"density matrix deviates from hermitian by {herm:.3e}")
            if psd_check:
                w = np.linalg.eigvalsh(rho)
                if w[0] < -NORM_ATOL:
                    raise ValueError(f"density matrix has eigenvalue {w[0]:.3e}")
        return self

    def density(self) -> np.ndarray:
        """Density-matrix form (pure states are promoted)."""
        if self.is_pure:
            return np.outer(self.amplitudes, self.amplitudes.conj())
        return self.amplitudes

    def populations(self) -> np.ndarray:
        """Diagonal of the density matrix (real)."""
        if self.is_pure:
            return np.abs(self.amplitudes) ** 2
        return np.real(np.diagonal(self.amplitudes)).copy()


@dataclass(frozen=True)
class LindbladSpec:
    """Per-cell relaxation and pure-dephasing rates (1/us).

    relax[n] drives the lowering channel on cell n; dephase[n] the number
    (excited-population) channel. The dephasing channel is applied with an
    internal factor of two so that a single-cell coherence decays exactly
    as exp(-dephase[n] * t); combined with relax[n] = 1/T1 this reproduces
    exp(-t/T2) with 1/T2 = 1/(2 T1) + dephase[n].
    """

    relax: np.ndarray
    dephase: np.ndarray

    def __post_init__(self):
        relax = np.atleast_1d(np.asarray(self.relax, dtype=float))
        dephase = np.atleast_1d(np.asarray(self.dephase, dtype=float))
        if relax.shape != dephase.shape:
            raise ValueError("relax and dephase must have equal length")
        if np.any(relax < 0) or np.any(dephase < 0):
            raise ValueError("rates must be nonnegative")
        object.__setattr__(self, "relax", relax)
        object.__setattr__(self, "dephase", dephase)

    @property
    def n_cells(self) -> int:
        return self.relax.size

    @classmethod
    def closed(cls, n_cells: int) -> "LindbladSpec":
        return cls(np.zeros(n_cells), np.zeros(n_cells))

    @classmethod
    def from_times(cls, t1_us, t2_us) -> "LindbladSpec":
        """Vectorized rates_from_times over per-cell T1/T2 arrays."""
        t1 = np.atleast_1d(np.asarray(t1_us, dtype=float))
        t2 = np.atleast_1d(np.asarray(t2_us, dtype=float))
        t1, t2 = np.broadcast_arrays(t1, t2)
        pairs = [rates_from_times(a, b) for a, b in zip(t1, t2)]
        return cls(np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs]))

    def is_closed(self) -> bool:
        return not (np.any(self.relax > 0) or np.any(self.dephase > 0))


def rates_from_times(t1_us: float, t2_us: float) -> tuple[float, float]:
    """Map device (T1, T2) to (relaxation rate, pure-dephasing rate).

    T2 is the echo coherence time; the pure-dephasing rate is
    1/T2 - 1/(2 T1), which must be nonnegative.
    """
    if t1_us <= 0 or t2_us <= 0:
        raise ValueError("coherence times must be positive")
    if t2_us > 2.0 * t1_us:
        raise ValueError(
            f"T2 = {t2_us} exceeds 2*T1 = {2 * t1_us}; clamp T2 to 2*T1 "
            "if the calibration data overshoots"
        )
    relax = 1.0 / t1_us
    dephase = 1.0 / t2_us - 0.5 / t1_us
    # guard the T2 == 2*T1 float edge
    return relax, max(dephase, 0.0)


@dataclass
class ChargingTrace:
    """Time grid plus per-time states, with provenance."""

    times: np.ndarray
    states: list
    kind: str = ""
    params: BatteryParams | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size == 0:
            raise ValueError("times must be a nonempty 1-D grid")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if len(self.states) != times.size:
            raise ValueError("one state per time point required")
        dims = {s.dim for s in self.states}
        if len(dims) > 1:
            raise ValueError(f"states have mixed dimensions {dims}")
        self.times = times

    @property
    def dim(self) -> int:
        return self.states[0].dim

    @property
    def n_cells(self) -> int:
        return self.states[0].n_cells

    def populations(self) -> np.ndarray:
        """(n_times, dim) array of basis-state populations."""
        return np.stack([s.populations() for s in self.states])


def _check_times(times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("times must be a nonempty 1-D grid")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    return times


def _taylor_step(matrix, psi: np.ndarray, dt: float, one_norm: float) -> np.ndarray:
    """exp(-i*M*dt) @ psi by scaled truncated Taylor.

    Substeps keep ||M||*h <= 1 so ~14 terms reach machine precision;
    anti-hermitian generators keep the norm to ~1e-15 per step.
    """
    n_sub = max(1, int(np.ceil(one_norm * abs(dt))))
    h = dt / n_sub
    out = psi
    for _ in range(n_sub):
        term = out
        acc = out.copy()
        for k in range(1, 64):
            term = matrix @ term
            term *= -1j * h / k
            acc += term
            if np.linalg.norm(term) < 1e-16:
                break
        else:
            raise IntegrationError("Taylor propagation failed to converge")
        out = acc
    return out


def iter_unitary_states(
    V: ManyBodyOperator, psi0: QuantumState, times
) -> Iterator[tuple[float, np.ndarray]]:
    """Stream (t, state vector) along the grid without storing the history.

    Dimensions above the dense-propagator cap use Taylor stepping on the
    sparse matrix; memory stays at a few state vectors.
    """
    times = _check_times(times)
    if not psi0.is_pure:
        raise ValueError("unitary evolution requires a pure state")
    if psi0.dim != V.dim:
        raise ValueError(f"dimension mismatch: state {psi0.dim} vs operator {V.dim}")
    psi0.validate()

    if V.dim <= _DENSE_PROP_CAP:
        w, U = np.linalg.eigh(V.dense())
        coeff = U.conj().T @ psi0.amplitudes
        for t in times:
            psi = U @ (np.exp(-1j * w * t) * coeff)
            _check_norm(psi, t)
            yield float(t), psi
        return

    one_norm = V.one_norm()
    psi = psi0.amplitudes.copy()
    prev_t = 0.0
    for t in times:
        dt = t - prev_t
        if dt > 0:
            psi = _taylor_step(V.matrix, psi, dt, one_norm)
        prev_t = t
        _check_norm(psi, t)
        yield float(t), psi


def _check_norm(psi: np.ndarray, t: float):
    drift = abs(np.linalg.norm(psi) - 1.0)
    if drift > NORM_ATOL:
        raise IntegrationError(f"norm drifted by {drift:.3e} at t = {t}")


def evolve_unitary(V: ManyBodyOperator, psi0: QuantumState, times) -> ChargingTrace:
    """|psi(t)> = exp(-i V t)|psi0> collected on the grid."""
    times = _check_times(times)
    need = times.size * V.dim * 16
    if need > TRACE_BYTES_CAP:
        raise CapacityError(
            f"trace would hold {need / 2**20:.0f} MiB of states; "
            "use iter_unitary_states to stream instead"
        )
    states = [
        QuantumState(psi) for _, psi in iter_unitary_states(V, psi0, times)
    ]
    return ChargingTrace(times, states)


class _LindbladRHS:
    """Right-hand side of the master equation, structured for speed.

    Relaxation channels (lowering operators) act by index shifts; both
    anticommutator halves and the dephasing channel are diagonal in the
    computational basis, so they reduce to one precomputed elementwise
    damping matrix.
    """

    def __init__(self, H: ManyBodyOperator, spec: LindbladSpec):
        n = spec.n_cells
        dim = 1 << n
        if H.dim != dim:
            raise ValueError(f"dimension mismatch: H {H.dim} vs spec {dim}")
        self.H = H.matrix
        self.dim = dim
        b = np.arange(dim, dtype=np.int64)
        bits = np.stack([(b >> k) & 1 for k in range(n)])  # (n, dim)
        # Elementwise damping: relaxation anticommutator + dephasing channel.
        # The dephasing channel (number operator) carries rate 2*dephase so a
        # single-cell coherence decays as exp(-dephase * t).
        occ = bits.astype(float)
        damp = np.zeros((dim, dim))
        for k in range(n):
            col = occ[k][:, None]
            row = occ[k][None, :]
            if spec.relax[k] > 0:
                damp += 0.5 * spec.relax[k] * (col + row)
            if spec.dephase[k] > 0:
                damp += spec.dephase[k] * (col - row) ** 2
        self.damp = damp
        # Jump parts of the relaxation channels: rho[excited block] feeds the
        # de-excited block, cell by cell.
        self.jumps = []
        for k in range(n):
            if spec.relax[k] > 0:
                hot = b[bits[k] == 1]
                cold = hot ^ (1 << k)
                self.jumps.append((spec.relax[k], hot, cold))

    def __call__(self, t, y):
        rho = y.reshape(self.dim, self.dim)
        out = self.H @ rho
        out -= rho @ self.H
        out *= -1j
        out -= self.damp * rho
        for rate, hot, cold in self.jumps:
            out[np.ix_(cold, cold)] += rate * rho[np.ix_(hot, hot)]
        return out.ravel()


def iter_lindblad_states(
    H: ManyBodyOperator,
    spec: LindbladSpec,
    rho0: QuantumState,
    times,
    rtol: float = 1e-8,
    atol: float = 1e-9,
) -> Iterator[tuple[float, np.ndarray]]:
    """Stream (t, density matrix) along the grid via adaptive RK45.

    Dense output interpolates between accepted steps, so the grid does not
    constrain the step controller. Trace preservation is monitored at every
    yielded point.
    """
    times = _check_times(times)
    if rho0.n_cells > LINDBLAD_CELL_CAP:
        raise CapacityError(
            f"open-system propagation capped at {LINDBLAD_CELL_CAP} cells; "
            f"got {rho0.n_cells}"
        )
    rho = np.asarray(rho0.density(), dtype=complex)
    rho0.validate()
    rhs = _LindbladRHS(H, spec)
    dim = rhs.dim

    t_end = float(times[-1])
    t0 = float(times[0])
    if t0 < 0:
        raise ValueError("grid must start at t >= 0")
    # integrate 0 -> times[0] silently if the grid does not start at zero
    solver = RK45(rhs, 0.0, rho.ravel(), t_end if t_end > 0 else 1.0,
                  rtol=rtol, atol=atol)
    idx = 0
    # yield t = 0 points directly
    while idx < times.size and times[idx] == 0.0:
        yield 0.0, _checked_rho(rho, 0.0)
        idx += 1
    while idx < times.size:
        target = times[idx]
        while solver.t < target:
            if solver.status == "finished":
                break
            msg = solver.step()
            if solver.status == "failed":
                raise IntegrationError(
                    f"step controller failed near t = {solver.t}: {msg}"
                )
        interp = solver.dense_output()
        while idx < times.size and times[idx] <= solver.t + 1e-15:
            y = interp(min(times[idx], solver.t))
            yield float(times[idx]), _checked_rho(y.reshape(dim, dim), times[idx])
            idx += 1


def _checked_rho(rho: np.ndarray, t: float) -> np.ndarray:
    drift = abs(np.trace(rho).real - 1.0)
    if drift > TRACE_ATOL:
        raise IntegrationError(f"trace drifted by {drift:.3e} at t = {t}")
    return rho


def evolve_lindblad(
    H: ManyBodyOperator,
    spec: LindbladSpec,
    rho0: QuantumState,
    times,
    rtol: float = 1e-8,
    atol: float = 1e-9,
) -> ChargingTrace:
    """Integrate the master equation and collect density matrices on the grid."""
    times = _check_times(times)
    need = times.size * (1 << (2 * rho0.n_cells)) * 16
    if need > TRACE_BYTES_CAP:
        raise CapacityError(
            f"trace would hold {need / 2**20:.0f} MiB of density matrices; "
            "use iter_lindblad_states to stream instead"
        )
    states = [
        QuantumState(rho)
        for _, rho in iter_lindblad_states(H, spec, rho0, times, rtol, atol)
    ]
    return ChargingTrace(times, states)
