"""Lab-frame coupler physics and readout-error modeling.

The parametric drive model is a qubit-coupler-qubit chain of two-level
systems with sigma^x sigma^x couplings and a flux-modulated coupler
frequency. Counter-rotating terms are kept in full; the dispersive
effective-coupling formula is the comparison target, and the simulation
exists to test their consistency.

Simulations run with GHz-scale device frequencies compressed by a factor
(default 1/1000) so that integrating over many drive periods stays cheap;
the effective-coupling comparison is covariant under that rescaling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import ChargingTrace, QuantumState
from .errors import (
    DegenerateInputError,
    InsufficientDataError,
    ResolutionError,
    SingularityError,
)

FREQUENCY_COMPRESSION = 1e-3   # documented rescaling of GHz-scale inputs

_SQRT3 = np.sqrt(3.0)
# commutator-free 4th-order Magnus: Gauss nodes and weights
_CF4_NODES = (0.5 - _SQRT3 / 6.0, 0.5 + _SQRT3 / 6.0)
_CF4_W1 = (3.0 - 2.0 * _SQRT3) / 12.0
_CF4_W2 = (3.0 + 2.0 * _SQRT3) / 12.0

MIN_SAMPLES_PER_PERIOD = 20
_INTERNAL_OVERSAMPLE = 24


@dataclass(frozen=True)
class CouplerSpec:
    """Qubit-coupler-qubit parameters, all angular frequencies in rad/us.

    Fluxes are in units of the flux quantum. The SQUID asymmetry d keeps
    the coupler frequency finite at half-integer flux.
    """

    omega_q1: float
    omega_q2: float
    omega_c_max: float
    d: float
    g1: float
    g2: float
    phi_dc: float
    delta_phi: float
    omega_phi: float
    phi0_phase: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.d <= 1.0:
            raise ValueError(f"SQUID asymmetry d must be in [0, 1], got {self.d}")
        if self.omega_c_max <= 0:
            raise ValueError("maximum coupler frequency must be positive")
        if abs(self.delta_phi) >= 0.5:
            raise ValueError(
                f"flux modulation amplitude {self.delta_phi} must stay below 0.5"
            )

    def replace(self, **kwargs) -> "CouplerSpec":
        from dataclasses import replace as _replace

        return _replace(self, **kwargs)


def coupler_frequency(spec: CouplerSpec, phi) -> np.ndarray:
    """Flux-dependent coupler frequency of the asymmetric SQUID."""
    phi = np.asarray(phi, dtype=float)
    c = np.cos(np.pi * phi) ** 2
    s = np.sin(np.pi * phi) ** 2
    return spec.omega_c_max * (c + spec.d**2 * s) ** 0.25


def coupler_frequency_slope(spec: CouplerSpec, phi) -> np.ndarray:
    """Analytic d omega_c / d phi at the given flux."""
    phi = np.asarray(phi, dtype=float)
    u = np.cos(np.pi * phi) ** 2 + spec.d**2 * np.sin(np.pi * phi) ** 2
    du = np.pi * np.sin(2 * np.pi * phi) * (spec.d**2 - 1.0)
    return spec.omega_c_max * 0.25 * u ** (-0.75) * du


def flux_waveform(spec: CouplerSpec, t) -> np.ndarray:
    return spec.phi_dc + spec.delta_phi * np.cos(
        spec.omega_phi * np.asarray(t, dtype=float) + spec.phi0_phase
    )


def effective_coupling(spec: CouplerSpec) -> float:
    """Dispersive prediction for the pair-drive strength.

    Second-order perturbation in the qubit-coupler couplings with a
    sinusoidal flux modulation of amplitude delta_phi around phi_dc. The
    prefactor matches the exact dressed-state matrix element of the
    longitudinal coupler drive in the g -> 0 limit (a peak-to-peak flux
    convention would absorb the factor of two).
    """
    slope = float(coupler_frequency_slope(spec, spec.phi_dc))
    if abs(slope) < 1e-12 * spec.omega_c_max:
        raise SingularityError(
            "flux bias sits at an extremum of the coupler frequency; "
            "the drive does not modulate the coupling"
        )
    omega_c = float(coupler_frequency(spec, spec.phi_dc))
    deltas = {
        "1-": spec.omega_q1 - omega_c,
        "1+": spec.omega_q1 + omega_c,
        "2-": spec.omega_q2 - omega_c,
        "2+": spec.omega_q2 + omega_c,
    }
    for name, val in deltas.items():
        if abs(val) < 1e-9 * max(spec.omega_q1, spec.omega_q2):
            raise SingularityError(f"detuning {name} vanishes at this bias")
    return float(
        -spec.delta_phi
        * (spec.g1 * spec.g2 / 2.0)
        * slope
        * (1.0 / (deltas["1-"] * deltas["2+"]) + 1.0 / (deltas["1+"] * deltas["2-"]))
    )


def _pauli_site(op: np.ndarray, site: int) -> np.ndarray:
    mats = [np.eye(2, dtype=complex)] * 3
    mats[site] = op
    # cell n occupies bit n: kron order runs from the highest site down
    return np.kron(np.kron(mats[2], mats[1]), mats[0])


def _build_static_parts():
    sz = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
    sx = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    z_q1 = _pauli_site(sz, 0)
    z_c = _pauli_site(sz, 1)
    z_q2 = _pauli_site(sz, 2)
    xx_1c = _pauli_site(sx, 0) @ _pauli_site(sx, 1)
    xx_c2 = _pauli_site(sx, 1) @ _pauli_site(sx, 2)
    return z_q1, z_c, z_q2, xx_1c, xx_c2


_Z_Q1, _Z_C, _Z_Q2, _XX_1C, _XX_C2 = _build_static_parts()


def _batched_unitaries(generators: np.ndarray) -> np.ndarray:
    """exp(-i G) for a stack of hermitian matrices via batched eigh."""
    w, v = np.linalg.eigh(generators)
    return (v * np.exp(-1j * w)[..., None, :]) @ v.conj().swapaxes(-1, -2)


def simulate_parametric(spec: CouplerSpec, times) -> ChargingTrace:
    """Lab-frame evolution of (Q1, coupler, Q2) from the joint ground state.

    The propagator is a commutator-free 4th-order Magnus stepper (two 8x8
    exponentials per substep), exactly unitary by construction. Substeps
    oversample the drive period and their exponentials are batched.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 2:
        raise ValueError("need a 1-D grid with at least two points")
    dts = np.diff(times)
    if np.any(dts <= 0):
        raise ValueError("times must be strictly increasing")
    period = 2.0 * np.pi / spec.omega_phi
    grid_dt = float(dts.max())
    if grid_dt > period / MIN_SAMPLES_PER_PERIOD * (1.0 + 1e-9):
        raise ResolutionError(
            f"grid step {grid_dt:.4g} us under-resolves the drive period "
            f"{period:.4g} us (need >= {MIN_SAMPLES_PER_PERIOD} samples)"
        )
    h_static = (
        -0.5 * spec.omega_q1 * _Z_Q1
        - 0.5 * spec.omega_q2 * _Z_Q2
        + spec.g1 * _XX_1C
        + spec.g2 * _XX_C2
    )
    z_c = _Z_C

    # flatten all substeps: interval i gets n_sub[i] equal steps
    h_max = period / _INTERNAL_OVERSAMPLE
    n_sub = np.maximum(1, np.ceil(dts / h_max)).astype(np.int64)
    seg_h = np.repeat(dts / n_sub, n_sub)
    total = int(n_sub.sum())
    local = np.arange(total) - np.repeat(np.cumsum(n_sub) - n_sub, n_sub)
    seg_t0 = np.repeat(times[:-1], n_sub) + seg_h * local
    boundary = np.cumsum(n_sub) - 1          # flat index closing each interval

    psi = np.zeros(8, dtype=complex)
    psi[0] = 1.0
    states = [QuantumState(psi.copy())]
    bptr = 0
    chunk = 4096
    for lo in range(0, total, chunk):
        hi = min(lo + chunk, total)
        h = seg_h[lo:hi]
        t0 = seg_t0[lo:hi]
        wc1 = coupler_frequency(spec, flux_waveform(spec, t0 + _CF4_NODES[0] * h))
        wc2 = coupler_frequency(spec, flux_waveform(spec, t0 + _CF4_NODES[1] * h))
        # w1 + w2 = 1/2, so each generator is h*(H_static/2 + node-mix of Z_c)
        mix_first = -0.5 * (_CF4_W2 * wc1 + _CF4_W1 * wc2)
        mix_second = -0.5 * (_CF4_W1 * wc1 + _CF4_W2 * wc2)
        gen_first = (0.5 * h)[:, None, None] * h_static \
            + (h * mix_first)[:, None, None] * z_c
        gen_second = (0.5 * h)[:, None, None] * h_static \
            + (h * mix_second)[:, None, None] * z_c
        u_first = _batched_unitaries(gen_first)
        u_second = _batched_unitaries(gen_second)
        for k in range(hi - lo):
            psi = u_second[k] @ (u_first[k] @ psi)
            if bptr < boundary.size and boundary[bptr] == lo + k:
                states.append(QuantumState(psi.copy()))
                bptr += 1
    trace = ChargingTrace(times, states, kind="parametric")
    trace.meta["layout"] = ("q1", "coupler", "q2")
    return trace


def two_qubit_populations(trace: ChargingTrace) -> dict[str, np.ndarray]:
    """Joint qubit populations with the coupler traced out, keyed 'ab' = q1 q2."""
    pops = trace.populations()
    out = {}
    for a in (0, 1):
        for b in (0, 1):
            idx = a | (b << 2)
            out[f"{a}{b}"] = pops[:, idx] + pops[:, idx | 2]
    return out


@dataclass(frozen=True)
class ResonanceScan:
    """Population-transfer response versus drive frequency."""

    frequencies: np.ndarray
    transfer: np.ndarray
    peak_frequency: float
    peak_width: float


def resonance_scan(spec: CouplerSpec, omega_phi_values,
                   duration: float | None = None,
                   samples_per_period: int = MIN_SAMPLES_PER_PERIOD) -> ResonanceScan:
    """Scan the drive frequency and record the best |00> -> |11> transfer."""
    omega_phi_values = np.asarray(omega_phi_values, dtype=float)
    if duration is None:
        duration = np.pi / abs(effective_coupling(spec))
    transfer = np.array([
        _transfer_at(spec, w, duration, samples_per_period)
        for w in omega_phi_values
    ])
    k = int(np.argmax(transfer))
    peak = float(omega_phi_values[k])
    width = _half_max_width(omega_phi_values, transfer, k)
    return ResonanceScan(omega_phi_values, transfer, peak, width)


def _half_max_width(x: np.ndarray, y: np.ndarray, k: int) -> float:
    """Full width at half maximum around bin k, interpolating the crossings."""
    half = y[k] / 2.0
    left = float(x[0])
    for i in range(k - 1, -1, -1):
        if y[i] < half:
            frac = (half - y[i]) / (y[i + 1] - y[i])
            left = float(x[i] + frac * (x[i + 1] - x[i]))
            break
    right = float(x[-1])
    for i in range(k + 1, x.size):
        if y[i] < half:
            frac = (half - y[i - 1]) / (y[i] - y[i - 1])
            right = float(x[i - 1] + frac * (x[i] - x[i - 1]))
            break
    return right - left


def _transfer_at(spec: CouplerSpec, omega_phi: float, duration: float,
                 samples_per_period: int) -> float:
    probe = spec.replace(omega_phi=float(omega_phi))
    period = 2 * np.pi / omega_phi
    n_pts = max(int(np.ceil(duration / (period / samples_per_period))), 2)
    times = np.linspace(0.0, duration, n_pts + 1)
    return float(two_qubit_populations(simulate_parametric(probe, times))["11"].max())


def dressed_sum_frequency(spec: CouplerSpec) -> float:
    """Sum of the coupler-dressed qubit frequencies under the drive.

    Second-order shifts from the transverse coupling, counter-rotating
    terms included: each qubit moves up by g^2 (1/Delta_- + 1/Delta_+),
    evaluated with the coupler frequency averaged over one drive period
    (the modulation rides on a curved flux dispersion, so the mean shifts
    quadratically with the amplitude). Seeds the numerical search.
    """
    phase = np.linspace(0.0, 2 * np.pi, 128, endpoint=False)
    omega_c = float(np.mean(coupler_frequency(
        spec, spec.phi_dc + spec.delta_phi * np.cos(phase)
    )))
    total = 0.0
    for omega_q, g in ((spec.omega_q1, spec.g1), (spec.omega_q2, spec.g2)):
        d_minus = omega_q - omega_c
        d_plus = omega_q + omega_c
        if abs(d_minus) < 1e-9 * omega_q:
            raise SingularityError("qubit-coupler detuning vanishes")
        total += omega_q + g**2 * (1.0 / d_minus + 1.0 / d_plus)
    return total


def find_resonance(spec: CouplerSpec, halfwidth: float | None = None,
                   points: int = 7) -> float:
    """Locate the two-photon resonance numerically.

    The analytically dressed sum frequency seeds a coarse-to-fine transfer
    scan. Probe durations grow as the window shrinks so the power-broadened
    line always spans a few grid points.
    """
    omega_pred = abs(effective_coupling(spec))
    best = dressed_sum_frequency(spec)
    if halfwidth is None:
        # the analytic seed is good to a few linewidths
        halfwidth = max(10.0 * omega_pred, 1e-4 * best)
    t_pi = np.pi / omega_pred
    # stop once the grid samples the power-broadened line at sub-Omega steps
    target_spacing = 0.75 * omega_pred
    for _ in range(12):
        spacing = 2.0 * halfwidth / (points - 1)
        # a probe of length t has sinc linewidth ~ pi/t: keep it >= spacing
        duration = min(2.2 / spacing, 0.8 * t_pi)
        grid = np.linspace(best - halfwidth, best + halfwidth, points)
        vals = [_transfer_at(spec, w, duration, MIN_SAMPLES_PER_PERIOD)
                for w in grid]
        k = int(np.argmax(vals))
        best = float(grid[k])
        if 0 < k < points - 1:
            denom = vals[k - 1] - 2 * vals[k] + vals[k + 1]
            if denom < 0:
                best = float(grid[k] - 0.5 * spacing
                             * (vals[k + 1] - vals[k - 1]) / denom)
        if spacing <= target_spacing:
            break
        halfwidth = 1.5 * spacing
    return best


def _fit_population_oscillation(times, signal):
    """(rabi, amplitude, offset) of a sin^2-style population signal.

    rabi is half the population angular frequency; amplitude is the cosine
    amplitude, i.e. half the peak-to-valley transfer envelope.
    """
    times = np.asarray(times, dtype=float)
    signal = np.asarray(signal, dtype=float)
    if times.size != signal.size or times.size < 8:
        raise ValueError("times and signal must match and hold >= 8 samples")
    y = signal - signal.mean()
    span = float(times[-1] - times[0])
    spectrum = np.abs(np.fft.rfft(y))
    if spectrum.size < 3 or not np.any(spectrum[1:] > 0):
        raise InsufficientDataError("signal has no oscillating component")
    k = int(np.argmax(spectrum[1:])) + 1
    if spectrum[k] < 1e-9 * max(1.0, np.abs(signal).max()) * times.size:
        raise InsufficientDataError("signal is constant within tolerance")
    if k < 2:
        raise InsufficientDataError(
            "fewer than two full oscillation periods in the window"
        )
    w0 = 2.0 * np.pi * k / span

    from scipy.optimize import least_squares

    def residuals(theta):
        amp, w, phase, offset = theta
        return amp * np.cos(w * times + phase) + offset - y

    # phase init from the complex DFT coefficient
    coeff = np.fft.rfft(y)[k]
    x0 = np.array([2 * abs(coeff) / times.size, w0, np.angle(coeff), 0.0])
    fit = least_squares(residuals, x0, method="lm", max_nfev=400)
    w_refined, amp = (abs(float(fit.x[1])), abs(float(fit.x[0]))) \
        if fit.success else (w0, 2 * abs(coeff) / times.size)
    # guard against the fit wandering off the spectral line
    if not 0.5 * w0 < w_refined < 1.5 * w0:
        w_refined, amp = w0, 2 * abs(coeff) / times.size
    return 0.5 * w_refined, amp, float(signal.mean())


def extract_oscillation_frequency(times, signal) -> float:
    """Dominant Rabi frequency of a population signal, in rad/us.

    A population oscillating as sin^2(g t) moves at angular frequency 2g;
    the returned value is g. The DFT locates the dominant line and a
    four-parameter sinusoid fit refines it.
    """
    return _fit_population_oscillation(times, signal)[0]


def measure_pair_drive_rate(spec: CouplerSpec, omega_drive: float | None = None,
                            window_pi: float = 2.3) -> float:
    """Bare pair-exchange rate from a single time-domain run.

    Driving near (not necessarily on) resonance yields the generalized
    rate W = sqrt(rate^2 + detuning^2) with transfer envelope
    T = rate^2 / W^2, so the bare rate is W * sqrt(T). The envelope comes
    from the fitted oscillation amplitude (T = 2*amplitude), which rejects
    the static micromotion background.
    """
    if omega_drive is None:
        omega_drive = dressed_sum_frequency(spec)
    predicted = abs(effective_coupling(spec))
    run = spec.replace(omega_phi=float(omega_drive))
    period = 2 * np.pi / run.omega_phi
    window = window_pi * np.pi / predicted
    n_pts = int(np.ceil(window / (period / MIN_SAMPLES_PER_PERIOD)))
    times = np.linspace(0.0, window, n_pts + 1)
    pops = two_qubit_populations(simulate_parametric(run, times))["11"]
    w_obs, amp, _ = _fit_population_oscillation(times, pops)
    transfer = min(2.0 * amp, 1.0)
    return float(w_obs * np.sqrt(transfer))


@dataclass(frozen=True)
class ReadoutModel:
    """Independent per-qubit response matrices.

    Column j of each matrix is the outcome distribution when basis state j
    was prepared; columns sum to one.
    """

    matrices: tuple

    def __post_init__(self):
        mats = tuple(np.asarray(m, dtype=float) for m in self.matrices)
        for i, m in enumerate(mats):
            if m.shape != (2, 2):
                raise ValueError(f"response matrix {i} must be 2x2")
            if np.any(m < 0) or np.any(m > 1):
                raise ValueError(f"response matrix {i} entries must be in [0, 1]")
            if not np.allclose(m.sum(axis=0), 1.0, atol=1e-12):
                raise ValueError(f"response matrix {i} columns must sum to 1")
            if abs(np.linalg.det(m)) < 1e-12:
                raise DegenerateInputError(
                    f"response matrix {i} is singular and cannot be inverted"
                )
        object.__setattr__(self, "matrices", mats)

    @property
    def n_qubits(self) -> int:
        return len(self.matrices)


def build_readout_model(fidelities) -> ReadoutModel:
    """Per-qubit confusion matrices from (F0, F1) assignment fidelities."""
    mats = []
    for i, (f0, f1) in enumerate(fidelities):
        if not (0.5 < f0 <= 1.0 and 0.5 < f1 <= 1.0):
            raise ValueError(
                f"qubit {i}: fidelities must lie in (0.5, 1], got ({f0}, {f1})"
            )
        mats.append(np.array([[f0, 1.0 - f1], [1.0 - f0, f1]]))
    return ReadoutModel(tuple(mats))


def _contract_per_qubit(mats, xi: np.ndarray) -> np.ndarray:
    n = len(mats)
    if xi.size != 1 << n:
        raise ValueError(f"probability vector length {xi.size} != 2^{n}")
    tensor = xi.reshape((2,) * n)
    for qubit, m in enumerate(mats):
        axis = n - 1 - qubit
        tensor = np.moveaxis(
            np.tensordot(m, np.moveaxis(tensor, axis, 0), axes=(1, 0)), 0, axis
        )
    return tensor.reshape(-1)


def apply_noise(model: ReadoutModel, xi_ideal) -> np.ndarray:
    """Push an ideal distribution through the tensor-product response.

    The full 2^N x 2^N matrix is never materialized; each qubit's 2x2
    response contracts one tensor axis.
    """
    xi = np.asarray(xi_ideal, dtype=float)
    _check_distribution(xi)
    return _contract_per_qubit(model.matrices, xi)


def mitigate(model: ReadoutModel, xi_noisy) -> np.ndarray:
    """Invert the response matrix-free and project back onto the simplex.

    Inverses can push interior points slightly outside the simplex under
    sampling noise; clipping plus renormalization is the documented
    projection (inactive for noiseless interior inputs).
    """
    xi = np.asarray(xi_noisy, dtype=float)
    _check_distribution(xi)
    inverses = [np.linalg.inv(m) for m in model.matrices]
    raw = _contract_per_qubit(inverses, xi)
    clipped = np.clip(raw, 0.0, None)
    total = clipped.sum()
    if total <= 0:
        raise DegenerateInputError("mitigated distribution collapsed to zero")
    return clipped / total


def _check_distribution(xi: np.ndarray):
    if np.any(xi < -1e-12):
        raise ValueError("probability vector has negative entries")
    if abs(xi.sum() - 1.0) > 1e-9:
        raise ValueError(f"probability vector sums to {xi.sum()}, expected 1")
