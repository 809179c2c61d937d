"""Figure-of-merit series and scalars derived from charging traces.

Powers are reported in units of omega0 per microsecond; advantage and
driving-potential ratios are dimensionless.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .battery import power_bound
from .dynamics import ChargingTrace
from .ergotropy import ergotropy, internal_energy
from .errors import (
    DegenerateInputError,
    FitFailureError,
    InvariantViolationError,
)
from .operators import ManyBodyOperator

G2_POPULATION_FLOOR = 1e-12
BOUND_TOL = 1e-6
DEFAULT_INST_STEP_US = 0.02


@dataclass
class PowerSeries:
    """Average (and optionally instantaneous) charging power on a grid."""

    times: np.ndarray
    average: np.ndarray
    values: np.ndarray                      # the charged quantity behind the powers
    instantaneous: np.ndarray | None = None
    inst_times: np.ndarray | None = None
    dt_max: float | None = None
    p_opt: float | None = None
    kind: str = ""

    @property
    def optimum(self) -> tuple[float, float]:
        if self.dt_max is None or self.p_opt is None:
            raise DegenerateInputError("optimum has not been computed")
        return self.dt_max, self.p_opt


@dataclass(frozen=True)
class AdvantageReport:
    """Per-size fair-energy comparison of quantum vs classical charging."""

    n_cells: int
    g_mean: float
    alpha: float
    v_dv_cl: float
    v_dv_qu: float
    eta: float
    p_opt_cl: float
    p_opt_qu: float
    gamma_ad: float

    @property
    def qca_witnessed(self) -> bool:
        return self.gamma_ad > 0 and self.eta >= 0


@dataclass(frozen=True)
class ScalingFit:
    """Saturating-growth fit gamma(N) = a * arctan(b * N^c)."""

    a: float
    b: float
    c: float
    residual_norm: float

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("exponent c must be positive")

    @property
    def asymptote(self) -> float:
        return self.a * np.pi / 2.0

    def evaluate(self, n) -> np.ndarray:
        return self.a * np.arctan(self.b * np.asarray(n, dtype=float) ** self.c)


def energy_series(trace: ChargingTrace, h0: ManyBodyOperator) -> np.ndarray:
    """Internal energy along the trace."""
    return np.array([internal_energy(s, h0) for s in trace.states])


def ergotropy_series(trace: ChargingTrace, h0: ManyBodyOperator) -> np.ndarray:
    """Total ergotropy along the trace (pure states reduce to <H0>)."""
    return np.array([ergotropy(s, h0)[0] for s in trace.states])


def average_power_from_values(times: np.ndarray, values: np.ndarray,
                              kind: str = "") -> PowerSeries:
    """P_bar(dt) = value(dt)/dt with the t = 0 limit defined as 0."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.shape != values.shape:
        raise ValueError("times and values must have equal length")
    if times[0] == 0.0 and abs(values[0]) > 1e-9:
        warnings.warn(
            f"trace does not start empty (value(0) = {values[0]:.3e}); "
            "average power is still computed",
            stacklevel=2,
        )
    avg = np.zeros_like(values)
    nz = times > 0
    avg[nz] = values[nz] / times[nz]
    return PowerSeries(times=times, average=avg, values=values, kind=kind)


def average_power(trace: ChargingTrace, h0: ManyBodyOperator,
                  quantity: str = "ergotropy") -> PowerSeries:
    """Average charging power of a trace, from ergotropy or internal energy."""
    if quantity == "ergotropy":
        values = ergotropy_series(trace, h0)
    elif quantity == "energy":
        values = energy_series(trace, h0)
    else:
        raise ValueError(f"unknown quantity {quantity!r}")
    return average_power_from_values(trace.times, values, kind=trace.kind)


def optimal_power(series: PowerSeries) -> tuple[float, float]:
    """Grid argmax of the average power, refined parabolically.

    The refinement fits a parabola through the three points around the
    discrete maximum; ties break toward the earliest time.
    """
    if series.times.size == 0:
        raise ValueError("empty power series")
    avg = series.average
    i = int(np.argmax(avg))          # np.argmax returns the first maximum
    t_opt, p_opt = float(series.times[i]), float(avg[i])
    if 0 < i < avg.size - 1:
        t3 = series.times[i - 1:i + 2]
        p3 = avg[i - 1:i + 2]
        denom = (t3[0] - t3[1]) * (t3[0] - t3[2]) * (t3[1] - t3[2])
        if denom != 0:
            a = (t3[2] * (p3[1] - p3[0]) + t3[1] * (p3[0] - p3[2])
                 + t3[0] * (p3[2] - p3[1])) / denom
            b = (t3[2] ** 2 * (p3[0] - p3[1]) + t3[1] ** 2 * (p3[2] - p3[0])
                 + t3[0] ** 2 * (p3[1] - p3[2])) / denom
            if a < 0:
                t_ref = -b / (2 * a)
                if t3[0] <= t_ref <= t3[2]:
                    c = p3[0] - a * t3[0] ** 2 - b * t3[0]
                    t_opt = float(t_ref)
                    p_opt = float(a * t_ref**2 + b * t_ref + c)
    series.dt_max = t_opt
    series.p_opt = p_opt
    return t_opt, p_opt


def instantaneous_power_from_values(times: np.ndarray, values: np.ndarray,
                                    step_us: float = DEFAULT_INST_STEP_US):
    """Forward finite difference of the charged quantity with a fixed step.

    Negative values are physical (spontaneous coherent discharge). Returns
    (sample times, power values); the last `step` of the grid has no
    forward neighbor and is dropped.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size < 2:
        raise ValueError("need at least two grid points")
    spacings = np.diff(times)
    if spacings.max() - spacings.min() > 1e-9 * spacings.max():
        raise ValueError("finite differences need a uniform grid")
    grid_dt = float(spacings[0])
    if grid_dt > step_us * (1 + 1e-9):
        raise ValueError(
            f"grid spacing {grid_dt} exceeds the difference step {step_us}"
        )
    offset = max(1, int(round(step_us / grid_dt)))
    actual = offset * grid_dt
    inst = (values[offset:] - values[:-offset]) / actual
    return times[:-offset], inst


def instantaneous_power(trace: ChargingTrace, h0: ManyBodyOperator,
                        step_us: float = DEFAULT_INST_STEP_US,
                        quantity: str = "ergotropy") -> PowerSeries:
    """PowerSeries carrying the finite-difference instantaneous power."""
    series = average_power(trace, h0, quantity=quantity)
    inst_t, inst = instantaneous_power_from_values(
        series.times, series.values, step_us
    )
    series.instantaneous = inst
    series.inst_times = inst_t
    return series


def bound_ratio(series: PowerSeries, kind: str, omega0: float,
                v_dv: float) -> np.ndarray:
    """r(t) = |P(t)| / (omega0 * v_dv), checked against its ceiling.

    Classical charging must stay below 1/2, pairwise quantum charging
    below 1. A violation signals an integrator or construction bug.
    """
    if v_dv <= 0:
        raise ValueError("driving potential must be positive")
    if series.instantaneous is None:
        raise ValueError("instantaneous power has not been computed")
    ceiling = {"classical": 0.5, "quantum": 1.0}.get(kind)
    if ceiling is None:
        raise ValueError(f"unknown charging kind {kind!r}")
    r = np.abs(series.instantaneous) / (omega0 * v_dv)
    worst = float(r.max()) if r.size else 0.0
    if worst > ceiling + BOUND_TOL:
        raise InvariantViolationError(
            f"instantaneous {kind} power ratio reached {worst:.6f} "
            f"(ceiling {ceiling})"
        )
    return r


def average_power_bound_check(series: PowerSeries, k: int, omega0: float,
                              v_dv: float) -> bool:
    """Assert |P_bar(tau)| <= (k/2) * omega0 * v_dv on the whole grid."""
    bound = power_bound(k, omega0, v_dv)
    worst = float(np.abs(series.average).max()) if series.average.size else 0.0
    if worst > bound + BOUND_TOL * max(1.0, bound):
        raise InvariantViolationError(
            f"average power reached {worst:.6f}, bound {bound:.6f}"
        )
    return True


def power_advantage(qu: PowerSeries, cl: PowerSeries) -> float:
    """Relative optimal-average-power enhancement of quantum over classical."""
    _, p_qu = qu.optimum
    _, p_cl = cl.optimum
    if p_cl <= 0:
        raise DegenerateInputError("classical optimal power vanished")
    return p_qu / p_cl - 1.0


def g2_from_populations(populations: np.ndarray, n: int) -> np.ndarray:
    """Pair correlation from basis-state populations, one row per time.

    The occupation operators are diagonal, so populations carry everything
    the correlator needs. Rows where any single-cell occupation is below
    the floor are undefined and reported as NaN.
    """
    if n < 2:
        raise ValueError("pair correlation requires at least two cells")
    populations = np.atleast_2d(np.asarray(populations, dtype=float))
    b = np.arange(populations.shape[1], dtype=np.int64)
    bits = np.stack([((b >> k) & 1).astype(float) for k in range(n)])
    singles = populations @ bits.T                     # (n_times, n)
    joints = np.stack(
        [populations @ (bits[j] * bits[j + 1]) for j in range(n - 1)], axis=1
    )
    defined = np.all(singles >= G2_POPULATION_FLOOR, axis=1)
    out = np.full(populations.shape[0], np.nan)
    if np.any(defined):
        ratios = joints[defined] / (
            singles[defined, :-1] * singles[defined, 1:]
        )
        out[defined] = ratios.mean(axis=1)
    return out


def g2_correlation(trace: ChargingTrace) -> np.ndarray:
    """Averaged nearest-neighbor excitation correlation along the trace.

    0/0 at t = 0 is physical, not an error: undefined points come back as
    NaN.
    """
    return g2_from_populations(trace.populations(), trace.n_cells)


def power_deviation(power_energy: PowerSeries, power_ergotropy: PowerSeries,
                    power_measured: PowerSeries) -> tuple[float, float]:
    """Normalized deviations of the optimal powers.

    Returns (|P_E - P_ergo| / P_E, |P_E - P_meas| / P_meas) where each P is
    the optimal average power of the corresponding series.
    """
    _, p_e = power_energy.optimum
    _, p_erg = power_ergotropy.optimum
    _, p_meas = power_measured.optimum
    if p_e == 0 or p_meas == 0:
        raise DegenerateInputError("optimal power denominator vanished")
    return abs(p_e - p_erg) / abs(p_e), abs(p_e - p_meas) / abs(p_meas)


def fit_scaling(n_values, gamma_values, max_iter: int = 500) -> ScalingFit:
    """Least-squares fit of gamma(N) = a * arctan(b * N^c).

    The exponent is kept positive through a log parameterization; the fit
    runs Levenberg-Marquardt from a = 2/pi * max(gamma), b = c = 1.
    """
    n = np.asarray(n_values, dtype=float)
    y = np.asarray(gamma_values, dtype=float)
    if n.size != y.size:
        raise ValueError("N and gamma arrays must have equal length")
    if n.size < 4:
        raise ValueError(f"need at least 4 points, got {n.size}")
    if np.any(n < 3):
        raise ValueError("scaling fit starts at N = 3")

    def residuals(theta):
        a, b, log_c = theta
        return a * np.arctan(b * n ** np.exp(log_c)) - y

    x0 = np.array([2.0 / np.pi * float(y.max()), 1.0, 0.0])
    result = least_squares(residuals, x0, method="lm", max_nfev=max_iter)
    if not result.success:
        raise FitFailureError(
            f"scaling fit did not converge: {result.message}",
            last_iterate=result.x,
        )
    a, b, log_c = result.x
    if a < 0 and b < 0:
        # arctan is odd: fold the sign ambiguity into a canonical branch
        a, b = -a, -b
    return ScalingFit(
        a=float(a), b=float(b), c=float(np.exp(log_c)),
        residual_norm=float(np.linalg.norm(result.fun)),
    )
