"""Charging-run orchestration shared by the CLI commands and tests.

A run pairs one chain size with one charging kind and produces the
observable arrays the output files and figures consume. States are
streamed, so large registers never hold a full trace in memory.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .battery import (
    BatteryParams,
    build_charging,
    build_h0,
    driving_potential,
)
from .config import ExperimentConfig
from .dynamics import (
    ChargingTrace,
    QuantumState,
    iter_lindblad_states,
    iter_unitary_states,
)
from .entanglement import EntropyGrowthReport, entropy_growth
from .ergotropy import diagonal_ergotropy, ergotropy
from .operators import DENSE_EIG_CAP
from .metrics import (
    PowerSeries,
    average_power_bound_check,
    average_power_from_values,
    bound_ratio,
    g2_from_populations,
    instantaneous_power_from_values,
    optimal_power,
)

# Full-register simulation of the product-state classical protocol is
# pointless beyond this size; a single cell tensored N times is exact.
PRODUCT_RULE_CELLS = 12

# per-basis-state populations are recorded only for small registers
POPULATION_COLUMN_CELLS = 4


@dataclass
class RunAnalysis:
    """Observable series of one charging run."""

    n_cells: int
    kind: str
    mode: str
    params: BatteryParams
    times: np.ndarray
    energy: np.ndarray
    ergotropy: np.ndarray
    incoherent: np.ndarray | None
    coherent: np.ndarray | None
    g2: np.ndarray | None
    populations: np.ndarray | None
    power: PowerSeries = None                    # ergotropy-based
    power_energy: PowerSeries = None             # internal-energy-based
    power_incoherent: PowerSeries | None = None
    power_coherent: PowerSeries | None = None
    entropy: EntropyGrowthReport | None = None
    v_dv: float | None = None

    @property
    def dim(self) -> int:
        return 1 << self.n_cells


def _state_iter(cfg: ExperimentConfig, params: BatteryParams, kind: str,
                include_h0: bool, times: np.ndarray):
    h0 = build_h0(params)
    V = build_charging(params, kind)
    hamiltonian = V + h0 if include_h0 else V
    if cfg.mode == "lindblad":
        spec = cfg.lindblad_spec(params.n_cells)
        rho0 = QuantumState.all_ground(params.n_cells)
        return h0, V, iter_lindblad_states(hamiltonian, spec, rho0, times), False
    psi0 = QuantumState.all_ground(params.n_cells)
    return h0, V, iter_unitary_states(hamiltonian, psi0, times), True


def _classical_product_run(cfg: ExperimentConfig, params: BatteryParams,
                           times: np.ndarray) -> RunAnalysis:
    """Exact large-N classical run via the single-cell product rule.

    Independent resonant drives keep the register in a product state, so
    one two-level simulation carries the whole chain: the energy is N
    times the single-cell energy and neighbor correlations factorize.
    """
    single = BatteryParams(1, params.omega[:1], np.zeros(0), params.drive)
    v_1 = build_charging(single, "classical")
    excited = np.empty(times.size)
    for i, (_, psi) in enumerate(
        iter_unitary_states(v_1, QuantumState.all_ground(1), times)
    ):
        excited[i] = float(np.abs(psi[1]) ** 2)
    energy = params.n_cells * params.omega0 * excited
    g2 = np.where(excited >= 1e-12, 1.0, np.nan) if params.n_cells >= 2 else None
    return RunAnalysis(
        n_cells=params.n_cells,
        kind="classical",
        mode="unitary",
        params=params,
        times=times,
        energy=energy,
        ergotropy=energy.copy(),      # pure states with zero ground energy
        incoherent=None,
        coherent=None,
        g2=g2,
        populations=None,
    )


def analyze_run(cfg: ExperimentConfig, n: int, kind: str,
                alpha: float | None = None,
                include_h0: bool = False) -> RunAnalysis:
    """Simulate one (n, kind) charging run and derive its observables."""
    params = cfg.battery_params(n, alpha)
    times = cfg.time_grid.build()
    toggles = cfg.analysis

    if (kind == "classical" and cfg.mode == "unitary"
            and n > PRODUCT_RULE_CELLS and not include_h0):
        run = _classical_product_run(cfg, params, times)
    else:
        h0, V, states, pure = _state_iter(cfg, params, kind, include_h0, times)
        h0_diag = h0.diagonal().real
        dim = params.dim
        want_split = toggles.split_ergotropy
        want_g2 = toggles.g2 and n >= 2
        want_pops = n <= POPULATION_COLUMN_CELLS
        want_entropy = toggles.entropy and n >= 2
        energy = np.empty(times.size)
        erg = np.empty(times.size)
        inco = np.empty(times.size) if want_split else None
        g2_rows = np.empty((times.size, dim)) if want_g2 else None
        pops_store = np.empty((times.size, dim)) if want_pops else None
        entropy_states = {}
        ent_idx = set()
        if want_entropy:
            i1 = int(np.argmin(np.abs(times - toggles.entropy_dt_us)))
            ent_idx = {0, i1}
        for i, (t, arr) in enumerate(states):
            state = QuantumState(arr)
            p = state.populations()
            energy[i] = float(h0_diag @ p)
            if pure:
                erg[i] = energy[i]    # zero ground energy
            else:
                erg[i], _ = ergotropy(state, h0)
            if want_split:
                inco[i] = diagonal_ergotropy(p, h0)
            if want_g2:
                g2_rows[i] = p
            if want_pops:
                pops_store[i] = p
            if i in ent_idx:
                entropy_states[i] = state
        run = RunAnalysis(
            n_cells=n,
            kind=kind,
            mode=cfg.mode,
            params=params,
            times=times,
            energy=energy,
            ergotropy=erg,
            incoherent=inco,
            coherent=erg - inco if want_split else None,
            g2=g2_from_populations(g2_rows, n) if want_g2 else None,
            populations=pops_store,
        )
        if want_entropy:
            i1 = max(ent_idx)
            if i1 > 0:
                mini = ChargingTrace(
                    np.array([times[0], times[i1]]),
                    [entropy_states[0], entropy_states[i1]],
                    kind=kind,
                )
                run.entropy = entropy_growth(mini, dt_us=float(times[i1]))

    run.power = average_power_from_values(times, run.ergotropy, kind=kind)
    optimal_power(run.power)
    inst_t, inst = instantaneous_power_from_values(
        times, run.ergotropy, toggles.inst_power_step_us
    )
    run.power.instantaneous = inst
    run.power.inst_times = inst_t
    run.power_energy = average_power_from_values(times, run.energy, kind=kind)
    optimal_power(run.power_energy)
    if run.incoherent is not None:
        run.power_incoherent = average_power_from_values(
            times, run.incoherent, kind=kind
        )
        optimal_power(run.power_incoherent)
        run.power_coherent = average_power_from_values(
            times, run.coherent, kind=kind
        )
        optimal_power(run.power_coherent)

    if toggles.bounds:
        if params.dim <= DENSE_EIG_CAP:
            V = build_charging(params, kind)
            dv = driving_potential(V, kind=kind)
            run.v_dv = dv.span
            bound_ratio(run.power, kind, params.omega0, dv.span)
            k = 1 if kind == "classical" else 2
            average_power_bound_check(run.power, k, params.omega0, dv.span)
        else:
            warnings.warn(
                f"n = {n} exceeds the eigensolve cap; bound checks skipped",
                stacklevel=2,
            )
    return run
