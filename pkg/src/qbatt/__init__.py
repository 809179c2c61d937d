"""Simulation and analysis toolkit for spin-chain quantum batteries."""

__version__ = "0.1.0"

from .operators import (
    BasisConvention,
    ManyBodyOperator,
    embed_local,
    spectral_range,
    commutator,
)
from .battery import (
    BatteryParams,
    DrivingPotential,
    build_h0,
    build_vcl,
    build_vqu,
    driving_potential,
    driving_potential_ratio,
    power_operator,
    power_bound,
    mhz_to_rad_per_us,
)
from .dynamics import (
    ChargingTrace,
    LindbladSpec,
    QuantumState,
    evolve_lindblad,
    evolve_unitary,
    rates_from_times,
)
from .ergotropy import (
    ErgotropyReport,
    PassiveDecomposition,
    dephase_energy_basis,
    ergotropy,
    ergotropy_split,
    internal_energy,
)
from .metrics import (
    AdvantageReport,
    PowerSeries,
    ScalingFit,
    average_power,
    average_power_bound_check,
    bound_ratio,
    fit_scaling,
    g2_correlation,
    instantaneous_power,
    optimal_power,
    power_advantage,
    power_deviation,
)
from .entanglement import (
    Bipartition,
    EntropyGrowthReport,
    enumerate_bipartitions,
    entropy_growth,
    noise_correct,
    partial_trace,
    renyi2,
    sampled_purity,
)
from .device import (
    CouplerSpec,
    ReadoutModel,
    apply_noise,
    build_readout_model,
    coupler_frequency,
    effective_coupling,
    extract_oscillation_frequency,
    find_resonance,
    mitigate,
    resonance_scan,
    simulate_parametric,
)
from .config import ExperimentConfig, load_config, parse_config, table1
