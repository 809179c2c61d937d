"""Battery Hamiltonians, driving potentials and fair-energy quantities.

Units: hbar = 1, time in microseconds, angular frequencies in rad/us.
Configuration values given in MHz mean the linear frequency f with
omega = 2*pi*f, matching the convention used for device parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import DegenerateInputError
from .operators import (
    ManyBodyOperator,
    spectral_range,
    commutator,
)

TWO_PI = 2.0 * np.pi


def mhz_to_rad_per_us(f_mhz: float) -> float:
    """omega = 2*pi*f with f in MHz gives rad/us directly."""
    return TWO_PI * f_mhz


@dataclass(frozen=True)
class BatteryParams:
    """Chain parameters: cell frequencies, bond couplings, classical drive.

    omega: per-cell angular frequency (rad/us), length N.
    g: per-bond coupling (rad/us), length N-1 (empty for N = 1).
    drive: classical Rabi strength Omega (rad/us).
    """

    n_cells: int
    omega: np.ndarray
    g: np.ndarray
    drive: float

    def __post_init__(self):
        if self.n_cells < 1:
            raise ValueError(f"n_cells must be >= 1, got {self.n_cells}")
        omega = np.atleast_1d(np.asarray(self.omega, dtype=float))
        if omega.size == 1:
            omega = np.full(self.n_cells, omega[0])
        if omega.size != self.n_cells:
            raise ValueError(f"omega has length {omega.size}, expected {self.n_cells}")
        if np.any(omega <= 0):
            raise ValueError("all cell frequencies must be positive")
        g = np.atleast_1d(np.asarray(self.g, dtype=float))
        if self.n_cells >= 2:
            if g.size == 1:
                g = np.full(self.n_cells - 1, g[0])
            if g.size != self.n_cells - 1:
                raise ValueError(
                    f"g has length {g.size}, expected {self.n_cells - 1}"
                )
            if np.any(g <= 0):
                raise ValueError("all bond couplings must be positive")
        else:
            g = np.zeros(0)
        if self.drive < 0:
            raise ValueError("classical drive strength must be >= 0")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "g", g)

    @classmethod
    def uniform(cls, n_cells: int, omega0: float = 1.0, g: float = 1.0,
                alpha: float | None = None, drive: float | None = None):
        """Uniform chain; the drive is set either directly or as alpha*g."""
        if (alpha is None) == (drive is None):
            raise ValueError("specify exactly one of alpha or drive")
        if drive is None:
            drive = alpha * g
        return cls(n_cells, np.full(n_cells, omega0),
                   np.full(max(n_cells - 1, 0), g), float(drive))

    @property
    def dim(self) -> int:
        return 1 << self.n_cells

    @property
    def omega0(self) -> float:
        return float(self.omega[0])

    @property
    def g_mean(self) -> float:
        # alpha is defined against the mean coupling when bonds differ
        return float(self.g.mean()) if self.g.size else 0.0

    @property
    def alpha(self) -> float:
        if self.g_mean == 0.0:
            raise DegenerateInputError("alpha undefined for a single cell")
        return self.drive / self.g_mean

    def with_drive(self, drive: float) -> "BatteryParams":
        return BatteryParams(self.n_cells, self.omega, self.g, float(drive))

    def with_alpha(self, alpha: float) -> "BatteryParams":
        return self.with_drive(alpha * self.g_mean)


@dataclass(frozen=True)
class DrivingPotential:
    """Spectral spread of a charging Hamiltonian: span = lambda_max - lambda_min."""

    span: float
    minimum: float
    kind: str = ""

    def __post_init__(self):
        if self.span < 0:
            raise ValueError("driving potential span cannot be negative")


def build_h0(params: BatteryParams) -> ManyBodyOperator:
    """Reference Hamiltonian: sum of omega_n * n_hat_n. Diagonal, ground energy 0."""
    b = np.arange(params.dim, dtype=np.int64)
    diag = np.zeros(params.dim)
    for n in range(params.n_cells):
        diag += params.omega[n] * ((b >> n) & 1)
    mat = sparse.diags(diag.astype(complex), format="csr")
    return ManyBodyOperator(mat, hermitian=True, validate=False)


def build_vcl(params: BatteryParams) -> ManyBodyOperator:
    """Classical charging Hamiltonian: independent resonant drives, Omega*sigma^x per cell."""
    dim = params.dim
    b = np.arange(dim, dtype=np.int64)
    rows = np.concatenate([b ^ (1 << n) for n in range(params.n_cells)])
    cols = np.tile(b, params.n_cells)
    vals = np.full(rows.size, params.drive, dtype=complex)
    mat = sparse.csr_matrix((vals, (rows, cols)), shape=(dim, dim))
    return ManyBodyOperator(mat, hermitian=True, validate=False)


def build_vqu(params: BatteryParams) -> ManyBodyOperator:
    """Nearest-neighbor double-excitation Hamiltonian on the open chain.

    Each bond couples only the local pair states: |00> <-> |11> with
    amplitude g_n. Conserves excitation parity.
    """
    if params.n_cells < 2:
        raise ValueError("quantum charging requires at least two cells")
    dim = params.dim
    b = np.arange(dim, dtype=np.int64)
    rows, cols, vals = [], [], []
    for n in range(params.n_cells - 1):
        mask = (1 << n) | (1 << (n + 1))
        both_down = b[(b & mask) == 0]
        rows.append(both_down | mask)
        cols.append(both_down)
        vals.append(np.full(both_down.size, params.g[n]))
        rows.append(both_down)
        cols.append(both_down | mask)
        vals.append(np.full(both_down.size, params.g[n]))
    mat = sparse.csr_matrix(
        (np.concatenate(vals).astype(complex),
         (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim),
    )
    return ManyBodyOperator(mat, hermitian=True, validate=False)


def build_charging(params: BatteryParams, kind: str) -> ManyBodyOperator:
    if kind == "classical":
        return build_vcl(params)
    if kind == "quantum":
        return build_vqu(params)
    raise ValueError(f"unknown charging kind {kind!r}")


def driving_potential(V: ManyBodyOperator, kind: str = "") -> DrivingPotential:
    """Spectral spread of a charging Hamiltonian (its energetic-cost yardstick)."""
    lo, hi = spectral_range(V)
    return DrivingPotential(span=hi - lo, minimum=lo, kind=kind)


def driving_potential_ratio(params: BatteryParams) -> float:
    """Classical-to-quantum driving-potential ratio minus one.

    Nonnegative values certify the fair-energy regime: the quantum charger
    spends no more spectral budget than the classical one.
    """
    if params.n_cells < 2:
        raise ValueError("ratio requires at least two cells")
    v_cl = driving_potential(build_vcl(params), kind="classical")
    v_qu = driving_potential(build_vqu(params), kind="quantum")
    if v_qu.span <= 0:
        raise DegenerateInputError("quantum driving potential vanished")
    return v_cl.span / v_qu.span - 1.0


def power_operator(h0: ManyBodyOperator, V: ManyBodyOperator) -> ManyBodyOperator:
    """Charging power operator.

    [H0, V] is anti-hermitian for hermitian inputs, so we store i*[H0, V]
    (hbar = 1), which is hermitian. Only the spectral norm and expectation
    magnitudes are consumed downstream, so the sign convention is internal.
    """
    if h0.dim != V.dim:
        raise ValueError(f"dimension mismatch: {h0.dim} vs {V.dim}")
    comm = commutator(h0, V)
    return ManyBodyOperator(1j * comm.matrix, hermitian=True)


def power_bound(k: int, omega0: float, v_dv: float) -> float:
    """Collective charging bound (k/2)*omega0*v_dv.

    k is the largest number of cells charged collectively: 1 for the
    classical protocol, 2 for the pairwise quantum protocol.
    """
    if k not in (1, 2):
        raise ValueError(f"partition size k must be 1 or 2, got {k}")
    return 0.5 * k * omega0 * v_dv
