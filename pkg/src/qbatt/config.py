"""Experiment configuration: schema, loading, and typed views.

Configurations are single JSON documents. Unknown keys are rejected.
Frequency fields follow one convention pair: names ending in `_mhz` are
linear frequencies f with omega = 2*pi*f; names ending in `_rad_per_us`
are angular frequencies taken literally.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from jsonschema import Draft202012Validator

from .battery import BatteryParams, mhz_to_rad_per_us
from .device import CouplerSpec
from .dynamics import LindbladSpec
from .errors import SchemaError

_FREQ_PAIR = lambda stem: {   # noqa: E731 - tiny schema helper
    f"{stem}_mhz": {"type": "number", "exclusiveMinimum": 0},
    f"{stem}_rad_per_us": {"type": "number", "exclusiveMinimum": 0},
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["battery"],
    "properties": {
        "battery": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "n_range": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 1},
                    "minItems": 2,
                    "maxItems": 2,
                },
                **_FREQ_PAIR("omega0"),
                **_FREQ_PAIR("g"),
                "g_mhz_per_bond": {
                    "type": "array",
                    "items": {"type": "number", "exclusiveMinimum": 0},
                },
                "alpha": {"type": "number", "exclusiveMinimum": 0},
                "drive_mhz": {"type": "number", "minimum": 0},
                "drive_rad_per_us": {"type": "number", "minimum": 0},
            },
        },
        "mode": {"enum": ["unitary", "lindblad"]},
        "charging": {"enum": ["quantum", "classical", "both"]},
        "decoherence": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "source": {"enum": ["none", "table", "uniform", "per_qubit"]},
                "t1_us": {
                    "anyOf": [
                        {"type": "number", "exclusiveMinimum": 0},
                        {"type": "array",
                         "items": {"type": "number", "exclusiveMinimum": 0}},
                    ]
                },
                "t2_us": {
                    "anyOf": [
                        {"type": "number", "exclusiveMinimum": 0},
                        {"type": "array",
                         "items": {"type": "number", "exclusiveMinimum": 0}},
                    ]
                },
            },
            "required": ["source"],
        },
        "time_grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["t_max_us", "step_us"],
            "properties": {
                "t_max_us": {"type": "number", "exclusiveMinimum": 0},
                "step_us": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "analysis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "g2": {"type": "boolean"},
                "entropy": {"type": "boolean"},
                "entropy_dt_us": {"type": "number", "exclusiveMinimum": 0},
                "split_ergotropy": {"type": "boolean"},
                "bounds": {"type": "boolean"},
                "inst_power_step_us": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["alpha_start", "alpha_stop", "alpha_points"],
            "properties": {
                "alpha_start": {"type": "number", "exclusiveMinimum": 0},
                "alpha_stop": {"type": "number", "exclusiveMinimum": 0},
                "alpha_points": {"type": "integer", "minimum": 2},
            },
        },
        "device": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "omega_q1_ghz": {"type": "number", "exclusiveMinimum": 0},
                "omega_q2_ghz": {"type": "number", "exclusiveMinimum": 0},
                "omega_c_max_ghz": {"type": "number", "exclusiveMinimum": 0},
                "frequency_compression": {"type": "number", "exclusiveMinimum": 0},
                "d": {"type": "number", "minimum": 0, "maximum": 1},
                "g_qc_ghz": {"type": "number", "exclusiveMinimum": 0},
                "phi_dc": {"type": "number"},
                "delta_phi": {"type": "number"},
                "phi_dc_grid": {"type": "array",
                                "items": {"type": "number"}, "minItems": 1},
                "delta_phi_grid": {"type": "array",
                                   "items": {"type": "number"}, "minItems": 1},
                "scan_points": {"type": "integer", "minimum": 3},
                "scan_halfwidth_rates": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "readout": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "source": {"enum": ["table", "explicit"]},
                "n": {"type": "integer", "minimum": 1},
                "fidelities": {
                    "type": "array",
                    "items": {
                        "type": "array",
                        "items": {"type": "number"},
                        "minItems": 2,
                        "maxItems": 2,
                    },
                },
                "shots": {"type": "integer", "minimum": 1},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}

_VALIDATOR = Draft202012Validator(CONFIG_SCHEMA)


def table1():
    """Bundled chain-device calibration data."""
    with resources.files("qbatt.data").joinpath("device_table1.json").open() as fh:
        return json.load(fh)


@dataclass
class TimeGrid:
    t_max_us: float
    step_us: float

    def build(self) -> np.ndarray:
        n = int(round(self.t_max_us / self.step_us))
        if abs(n * self.step_us - self.t_max_us) > 1e-9 * self.t_max_us:
            n = int(np.ceil(self.t_max_us / self.step_us))
        return np.linspace(0.0, n * self.step_us, n + 1)


@dataclass
class AnalysisToggles:
    g2: bool = True
    entropy: bool = False
    entropy_dt_us: float = 0.107
    split_ergotropy: bool = True
    bounds: bool = True
    inst_power_step_us: float = 0.02


@dataclass
class ExperimentConfig:
    """Validated, unit-normalized view of a configuration document."""

    raw: dict
    n_values: list[int]
    omega0: float                      # rad/us
    g_bonds_for: dict = field(default_factory=dict)
    g_uniform: float | None = None     # rad/us
    alpha: float | None = None
    drive: float | None = None         # rad/us
    mode: str = "unitary"
    charging: str = "quantum"
    decoherence: dict = field(default_factory=lambda: {"source": "none"})
    time_grid: TimeGrid = field(default_factory=lambda: TimeGrid(1.0, 0.002))
    analysis: AnalysisToggles = field(default_factory=AnalysisToggles)
    sweep: dict | None = None
    device: dict | None = None
    readout: dict | None = None
    out_dir: str = "out"
    seed: int = 0

    def battery_params(self, n: int, alpha: float | None = None) -> BatteryParams:
        g = self.g_uniform if self.g_uniform is not None \
            else mhz_to_rad_per_us(1.03)
        bonds = np.full(max(n - 1, 0), g)
        if n in self.g_bonds_for:
            bonds = np.asarray(self.g_bonds_for[n], dtype=float)
        omega = np.full(n, self.omega0)
        if alpha is None:
            alpha = self.alpha
        if alpha is not None:
            drive = alpha * float(bonds.mean()) if bonds.size else alpha * g
        elif self.drive is not None:
            drive = self.drive
        else:
            raise SchemaError("battery needs either alpha or a drive strength")
        return BatteryParams(n, omega, bonds, drive)

    def lindblad_spec(self, n: int) -> LindbladSpec:
        src = self.decoherence.get("source", "none")
        if self.mode == "unitary" or src == "none":
            return LindbladSpec.closed(n)
        if src == "table":
            rows = table1()["qubits"]
            if n > len(rows):
                raise SchemaError(
                    f"device table holds {len(rows)} qubits, asked for {n}"
                )
            t1 = [rows[i]["t1_us"] for i in range(n)]
            t2 = [rows[i]["t2_echo_us"] for i in range(n)]
            return LindbladSpec.from_times(t1, t2)
        if src == "uniform":
            return LindbladSpec.from_times(
                np.full(n, float(self.decoherence["t1_us"])),
                np.full(n, float(self.decoherence["t2_us"])),
            )
        if src == "per_qubit":
            t1 = np.asarray(self.decoherence["t1_us"], dtype=float)
            t2 = np.asarray(self.decoherence["t2_us"], dtype=float)
            if t1.size < n or t2.size < n:
                raise SchemaError(f"per-qubit times shorter than n = {n}")
            return LindbladSpec.from_times(t1[:n], t2[:n])
        raise SchemaError(f"unknown decoherence source {src!r}")

    def coupler_spec(self, **overrides) -> CouplerSpec:
        if self.device is None:
            raise SchemaError("configuration has no device section")
        dev = dict(self.device)
        compression = dev.pop("frequency_compression", 1e-3)
        scale = lambda ghz: 2e3 * np.pi * ghz * compression  # noqa: E731
        fields = dict(
            omega_q1=scale(dev.pop("omega_q1_ghz", 4.575)),
            omega_q2=scale(dev.pop("omega_q2_ghz", 4.249)),
            omega_c_max=scale(dev.pop("omega_c_max_ghz", 6.0)),
            d=dev.pop("d", 0.10),
            g1=scale(dev.pop("g_qc_ghz", 0.21)),
            phi_dc=dev.pop("phi_dc", 0.45),
            delta_phi=dev.pop("delta_phi", 0.0125),
        )
        fields["g2"] = fields["g1"]
        fields["omega_phi"] = fields["omega_q1"] + fields["omega_q2"]
        fields.update(overrides)
        return CouplerSpec(**fields)

    def readout_fidelities(self) -> list[tuple[float, float]]:
        if self.readout is None:
            raise SchemaError("configuration has no readout section")
        if self.readout.get("source", "table") == "table":
            n = int(self.readout.get("n", 5))
            rows = table1()["qubits"]
            if n > len(rows):
                raise SchemaError(
                    f"device table holds {len(rows)} qubits, asked for {n}"
                )
            return [
                (rows[i]["readout_fidelity_0"], rows[i]["readout_fidelity_1"])
                for i in range(n)
            ]
        return [tuple(pair) for pair in self.readout["fidelities"]]


def _schema_errors(document: dict) -> list[str]:
    msgs = []
    for err in sorted(_VALIDATOR.iter_errors(document), key=lambda e: list(e.path)):
        where = "/".join(str(p) for p in err.path) or "<root>"
        msgs.append(f"{where}: {err.message}")
    return msgs


def parse_config(document: dict) -> ExperimentConfig:
    """Validate a raw JSON document and normalize units."""
    errors = _schema_errors(document)
    if errors:
        raise SchemaError("; ".join(errors))
    battery = document["battery"]
    if ("n" in battery) == ("n_range" in battery):
        raise SchemaError("battery: specify exactly one of n or n_range")
    if "n" in battery:
        n_values = [int(battery["n"])]
    else:
        lo, hi = battery["n_range"]
        if hi < lo:
            raise SchemaError("battery/n_range: upper bound below lower bound")
        n_values = list(range(int(lo), int(hi) + 1))

    def freq(stem, default=None):
        mhz, rad = battery.get(f"{stem}_mhz"), battery.get(f"{stem}_rad_per_us")
        if mhz is not None and rad is not None:
            raise SchemaError(f"battery: give {stem} in MHz or rad/us, not both")
        if mhz is not None:
            return mhz_to_rad_per_us(float(mhz))
        if rad is not None:
            return float(rad)
        return default

    omega0 = freq("omega0", default=1.0)
    g_uniform = freq("g")
    if "g_mhz_per_bond" in battery:
        if len(n_values) != 1:
            raise SchemaError("battery: per-bond couplings need a single n")
        bonds = [mhz_to_rad_per_us(f) for f in battery["g_mhz_per_bond"]]
        if len(bonds) != n_values[0] - 1:
            raise SchemaError(
                f"battery: expected {n_values[0] - 1} bonds, "
                f"got {len(bonds)}"
            )
        g_bonds_for = {n_values[0]: bonds}
    else:
        g_bonds_for = {}

    alpha = battery.get("alpha")
    drive = None
    if "drive_mhz" in battery or "drive_rad_per_us" in battery:
        if alpha is not None:
            raise SchemaError("battery: give alpha or a drive strength, not both")
        drive = battery.get("drive_rad_per_us")
        if drive is None:
            drive = mhz_to_rad_per_us(float(battery["drive_mhz"]))

    grid_doc = document.get("time_grid", {"t_max_us": 1.0, "step_us": 0.002})
    analysis = AnalysisToggles(**document.get("analysis", {}))

    cfg = ExperimentConfig(
        raw=document,
        n_values=n_values,
        omega0=omega0,
        g_bonds_for=g_bonds_for,
        g_uniform=g_uniform,
        alpha=alpha,
        drive=drive,
        mode=document.get("mode", "unitary"),
        charging=document.get("charging", "quantum"),
        decoherence=document.get("decoherence", {"source": "none"}),
        time_grid=TimeGrid(**grid_doc),
        analysis=analysis,
        sweep=document.get("sweep"),
        device=document.get("device"),
        readout=document.get("readout"),
        out_dir=document.get("output", {}).get("dir", "out"),
        seed=int(document.get("seed", 0)),
    )
    if cfg.analysis.inst_power_step_us < cfg.time_grid.step_us:
        raise SchemaError(
            "analysis/inst_power_step_us must be >= time_grid/step_us"
        )
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            document = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}: "
                          f"{exc.msg}") from exc
    except OSError as exc:
        raise SchemaError(f"{path}: {exc.strerror}") from exc
    return parse_config(document)
