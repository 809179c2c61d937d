"""Command-line front end: config ingestion, sweeps, deterministic outputs.

Every CSV starts with the schema comment line `# qbatt-schema v1`, uses
RFC-4180 quoting with '.' decimals, and encodes undefined values as empty
fields. Files are written to a temporary name and renamed into place, so
failed runs leave no partial outputs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .battery import build_vcl, build_vqu, driving_potential
from .config import ExperimentConfig, load_config
from .device import (
    build_readout_model,
    apply_noise,
    dressed_sum_frequency,
    effective_coupling,
    find_resonance,
    measure_pair_drive_rate,
    mitigate,
    resonance_scan,
)
from .errors import QBattError, SchemaError
from .operators import DENSE_EIG_CAP
from .metrics import AdvantageReport, fit_scaling, power_advantage
from .pipeline import POPULATION_COLUMN_CELLS, analyze_run
from .dynamics import LINDBLAD_CELL_CAP

SCHEMA_TAG = "# qbatt-schema v1"
UNITARY_CELL_CAP = 21


# ---------------------------------------------------------------- output --

def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        if np.isnan(value):
            return ""
        # plain-float repr: shortest round-trip, no numpy scalar prefix
        return repr(float(value))
    return str(value)


def write_csv(path, header: list[str], rows) -> str:
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(SCHEMA_TAG + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format(v) for v in row])
    os.replace(tmp, path)
    return path


def write_json(path, payload: dict) -> str:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
    return path


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(out_dir, cfg: ExperimentConfig, files: list[str],
                   timings: dict) -> str:
    effective = dict(cfg.raw)
    effective["seed"] = cfg.seed
    config_hash = hashlib.sha256(
        json.dumps(effective, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()
    payload = {
        "config_sha256": config_hash,
        "toolkit_version": __version__,
        "seed": cfg.seed,
        "files": {os.path.basename(f): _sha256(f) for f in sorted(files)},
        "timings_s": {k: round(v, 3) for k, v in timings.items()},
    }
    return write_json(os.path.join(out_dir, "run_manifest.json"), payload)


def _pop_label(index: int, n: int) -> str:
    return "".join(str((index >> cell) & 1) for cell in range(n))


def _map_ordered(fn, items, threads: int):
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -------------------------------------------------------------- commands --

def cmd_charge(cfg: ExperimentConfig, out_dir, threads=1, include_h0=False):
    kinds = ["classical", "quantum"] if cfg.charging == "both" else [cfg.charging]
    files = []
    for n in cfg.n_values:
        for kind in kinds:
            if kind == "quantum" and n < 2:
                raise SchemaError("quantum charging requires n >= 2")
            run = analyze_run(cfg, n, kind, include_h0=include_h0)
            header = ["t_us", "energy", "ergotropy", "ergotropy_inco",
                      "ergotropy_cohe", "avg_power", "inst_power", "g2"]
            n_pop = 0
            if run.populations is not None and n <= POPULATION_COLUMN_CELLS:
                n_pop = run.dim
                header += [f"pop_{_pop_label(i, n)}" for i in range(n_pop)]
            inst = run.power.instantaneous    # aligned with times[:len(inst)]
            rows = []
            for i, t in enumerate(run.times):
                row = [
                    float(t),
                    float(run.energy[i]),
                    float(run.ergotropy[i]),
                    float(run.incoherent[i]) if run.incoherent is not None else None,
                    float(run.coherent[i]) if run.coherent is not None else None,
                    float(run.power.average[i]),
                    float(inst[i]) if i < inst.size else None,
                    float(run.g2[i]) if run.g2 is not None else None,
                ]
                if n_pop:
                    row += [float(run.populations[i, j]) for j in range(n_pop)]
                rows.append(row)
            path = os.path.join(out_dir, f"trace_N{n}_{kind}.csv")
            files.append(write_csv(path, header, rows))
    return files


def cmd_sweep_alpha(cfg: ExperimentConfig, out_dir, threads=1, include_h0=False):
    if cfg.sweep is None:
        raise SchemaError("sweep-alpha needs a sweep section")
    if len(cfg.n_values) != 1:
        raise SchemaError("sweep-alpha runs at a single n")
    n = cfg.n_values[0]
    alphas = np.linspace(cfg.sweep["alpha_start"], cfg.sweep["alpha_stop"],
                         cfg.sweep["alpha_points"])
    # the quantum run does not depend on alpha; reuse one
    run_qu = analyze_run(cfg, n, "quantum", alpha=float(alphas[0]),
                         include_h0=include_h0)
    params0 = cfg.battery_params(n, float(alphas[0]))
    v_qu = driving_potential(build_vqu(params0), kind="quantum").span

    def point(alpha):
        alpha = float(alpha)
        run_cl = analyze_run(cfg, n, "classical", alpha=alpha,
                             include_h0=include_h0)
        v_cl = driving_potential(
            build_vcl(cfg.battery_params(n, alpha)), kind="classical"
        ).span
        eta = v_cl / v_qu - 1.0
        gamma = power_advantage(run_qu.power, run_cl.power)
        return [alpha, eta, gamma, run_cl.power.p_opt, run_qu.power.p_opt]

    rows = _map_ordered(point, alphas, threads)
    path = os.path.join(out_dir, "alpha_sweep.csv")
    return [write_csv(
        path, ["alpha", "eta", "gamma_ad", "p_opt_cl", "p_opt_qu"], rows
    )]


def cmd_scale(cfg: ExperimentConfig, out_dir, threads=1, include_h0=False):
    cap = LINDBLAD_CELL_CAP if cfg.mode == "lindblad" else UNITARY_CELL_CAP
    bad = [n for n in cfg.n_values if n > cap or n < 2]
    if bad:
        raise SchemaError(
            f"scale sizes {bad} outside [2, {cap}] for mode {cfg.mode}"
        )

    def point(n):
        run_qu = analyze_run(cfg, n, "quantum", include_h0=include_h0)
        run_cl = analyze_run(cfg, n, "classical", include_h0=include_h0)
        params = run_qu.params
        v_cl = v_qu = eta = None
        if params.dim <= DENSE_EIG_CAP:
            v_cl = driving_potential(build_vcl(params)).span
            v_qu = driving_potential(build_vqu(params)).span
            eta = v_cl / v_qu - 1.0
        advantage = AdvantageReport(
            n_cells=n,
            g_mean=params.g_mean,
            alpha=params.alpha,
            v_dv_cl=v_cl if v_cl is not None else float("nan"),
            v_dv_qu=v_qu if v_qu is not None else float("nan"),
            eta=eta if eta is not None else float("nan"),
            p_opt_cl=run_cl.power.p_opt,
            p_opt_qu=run_qu.power.p_opt,
            gamma_ad=power_advantage(run_qu.power, run_cl.power),
        )
        gamma_cohe = gamma_inco = None
        if run_qu.power_coherent is not None and run_cl.power_coherent is not None:
            if run_cl.power_coherent.p_opt > 0:
                gamma_cohe = power_advantage(
                    run_qu.power_coherent, run_cl.power_coherent
                )
            if run_cl.power_incoherent.p_opt > 0:
                gamma_inco = power_advantage(
                    run_qu.power_incoherent, run_cl.power_incoherent
                )
        delta_sigma = run_qu.entropy.average if run_qu.entropy else None
        return {
            "n": n,
            "g_rad_per_us": advantage.g_mean,
            "alpha": advantage.alpha,
            "eta": eta,
            "p_opt_qu": advantage.p_opt_qu,
            "p_opt_cl": advantage.p_opt_cl,
            "dt_max_qu": run_qu.power.dt_max,
            "dt_max_cl": run_cl.power.dt_max,
            "gamma_ad": advantage.gamma_ad,
            "gamma_ad_cohe": gamma_cohe,
            "gamma_ad_inco": gamma_inco,
            "delta_sigma": delta_sigma,
        }

    records = _map_ordered(point, cfg.n_values, threads)
    header = ["n", "g_rad_per_us", "alpha", "eta", "p_opt_qu", "p_opt_cl",
              "dt_max_qu", "dt_max_cl", "gamma_ad", "gamma_ad_cohe",
              "gamma_ad_inco", "delta_sigma"]
    rows = [[rec[k] for k in header] for rec in records]
    files = [write_csv(os.path.join(out_dir, "scaling.csv"), header, rows)]

    fit_points = [(r["n"], r["gamma_ad"]) for r in records if r["n"] >= 3]
    if len(fit_points) >= 4:
        fit = fit_scaling([p[0] for p in fit_points],
                          [p[1] for p in fit_points])
        files.append(write_json(
            os.path.join(out_dir, "scaling_fit.json"),
            {
                "a": fit.a,
                "b": fit.b,
                "c": fit.c,
                "asymptote": fit.asymptote,
                "residual_norm": fit.residual_norm,
                "n_points": len(fit_points),
            },
        ))
    else:
        warnings.warn("fewer than 4 sizes with n >= 3: scaling fit skipped",
                      stacklevel=2)
    return files


def cmd_entropy(cfg: ExperimentConfig, out_dir, threads=1, include_h0=False):
    kinds = ["classical", "quantum"] if cfg.charging == "both" else [cfg.charging]
    cfg.analysis.entropy = True
    files = []
    summary = {}
    for n in cfg.n_values:
        for kind in kinds:
            run = analyze_run(cfg, n, kind, include_h0=include_h0)
            if run.entropy is None:
                raise SchemaError(
                    f"entropy analysis unavailable for n = {n} {kind}"
                )
            rows = [
                [size, growth, None]
                for size, growth in sorted(run.entropy.per_size.items())
            ]
            path = os.path.join(out_dir, f"entropy_N{n}_{kind}.csv")
            files.append(write_csv(
                path, ["n_a", "delta_sigma", "delta_sigma_corrected"], rows
            ))
            summary[f"N{n}_{kind}"] = {
                "average": run.entropy.average,
                "dt_us": run.entropy.dt_us,
                "log_base": run.entropy.log_base,
            }
    files.append(write_json(
        os.path.join(out_dir, "entropy_summary.json"), summary
    ))
    return files


def cmd_device(cfg: ExperimentConfig, out_dir, threads=1, include_h0=False):
    spec = cfg.coupler_spec()
    dev = cfg.device or {}
    predicted = effective_coupling(spec)
    resonance = find_resonance(spec)
    seed_offset = resonance - dressed_sum_frequency(spec)

    omega = abs(predicted)
    halfwidth = dev.get("scan_halfwidth_rates", 10.0) * omega
    points = dev.get("scan_points", 15)
    scan = resonance_scan(
        spec, np.linspace(resonance - halfwidth, resonance + halfwidth, points)
    )
    files = [write_csv(
        os.path.join(out_dir, "resonance_scan.csv"),
        ["omega_phi_rad_per_us", "transfer"],
        [[f, t] for f, t in zip(scan.frequencies, scan.transfer)],
    )]

    amplitudes = dev.get("delta_phi_grid",
                         [0.007, 0.0095, 0.012, 0.0145, 0.017])

    def amp_point(amp):
        probe = spec.replace(delta_phi=float(amp))
        rate = measure_pair_drive_rate(
            probe, omega_drive=dressed_sum_frequency(probe) + seed_offset
        )
        return [float(amp), rate, abs(effective_coupling(probe))]

    amp_rows = _map_ordered(amp_point, amplitudes, threads)
    files.append(write_csv(
        os.path.join(out_dir, "amplitude_scan.csv"),
        ["delta_phi", "rate_measured_rad_per_us", "rate_predicted_rad_per_us"],
        amp_rows,
    ))
    files.append(write_json(
        os.path.join(out_dir, "effective_coupling.json"),
        {
            "predicted_rad_per_us": predicted,
            "resonance_rad_per_us": resonance,
            "dressed_sum_rad_per_us": dressed_sum_frequency(spec),
            "scan_peak_rad_per_us": scan.peak_frequency,
            "scan_peak_width_rad_per_us": scan.peak_width,
        },
    ))
    return files


def cmd_readout(cfg: ExperimentConfig, out_dir, threads=1, include_h0=False):
    fidelities = cfg.readout_fidelities()
    n = len(fidelities)
    model = build_readout_model(fidelities)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    ideal = rng.dirichlet(np.ones(1 << n))
    noisy = apply_noise(model, ideal)
    recovered = mitigate(model, noisy)
    exact_err = float(np.abs(recovered - ideal).max())

    shots = int((cfg.readout or {}).get("shots", 100_000))
    counts = rng.multinomial(shots, noisy) / shots
    sampled = mitigate(model, counts)
    sampled_err = float(np.abs(sampled - ideal).max())
    sigma = float(np.sqrt(np.max(noisy * (1 - noisy)) / shots))
    gain = float(max(
        np.abs(np.linalg.inv(m)).sum(axis=1).max() for m in model.matrices
    ) ** n)
    payload = {
        "n_qubits": n,
        "fidelities": [[f0, f1] for f0, f1 in fidelities],
        "matrices": [m.tolist() for m in model.matrices],
        "noiseless_roundtrip_error": exact_err,
        "sampled": {
            "shots": shots,
            "max_error": sampled_err,
            "sigma_raw": sigma,
            "within_3_sigma_gain": bool(sampled_err < 3 * gain * sigma),
        },
    }
    return [write_json(os.path.join(out_dir, "mitigation_report.json"), payload)]


COMMANDS = {
    "charge": cmd_charge,
    "sweep-alpha": cmd_sweep_alpha,
    "scale": cmd_scale,
    "entropy": cmd_entropy,
    "device": cmd_device,
    "readout": cmd_readout,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qbatt",
        description="Spin-chain quantum battery simulation toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads for sweep points")
        p.add_argument("--include-h0", action="store_true",
                       help="evolve under the reference Hamiltonian plus the "
                            "drive instead of the resonant-frame drive alone")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except SchemaError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seed = args.seed
    out_dir = args.out or cfg.out_dir
    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("QBATT_THREADS", "1"))
    try:
        os.makedirs(out_dir, exist_ok=True)
        started = time.perf_counter()
        files = COMMANDS[args.command](
            cfg, out_dir, threads=threads, include_h0=args.include_h0
        )
        timings = {args.command: time.perf_counter() - started}
        write_manifest(out_dir, cfg, files, timings)
    except SchemaError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except QBattError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
