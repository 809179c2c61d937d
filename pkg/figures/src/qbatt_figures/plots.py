"""Figure renderers, one per figure id.

Rendering is deterministic: the Agg backend, fixed canvas sizes, and
stripped PNG metadata make repeated renders of the same inputs
pixel-identical on a pinned environment. Undefined data points (empty CSV
fields) come through as NaN and draw as gaps.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import (  # noqa: E402
    SchemaMismatch,
    find_entropy_tables,
    find_traces,
    read_json,
    read_table,
)

DPI = 120


def _new_axes(width=6.0, height=4.0, ncols=1):
    fig, axes = plt.subplots(
        1, ncols, figsize=(width * ncols, height), dpi=DPI, squeeze=False
    )
    return fig, axes[0]


def _save(fig, out_path):
    tmp = f"{out_path}.tmp"
    fig.savefig(tmp, format="png", metadata={"Software": None})
    plt.close(fig)
    os.replace(tmp, out_path)
    return out_path


def _trace_inputs(in_dir, kind):
    traces = find_traces(in_dir, kind)
    if not traces:
        raise SchemaMismatch(f"{in_dir}: no trace_N*_{kind}.csv files")
    return traces


def render_fig2a(in_dir, out_path):
    """Driving-potential ratio and advantage versus the drive ratio."""
    cols = read_table(os.path.join(in_dir, "alpha_sweep.csv"),
                      required=("alpha", "eta", "gamma_ad"))
    fig, (ax,) = _new_axes()
    ax.plot(cols["alpha"], cols["gamma_ad"], "o-", color="tab:blue",
            label="advantage")
    ax.set_xlabel("drive ratio alpha")
    ax.set_ylabel("advantage parameter", color="tab:blue")
    twin = ax.twinx()
    twin.plot(cols["alpha"], cols["eta"], "s-", color="tab:red",
              label="potential ratio")
    twin.set_ylabel("driving-potential ratio", color="tab:red")
    twin.axhline(0.0, color="tab:red", lw=0.8, ls=":")
    crossing = np.interp(0.0, cols["eta"], cols["alpha"])
    twin.axvline(crossing, color="gray", lw=0.8, ls="--")
    twin.annotate(f"crossing {crossing:.3f}", (crossing, 0.0),
                  textcoords="offset points", xytext=(6, 8), fontsize=8)
    ax.set_title("fair-energy transition")
    return _save(fig, out_path)


def render_fig3a(in_dir, out_path):
    """Average quantum charging power over the interval, per size."""
    fig, (ax,) = _new_axes()
    for n, path in _trace_inputs(in_dir, "quantum"):
        cols = read_table(path, required=("t_us", "avg_power"))
        ax.plot(cols["t_us"], cols["avg_power"], label=f"N = {n}")
    ax.set_xlabel("charging interval (us)")
    ax.set_ylabel("average power (omega0/us)")
    ax.legend(fontsize=8)
    ax.set_title("quantum charging power")
    return _save(fig, out_path)


def render_fig3b(in_dir, out_path):
    """Optimal power scaling for both protocols."""
    cols = read_table(os.path.join(in_dir, "scaling.csv"),
                      required=("n", "p_opt_qu", "p_opt_cl"))
    fig, (ax,) = _new_axes()
    ax.plot(cols["n"], cols["p_opt_qu"], "o-", label="quantum")
    ax.plot(cols["n"], cols["p_opt_cl"], "s-", label="classical")
    ax.set_xlabel("cells N")
    ax.set_ylabel("optimal power (omega0/us)")
    ax.legend()
    ax.set_title("optimal power scaling")
    return _save(fig, out_path)


def render_fig3c(in_dir, out_path):
    """Advantage parameters versus size."""
    cols = read_table(os.path.join(in_dir, "scaling.csv"),
                      required=("n", "gamma_ad", "eta"))
    fig, (ax,) = _new_axes()
    ax.plot(cols["n"], cols["gamma_ad"], "o-", color="tab:blue",
            label="advantage")
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("cells N")
    ax.set_ylabel("advantage parameter", color="tab:blue")
    twin = ax.twinx()
    twin.plot(cols["n"], cols["eta"], "s--", color="tab:red")
    twin.set_ylabel("driving-potential ratio", color="tab:red")
    ax.set_title("advantage versus size")
    return _save(fig, out_path)


def render_fig3d(in_dir, out_path):
    """Pair correlation versus charging interval (gaps where undefined)."""
    fig, (ax,) = _new_axes()
    for n, path in _trace_inputs(in_dir, "quantum"):
        cols = read_table(path, required=("t_us", "g2"))
        ax.plot(cols["t_us"], cols["g2"], label=f"N = {n}")
    ax.axhline(1.0, color="k", lw=0.8, ls=":")
    ax.set_yscale("log")
    ax.set_xlabel("charging interval (us)")
    ax.set_ylabel("pair correlation")
    ax.legend(fontsize=8)
    ax.set_title("excitation bunching")
    return _save(fig, out_path)


def render_fig4(in_dir, out_path):
    """Coherent and incoherent advantage parameters versus size."""
    cols = read_table(os.path.join(in_dir, "scaling.csv"),
                      required=("n", "gamma_ad_cohe", "gamma_ad_inco"))
    fig, (ax,) = _new_axes()
    ax.plot(cols["n"], cols["gamma_ad_cohe"], "o-", label="coherent")
    ax.plot(cols["n"], cols["gamma_ad_inco"], "s-", label="incoherent")
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("cells N")
    ax.set_ylabel("advantage parameter")
    ax.legend()
    ax.set_title("split-ergotropy advantage")
    return _save(fig, out_path)


def render_fig5(in_dir, out_path):
    """Instantaneous power for quantum and classical charging."""
    fig, axes = _new_axes(ncols=2)
    for ax, kind in zip(axes, ("quantum", "classical")):
        for n, path in _trace_inputs(in_dir, kind):
            cols = read_table(path, required=("t_us", "inst_power"))
            ax.plot(cols["t_us"], cols["inst_power"], label=f"N = {n}")
        ax.axhline(0.0, color="k", lw=0.8)
        ax.set_xlabel("time (us)")
        ax.set_ylabel("instantaneous power (omega0/us)")
        ax.set_title(kind)
        ax.legend(fontsize=8)
    return _save(fig, out_path)


def render_fig6a(in_dir, out_path):
    """Entropy growth per bipartition size."""
    tables = find_entropy_tables(in_dir)
    if not tables:
        raise SchemaMismatch(f"{in_dir}: no entropy_N*.csv files")
    fig, (ax,) = _new_axes()
    for n, kind, path in tables:
        cols = read_table(path, required=("n_a", "delta_sigma"))
        style = "o-" if kind == "quantum" else "^--"
        ax.plot(cols["n_a"], cols["delta_sigma"], style,
                label=f"N = {n} {kind}")
    ax.axhline(0.0, color="gray", lw=0.8, ls="--")
    ax.set_xlabel("subsystem size")
    ax.set_ylabel("entropy growth (nats)")
    ax.legend(fontsize=8)
    ax.set_title("bipartition-averaged entropy growth")
    return _save(fig, out_path)


def render_fig6b(in_dir, out_path):
    """Size-averaged entropy growth scaling."""
    cols = read_table(os.path.join(in_dir, "scaling.csv"),
                      required=("n", "delta_sigma"))
    fig, (ax,) = _new_axes()
    ax.plot(cols["n"], cols["delta_sigma"], "o-", label="quantum")
    ax.axhline(0.0, color="gray", lw=0.8, ls="--", label="no entanglement")
    ax.set_xlabel("cells N")
    ax.set_ylabel("average entropy growth (nats)")
    ax.legend()
    ax.set_title("entropy growth scaling")
    return _save(fig, out_path)


def render_figS4a(in_dir, out_path):
    """Resonance scan of the pair-exchange transfer."""
    cols = read_table(os.path.join(in_dir, "resonance_scan.csv"),
                      required=("omega_phi_rad_per_us", "transfer"))
    fig, (ax,) = _new_axes()
    ax.plot(cols["omega_phi_rad_per_us"], cols["transfer"], "o-")
    ax.set_xlabel("drive frequency (rad/us)")
    ax.set_ylabel("pair transfer")
    ax.set_title("two-photon resonance")
    return _save(fig, out_path)


def render_figS4b(in_dir, out_path):
    """Exchange rate versus drive amplitude with a linear fit."""
    cols = read_table(
        os.path.join(in_dir, "amplitude_scan.csv"),
        required=("delta_phi", "rate_measured_rad_per_us",
                  "rate_predicted_rad_per_us"),
    )
    fig, (ax,) = _new_axes()
    amps = cols["delta_phi"]
    ax.plot(amps, cols["rate_measured_rad_per_us"], "o", label="simulated")
    ax.plot(amps, cols["rate_predicted_rad_per_us"], "s--",
            label="dispersive formula")
    slope, icept = np.polyfit(amps, cols["rate_measured_rad_per_us"], 1)
    xs = np.linspace(amps.min(), amps.max(), 50)
    ax.plot(xs, slope * xs + icept, color="gray", lw=0.8,
            label="linear fit")
    ax.set_xlabel("flux modulation amplitude")
    ax.set_ylabel("exchange rate (rad/us)")
    ax.legend(fontsize=8)
    ax.set_title("drive-amplitude response")
    return _save(fig, out_path)


def render_figS5(in_dir, out_path):
    """Energy (dashed) and ergotropy (solid) along the charge."""
    fig, (ax,) = _new_axes()
    palette = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for i, (n, path) in enumerate(_trace_inputs(in_dir, "quantum")):
        cols = read_table(path, required=("t_us", "energy", "ergotropy"))
        color = palette[i % len(palette)]
        ax.plot(cols["t_us"], cols["ergotropy"], color=color,
                label=f"N = {n}")
        ax.plot(cols["t_us"], cols["energy"], color=color, ls="--", lw=0.9)
    ax.set_xlabel("time (us)")
    ax.set_ylabel("stored energy / ergotropy (omega0)")
    ax.legend(fontsize=8)
    ax.set_title("ergotropy versus internal energy")
    return _save(fig, out_path)


def render_figS8b(in_dir, out_path):
    """Advantage scaling with the saturating-growth fit and asymptote."""
    cols = read_table(os.path.join(in_dir, "scaling.csv"),
                      required=("n", "gamma_ad"))
    fit = read_json(os.path.join(in_dir, "scaling_fit.json"))
    for key in ("a", "b", "c", "asymptote"):
        if key not in fit:
            raise SchemaMismatch(f"scaling_fit.json: missing key {key!r}")
    fig, (ax,) = _new_axes()
    ax.plot(cols["n"], cols["gamma_ad"], "o", label="simulated")
    xs = np.linspace(cols["n"].min(), cols["n"].max(), 200)
    ax.plot(xs, fit["a"] * np.arctan(fit["b"] * xs ** fit["c"]),
            color="tab:orange", label="arctan fit")
    ax.axhline(fit["asymptote"], color="gray", ls="--", lw=0.9,
               label="asymptote")
    ax.set_xlabel("cells N")
    ax.set_ylabel("advantage parameter")
    ax.legend(fontsize=8)
    ax.set_title("advantage scaling law")
    return _save(fig, out_path)


def render_figS9(in_dir, out_path):
    """Per-size entropy growth, one panel per battery size."""
    tables = find_entropy_tables(in_dir)
    if not tables:
        raise SchemaMismatch(f"{in_dir}: no entropy_N*.csv files")
    sizes = sorted({n for n, _, _ in tables})
    fig, axes = _new_axes(width=4.0, ncols=max(len(sizes), 1))
    for ax, n in zip(axes, sizes):
        for n_i, kind, path in tables:
            if n_i != n:
                continue
            cols = read_table(path, required=("n_a", "delta_sigma"))
            style = "o-" if kind == "quantum" else "^--"
            ax.plot(cols["n_a"], cols["delta_sigma"], style, label=kind)
        ax.axhline(0.0, color="gray", lw=0.8, ls="--")
        ax.set_title(f"N = {n}")
        ax.set_xlabel("subsystem size")
        ax.set_ylabel("entropy growth (nats)")
        ax.legend(fontsize=8)
    return _save(fig, out_path)


RENDERERS = {
    "fig2a": render_fig2a,
    "fig3a": render_fig3a,
    "fig3b": render_fig3b,
    "fig3c": render_fig3c,
    "fig3d": render_fig3d,
    "fig4": render_fig4,
    "fig5": render_fig5,
    "fig6a": render_fig6a,
    "fig6b": render_fig6b,
    "figS4a": render_figS4a,
    "figS4b": render_figS4b,
    "figS5": render_figS5,
    "figS8b": render_figS8b,
    "figS9": render_figS9,
}


def render(figure_id: str, in_dir, out_dir) -> str:
    if figure_id not in RENDERERS:
        raise SchemaMismatch(
            f"unknown figure id {figure_id!r}; "
            f"known: {', '.join(sorted(RENDERERS))}"
        )
    os.makedirs(out_dir, exist_ok=True)
    out_path = os.path.join(out_dir, f"{figure_id}.png")
    return RENDERERS[figure_id](in_dir, out_path)
