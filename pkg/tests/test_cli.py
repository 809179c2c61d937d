import json
import math
import os

import numpy as np
import pytest

from qbatt.cli import main
from qbatt.config import load_config, parse_config, table1
from qbatt.errors import SchemaError


def read_csv(path):
    with open(path) as fh:
        tag = fh.readline().strip()
        assert tag == "# qbatt-schema v1"
        header = fh.readline().strip().split(",")
        rows = []
        for line in fh:
            cells = line.rstrip("\n").split(",")
            rows.append([float(c) if c else None for c in cells])
    return header, rows


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


BASE_N2 = {
    "battery": {"n": 2, "omega0_rad_per_us": 1.0, "g_rad_per_us": 1.0,
                "alpha": 0.8},
    "mode": "unitary",
    "charging": "quantum",
    "time_grid": {"t_max_us": 2.0, "step_us": 0.01},
    "analysis": {"g2": True, "split_ergotropy": True, "bounds": True,
                 "inst_power_step_us": 0.02},
    "seed": 3,
}


class TestCsvFormatting:
    def test_numpy_scalars_render_as_plain_floats(self, tmp_path):
        from qbatt.cli import write_csv

        path = tmp_path / "t.csv"
        write_csv(str(path), ["a", "b"],
                  [[np.float64(1.5), float(2.5)], [np.nan, None]])
        body = path.read_text().splitlines()
        assert body[0] == "# qbatt-schema v1"
        assert body[2] == "1.5,2.5"
        assert body[3] == ","

    def test_round_trip_precision(self, tmp_path):
        from qbatt.cli import write_csv

        value = 0.1234567890123456789
        path = tmp_path / "t.csv"
        write_csv(str(path), ["x"], [[value]])
        back = float(path.read_text().splitlines()[2])
        assert back == value


class TestConfig:
    def test_unknown_key_rejected(self):
        with pytest.raises(SchemaError, match="bogus"):
            parse_config({**BASE_N2, "bogus": 1})

    def test_missing_battery(self):
        with pytest.raises(SchemaError):
            parse_config({"mode": "unitary"})

    def test_n_and_range_conflict(self):
        doc = json.loads(json.dumps(BASE_N2))
        doc["battery"]["n_range"] = [2, 4]
        with pytest.raises(SchemaError, match="exactly one"):
            parse_config(doc)

    def test_mhz_convention(self):
        doc = json.loads(json.dumps(BASE_N2))
        del doc["battery"]["g_rad_per_us"]
        doc["battery"]["g_mhz"] = 1.0
        cfg = parse_config(doc)
        params = cfg.battery_params(2)
        assert params.g_mean == pytest.approx(2 * math.pi)

    def test_table_decoherence(self):
        doc = json.loads(json.dumps(BASE_N2))
        doc["mode"] = "lindblad"
        doc["decoherence"] = {"source": "table"}
        cfg = parse_config(doc)
        spec = cfg.lindblad_spec(2)
        assert spec.relax[0] == pytest.approx(1 / 28.7)
        assert spec.relax[1] == pytest.approx(1 / 39.9)

    def test_table_bundled_shape(self):
        rows = table1()["qubits"]
        assert len(rows) == 12
        assert rows[0]["t1_us"] == 28.7
        assert rows[0]["readout_fidelity_0"] == 0.936

    def test_invalid_json_reports_line(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"battery": }')
        with pytest.raises(SchemaError, match="line"):
            load_config(str(path))


class TestChargeCommand:
    def test_n2_quantum_columns(self, tmp_path):
        cfg_path = write_config(tmp_path, BASE_N2)
        out = tmp_path / "out"
        assert main(["charge", "--config", cfg_path, "--out", str(out)]) == 0
        header, rows = read_csv(out / "trace_N2_quantum.csv")
        assert header[:8] == ["t_us", "energy", "ergotropy", "ergotropy_inco",
                              "ergotropy_cohe", "avg_power", "inst_power", "g2"]
        assert "pop_11" in header
        t = np.array([r[0] for r in rows])
        pop11 = np.array([r[header.index("pop_11")] for r in rows])
        assert np.abs(pop11 - np.sin(t) ** 2).max() < 1e-9
        # g2 undefined at t = 0, defined later
        assert rows[0][7] is None
        assert rows[10][7] is not None

    def test_n1_classical_rabi(self, tmp_path):
        doc = json.loads(json.dumps(BASE_N2))
        doc["battery"]["n"] = 1
        doc["battery"]["drive_rad_per_us"] = 1.0
        del doc["battery"]["alpha"]
        doc["charging"] = "classical"
        doc["analysis"]["g2"] = False
        cfg_path = write_config(tmp_path, doc)
        out = tmp_path / "out"
        assert main(["charge", "--config", cfg_path, "--out", str(out)]) == 0
        header, rows = read_csv(out / "trace_N1_classical.csv")
        t = np.array([r[0] for r in rows])
        erg = np.array([r[header.index("ergotropy")] for r in rows])
        assert np.abs(erg - np.sin(t) ** 2).max() < 1e-9

    def test_rerun_byte_identical(self, tmp_path):
        cfg_path = write_config(tmp_path, BASE_N2)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["charge", "--config", cfg_path, "--out", str(out1)]) == 0
        assert main(["charge", "--config", cfg_path, "--out", str(out2)]) == 0
        data1 = (out1 / "trace_N2_quantum.csv").read_bytes()
        data2 = (out2 / "trace_N2_quantum.csv").read_bytes()
        assert data1 == data2
        m1 = json.loads((out1 / "run_manifest.json").read_text())
        m2 = json.loads((out2 / "run_manifest.json").read_text())
        assert m1["files"] == m2["files"]
        assert m1["config_sha256"] == m2["config_sha256"]

    def test_include_h0_changes_quantum_dynamics(self, tmp_path):
        cfg_path = write_config(tmp_path, BASE_N2)
        plain, shifted = tmp_path / "plain", tmp_path / "shifted"
        assert main(["charge", "--config", cfg_path, "--out", str(plain)]) == 0
        assert main(["charge", "--config", cfg_path, "--out", str(shifted),
                     "--include-h0"]) == 0
        _, rows_a = read_csv(plain / "trace_N2_quantum.csv")
        _, rows_b = read_csv(shifted / "trace_N2_quantum.csv")
        erg_a = np.array([r[2] for r in rows_a])
        erg_b = np.array([r[2] for r in rows_b])
        # the reference Hamiltonian does not commute with the pair drive:
        # detuned oscillations charge less
        assert np.abs(erg_a - erg_b).max() > 1e-3
        assert erg_b.max() < erg_a.max()

    def test_validation_exit_code(self, tmp_path):
        cfg_path = write_config(tmp_path, {**BASE_N2, "bogus": True})
        assert main(["charge", "--config", cfg_path,
                     "--out", str(tmp_path / "o")]) == 2

    def test_missing_config_exit_code(self, tmp_path):
        assert main(["charge", "--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "o")]) == 2

    def test_no_partial_files_on_failure(self, tmp_path):
        # quantum charging with a single cell fails after validation
        doc = json.loads(json.dumps(BASE_N2))
        doc["battery"]["n"] = 1
        cfg_path = write_config(tmp_path, doc)
        out = tmp_path / "out"
        assert main(["charge", "--config", cfg_path, "--out", str(out)]) == 2
        leftovers = [p for p in out.glob("*") if p.suffix != ""]
        assert not [p for p in leftovers if p.suffix == ".tmp"]
        assert not (out / "trace_N1_quantum.csv").exists()


class TestSweepCommand:
    def test_alpha_sweep_crossing(self, tmp_path):
        doc = {
            "battery": {"n": 5, "omega0_rad_per_us": 1.0, "g_rad_per_us": 1.0},
            "mode": "unitary",
            "time_grid": {"t_max_us": 4.0, "step_us": 0.01},
            "sweep": {"alpha_start": 0.4, "alpha_stop": 0.8,
                      "alpha_points": 21},
            "analysis": {"g2": False, "split_ergotropy": False,
                         "bounds": False},
            "seed": 1,
        }
        cfg_path = write_config(tmp_path, doc)
        out = tmp_path / "out"
        assert main(["sweep-alpha", "--config", cfg_path,
                     "--out", str(out)]) == 0
        header, rows = read_csv(out / "alpha_sweep.csv")
        alphas = np.array([r[0] for r in rows])
        etas = np.array([r[1] for r in rows])
        # strictly increasing in alpha, crossing zero in [0.54, 0.58]
        assert np.all(np.diff(etas) > 0)
        crossing = alphas[np.argmin(np.abs(etas))]
        assert 0.52 <= crossing <= 0.58

    def test_threads_do_not_change_output(self, tmp_path):
        doc = {
            "battery": {"n": 3, "omega0_rad_per_us": 1.0, "g_rad_per_us": 1.0},
            "mode": "unitary",
            "time_grid": {"t_max_us": 2.0, "step_us": 0.02},
            "sweep": {"alpha_start": 0.5, "alpha_stop": 0.9,
                      "alpha_points": 5},
            "analysis": {"g2": False, "split_ergotropy": False,
                         "bounds": False},
            "seed": 1,
        }
        cfg_path = write_config(tmp_path, doc)
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["sweep-alpha", "--config", cfg_path, "--out", str(a),
                     "--threads", "1"]) == 0
        assert main(["sweep-alpha", "--config", cfg_path, "--out", str(b),
                     "--threads", "2"]) == 0
        assert (a / "alpha_sweep.csv").read_bytes() == \
            (b / "alpha_sweep.csv").read_bytes()


class TestScaleCommand:
    def test_small_range(self, tmp_path):
        doc = {
            "battery": {"n_range": [2, 6], "omega0_rad_per_us": 1.0,
                        "g_rad_per_us": 6.47, "alpha": 0.8},
            "mode": "unitary",
            "charging": "both",
            "time_grid": {"t_max_us": 0.4, "step_us": 0.004},
            "analysis": {"g2": False, "entropy": True,
                         "entropy_dt_us": 0.107, "split_ergotropy": True,
                         "bounds": True, "inst_power_step_us": 0.02},
            "seed": 1,
        }
        cfg_path = write_config(tmp_path, doc)
        out = tmp_path / "out"
        assert main(["scale", "--config", cfg_path, "--out", str(out)]) == 0
        header, rows = read_csv(out / "scaling.csv")
        assert [r[0] for r in rows] == [2.0, 3.0, 4.0, 5.0, 6.0]
        etas = [r[header.index("eta")] for r in rows]
        assert all(e is not None and e >= 0 for e in etas)
        gammas = [r[header.index("gamma_ad")] for r in rows]
        assert all(g > 0 for g in gammas)
        fit = json.loads((out / "scaling_fit.json").read_text())
        assert fit["asymptote"] == pytest.approx(fit["a"] * math.pi / 2)

    def test_single_size_skips_fit(self, tmp_path):
        doc = {
            "battery": {"n_range": [3, 3], "omega0_rad_per_us": 1.0,
                        "g_rad_per_us": 1.0, "alpha": 0.8},
            "mode": "unitary",
            "time_grid": {"t_max_us": 2.0, "step_us": 0.02},
            "analysis": {"g2": False, "split_ergotropy": False,
                         "bounds": False},
            "seed": 1,
        }
        cfg_path = write_config(tmp_path, doc)
        out = tmp_path / "out"
        with pytest.warns(UserWarning, match="fit skipped"):
            assert main(["scale", "--config", cfg_path,
                         "--out", str(out)]) == 0
        assert not (out / "scaling_fit.json").exists()

    def test_mode_cap_enforced(self, tmp_path):
        doc = {
            "battery": {"n_range": [2, 12], "omega0_rad_per_us": 1.0,
                        "g_rad_per_us": 1.0, "alpha": 0.8},
            "mode": "lindblad",
            "decoherence": {"source": "table"},
            "time_grid": {"t_max_us": 1.0, "step_us": 0.01},
            "seed": 1,
        }
        cfg_path = write_config(tmp_path, doc)
        assert main(["scale", "--config", cfg_path,
                     "--out", str(tmp_path / "o")]) == 2


class TestEntropyCommand:
    def test_two_cell_quantum(self, tmp_path):
        g = 1.0
        t_star = math.pi / 4 / g
        doc = {
            "battery": {"n": 2, "omega0_rad_per_us": 1.0,
                        "g_rad_per_us": g, "alpha": 0.8},
            "mode": "unitary",
            "time_grid": {"t_max_us": 2 * t_star, "step_us": t_star / 8},
            "analysis": {"g2": False, "entropy": True,
                         "entropy_dt_us": t_star, "split_ergotropy": False,
                         "bounds": False, "inst_power_step_us": t_star / 8},
            "seed": 1,
        }
        cfg_path = write_config(tmp_path, doc)
        out = tmp_path / "out"
        assert main(["entropy", "--config", cfg_path, "--out", str(out)]) == 0
        header, rows = read_csv(out / "entropy_N2_quantum.csv")
        # rows: size-1 bipartitions then the mean
        assert rows[0][1] == pytest.approx(math.log(2), abs=1e-8)


class TestReadoutCommand:
    def test_report_contents(self, tmp_path):
        doc = {
            "battery": {"n": 5, "omega0_rad_per_us": 1.0,
                        "g_rad_per_us": 1.0, "alpha": 0.8},
            "readout": {"source": "table", "n": 5, "shots": 100000},
            "seed": 11,
        }
        cfg_path = write_config(tmp_path, doc)
        out = tmp_path / "out"
        assert main(["readout", "--config", cfg_path, "--out", str(out)]) == 0
        report = json.loads((out / "mitigation_report.json").read_text())
        assert report["n_qubits"] == 5
        assert report["matrices"][0][0][0] == pytest.approx(0.936)
        assert report["noiseless_roundtrip_error"] < 1e-8
        assert report["sampled"]["within_3_sigma_gain"]
