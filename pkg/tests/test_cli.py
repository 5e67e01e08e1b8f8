"""Command-line front end: verbs, flags, config parsing, exit codes."""

from __future__ import annotations

import csv
import json

import pytest

import empsense.cli as cli
from empsense.emfwd import read_matrix
from empsense.errors import NumericalError


def _toy_doc(phantom_material=None, **scenario_overrides):
    scenario = {
        "n_tx": 6,
        "n_rx": 4,
        "n_pilots": 3,
        "n_subcarriers": 2,
        "f_c": 200.0e6,
        "delta_f": 2.0e6,
        "tx_center": [10.0, 0.0],
        "rx_center": [-20.0, -20.0],
        "grid_side": 4,
        "forward_oversample": 1,
        "snr_db": 25.0,
        "rng_seed": 0,
    }
    scenario.update(scenario_overrides)
    material = (
        phantom_material
        if phantom_material is not None
        else {"eps_r": 2.0, "sigma": 0.01}
    )
    return {
        "scenario": scenario,
        "phantom": {"shape": "disk", "material": material, "radius": 0.5},
    }


def _write_doc(tmp_path, doc, name="scene.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestSimulate:
    def test_writes_observation_files(self, tmp_path, capsys):
        cfg = _write_doc(tmp_path, _toy_doc())
        out = tmp_path / "out"
        assert cli.main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        assert (out / "y_000.csv").exists()
        assert (out / "y_001.csv").exists()
        assert "2 observation files" in capsys.readouterr().out

    def test_seed_flag_controls_noise(self, tmp_path):
        cfg = _write_doc(tmp_path, _toy_doc())
        outs = {name: tmp_path / name for name in ("a", "b", "c")}
        for name, seed in (("a", "5"), ("b", "5"), ("c", "6")):
            rc = cli.main(
                ["simulate", "--config", cfg, "--out", str(outs[name]), "--seed", seed]
            )
            assert rc == 0
        a = (outs["a"] / "y_000.csv").read_bytes()
        assert a == (outs["b"] / "y_000.csv").read_bytes()
        assert a != (outs["c"] / "y_000.csv").read_bytes()

    def test_no_noise_flag_is_deterministic(self, tmp_path):
        cfg = _write_doc(tmp_path, _toy_doc())
        for name in ("a", "b"):
            rc = cli.main(
                ["simulate", "--config", cfg, "--out", str(tmp_path / name),
                 "--no-noise", "--seed", str(hash(name) % 100)]
            )
            assert rc == 0
        a = (tmp_path / "a" / "y_000.csv").read_bytes()
        assert a == (tmp_path / "b" / "y_000.csv").read_bytes()

    def test_noisy_empty_scene_is_config_error(self, tmp_path, capsys):
        doc = _toy_doc()
        del doc["phantom"]
        cfg = _write_doc(tmp_path, doc)
        rc = cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "out")])
        assert rc == 2
        assert "configuration error" in capsys.readouterr().err


class TestDesignBeams:
    def test_writes_matrices_and_report(self, tmp_path):
        cfg = _write_doc(tmp_path, _toy_doc())
        out = tmp_path / "out"
        assert cli.main(["design-beams", "--config", cfg, "--out", str(out)]) == 0
        report = _read_csv(out / "beamform.csv")
        assert report[0] == ["k", "gram_error", "mu_born_designed", "mu_born_random"]
        assert len(report) == 3
        w = read_matrix(out / "w_000.bin")
        assert w.shape == (6, 3)
        assert (out / "w_001.bin").exists()


class TestReconstruct:
    def test_writes_property_map(self, tmp_path, capsys):
        cfg = _write_doc(tmp_path, _toy_doc())
        out = tmp_path / "out"
        assert cli.main(["reconstruct", "--config", cfg, "--out", str(out)]) == 0
        for name in ("rpcd.csv", "solver_trace.csv", "eps_r.pgm", "sigma.pgm"):
            assert (out / name).exists()
        assert "nmse" in capsys.readouterr().out


class TestClassify:
    def test_writes_bundle_and_verdict(self, tmp_path, capsys):
        cfg = _write_doc(tmp_path, _toy_doc(phantom_material="wood-dry"))
        out = tmp_path / "out"
        assert cli.main(["classify", "--config", cfg, "--out", str(out)]) == 0
        verdict = _read_csv(out / "classification.csv")[1]
        assert verdict[1] == "wood-dry"
        assert verdict[4] in {"0", "1"}
        assert (out / "clusters.csv").exists()
        assert capsys.readouterr().out.startswith("predicted material:")


class TestSweep:
    def test_flags_drive_axis(self, tmp_path):
        cfg = _write_doc(tmp_path, _toy_doc())
        out = tmp_path / "out"
        rc = cli.main(
            ["sweep", "--config", cfg, "--out", str(out),
             "--axis", "snr", "--values", "10", "30", "--trials", "1"]
        )
        assert rc == 0
        assert len(_read_csv(out / "sweep.csv")) == 3

    def test_experiment_config_section(self, tmp_path):
        doc = _toy_doc()
        doc["experiment"] = {"axis": "snr", "values": [15.0], "trials": 2}
        cfg = _write_doc(tmp_path, doc)
        out = tmp_path / "out"
        assert cli.main(["sweep", "--config", cfg, "--out", str(out)]) == 0
        table = _read_csv(out / "sweep.csv")
        assert len(table) == 3
        assert {r[1] for r in table[1:]} == {"0", "1"}

    def test_missing_axis_is_config_error(self, tmp_path, capsys):
        cfg = _write_doc(tmp_path, _toy_doc())
        rc = cli.main(["sweep", "--config", cfg, "--out", str(tmp_path / "out")])
        assert rc == 2
        assert "configuration error" in capsys.readouterr().err


class TestDiagnose:
    def test_writes_tables(self, tmp_path):
        cfg = _write_doc(tmp_path, _toy_doc())
        out = tmp_path / "out"
        rc = cli.main(
            ["diagnose", "--config", cfg, "--out", str(out),
             "--k-values", "2", "3", "--distances", "10", "20"]
        )
        assert rc == 0
        assert len(_read_csv(out / "coherence.csv")) == 5
        assert len(_read_csv(out / "edof.csv")) == 3


class TestErrorPaths:
    def test_missing_config_file(self, tmp_path, capsys):
        rc = cli.main(
            ["simulate", "--config", str(tmp_path / "nope.json"),
             "--out", str(tmp_path / "out")]
        )
        assert rc == 2
        assert "configuration error" in capsys.readouterr().err

    def test_invalid_json(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        rc = cli.main(["simulate", "--config", str(bad), "--out", str(tmp_path / "out")])
        assert rc == 2

    def test_unknown_scenario_key(self, tmp_path):
        doc = _toy_doc()
        doc["scenario"]["bogus"] = 1
        cfg = _write_doc(tmp_path, doc)
        rc = cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "out")])
        assert rc == 2

    def test_bad_flag_exits_two(self, tmp_path):
        cfg = _write_doc(tmp_path, _toy_doc())
        with pytest.raises(SystemExit) as excinfo:
            cli.main(["simulate", "--config", cfg, "--frobnicate"])
        assert excinfo.value.code == 2
        with pytest.raises(SystemExit):
            cli.main(["simulate"])

    def test_numerical_failure_exit_code(self, monkeypatch, tmp_path, capsys):
        def raiser(args):
            raise NumericalError("diverged")

        monkeypatch.setitem(cli._COMMANDS, "reconstruct", raiser)
        cfg = _write_doc(tmp_path, _toy_doc())
        rc = cli.main(["reconstruct", "--config", cfg, "--out", str(tmp_path / "out")])
        assert rc == 3
        assert "numerical failure" in capsys.readouterr().err
