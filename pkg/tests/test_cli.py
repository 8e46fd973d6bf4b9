import json
import math
from importlib import resources

import jsonschema
import pytest

from wqte.cli import main

SCHEMA = json.loads(resources.files("wqte").joinpath("peaks.schema.json").read_text())
FIXTURE = ["--heisenberg1d", "2", "1", "2", "--ref", "01", "--delta", str(math.pi / 16), "--n", "64"]


def run(*argv):
    return main([str(a) for a in argv])


def load_peaks(path):
    doc = json.loads(path.read_text())
    jsonschema.validate(doc, SCHEMA)
    return doc


class TestSpectrum:
    def test_fixture(self, tmp_path):
        out = tmp_path / "run"
        assert run("spectrum", *FIXTURE, "--threshold", "0.1", "--oracle", "--out", out) == 0
        doc = load_peaks(out / "peaks.json")
        assert [round(p["abs_energy"], 9) for p in doc["peaks"]] == [0.0, 4.0]
        assert doc["meta"]["n"] == 64 and doc["meta"]["shots"] is None
        assert json.loads((out / "oracle.json").read_text())["n_matched"] == 2
        assert (out / "signal.csv").exists() and (out / "spectrum.csv").exists()

    def test_byte_identical_reruns(self, tmp_path):
        args = ["spectrum", *FIXTURE, "--shots", "20", "--seed", "4"]
        assert run(*args, "--out", tmp_path / "a") == 0
        assert run(*args, "--out", tmp_path / "b") == 0
        for name in ("signal.csv", "spectrum.csv", "peaks.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_seed_recorded_when_missing(self, tmp_path):
        assert run("spectrum", *FIXTURE, "--shots", "5", "--out", tmp_path) == 0
        assert isinstance(load_peaks(tmp_path / "peaks.json")["meta"]["seed"], int)

    def test_missing_hamiltonian_file(self, tmp_path, capsys):
        out = tmp_path / "never"
        code = run("spectrum", "--hamiltonian", tmp_path / "nope.txt", "--delta", "0.1", "--n", "8", "--out", out)
        assert code == 2
        assert not out.exists()
        assert "not found" in capsys.readouterr().err

    def test_hamiltonian_file(self, tmp_path):
        ham = tmp_path / "h.txt"
        ham.write_text("qubits 2\n1.0 X0 X1\n1.0 Y0 Y1\n2.0 Z0 Z1\n")
        assert run("spectrum", "--hamiltonian", ham, "--ref", "01", "--delta", math.pi / 16,
                   "--n", 64, "--threshold", 0.1, "--out", tmp_path / "o") == 0

    def test_config_file_and_override(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"heisenberg1d": [2, 1, 2], "ref": "01", "delta": math.pi / 16,
                                   "n": 32, "threshold": 0.1, "out": str(tmp_path / "c")}))
        assert run("spectrum", "--config", cfg, "--n", 64) == 0
        assert load_peaks(tmp_path / "c" / "peaks.json")["meta"]["n"] == 64

    def test_trotter_backend_gate_count(self, tmp_path):
        assert run("spectrum", *FIXTURE, "--backend", "trotter", "--tau", "0.1", "--out", tmp_path) == 0
        assert load_peaks(tmp_path / "peaks.json")["meta"]["gate_count"] > 4

    @pytest.mark.parametrize("extra", [
        [],
        ["--heisenberg2d", "2", "2", "1", "1"],
        ["--tmax", "99"],
        ["--shots", "zero"],
        ["--backend", "trotter"],
        ["--ref", "0"],
        ["--noise", "0.1"],
    ])
    def test_usage_errors(self, tmp_path, extra):
        base = FIXTURE if extra else FIXTURE[4:]
        assert run("spectrum", *base, *extra, "--out", tmp_path / "x") == 2
        assert not (tmp_path / "x").exists()

    def test_bad_config_key(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"colour": "blue"}))
        assert run("spectrum", "--config", cfg) == 2

    def test_argparse_error_exit_code(self):
        assert run("spectrum", "--delta", "abc") == 2


class TestSigns:
    def test_two_site(self, tmp_path, capsys):
        ref = tmp_path / "ref.txt"
        ref.write_text(f"{2 ** -0.5} {2 ** -0.5} 0 0\n")
        args = ["signs", "--heisenberg1d", 2, 1, 2, "--ref-file", ref, "--delta", math.pi / 16,
                "--n", 64, "--threshold", 0.05, "--offset", 2.5, "--out", tmp_path / "s"]
        assert run(*args) == 0
        doc = load_peaks(tmp_path / "s" / "peaks.json")
        signs = {round(p["abs_energy"], 6): p["sign"] for p in doc["peaks"]}
        assert signs[4.0] == "-" and signs[2.0] == "+"

    def test_zero_offset_rejected(self, tmp_path):
        assert run("signs", *FIXTURE, "--offset", 0, "--out", tmp_path / "s") == 2
        assert not (tmp_path / "s").exists()


class TestSweep:
    def test_tmax_sweep(self, tmp_path):
        out = tmp_path / "sw"
        assert run("sweep", "--heisenberg1d", 4, 1, 1, "--delta", 0.3, "--n", 100,
                   "--axis", "tmax", "--values", 60, 120, 240, "--out", out) == 0
        rows = (out / "summary.csv").read_text().splitlines()
        assert rows[0].startswith("value,") and len(rows) == 4
        fit = json.loads((out / "fit.json").read_text())["fit"]
        assert fit["model"] == "A/x" and fit["coefficient"] > 0

    def test_tau_sweep_fits_quadratic(self, tmp_path):
        out = tmp_path / "tau"
        assert run("sweep", "--heisenberg1d", 3, 1, 2, "--delta", 0.1, "--n", 1000,
                   "--axis", "tau", "--values", 0.05, 0.1, 0.2, "--out", out) == 0
        fit = json.loads((out / "fit.json").read_text())["fit"]
        assert fit["model"] == "a*x^2"

    def test_tau_sweep_with_trotter_backend_needs_no_tau(self, tmp_path):
        assert run("sweep", "--heisenberg1d", 2, 1, 2, "--delta", 0.2, "--n", 64, "--backend", "trotter",
                   "--axis", "tau", "--values", 0.1, 0.2, "--out", tmp_path) == 0

    def test_single_value(self, tmp_path):
        assert run("sweep", *FIXTURE, "--axis", "shots", "--values", 10, "--seed", 1, "--out", tmp_path) == 0
        assert len((tmp_path / "summary.csv").read_text().splitlines()) == 2
        load_peaks(tmp_path / "shots_10.0" / "peaks.json")

    def test_empty_values(self, tmp_path):
        assert run("sweep", *FIXTURE, "--axis", "tau", "--out", tmp_path / "e") == 2


class TestPlanning:
    def test_plan_anchors(self, capsys):
        assert run("plan", "--epsilon", 0.0016, "--e0", 2.1664, "--rel-err", 0.001) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["t_max"] == pytest.approx(3926.99, abs=0.01)
        assert round(doc["delta_max"], 2) == 1.45
        assert doc["n_relative"] == 2000

    def test_resources(self, capsys, tmp_path):
        out = tmp_path / "r.json"
        assert run("resources", "--L", 4, "--epsilon", 0.0016, "--overlap", 1, "--pauli-terms", 184,
                   "--e0", 2.1664, "--gamma", 0.01, "--shot-budget", 10000, "--out", out) == 0
        doc = json.loads(out.read_text())
        assert doc["noise_gate_budget"] == 916 and doc["total_samples"] == 64

    def test_missing_inputs(self):
        assert run("plan") == 2
        assert run("resources", "--L", 4) == 2
        assert run("plan", "--rel-err", 1) == 2
