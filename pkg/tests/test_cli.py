import json

import numpy as np
import pytest

from thermodyne.cli import main
from thermodyne.config import (ConfigError, ExperimentConfig,
                               parse_config_text)


def write_config(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


BASE = """
preset   = detector
kappa    = 1.0
nbar     = 1.0
rho0     = excited
dt       = 0.001
T        = 0.2
ensemble = 60
seed     = 424242
variant  = corrected
stride   = 50
"""


class TestConfigParsing:
    def test_defaults_round_trip(self):
        cfg = parse_config_text("")
        assert cfg.preset == "detector"
        assert cfg.seed == 12345
        assert cfg.hash() == ExperimentConfig().hash()

    def test_comments_and_blank_lines(self):
        cfg = parse_config_text("# header\n\nkappa = 2.0  # inline\n")
        assert cfg.kappa == 2.0

    def test_unknown_key_is_hard_error(self):
        with pytest.raises(ConfigError, match="unknown config key"):
            parse_config_text("kapa = 1.0\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("kappa = 1.0\nkappa = 2.0\n")

    def test_type_errors_are_reported(self):
        with pytest.raises(ConfigError, match="bad value"):
            parse_config_text("ensemble = soon\n")

    def test_range_validation(self):
        with pytest.raises(ConfigError):
            parse_config_text("nbar = -1.0\n")
        with pytest.raises(ConfigError):
            parse_config_text("variant = wrong\n")

    def test_beta_requires_positive_omega(self):
        with pytest.raises(ConfigError, match="omega"):
            parse_config_text("beta = 1.0\n")
        cfg = parse_config_text("beta = 0.693147\nomega = 1.0\n")
        assert cfg.build_model().nbar == pytest.approx(1.0, rel=1e-5)

    def test_custom_matrices(self):
        cfg = parse_config_text(
            'preset = custom\n'
            'L_json = [[[0,0],[1,0]],[[0,0],[0,0]]]\n'
            'H_json = [[[0,0],[0,0]],[[0,0],[0.5,0]]]\n')
        m = cfg.build_model()
        np.testing.assert_allclose(m.L, [[0, 1], [0, 0]])
        np.testing.assert_allclose(m.H, [[0, 0], [0, 0.5]])

    def test_hash_tracks_content(self):
        a = parse_config_text("kappa = 1.0\n")
        b = parse_config_text("kappa = 2.0\n")
        assert a.hash() != b.hash()


class TestCliErrors:
    def test_missing_config_file(self, capsys):
        assert main(["master", "--config", "/nonexistent.cfg"]) == 1
        assert "error" in capsys.readouterr().err

    def test_invalid_config_exits_1(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "bogus_key = 1\n")
        assert main(["master", "--config", cfg]) == 1


class TestMasterCommand:
    def test_decay_run(self, tmp_path):
        cfg = write_config(tmp_path, BASE.replace("nbar    = 1.0",
                                                  "nbar    = 0.0"))
        out = tmp_path / "out"
        assert main(["master", "--config", cfg, "--out", str(out)]) == 0
        lines = (out / "master.csv").read_text().strip().splitlines()
        header = lines[0].split(",")
        assert header[0] == "t" and "p_e" in header
        t, pe = [], []
        for row in lines[1:]:
            cells = row.split(",")
            t.append(float(cells[0]))
            pe.append(float(cells[-1]))
        np.testing.assert_allclose(pe, np.exp(-np.array(t)), atol=1e-8)
        manifest = json.loads((out / "manifest.json").read_text())
        assert all(manifest["criteria"].values())

    def test_silent_model_is_constant(self, tmp_path):
        cfg = write_config(
            tmp_path,
            'preset = custom\n'
            'L_json = [[[0,0],[0,0]],[[0,0],[0,0]]]\n'
            'H_json = [[[0,0],[0,0]],[[0,0],[0,0]]]\n'
            'rho0 = plus\nT = 0.1\n')
        out = tmp_path / "out"
        assert main(["master", "--config", cfg, "--out", str(out)]) == 0
        rows = (out / "master.csv").read_text().strip().splitlines()[1:]
        first = rows[0].split(",")[1:]
        last = rows[-1].split(",")[1:]
        assert first == last


class TestTrajectoriesCommand:
    def test_vacuum_variants_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, BASE.replace("nbar    = 1.0",
                                                  "nbar    = 0.0"))
        out = tmp_path / "out"
        code = main(["trajectories", "--config", cfg, "--out", str(out),
                     "--variant", "both"])
        assert code == 0
        paper = (out / "trajectories_paper.csv").read_bytes()
        corrected = (out / "trajectories_corrected.csv").read_bytes()
        assert paper == corrected

    def test_summary_contents(self, tmp_path):
        cfg = write_config(tmp_path, BASE)
        out = tmp_path / "out"
        assert main(["trajectories", "--config", cfg, "--out", str(out)]) == 0
        summary = json.loads(
            (out / "trajectories_corrected_summary.json").read_text())
        assert summary["n_traj"] == 60
        assert summary["master_deviation_sigma"] <= 3.0
        state = np.array(summary["mean_final_state"])
        assert state.shape == (2, 2, 2)


class TestCheckIdentitiesCommand:
    def test_thermal_run(self, tmp_path):
        cfg = write_config(tmp_path, BASE)
        out = tmp_path / "out"
        assert main(["check-identities", "--config", cfg,
                     "--out", str(out)]) == 0
        payload = json.loads((out / "identities.json").read_text())
        assert payload["ito_max_deviation"] <= 1e-11
        assert payload["published_form_max_deviation"] > 0.1
        assert payload["duality_residual"] <= 1e-11
        assert payload["unitality_residual"] <= 1e-12


class TestUnravelCommand:
    def test_smoke(self, tmp_path):
        cfg = write_config(tmp_path, BASE + "msamples = 16\n")
        out = tmp_path / "out"
        assert main(["unravel", "--config", cfg, "--out", str(out)]) == 0
        summary = json.loads((out / "unravel_summary.json").read_text())
        assert summary["msamples"] == 16
        assert summary["max_trace_distance"] < 0.5
        header = (out / "unravel.csv").read_text().splitlines()[0]
        assert header.startswith("t,trace_distance,unravel_rho_re_00")

    def test_requires_pure_initial_state(self, tmp_path, capsys):
        cfg = write_config(tmp_path, BASE + "rho0 = maxmixed\n")
        assert main(["unravel", "--config", cfg,
                     "--out", str(tmp_path / "o")]) == 1


class TestReproducibility:
    @staticmethod
    def _data_files(out):
        return sorted(p for p in out.iterdir() if p.name != "manifest.json")

    def test_identical_runs_are_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, BASE)
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["trajectories", "--config", cfg, "--out",
                         str(out), "--variant", "both"]) == 0
            outs.append(out)
        files_a = self._data_files(outs[0])
        files_b = self._data_files(outs[1])
        assert [p.name for p in files_a] == [p.name for p in files_b]
        for a, b in zip(files_a, files_b):
            assert a.read_bytes() == b.read_bytes(), a.name

    def test_seed_override_changes_outputs(self, tmp_path):
        cfg = write_config(tmp_path, BASE)
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        assert main(["trajectories", "--config", cfg, "--out", str(out1)]) == 0
        assert main(["trajectories", "--config", cfg, "--out", str(out2),
                     "--seed", "99"]) == 0
        a = (out1 / "trajectories_corrected.csv").read_bytes()
        b = (out2 / "trajectories_corrected.csv").read_bytes()
        assert a != b
