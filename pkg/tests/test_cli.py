"""Tests for the command-line front end: exit codes, artifacts, messages."""

import numpy as np
import pytest

from jedmimo.cli import main
from jedmimo.report import CSV_HEADER, read_csv
from jedmimo.unfolded import load_params

_TINY_SWEEP = """\
name = tiny
algorithm = jed_admm
n_rx = 4
n_tx = 4
snr_grid_db = 0, 8
t_data = 16
iterations = 2
trials = 6
seed = 1
"""

_TINY_TRAIN = """\
name = utrain
algorithm = jed_u_admm
n_rx = 4
n_tx = 4
snr_grid_db = 10
t_data = 16
iterations = 2
train_epochs = 3
train_batch = 4
trials = 4
seed = 1
"""


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


# ============================================================================
# SWEEP
# ============================================================================


class TestSweepCommand:
    def test_writes_csv_and_prints_summary(self, tmp_path, capsys):
        cfg = _write(tmp_path, _TINY_SWEEP)
        rc = main(["sweep", "--config", cfg, "--out", str(tmp_path / "out")])
        assert rc == 0
        out = capsys.readouterr().out
        assert "tiny: jed_admm 4x4" in out and "wrote" in out
        csv_path = tmp_path / "out" / "tiny.csv"
        rows = read_csv(csv_path)
        assert [r["snr_db"] for r in rows] == [0.0, 8.0]
        assert all(r["bits_total"] == 2 * 4 * 16 * 6 for r in rows)

    def test_reruns_are_byte_identical(self, tmp_path):
        cfg = _write(tmp_path, _TINY_SWEEP)
        main(["sweep", "--config", cfg, "--out", str(tmp_path / "a")])
        main(["sweep", "--config", cfg, "--out", str(tmp_path / "b"),
              "--parallelism", "2"])
        a = (tmp_path / "a" / "tiny.csv").read_bytes()
        b = (tmp_path / "b" / "tiny.csv").read_bytes()
        assert a == b

    def test_format_both_adds_the_plot(self, tmp_path):
        cfg = _write(tmp_path, _TINY_SWEEP)
        rc = main(["sweep", "--config", cfg, "--out", str(tmp_path / "out"),
                   "--format", "both"])
        assert rc == 0
        assert (tmp_path / "out" / "tiny.csv").exists()
        svg = (tmp_path / "out" / "tiny.svg").read_text()
        assert svg.startswith("<svg") and "tiny" in svg

    def test_trials_and_seed_overrides_change_the_rows(self, tmp_path):
        cfg = _write(tmp_path, _TINY_SWEEP)
        main(["sweep", "--config", cfg, "--out", str(tmp_path / "a"),
              "--trials", "3", "--seed", "9"])
        rows = read_csv(tmp_path / "a" / "tiny.csv")
        assert all(r["bits_total"] == 2 * 4 * 16 * 3 for r in rows)
        assert all(r["seed"] == 9 for r in rows)

    def test_missing_config_exits_2_naming_the_path(self, tmp_path, capsys):
        rc = main(["sweep", "--config", str(tmp_path / "absent.cfg")])
        assert rc == 2
        assert "absent.cfg" in capsys.readouterr().err

    def test_malformed_config_exits_2_naming_the_field(self, tmp_path, capsys):
        cfg = _write(tmp_path, "name = b\nalgorithm = zf\nn_rx = four\n",
                     name="bad.cfg")
        rc = main(["sweep", "--config", cfg])
        assert rc == 2
        err = capsys.readouterr().err
        assert "bad.cfg:3" in err and "n_rx" in err

    def test_plot_of_an_error_free_sweep_exits_1(self, tmp_path, capsys):
        noiseless = _TINY_SWEEP.replace("snr_grid_db = 0, 8",
                                        "snr_grid_db = inf")
        noiseless = noiseless.replace("algorithm = jed_admm", "algorithm = zf")
        cfg = _write(tmp_path, noiseless)
        rc = main(["sweep", "--config", cfg, "--out", str(tmp_path / "out"),
                   "--format", "svg"])
        assert rc == 1
        assert "positive" in capsys.readouterr().err


# ============================================================================
# PRESET
# ============================================================================


class TestPresetCommand:
    def test_runs_every_config_into_one_csv(self, tmp_path):
        rc = main(["preset", "exp2", "--trials", "1", "--seed", "7",
                   "--out", str(tmp_path / "a")])
        assert rc == 0
        rows = read_csv(tmp_path / "a" / "exp2.csv")
        experiments = {r["experiment"] for r in rows}
        assert len(experiments) == 12  # every exp2 config appears
        assert all(r["experiment"].startswith("exp2-") for r in rows)
        # determinism across runs, including through worker processes
        main(["preset", "exp2", "--trials", "1", "--seed", "7",
              "--out", str(tmp_path / "b"), "--parallelism", "2"])
        assert (tmp_path / "a" / "exp2.csv").read_bytes() == \
               (tmp_path / "b" / "exp2.csv").read_bytes()

    def test_unknown_preset_is_a_usage_error(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["preset", "exp99"])
        assert excinfo.value.code == 2


# ============================================================================
# TRAIN
# ============================================================================


class TestTrainCommand:
    def test_writes_loadable_params_per_snr_point(self, tmp_path, capsys):
        cfg = _write(tmp_path, _TINY_TRAIN)
        out = tmp_path / "params"
        rc = main(["train", "--config", cfg, "--out", str(out)])
        assert rc == 0
        assert "loss" in capsys.readouterr().out
        params, meta = load_params(out / "utrain-snr10.params")
        assert params.layers == 2 and params.mode == "shared"
        assert meta.n_rx == 4 and meta.snr_db == 10.0

    def test_saved_params_drive_a_sweep(self, tmp_path):
        cfg = _write(tmp_path, _TINY_TRAIN)
        out = tmp_path / "params"
        main(["train", "--config", cfg, "--out", str(out)])
        sweep_cfg = _write(
            tmp_path,
            _TINY_TRAIN + f"params_path = {out / 'utrain-snr10.params'}\n",
            name="use.cfg")
        rc = main(["sweep", "--config", sweep_cfg, "--out", str(tmp_path / "s")])
        assert rc == 0
        rows = read_csv(tmp_path / "s" / "utrain.csv")
        assert rows[0]["bits_total"] == 2 * 4 * 16 * 4

    def test_layer_mismatch_with_saved_params_exits_2(self, tmp_path, capsys):
        cfg = _write(tmp_path, _TINY_TRAIN)
        out = tmp_path / "params"
        main(["train", "--config", cfg, "--out", str(out)])
        mismatched = _TINY_TRAIN.replace("iterations = 2", "iterations = 3")
        sweep_cfg = _write(
            tmp_path,
            mismatched + f"params_path = {out / 'utrain-snr10.params'}\n",
            name="mismatch.cfg")
        rc = main(["sweep", "--config", sweep_cfg])
        assert rc == 2
        err = capsys.readouterr().err
        assert "iterations" in err and "2 layers" in err

    def test_train_requires_the_unfolded_algorithm(self, tmp_path, capsys):
        cfg = _write(tmp_path, _TINY_SWEEP)
        rc = main(["train", "--config", cfg, "--out", str(tmp_path)])
        assert rc == 2
        assert "jed_u_admm" in capsys.readouterr().err


# ============================================================================
# FLOPS AND SELFTEST
# ============================================================================


class TestFlopsCommand:
    def test_prints_the_reference_geometry_budget(self, capsys):
        rc = main(["flops", "--algo", "jed_admm", "--n", "16", "--k", "16",
                   "--tt", "16", "--td", "512", "--l", "1"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "16,384" in out       # initialization
        assert "561,152" in out      # per iteration
        assert "577,536" in out      # total at one iteration

    def test_total_scales_with_iterations(self, capsys):
        main(["flops", "--algo", "jed_am", "--n", "16", "--k", "16",
              "--tt", "16", "--td", "512", "--l", "10"])
        out = capsys.readouterr().out
        assert f"{16384 + 10 * 430080:,}" in out


class TestSelftestCommand:
    def test_small_run_passes_every_suite(self, capsys):
        rc = main(["selftest", "--cases", "40"])
        assert rc == 0
        out = capsys.readouterr().out
        lines = [l for l in out.splitlines() if "PASS" in l or "FAIL" in l]
        assert len(lines) == 6
        assert all("PASS" in l for l in lines)
