import math
from pathlib import Path

import numpy as np
import pytest

from mrfl import cli, harness
from mrfl.harness import ExperimentConfig, load_config, modem_bench, parse_config_file
from mrfl.modem import build_constellation, estimate_error_rates, union_bound_ser

DATA_DIR = Path(__file__).resolve().parent.parent / "data" / "mnist"

needs_mnist = pytest.mark.skipif(
    not DATA_DIR.exists(), reason="MNIST files missing; run scripts/fetch_mnist.py"
)


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert cfg.scenarios == ("high", "mixed", "low")
        assert cfg.seeds == tuple(range(10))

    def test_file_parsing(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text(
            "# comment\n"
            "scenarios = high low\n"
            "seeds = 3 4\n"
            "mode = physical\n"
            "theta = 0.19634954\n"
            "rounds = 2\n"
        )
        cfg = load_config(path, out="x.csv")
        assert cfg.scenarios == ("high", "low")
        assert cfg.seeds == (3, 4)
        assert cfg.mode == "physical"
        assert cfg.rounds == 2
        assert cfg.out == "x.csv"

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("warp_factor = 9\n")
        with pytest.raises(ValueError):
            parse_config_file(path)

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("just words\n")
        with pytest.raises(ValueError):
            parse_config_file(path)

    def test_invalid_values_rejected(self):
        with pytest.raises(ValueError):
            ExperimentConfig(seeds=())
        with pytest.raises(ValueError):
            ExperimentConfig(scenarios=("ultra",))
        with pytest.raises(ValueError):
            ExperimentConfig(mode="quantum")


class TestModemBench:
    def test_single_point_csv(self, tmp_path):
        out = tmp_path / "bench.csv"
        rows = modem_bench([math.pi / 8], [10.0], 10_000, seed=0, out=out)
        assert len(rows) == 1
        lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert lines[0] == harness.BENCH_COLUMNS
        assert len(lines) == 2

    def test_grid_deterministic(self, tmp_path):
        args = ([math.pi / 16, math.pi / 8], [6.0, 10.0], 10_000, 5)
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        modem_bench(*args, out=a)
        modem_bench(*args, out=b)
        assert a.read_bytes() == b.read_bytes()

    def test_uniform_theta_row_matches_oracle(self):
        rows = modem_bench([math.pi / 8], [10.0], 1_000_000, seed=0)
        _, _, report = rows[0]
        oracle = union_bound_ser(build_constellation(math.pi / 8), 10.0)
        assert abs(report.ser_full - oracle) <= report.confidence_halfwidth


@needs_mnist
class TestRun:
    def small_config(self, tmp_path, **kw):
        defaults = dict(
            scenarios=("high",),
            seeds=(0,),
            rounds=2,
            data_dir=str(DATA_DIR),
            out=str(tmp_path / "metrics.csv"),
        )
        defaults.update(kw)
        return ExperimentConfig(**defaults)

    def test_row_count_and_summary(self, tmp_path):
        cfg = self.small_config(tmp_path)
        summary = harness.run(cfg)
        text = Path(cfg.out).read_text()
        rows = [l for l in text.splitlines() if not l.startswith("#")]
        assert rows[0] == harness.METRIC_COLUMNS
        assert len(rows) == 1 + 2  # header + rounds x seeds x scenarios
        assert "# final_accuracy scenario=high" in text
        assert set(summary) == {"high"}

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = self.small_config(tmp_path)
        harness.run(cfg)
        first = Path(cfg.out).read_bytes()
        harness.run(cfg)
        assert Path(cfg.out).read_bytes() == first

    def test_workers_do_not_change_output(self, tmp_path):
        cfg = self.small_config(tmp_path, seeds=(0, 1))
        harness.run(cfg)
        serial = Path(cfg.out).read_bytes()
        harness.run(self.small_config(tmp_path, seeds=(0, 1), workers=2))
        assert Path(cfg.out).read_bytes() == serial

    def test_failure_removes_partial_csv(self, tmp_path):
        cfg = self.small_config(tmp_path, data_dir=str(tmp_path / "nope"))
        with pytest.raises(FileNotFoundError):
            harness.run(cfg)
        assert not Path(cfg.out).exists()


class TestCli:
    def test_modem_bench_subcommand(self, tmp_path, capsys):
        out = tmp_path / "bench.csv"
        rc = cli.main(
            ["modem-bench", "--theta", "0.3926990817", "--snr-db", "10",
             "--symbols", "10000", "--seed", "1", "--out", str(out)]
        )
        assert rc == 0
        assert out.exists()
        assert "1 rows" in capsys.readouterr().out

    @needs_mnist
    def test_run_experiment_subcommand(self, tmp_path, capsys):
        out = tmp_path / "metrics.csv"
        rc = cli.main(
            ["run-experiment", "--scenario", "high", "--seeds", "1",
             "--rounds", "2", "--data-dir", str(DATA_DIR), "--out", str(out)]
        )
        assert rc == 0
        rows = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert len(rows) == 1 + 2
        assert "high: final accuracy" in capsys.readouterr().out

    def test_bad_config_exits_nonzero(self, tmp_path, capsys):
        missing = tmp_path / "missing.cfg"
        rc = cli.main(["run-experiment", "--config", str(missing)])
        assert rc == 1
        assert "error:" in capsys.readouterr().err
