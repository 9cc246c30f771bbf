"""Experiment orchestration: multi-seed FL runs and modem benchmarks to CSV.

CSV conventions: comment lines start with ``#`` and echo the effective
configuration; metric rows are ordered (scenario, seed, round) regardless
of worker parallelism, so re-running an identical config reproduces the
file byte for byte.  A summary block (per-scenario mean/min/max final
accuracy) is appended as comments.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from . import dataio, flcore, modem
from .flcore import SCENARIOS, TrainConfig
from .quantizer import QuantizerSpec

DEFAULT_SEEDS = tuple(range(10))

METRIC_COLUMNS = "scenario,seed,round,accuracy,loss"
BENCH_COLUMNS = "theta,snr_db,n_symbols,ber_plane12,ber_plane3,ser_full,ci_halfwidth"


@dataclass(frozen=True)
class ExperimentConfig:
    scenarios: tuple = SCENARIOS
    seeds: tuple = DEFAULT_SEEDS
    mode: str = "ideal"
    theta: float = math.pi / 16
    snr_high_db: float = 20.0
    snr_low_db: float = 12.0
    decimals: int = 2
    learning_rate: float = 0.02
    batch_size: int = 32
    rounds: int = 60
    n_agents: int = 4
    samples_per_agent: int = 2500
    data_dir: str = "data/mnist"
    out: str = "metrics.csv"
    workers: int = 1

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("at least one seed is required")
        unknown = set(self.scenarios) - set(SCENARIOS)
        if unknown:
            raise ValueError(f"unknown scenarios {sorted(unknown)}")
        if self.mode not in ("ideal", "physical"):
            raise ValueError(f"mode must be 'ideal' or 'physical', got {self.mode!r}")

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            rounds=self.rounds,
            n_agents=self.n_agents,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            seed=seed,
        )


_INT_KEYS = {"decimals", "batch_size", "rounds", "n_agents", "samples_per_agent", "workers"}
_FLOAT_KEYS = {"theta", "snr_high_db", "snr_low_db", "learning_rate"}


def parse_config_file(path) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment; lists are space-separated."""
    known = {f.name for f in fields(ExperimentConfig)}
    out: dict = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        if key == "scenarios":
            out[key] = tuple(value.split())
        elif key == "seeds":
            out[key] = tuple(int(v) for v in value.split())
        elif key in _INT_KEYS:
            out[key] = int(value)
        elif key in _FLOAT_KEYS:
            out[key] = float(value)
        else:
            out[key] = value
    return out


def load_config(path=None, **overrides) -> ExperimentConfig:
    values = parse_config_file(path) if path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def _config_comments(config: ExperimentConfig) -> list:
    lines = []
    for f in fields(ExperimentConfig):
        if f.name == "workers":  # execution detail; must not affect the file
            continue
        value = getattr(config, f.name)
        if isinstance(value, tuple):
            value = " ".join(str(v) for v in value)
        lines.append(f"# {f.name} = {value}")
    return lines


def _run_one(config: ExperimentConfig, scenario: str, seed: int) -> list:
    train, test = dataio.load_mnist(config.data_dir)
    partitions = dataio.partition_agents(
        train, test, k=config.n_agents, per_agent=config.samples_per_agent, seed=seed
    )
    return flcore.run_fl(
        scenario,
        config.train_config(seed),
        partitions,
        mode=config.mode,
        spec=QuantizerSpec(decimals=config.decimals),
        theta=config.theta if config.mode == "physical" else None,
        snr_high_db=config.snr_high_db if config.mode == "physical" else None,
        snr_low_db=config.snr_low_db if config.mode == "physical" else None,
    )


def _run_one_job(args):
    return _run_one(*args)


def run(config: ExperimentConfig) -> dict:
    """Execute every (scenario, seed) run and write the metrics CSV.

    Returns {scenario: (mean, min, max) final accuracy}.  On any failure the
    partial output file is removed before the exception propagates.
    """
    jobs = [(config, sc, seed) for sc in config.scenarios for seed in config.seeds]
    try:
        if config.workers > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                results = list(pool.map(_run_one_job, jobs))
        else:
            results = [_run_one_job(job) for job in jobs]

        finals: dict = {sc: [] for sc in config.scenarios}
        lines = _config_comments(config)
        lines.append(METRIC_COLUMNS)
        for (_, scenario, seed), metrics in zip(jobs, results):
            for m in metrics:
                lines.append(
                    f"{m.scenario},{m.seed},{m.round_index},"
                    f"{m.accuracy:.6f},{m.loss:.6f}"
                )
            finals[scenario].append(metrics[-1].accuracy)

        summary = {}
        lines.append("# summary: final accuracy per scenario")
        for scenario in config.scenarios:
            accs = finals[scenario]
            summary[scenario] = (
                sum(accs) / len(accs),
                min(accs),
                max(accs),
            )
            mean, lo, hi = summary[scenario]
            lines.append(
                f"# final_accuracy scenario={scenario} "
                f"mean={mean:.6f} min={lo:.6f} max={hi:.6f}"
            )
        Path(config.out).write_text("\n".join(lines) + "\n")
        return summary
    except Exception:
        if os.path.exists(config.out):
            os.remove(config.out)
        raise


def modem_bench(thetas, snrs_db, n_symbols: int, seed: int, out=None) -> list:
    """Sweep estimate_error_rates over a (theta, snr) grid; optionally write CSV."""
    rows = []
    for theta in thetas:
        for snr_db in snrs_db:
            report = modem.estimate_error_rates(theta, snr_db, n_symbols, seed)
            rows.append((theta, snr_db, report))
    if out is not None:
        lines = [
            f"# thetas = {' '.join(repr(t) for t in thetas)}",
            f"# snrs_db = {' '.join(repr(s) for s in snrs_db)}",
            f"# n_symbols = {n_symbols}",
            f"# seed = {seed}",
            BENCH_COLUMNS,
        ]
        for theta, snr_db, r in rows:
            lines.append(
                f"{theta!r},{snr_db!r},{r.n_symbols},{r.ber_plane12:.8f},"
                f"{r.ber_plane3:.8f},{r.ser_full:.8f},{r.confidence_halfwidth:.8f}"
            )
        Path(out).write_text("\n".join(lines) + "\n")
    return rows
