"""Command-line entry point: ``mrfl run-experiment`` and ``mrfl modem-bench``."""

from __future__ import annotations

import argparse
import sys

from . import harness


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mrfl",
        description="Multi-resolution model broadcast simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run-experiment", help="run the federated-learning experiment")
    run.add_argument("--config", help="flat key = value config file")
    run.add_argument("--scenario", nargs="+", choices=("high", "mixed", "low"),
                     help="scenarios to run (default: all three)")
    run.add_argument("--seeds", nargs="+", type=int, help="seeds (default: 0..9)")
    run.add_argument("--mode", choices=("ideal", "physical"))
    run.add_argument("--out", help="metrics CSV path")
    run.add_argument("--workers", type=int, help="parallel (scenario, seed) runs")
    run.add_argument("--data-dir", help="directory with the four MNIST IDX files")
    run.add_argument("--rounds", type=int)
    run.add_argument("--theta", type=float, help="constellation half-angle (physical mode)")
    run.add_argument("--snr-high-db", type=float)
    run.add_argument("--snr-low-db", type=float)

    bench = sub.add_parser("modem-bench", help="Monte Carlo bit-plane error rates")
    bench.add_argument("--theta", nargs="+", type=float, required=True,
                       help="constellation half-angle(s) in radians")
    bench.add_argument("--snr-db", nargs="+", type=float, required=True)
    bench.add_argument("--symbols", type=int, default=1_000_000)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", required=True, help="output CSV path")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run-experiment":
            config = harness.load_config(
                args.config,
                scenarios=tuple(args.scenario) if args.scenario else None,
                seeds=tuple(args.seeds) if args.seeds else None,
                mode=args.mode,
                out=args.out,
                workers=args.workers,
                data_dir=args.data_dir,
                rounds=args.rounds,
                theta=args.theta,
                snr_high_db=args.snr_high_db,
                snr_low_db=args.snr_low_db,
            )
            summary = harness.run(config)
            for scenario, (mean, lo, hi) in summary.items():
                print(f"{scenario}: final accuracy mean={mean:.4f} "
                      f"min={lo:.4f} max={hi:.4f}")
        else:
            harness.modem_bench(
                args.theta, args.snr_db, args.symbols, args.seed, out=args.out
            )
            print(f"wrote {len(args.theta) * len(args.snr_db)} rows to {args.out}")
        return 0
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
