"""Command-line experiment runner.

    fairstream run    --config cfg.json [--seed N] [--out DIR]
    fairstream sweep  --config cfg.json --T 1000,4000 --seeds 5 --b 0,0.125
                      [--jobs J] [--out DIR]
    fairstream verify --suite NAME

FAIRSTREAM_OUT overrides the config's output directory; --out overrides
both. Exit codes: 0 success, 1 suite failure, 2 config error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .harness import ConfigError, RunConfig, resolve_out_dir, run, sweep
from .suites import SUITES, run_suite


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairstream", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single seeded run")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None)

    p_sweep = sub.add_parser("sweep", help="seed fan-out over T and b")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--T", required=True, help="comma-separated horizons")
    p_sweep.add_argument("--seeds", type=int, required=True)
    p_sweep.add_argument("--b", default="0", help="comma-separated frontier exponents")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--out", default=None)

    p_verify = sub.add_parser("verify", help="run an invariant suite")
    p_verify.add_argument("--suite", required=True,
                          choices=sorted(SUITES) + ["all"])
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = RunConfig.from_json(args.config)
            if args.seed is not None:
                config = config.replace(seed=args.seed)
            result = run(config, resolve_out_dir(args.out, config))
            print(json.dumps(result.summary, sort_keys=True))
            return 0
        if args.command == "sweep":
            config = RunConfig.from_json(args.config)
            try:
                Ts = [int(v) for v in args.T.split(",") if v]
                bs = [float(v) for v in args.b.split(",") if v]
            except ValueError as exc:
                raise ConfigError(f"bad sweep list: {exc}") from exc
            frontier = sweep(
                config, Ts, args.seeds, bs,
                out_dir=resolve_out_dir(args.out, config), jobs=args.jobs,
            )
            print(json.dumps({"table": frontier["table"], "slopes": frontier["slopes"]},
                             sort_keys=True))
            return 0
        if args.command == "verify":
            report = run_suite(args.suite)
            print(json.dumps(report, sort_keys=True, indent=1))
            return 0 if report["passed"] else 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
