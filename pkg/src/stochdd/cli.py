"""Command-line entry points: run, sweep, oracle-check."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import runner


def _parse_overrides(extra: list[str]) -> dict[str, str]:
    """Turn trailing --key=value arguments into config overrides."""
    overrides: dict[str, str] = {}
    for arg in extra:
        if not arg.startswith("--") or "=" not in arg:
            raise SystemExit(f"unrecognized argument {arg!r} (expected --key=value)")
        key, value = arg[2:].split("=", 1)
        overrides[key.replace("-", "_")] = value
    return overrides


def _load(args, extra) -> runner.RunConfig:
    return runner.load_config(args.config, _parse_overrides(extra))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stochdd",
        description=(
            "Two-level domain decomposition solvers for stochastic PDEs. "
            "Any config key can be overridden with --key=value."
        ),
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="one solver run with reports and field files")
    p_run.add_argument("--config", default=None, help="flat key = value config file")
    p_run.add_argument("--outdir", default="out", help="output directory")

    p_sweep = sub.add_parser("sweep", help="one of the named experiment sweeps")
    p_sweep.add_argument("--preset", required=True)
    p_sweep.add_argument("--config", default=None)
    p_sweep.add_argument("--outdir", default="out")

    p_check = sub.add_parser("oracle-check", help="compare a run against the dense direct solve")
    p_check.add_argument("--config", default=None)
    p_check.add_argument("--threshold", type=float, default=1e-6)

    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        if args.command == "run":
            config = _load(args, extra)
            result = runner.run_single(config, outdir=args.outdir)
            print(
                f"converged={result.report.converged} "
                f"iterations={result.report.iterations} "
                f"interface_dim={result.dims['interface_dim']} "
                f"coarse_dim={result.dims['coarse_dim']}"
            )
            print(f"results written to {args.outdir}")
            return 0 if result.report.converged else 2
        if args.command == "sweep":
            config = _load(args, extra)
            rows = runner.run_sweep(args.preset, config, outdir=args.outdir)
            failures = [r for r in rows if r["error"]]
            for row in rows:
                print(
                    f"{row['axis']}={row['value']}: iterations={row['iterations']} "
                    f"converged={row['converged']}"
                    + (f" error={row['error']}" if row["error"] else "")
                )
            print(f"sweep CSV and figure written to {args.outdir}")
            return 1 if failures else 0
        if args.command == "oracle-check":
            config = _load(args, extra)
            check = runner.oracle_check(config)
            print(json.dumps(check, indent=2))
            return 0 if check["relative_l2_error"] <= args.threshold else 1
    except runner.StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
