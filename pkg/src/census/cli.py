"""Command-line entry points.

``census run`` executes one scenario config file, ``census sweep`` runs a
named preset, and ``census summarize`` aggregates a records CSV.  A batch
that merely contains failed rows still exits 0; only config or IO problems
exit nonzero.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .experiments import (
    emit_csv,
    load_config,
    load_records,
    run_batch,
    run_one,
    summarize,
)
from .presets import PRESETS, run_preset


def _cmd_run(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, base_seed=args.seed)
    if args.trace:
        config.validate()
        trace = lambda line: print(line, file=sys.stderr)
        records = [run_one(config, config.base_seed + i, trace=trace)
                   for i in range(config.repetitions)]
    else:
        records = run_batch(config)
    out = args.out or config.out_path
    if out:
        emit_csv(records, out)
        failed = sum(1 for r in records if r.estimate is None)
        print(f"wrote {len(records)} records to {out}" +
              (f" ({failed} failed)" if failed else ""))
    else:
        for r in records:
            print(r)
    return 0


def _cmd_sweep(args) -> int:
    records_path, summary_path = run_preset(args.preset, args.out_dir)
    print(f"wrote {records_path} and {summary_path}")
    return 0


def _cmd_summarize(args) -> int:
    records = load_records(args.infile)
    stats = summarize(records, label=args.label)
    emit_csv([stats], args.out, kind="summary")
    print(f"wrote summary of {len(records)} records to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="census",
                                     description="size-estimation experiments for "
                                                 "master/slave ad hoc networks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario config")
    p_run.add_argument("--config", required=True, help="path to a key = value scenario file")
    p_run.add_argument("--seed", type=int, default=None, help="override base_seed")
    p_run.add_argument("--out", default=None, help="records CSV path")
    p_run.add_argument("--trace", action="store_true", help="print event trace to stderr")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a named preset sweep")
    p_sweep.add_argument("--preset", required=True, choices=sorted(PRESETS))
    p_sweep.add_argument("--out-dir", default=".", help="directory for the CSV outputs")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_sum = sub.add_parser("summarize", help="aggregate a records CSV")
    p_sum.add_argument("--in", dest="infile", required=True)
    p_sum.add_argument("--out", required=True)
    p_sum.add_argument("--label", default="")
    p_sum.set_defaults(func=_cmd_summarize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"census: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
