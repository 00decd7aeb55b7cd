"""Benchmark and experiment harness.

Subcommands::

    bpsketch [--seed S] [--format {json,csv}] [--out PATH] track-error ...
    bpsketch [...global flags] heaviness ...
    bpsketch [...global flags] compare ...
    bpsketch [...global flags] run (--gen n,alpha,kind | --file PATH) ...

Every command prints a short human summary to stdout and emits the
machine-readable report (JSON or CSV) to ``--out`` when given, else
below the summary.  Reports are byte-identical across runs for a fixed
(config, seed) apart from the timing fields listed in
``bpsketch.experiments.TIMING_FIELDS``.

Exit codes: 0 success, 2 configuration error, 3 I/O error.
"""

import argparse
import sys

from .experiments import ExperimentReport, cmd_compare, cmd_heaviness, cmd_run, cmd_track_error
from .streams import KINDS, StreamFormatError, StreamSpec, gen_stream, stream_from_file

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _str_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _add_global_flags(parser: argparse.ArgumentParser, top_level: bool) -> None:
    # defaults live on the top-level parser; subcommands use SUPPRESS so a
    # flag given after the subcommand overrides, and an absent one does not
    # clobber the top-level value
    d = {} if top_level else {"default": argparse.SUPPRESS}
    parser.add_argument("--seed", type=int, help="master seed (decimal, 64-bit)", **({"default": 0} if top_level else d))
    parser.add_argument("--format", choices=("json", "csv"), help="report format", **({"default": "json"} if top_level else d))
    parser.add_argument("--out", help="write the report to this path", **({"default": None} if top_level else d))
    parser.add_argument("--workers", type=int, help="thread pool size for trials", **({"default": None} if top_level else d))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bpsketch",
        description="streaming l2 heavy-hitters sketches: experiments and single runs",
    )
    _add_global_flags(parser, top_level=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track-error", help="tracking-error grid over (buckets, rows)")
    _add_global_flags(p, top_level=False)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--kind", choices=KINDS, default="random")
    p.add_argument("--rows-list", type=_int_list, default=[1, 2, 4, 8, 16])
    p.add_argument("--buckets-list", type=_int_list, default=[1, 10, 100, 1000])
    p.add_argument("--trials", type=int, default=10)

    p = sub.add_parser("heaviness", help="success-rate sweep over alpha and stream kind")
    _add_global_flags(p, top_level=False)
    p.add_argument("--n", type=int, default=1_000_000)
    p.add_argument("--alphas", type=_float_list, default=[1, 2, 4, 8, 16, 32, 64])
    p.add_argument("--kinds", type=_str_list, default=list(KINDS))
    p.add_argument("--trials", type=int, default=100)

    p = sub.add_parser("compare", help="update rate and state size vs the baseline")
    _add_global_flags(p, top_level=False)
    p.add_argument("--n-list", type=_int_list, default=[100_000, 1_000_000])
    p.add_argument("--alpha", type=float, default=64.0)
    p.add_argument("--trials", type=int, default=3)

    p = sub.add_parser("run", help="run the heavy-hitters sketch over one stream")
    _add_global_flags(p, top_level=False)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--gen", default=None, metavar="N,ALPHA,KIND", help="generate a stream")
    src.add_argument("--file", default=None, help="replay a stream file")
    p.add_argument("--text", action="store_true", help="stream file is one decimal id per line")
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--mode", choices=("standard", "fast"), default="standard")
    p.add_argument("--oracle", action="store_true", help="compare against exact frequencies")
    p.add_argument("--save-state", default=None, help="write the sketch snapshot here")
    p.add_argument("--load-state", default=None, help="resume from a sketch snapshot")
    return parser


def _summarize(report: ExperimentReport) -> str:
    lines = [f"[{report.experiment}] config: " + ", ".join(f"{k}={v}" for k, v in report.config.items())]
    for key, value in report.aggregates.items():
        lines.append(f"  {key}: {value}")
    lines.append(f"  rows: {len(report.table)}")
    return "\n".join(lines)


def _emit(report: ExperimentReport, fmt: str, out_path: str | None) -> None:
    rendered = report.render(fmt)
    print(_summarize(report))
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(rendered)
        print(f"  report written to {out_path}")
    else:
        print(rendered, end="")


def _parse_gen(text: str) -> StreamSpec:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError("--gen expects N,ALPHA,KIND")
    return StreamSpec(n=int(parts[0]), alpha=float(parts[1]), kind=parts[2].strip(), seed=0)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "track-error":
            report = cmd_track_error(
                args.n,
                args.alpha,
                args.kind,
                args.rows_list,
                args.buckets_list,
                args.trials,
                args.seed,
                workers=args.workers,
            )
        elif args.command == "heaviness":
            report = cmd_heaviness(
                args.n, args.alphas, args.kinds, args.trials, args.seed, workers=args.workers
            )
        elif args.command == "compare":
            report = cmd_compare(args.n_list, args.alpha, args.trials, args.seed)
        elif args.command == "run":
            if args.gen is not None:
                spec = _parse_gen(args.gen)
                spec = StreamSpec(n=spec.n, alpha=spec.alpha, kind=spec.kind, seed=args.seed)
                items = gen_stream(spec)
            else:
                items = stream_from_file(args.file, text=args.text)
            sketch = None
            if args.load_state:
                from .bptree import BpTree

                with open(args.load_state, "rb") as fh:
                    sketch = BpTree.from_bytes(fh.read())
            report, sketch = cmd_run(
                items,
                args.epsilon,
                args.delta,
                args.mode,
                args.seed,
                with_oracle=args.oracle,
                sketch=sketch,
            )
            if args.save_state:
                with open(args.save_state, "wb") as fh:
                    fh.write(sketch.to_bytes())
        else:  # pragma: no cover - argparse enforces the choices
            parser.error(f"unknown command {args.command}")
        _emit(report, args.format, args.out)
    except StreamFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
