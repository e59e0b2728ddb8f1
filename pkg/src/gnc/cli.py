"""``gnc-bench``: run experiment batteries and write CSV results.

Data goes to ``--out`` (or ``$GNC_OUTPUT_DIR/<experiment>.csv`` when that
variable is set, else standard output); progress and the summary table go to
standard error.  Exit status: 0 on success, 2 on a usage error, 3 when any
trial failed its integrity checks.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__
from .bench import (
    EXPERIMENTS,
    ExperimentConfig,
    aggregate,
    log,
    run_experiment,
    summary_json,
    summary_table,
    write_csv,
)
from .codes import CodeKind, ParameterError
from .netsim import TopologyError

OUTPUT_ENV = "GNC_OUTPUT_DIR"


def _int_list(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gnc-bench", description=__doc__.splitlines()[0])
    p.add_argument("--experiment", required=True, choices=EXPERIMENTS)
    p.add_argument("--M", type=_int_list, help="source packets (comma list for sweeps)")
    p.add_argument("--B", type=int, help="base part size")
    p.add_argument("--G", type=_int_list, help="generation size (comma list for sweeps)")
    p.add_argument("--S", type=int, help="precode parity packets (0 = none)")
    p.add_argument("--field", type=int, choices=(2, 256))
    p.add_argument("--pe", type=float, help="link erasure probability")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--K", type=int, help="payload symbols per packet")
    p.add_argument("--out", help="CSV output path ('-' for stdout)")
    p.add_argument("--json", dest="json_out", help="also write a JSON summary here")
    p.add_argument("--topology", help="'butterfly', 'p2p' or a topology file")
    p.add_argument("--scheduler", choices=("random", "least"))
    p.add_argument("--decoder", choices=("gbg", "naive", "oa"))
    p.add_argument("--code", choices=[k.value for k in CodeKind],
                   help="code family for --experiment custom")
    p.add_argument("--quiet", action="store_true", help="no progress or summary on stderr")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def _output_path(args) -> str | None:
    if args.out:
        return None if args.out == "-" else args.out
    d = os.environ.get(OUTPUT_ENV)
    if d:
        os.makedirs(d, exist_ok=True)
        return os.path.join(d, f"{args.experiment}.csv")
    return None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = ExperimentConfig(
        experiment=args.experiment, M=args.M, B=args.B, G=args.G, S=args.S, field=args.field,
        pe=args.pe, trials=args.trials, seed=args.seed, workers=args.workers, K=args.K,
        topology=args.topology, scheduler=args.scheduler, decoder=args.decoder, code=args.code,
    )
    progress = None if args.quiet else log
    try:
        result = run_experiment(cfg, progress)
    except (ParameterError, TopologyError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"gnc-bench: error: {exc}", file=sys.stderr)
        return 2

    path = _output_path(args)
    if path is None:
        try:
            write_csv(result, sys.stdout)
            sys.stdout.flush()
        except BrokenPipeError:  # e.g. piped into head
            os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
            return 0
    else:
        with open(path, "w", newline="") as fh:
            write_csv(result, fh)
        if not args.quiet:
            log(f"wrote {len(result.rows)} rows to {path}")
    if args.json_out:
        with open(args.json_out, "w") as fh:
            fh.write(summary_json(cfg, result) + "\n")
    if not args.quiet:
        log(summary_table(aggregate(result)))
    if result.failures:
        for f in result.failures:
            print(f"integrity failure: {f}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
