"""Command-line front end: ``tldram-sim <subcommand> ...``.

Exit status is 0 on success, 1 for configuration or workload errors (bad
arguments included) and 2 when the simulator trips an internal invariant.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .config import load
from .errors import ConfigError, InternalError, TLDRAMError, WorkloadError
from .experiments import compare, emit_tradeoff, sweep_csv, sweep_near_size
from .policies import write_profile
from .sim import row_profile, run


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of integers, got {text!r}") from None


def _emit(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as e:
        raise ConfigError(f"cannot write {out}: {e}") from None


def cmd_run(args):
    cfg = load(args.config)
    if args.trace:
        cfg = cfg.replace(**{"trace.source": "file", "trace.path": args.trace})
    _emit(run(cfg).to_csv(), args.out)


def cmd_sweep(args):
    cfg = load(args.config)
    points = sweep_near_size(cfg, _int_list(args.near_sizes), jobs=args.jobs)
    _emit(sweep_csv(points), args.out)


def cmd_compare(args):
    _emit(compare(load(args.a), load(args.b)).to_csv(), args.out)


def cmd_tradeoff(args):
    _emit(emit_tradeoff(_int_list(args.cells)), args.out)


def cmd_profile(args):
    counts = row_profile(load(args.config))
    try:
        with open(args.out, "w") as fh:
            write_profile(counts, fh)
    except OSError as e:
        raise ConfigError(f"cannot write {args.out}: {e}") from None


def build_parser():
    p = _Parser(prog="tldram-sim", description="Tiered-latency DRAM simulator.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="simulate one configuration")
    r.add_argument("--config", required=True)
    r.add_argument("--trace", help="trace file(s), comma separated, one per core")
    r.add_argument("--out")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="near-segment size sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--near-sizes", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("compare", help="paired run; --b is the baseline")
    c.add_argument("--a", required=True)
    c.add_argument("--b", required=True)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_compare)

    t = sub.add_parser("tradeoff", help="latency, die size and power per bitline length")
    t.add_argument("--cells", required=True)
    t.add_argument("--out")
    t.set_defaults(func=cmd_tradeoff)

    f = sub.add_parser("profile", help="per-row access counts of a config's trace")
    f.add_argument("--config", required=True)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_profile)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except (ConfigError, WorkloadError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except InternalError as e:
        print(f"internal error: {e}", file=sys.stderr)
        return 2
    except TLDRAMError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
