"""Command line: ``lpembed <experiment> [flags]`` plus ``gen`` and ``info``.

Settings are layered: per-experiment defaults, then ``--config``, then
``--set key=value`` overrides, then the dedicated flags. The exit status is 0
iff every check of the run passes.
"""

import argparse
import logging
import os
import sys
import time

from .. import __version__, operators
from ..errors import DomainError, OperatorFormatError
from .config import EXPERIMENTS, default_config, parse_config, parse_value
from .experiments import run_experiment
from .report import write_result

log = logging.getLogger("lpembed")


def _common(parser):
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--threads", type=int, help="worker threads for cells and builds")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
    parser.add_argument("-q", "--quiet", action="store_true", help="print failures only")


def _decoder_flags(parser):
    g = parser.add_argument_group("decoder")
    g.add_argument("--max-iter", type=int)
    g.add_argument("--eps0", type=float)
    g.add_argument("--eps-decay", type=float)
    g.add_argument("--feas-tol", type=float)
    g.add_argument("--sparsity-hint", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="lpembed", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        _common(p)
        if name == "phase":
            _decoder_flags(p)

    gen = sub.add_parser("gen", help="build an operator and save it")
    gen.add_argument("kind", choices=("S", "T", "IdP2", "W"))
    gen.add_argument("-o", "--output", required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--eta", type=float, default=0.25)
    gen.add_argument("--dim", type=int, help="rows of T (default ceil(eta*n))")
    gen.add_argument("--p", type=float, default=1.5)
    gen.add_argument("--r", type=float, default=1.0)
    gen.add_argument("--J", type=int)
    gen.add_argument("--m", type=int, default=1)
    gen.add_argument("--c-prime", type=float, default=1.0)
    gen.add_argument("--trials", type=int, default=10_000, help="normalization trials for T")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--threads", type=int, default=1)
    gen.add_argument("--header-only", action="store_true",
                     help="omit the payload; loading regenerates it")

    info = sub.add_parser("info", help="print operator metadata")
    info.add_argument("path")
    return parser


def resolve_config(args):
    cfg = default_config(args.command)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = parse_config(fh.read(), cfg)
        if cfg.experiment != args.command:
            raise DomainError(f"config is for {cfg.experiment!r}, not {args.command!r}")
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise DomainError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = (u.strip() for u in item.split("=", 1))
        overrides[key] = parse_value(key, value)
    cfg = cfg.with_overrides(**overrides)
    flags = {"seed": args.seed, "output_dir": args.out, "threads": args.threads}
    for key in ("max_iter", "eps0", "eps_decay", "feas_tol", "sparsity_hint"):
        flags[key] = getattr(args, key, None)
    return cfg.with_overrides(**flags)


def _run(args):
    cfg = resolve_config(args)
    t0 = time.perf_counter()
    result = run_experiment(cfg)
    elapsed = time.perf_counter() - t0
    write_result(result, cfg, cfg.output_dir, elapsed, __version__)
    for name, ok in result.checks.items():
        if not ok or not args.quiet:
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
    print(f"{result.experiment}: {'all checks passed' if result.passed else 'FAILED'}"
          f" ({elapsed:.1f} s, output in {cfg.output_dir})")
    return 0 if result.passed else 1


def _gen(args):
    if args.kind == "S":
        op = operators.build_S(args.n, args.eta, args.p, args.J, args.seed, args.threads)
    elif args.kind == "T":
        dim = args.dim or operators.random_rows(args.eta, args.n)
        op = operators.build_T(args.n, dim, args.p, args.r, args.J, args.trials, args.seed,
                               args.threads)
    elif args.kind == "IdP2":
        op = operators.build_id_p2(args.n, args.m, args.p, args.r)
    else:
        op = operators.build_W(args.n, args.eta, args.p, args.r, args.J, args.c_prime,
                               args.seed, args.threads)
    operators.save_operator(op, args.output, include_matrix=not args.header_only)
    print(f"wrote {op.kind} operator {op.rows}x{op.n} to {args.output}")
    return 0


def _info(args):
    op = operators.load_operator(args.path)
    for key, value in operators.header_fields(op).items():
        print(f"{key} = {value}")
    print(f"file_bytes = {os.path.getsize(args.path)}")
    return 0


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            return _gen(args)
        if args.command == "info":
            return _info(args)
        return _run(args)
    except (DomainError, OperatorFormatError, OSError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
