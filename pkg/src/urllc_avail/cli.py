"""Command-line entry point.

Verbs::

    urllc-avail sweep <config> [--out PATH]
    urllc-avail preset <name> [--seed N] [--out PATH]
    urllc-avail oracle [--tolerance-scale X] [--json]
    urllc-avail range <config>

Exit status: 0 ok, 1 configuration error, 2 numeric failure, 3 oracle failure.
The worker count comes from ``--workers`` or the ``URLLC_AVAIL_THREADS``
environment variable.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import checks, config, sweep
from .fbl import QuadratureError
from .mc import THREADS_ENV
from .modes import ModeId
from .optimizer import InfeasibleRangeError, available_range_fixed_split, maximize_range

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2
EXIT_ORACLE = 3

log = logging.getLogger("urllc_avail")


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors, not argparse's default status 2
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="urllc-avail",
        description="Packet loss, availability and available range of URLLC transmission modes.",
        epilog=f"Thread count for sweeps and sampling: --workers or ${THREADS_ENV}.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("sweep", help="run the sweep described by a config file")
    p.add_argument("config", type=Path)
    p.add_argument("--out", type=Path, default=None, help="CSV path (default: config 'output' "
                   "key, else stdout)")
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("preset", help="run a built-in figure preset")
    p.add_argument("name", choices=sorted(config.PRESETS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--show-config", action="store_true", help="print the preset config and exit")

    p = sub.add_parser("oracle", help="run the Monte Carlo / quadrature oracle suite")
    p.add_argument("--tolerance-scale", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true", help="JSON report instead of CSV")

    p = sub.add_parser("range", help="maximal available range for the first mode of a config")
    p.add_argument("config", type=Path)
    return parser


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)


def _cmd_sweep(args) -> int:
    cfg = config.load(args.config)
    text = sweep.run_sweep(cfg, out=args.out, workers=args.workers)
    _emit(text, args.out or (Path(cfg.output) if cfg.output else None))
    return EXIT_OK


def _cmd_preset(args) -> int:
    cfg = config.preset(args.name).replace(seed=args.seed)
    if args.show_config:
        sys.stdout.write(config.serialize(cfg))
        return EXIT_OK
    text = sweep.run_sweep(cfg, out=args.out, workers=args.workers)
    _emit(text, args.out)
    return EXIT_OK


def _cmd_oracle(args) -> int:
    if not args.tolerance_scale > 0:
        raise config.ConfigError("tolerance-scale", "must be positive")
    opts = checks.SuiteOptions(tolerance_scale=args.tolerance_scale, seed=args.seed)
    results = checks.run_oracle_suite(opts)
    sys.stdout.write(checks.format_report(results, as_json=args.json))
    failed = [r.check_id for r in results if not r.passed]
    if failed:
        log.error("oracle checks failed: %s", ", ".join(failed))
        return EXIT_ORACLE
    return EXIT_OK


def _cmd_range(args) -> int:
    cfg = config.load(args.config)
    mode = ModeId(cfg.modes[0])
    sc = sweep.scenario(cfg, mode)
    if cfg.fixed_split or mode.is_af:
        res = available_range_fixed_split(*sc.phases, sc)
    else:
        res = maximize_range(sc)
    r = res.r_star
    print(f"mode        {mode.value}")
    print(f"r_star      {'inf' if math.isinf(r) else f'{r:.4f}'} m")
    print(f"T1_star     {res.T1_star:.6g} s")
    print(f"T2_star     {res.T2_star:.6g} s")
    print(f"residual    {res.residual:.3e}")
    print(f"iterations  {res.iterations}")
    print("candidates  T1[s]  T2[s]  r[m]")
    for T1, T2, rr in res.candidates:
        shown = "infeasible" if rr is None else f"{rr:.4f}"
        print(f"            {T1:.6g}  {T2:.6g}  {shown}")
    return EXIT_OK


COMMANDS = {"sweep": _cmd_sweep, "preset": _cmd_preset, "oracle": _cmd_oracle,
            "range": _cmd_range}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.verb](args)
    except config.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, InfeasibleRangeError, FloatingPointError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
