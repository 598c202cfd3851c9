"""Command-line entry point.

Exit codes: 0 success, 1 invalid arguments, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .analog_optimizer import OptimizerConfig
from .experiments import (ARMS, PowerModelParams, SweepSpec, emit_csv, power_dma, power_fd,
                          run_sweep)
from .signal_model import DEFAULT_BETA_DE, SystemDims

SUBCOMMANDS = {
    "sweep-snr": "snr",
    "sweep-microstrips": "nd",
    "sweep-elements": "ne",
    "single": "snr",
}
# keys never echoed into the CSV: they do not change the numbers
_NOT_ECHOED = {"out", "workers", "config", "command"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _arms(text):
    arms = tuple(a.strip() for a in text.split(",") if a.strip())
    bad = [a for a in arms if a not in ARMS]
    if bad or not arms:
        raise argparse.ArgumentTypeError(f"arms must be a comma list from {', '.join(ARMS)}")
    return arms


def _grid(text):
    """``a,b,c`` or ``start:stop:step`` (stop inclusive)."""
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0:
                raise ValueError
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            values = [start + i * step for i in range(n)]
        else:
            values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid grid {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty grid")
    return tuple(int(v) if float(v).is_integer() else v for v in values)


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _add_common(p):
    p.add_argument("--config", help="plain-text key=value file; flags override it")
    p.add_argument("--k", type=_positive_int, default=2, help="number of users")
    p.add_argument("--nd", type=_positive_int, default=5, help="microstrips")
    p.add_argument("--ne", type=_positive_int, default=10, help="elements per microstrip")
    p.add_argument("--nrf", type=_positive_int, default=None,
                   help="RF chains of the fully digital baseline (default: K)")
    p.add_argument("--rho-db", type=float, default=10.0, help="transmit SNR in dB")
    p.add_argument("--eta", type=_positive_float, default=1.0, help="quantizer output scale")
    p.add_argument("--beta-de", type=float, default=DEFAULT_BETA_DE,
                   help="per-element propagation phase beta*d_e in radians")
    p.add_argument("--solver", choices=("sdr", "closed-form", "random"), default="sdr")
    p.add_argument("--arms", type=_arms, default=None,
                   help="comma list of arms (default: dma-<solver>,fd)")
    p.add_argument("--trials", type=_positive_int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=_positive_int, default=50)
    p.add_argument("--eval-stats", choices=("exact", "approx"), default="exact",
                   help="Bussgang statistics used to score the DMA arms")
    p.add_argument("--grid", type=_grid, default=None,
                   help="swept values: a,b,c or start:stop:step")
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")


def build_parser():
    parser = _Parser(prog="onebit-dma", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        _add_common(sub.add_parser(name))
    p = sub.add_parser("power", help="print P_DMA, P_FD and their ratio")
    p.add_argument("--config")
    p.add_argument("--k", type=_positive_int, default=2)
    p.add_argument("--nd", type=_positive_int, default=5)
    p.add_argument("--ne", type=_positive_int, default=10)
    p.add_argument("--nrf", type=_positive_int, default=None)
    return parser


def _read_config(path):
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            values[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return values


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            file_values = _read_config(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        actions = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, text in file_values.items():
            if key not in actions or key in ("config", "help"):
                raise UsageError(f"unknown config key {key!r}")
            convert = actions[key].type or str
            try:
                value = convert(text)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"bad value for {key}: {exc}")
            if actions[key].choices is not None and value not in actions[key].choices:
                raise UsageError(f"bad value for {key}: {text!r}")
            defaults[key] = value
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def default_grid(axis, k):
    if axis == "snr":
        return tuple(range(-10, 26, 5))
    if axis == "nd":
        return tuple(range(k, 5 * k + 1, max(1, k // 2)))
    return tuple(range(20, 261, 40))


def spec_from_args(args) -> SweepSpec:
    axis = SUBCOMMANDS[args.command]
    if args.command == "single":
        grid = (args.rho_db,)
    else:
        grid = args.grid or default_grid(axis, args.k)
    arms = args.arms or (f"dma-{args.solver}", "fd")
    return SweepSpec(
        axis=axis, grid=grid, K=args.k, N_d=args.nd, N_e=args.ne, N_RF=args.nrf,
        rho_db=args.rho_db, trials=args.trials, seed=args.seed, arms=arms,
        beta_de=args.beta_de, eta=args.eta, evaluation=args.eval_stats,
        optimizer=OptimizerConfig(max_outer_iterations=args.max_iters))


def _echo(args):
    return {k: (",".join(v) if isinstance(v, tuple) and k == "arms" else
                ",".join(str(x) for x in v) if isinstance(v, tuple) else v)
            for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED}


def _power(args):
    dims = SystemDims(args.k, args.nd, args.ne, args.nrf)
    p_dma = power_dma(dims, PowerModelParams())
    p_fd = power_fd(dims.N_RF, PowerModelParams())
    print(f"P_DMA_W={p_dma:.9g}")
    print(f"P_FD_W={p_fd:.9g}")
    print(f"P_FD/P_DMA={p_fd / p_dma:.9g}")


def main(argv=None) -> int:
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
        spec = None if args.command == "power" else spec_from_args(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"onebit-dma: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)

    try:
        if args.command == "power":
            _power(args)
            return 0
        result = run_sweep(spec, workers=args.workers)
        emit_csv(result, args.out or sys.stdout, config=_echo(args))
        flagged = [r for r in result.rows if r.flagged]
        for r in flagged:
            print(f"warning: {r.failures} failed trials at {r.axis_name}={r.axis_value} "
                  f"arm={r.arm}", file=sys.stderr)
    except Exception as exc:  # noqa: BLE001 - report any runtime failure
        print(f"onebit-dma: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
