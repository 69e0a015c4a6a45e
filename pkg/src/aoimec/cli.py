"""Command line entry point: ``aoimec simulate | experiment | oracle-check``."""
from __future__ import annotations

import argparse
import sys

from .config import ConfigError, desk_config, load_config
from .harness import EXPERIMENTS, SCHEMES, run_experiment, simulate


def _grid(text: str):
    values = []
    for tok in text.split(","):
        tok = tok.strip()
        try:
            values.append(int(tok) if tok.lstrip("-").isdigit() else float(tok))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad grid value {tok!r}") from None
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aoimec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scheme and write per-epoch metrics")
    sim.add_argument("--config", help="key=value config file (default: desk profile)")
    sim.add_argument("--scheme", choices=SCHEMES, default="deeprl")
    sim.add_argument("--epochs", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out", required=True, help="output directory")

    exp = sub.add_parser("experiment", help="run a parameter sweep")
    exp.add_argument("--kind", choices=EXPERIMENTS, required=True)
    exp.add_argument("--config", help="key=value config file (default: desk profile)")
    exp.add_argument("--out", required=True)
    exp.add_argument("--grid", type=_grid, help="comma-separated sweep values")
    exp.add_argument("--schemes", help="comma-separated subset of schemes")
    exp.add_argument("--epochs", type=int)
    exp.add_argument("--seed", type=int)

    orc = sub.add_parser("oracle-check", help="exact vs tabular cross-checks on tiny instances")
    orc.add_argument("--steps", type=int, default=200_000)
    orc.add_argument("--seed", type=int, default=0)
    return parser


def _load(args):
    config = load_config(args.config) if args.config else desk_config()
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    if args.epochs is not None and args.epochs < 1:
        raise ConfigError("--epochs must be positive")
    config.validate()
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            meta = simulate(_load(args), args.scheme, args.out, args.epochs)
            print(f"{args.scheme}: {meta['epochs']} epochs, avg AoI {meta['avg_aoi']:.4f} s, "
                  f"avg energy {meta['avg_energy']:.4f} J, avg utility {meta['avg_utility']:.4f}")
        elif args.command == "experiment":
            schemes = args.schemes.split(",") if args.schemes else None
            meta = run_experiment(args.kind, _load(args), args.out, args.grid, schemes, args.epochs)
            print(f"{args.kind}: {len(meta['runs'])} runs written to {args.out}")
        else:
            from .oracle import run_suite
            results = run_suite(args.steps, args.seed)
            for r in results:
                print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
            if not all(r.passed for r in results):
                return 1
    except (ConfigError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
