"""Command-line entry point: ``edlab run | k | list-systems``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import catalog
from .errors import ConfigError
from .harness import (
    ExperimentConfig,
    ExperimentSection,
    MeasureConfig,
    NumericsConfig,
    SystemConfig,
    load_config,
    run_experiment,
)


def _print_report(label: str, rep) -> None:
    print(f"# {label}: {rep.kind} on {rep.system}")
    sys.stdout.write(rep.render())
    for c in rep.checks:
        mark = "PASS" if c.passed else "FAIL"
        print(f"#   [{mark}] {c.name}: {c.value!r} (tol {c.tolerance!r})")
    for p in rep.csv_paths:
        print(f"#   wrote {p}")


def cmd_run(args) -> int:
    ok = True
    for path in args.config:
        try:
            cfg = load_config(path)
        except (ConfigError, OSError) as exc:
            print(f"{path}: {exc}", file=sys.stderr)
            return 2
        rep = run_experiment(cfg)
        _print_report(path, rep)
        ok &= rep.passed
    return 0 if ok else 1


def cmd_k(args) -> int:
    if args.system == "circle":
        if args.omega is None:
            print("--omega is required for the circle system", file=sys.stderr)
            return 2
        system = SystemConfig("circle", omega=args.omega)
        measure = MeasureConfig("closed-form")
        t_max = args.t_max
        times = tuple(t_max * k / 10 for k in range(11))
    else:
        system = SystemConfig("baker", a=args.a)
        closed = args.a == 0.5
        measure = MeasureConfig("closed-form" if closed else "empirical")
        n = int(args.t_max)
        times = tuple(float(k) for k in range(n + 1))
    cfg = ExperimentConfig(
        system=system,
        experiment=ExperimentSection("k-slope"),
        measure=measure,
        numerics=NumericsConfig(times=times, seed=args.seed),
        output_dir=args.out,
    )
    rep = run_experiment(cfg)
    _print_report("k", rep)
    return 0 if rep.passed else 1


def cmd_list(args) -> int:
    for name, desc in catalog.SYSTEMS.items():
        print(f"{name}\t{desc}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edlab", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run experiments described by TOML config files")
    p_run.add_argument("--config", action="append", required=True,
                       help="config file; repeat to run several experiments")
    p_run.set_defaults(func=cmd_run)

    p_k = sub.add_parser("k", help="estimate K three ways for one catalog system")
    p_k.add_argument("--system", choices=sorted(catalog.SYSTEMS), default="circle")
    p_k.add_argument("--omega", type=float)
    p_k.add_argument("--a", type=float, default=0.5)
    p_k.add_argument("--t-max", type=float, default=10.0)
    p_k.add_argument("--seed", type=int, default=0)
    p_k.add_argument("--out", default="edlab-out/k")
    p_k.set_defaults(func=cmd_k)

    p_list = sub.add_parser("list-systems", help="list catalog systems")
    p_list.set_defaults(func=cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
