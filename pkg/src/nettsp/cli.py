"""Command line front end: tsp run / gen / validate / oracle."""

from __future__ import annotations

import argparse
import json
import sys

from .errors import NetTspError
from .io import FORMATS, generate_instance, load_instance, save_points_csv
from .metric import validate_metric
from .runner import render_report, run


def _add_solver_args(p):
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--s", type=float, default=6.0)
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--delta", type=float, default=1.0 / 12)
    p.add_argument("--m-cap", dest="m_cap", type=int, default=6)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--guesses", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = argparse.ArgumentParser(prog="tsp", description="metric TSP toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a pipeline mode and emit a report")
    p_run.add_argument("--instance", required=True)
    p_run.add_argument("--format", required=True, choices=FORMATS)
    p_run.add_argument("--mode", required=True,
                       choices=("solve", "sparse_only", "baseline", "oracle",
                                "partition_stats", "lemma_checks"))
    _add_solver_args(p_run)
    p_run.add_argument("--out", default=None)

    p_gen = sub.add_parser("gen", help="generate an instance as CSV points")
    p_gen.add_argument("--kind", required=True,
                       choices=("uniform2d", "clustered", "line", "matrix_random_metric"))
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)

    p_val = sub.add_parser("validate", help="check that a file is a valid metric instance")
    p_val.add_argument("--instance", required=True)
    p_val.add_argument("--format", required=True, choices=FORMATS)

    p_orc = sub.add_parser("oracle", help="exact optimum for small instances")
    p_orc.add_argument("--instance", required=True)
    p_orc.add_argument("--format", required=True, choices=FORMATS)
    p_orc.add_argument("--seed", type=int, default=0)
    p_orc.add_argument("--out", default=None)
    return parser


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            if args.kind == "matrix_random_metric":
                space = generate_instance(args.kind, args.n, args.seed)
                payload = {"matrix": space.matrix.tolist()}
                _emit(json.dumps(payload) + "\n", args.out)
            else:
                space = generate_instance(args.kind, args.n, args.seed)
                save_points_csv(space, args.out)
            return 0

        space = load_instance(args.instance, args.format)
        if args.command == "validate":
            report = validate_metric(space)
            print("pass" if report.passed else f"fail: {report.violations[:3]}")
            return 0 if report.passed else 1

        config = {"space": space, "seed": args.seed}
        if args.command == "oracle":
            config["mode"] = "oracle"
        else:
            config["mode"] = args.mode
            for key in ("eps", "s", "q", "delta", "m_cap", "r", "guesses"):
                val = getattr(args, key)
                if val is not None:
                    config[key] = val
        report = run(config)
        _emit(render_report(report), getattr(args, "out", None))
        return 0
    except NetTspError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
