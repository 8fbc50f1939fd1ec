"""Command line: ``cash run``, ``cash report`` and ``cash space``."""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, DataError
from .learners.roster import space_of_learners
from .runner import DEFAULT_BOOTSTRAP, ExperimentConfig, regenerate_report, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cash", description="Combined algorithm selection and hyperparameter optimization.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a seeded experiment and write a report")
    run.add_argument("--data", required=True, help="dataset file")
    run.add_argument("--format", choices=("csv", "arff"), help="defaults to the file suffix")
    run.add_argument("--label", default=None, help="CSV label column (name or index; default last)")
    run.add_argument("--method", default="smac",
                     help="smac | tpe | random | random-grid | ex-def")
    run.add_argument("--k", type=int, default=10, help="cross-validation folds")
    run.add_argument("--budget", type=int, default=200, help="fold evaluations per run")
    run.add_argument("--seeds", type=int, default=25, help="independent runs")
    run.add_argument("--batch", type=int, default=4, help="runs per bootstrap batch")
    run.add_argument("--test-fraction", type=float, default=0.3)
    run.add_argument("--inner-fraction", type=float, default=0.3,
                     help="validation share of the training side")
    run.add_argument("--bootstrap", type=int, default=DEFAULT_BOOTSTRAP, help="bootstrap samples")
    run.add_argument("--fold-budget", type=int, default=None,
                     help="instance evaluations per fold before it scores 100%% error")
    run.add_argument("--time-limit", type=float, default=None,
                     help="wall-clock seconds per run (breaks reproducibility)")
    run.add_argument("--workers", type=int, default=None, help="parallel runs (env CASH_WORKERS wins)")
    run.add_argument("--out", required=True, help="output directory")

    rep = sub.add_parser("report", help="rebuild the report of a finished experiment")
    rep.add_argument("--in", dest="directory", required=True)

    space = sub.add_parser("space", help="show the learner hyperparameter space")
    space.add_argument("--print", action="store_true", dest="print_space",
                       help="emit the space file as JSON")
    return parser


def _label(value):
    if value is None:
        return -1
    try:
        return int(value)
    except ValueError:
        return value


def _main(argv) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "space":
        space = space_of_learners()
        if args.print_space:
            sys.stdout.write(space.dumps())
        else:
            print(json.dumps(space.census, indent=1))
        return EXIT_OK
    if args.command == "report":
        report = regenerate_report(args.directory)
        print(json.dumps({k: report[k] for k in ("method", "median_cv_error", "median_test_error")}))
        return EXIT_OK
    kwargs = {}
    if args.fold_budget is not None:
        kwargs["fold_budget"] = args.fold_budget
    cfg = ExperimentConfig(
        data=args.data, method=args.method, format=args.format, label_column=_label(args.label),
        k=args.k, budget=args.budget, seeds=args.seeds, batch=args.batch,
        test_fraction=args.test_fraction, inner_fraction=args.inner_fraction, out=args.out,
        workers=args.workers, bootstrap_samples=args.bootstrap, time_limit=args.time_limit,
        **kwargs)
    report = run_experiment(cfg)
    print(json.dumps({k: report[k] for k in ("method", "median_cv_error", "median_test_error")}))
    return EXIT_OK


def main(argv=None) -> int:
    try:
        return _main(sys.argv[1:] if argv is None else argv)
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, FileNotFoundError, IsADirectoryError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
