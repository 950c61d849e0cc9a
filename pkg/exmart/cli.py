"""
Contains the command-line front-end of exmart.

Exit codes: 0 success, 1 configuration error, 2 input or parse error,
3 internal failure.
"""

import argparse
import collections.abc
import logging
import sys
import typing

import pandas
import rich.console
import rich.table

from exmart import experiment, interfaces

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> typing.NoReturn:
        raise interfaces.ConfigurationError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="exmart",
        description="Detect concept changes in labeled streams with "
        "exchangeability martingales.",
    )
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level (default: WARNING).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run a threshold sweep experiment.")
    run.add_argument(
        "--scenario",
        required=True,
        help="A, B, C, D, E, csv or recipe.",
    )
    run.add_argument(
        "--lambda",
        dest="lambdas",
        type=float,
        action="append",
        help="Detection threshold; repeat for a sweep (default: 10).",
    )
    run.add_argument("--epsilon", type=float, default=0.92)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--segments", type=int, default=10)
    run.add_argument("--segment-len", type=int, default=1000)
    run.add_argument("--dim", type=int, default=None)
    run.add_argument("--noise-pct", type=float, default=None)
    run.add_argument("--strangeness", default="knn", choices=["knn", "svm"])
    run.add_argument("--k", type=int, default=1, help="kNN neighbors.")
    run.add_argument("--gamma", type=float, default=None, help="SVM width.")
    run.add_argument("--c", type=float, default=10.0, help="SVM box bound.")
    run.add_argument("--retrain-every", type=int, default=1)
    run.add_argument("--window-cap", type=int, default=None)
    run.add_argument("--replicas", type=int, default=20)
    run.add_argument("--input", default=None, help="Labeled CSV stream.")
    run.add_argument("--recipe", default=None, help="Segment recipe JSON.")
    run.add_argument("--label-col", default="label")
    run.add_argument("--out", default=None, help="Artifact directory.")
    run.add_argument("--emit-trajectory", action="store_true")
    run.add_argument("--jobs", type=int, default=1)

    design = sub.add_parser(
        "design", help="Derive a threshold from a test design."
    )
    design.add_argument("--alpha", type=float, required=True)
    design.add_argument("--beta", type=float, default=0.0)
    design.add_argument("--epsilon", type=float, default=0.92)
    design.add_argument(
        "--p-values",
        default=None,
        help="CSV of post-change p-values for the mean delay estimate.",
    )
    design.add_argument("--p-column", default="p")
    return parser


def run_config_from_args(args: argparse.Namespace) -> experiment.RunConfig:
    return experiment.RunConfig(
        scenario=args.scenario,
        lambdas=tuple(args.lambdas) if args.lambdas else (10.0,),
        epsilon=args.epsilon,
        seed=args.seed,
        segments=args.segments,
        segment_len=args.segment_len,
        dim=args.dim,
        noise_pct=args.noise_pct,
        strangeness=args.strangeness,
        k=args.k,
        gamma=args.gamma,
        C=args.c,
        retrain_every=args.retrain_every,
        window_cap=args.window_cap,
        replicas=args.replicas,
        input_path=args.input,
        recipe_path=args.recipe,
        label_column=args.label_col,
        out_dir=args.out,
        emit_trajectory=args.emit_trajectory,
        jobs=args.jobs,
    )


def _run(args: argparse.Namespace, console: rich.console.Console) -> int:
    cfg = run_config_from_args(args)
    result = experiment.run_experiment(cfg)
    experiment.print_summary(result, console)
    return EXIT_OK


def _read_p_values(path: str, column: str) -> list[float]:
    try:
        frame = pandas.read_csv(path)
    except (pandas.errors.EmptyDataError, pandas.errors.ParserError) as err:
        raise interfaces.StreamFormatError(f"{path}: {err}") from err
    if column not in frame.columns:
        raise interfaces.StreamFormatError(
            f"{path}: line 1: unknown column {column!r}"
        )
    values = pandas.to_numeric(frame[column], errors="coerce")
    if values.isna().any():
        row = int(values.isna().to_numpy().nonzero()[0][0])
        raise interfaces.StreamFormatError(
            f"{path}: line {row + 2}: non-numeric p-value"
        )
    return [float(v) for v in values]


def _design(args: argparse.Namespace, console: rich.console.Console) -> int:
    samples = None
    if args.p_values is not None:
        samples = _read_p_values(args.p_values, args.p_column)
    delay_text = "-"
    try:
        summary = experiment.design_summary(
            args.alpha, args.beta, args.epsilon, samples
        )
        if summary.mean_delay is not None:
            delay_text = f"{summary.mean_delay:.3f}"
    except interfaces.UndefinedDelayError as err:
        summary = experiment.design_summary(args.alpha, args.beta, args.epsilon)
        delay_text = f"undefined ({err})"
    table = rich.table.Table(title="Martingale test design")
    table.add_column("quantity")
    table.add_column("value", justify="right")
    table.add_row("alpha", f"{summary.alpha:g}")
    table.add_row("beta", f"{summary.beta:g}")
    table.add_row("epsilon", f"{summary.epsilon:g}")
    table.add_row("threshold lambda", f"{summary.threshold:g}")
    table.add_row("false alarm bound", f"{summary.false_alarm_bound:g}")
    table.add_row("crossover p-value", f"{summary.crossover_p:.5f}")
    table.add_row("mean delay", delay_text)
    console.print(table)
    return EXIT_OK


def main(
    argv: typing.Optional[collections.abc.Sequence[str]] = None,
    console: typing.Optional[rich.console.Console] = None,
) -> int:
    """
    Run the command line and return its exit code.

    Parameters
    ----------
    argv : typing.Optional[collections.abc.Sequence[str]] (default: None)
        Arguments without the program name; ``sys.argv[1:]`` if None.
    console : typing.Optional[rich.console.Console] (default: None)
        Destination of the tables.
    """
    if console is None:
        console = rich.console.Console()
    err_console = rich.console.Console(stderr=True)
    try:
        args = build_parser().parse_args(argv)
    except interfaces.ConfigurationError as err:
        err_console.print(f"[red]error:[/red] {err}")
        return EXIT_CONFIG
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "design":
            return _design(args, console)
        return _run(args, console)
    except interfaces.ConfigurationError as err:
        err_console.print(f"[red]configuration error:[/red] {err}")
        return EXIT_CONFIG
    except (interfaces.StreamFormatError, OSError) as err:
        err_console.print(f"[red]input error:[/red] {err}")
        return EXIT_INPUT
    except ValueError as err:
        err_console.print(f"[red]invalid value:[/red] {err}")
        return EXIT_CONFIG
    except Exception as err:
        logger.exception("Internal failure")
        err_console.print(f"[red]internal error:[/red] {err}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
