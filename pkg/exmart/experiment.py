"""
Contains the experiment runner for threshold sweeps over replicated streams.

A sweep evaluates every (threshold, replica) cell.  Each replica sees the
same stream at every threshold; cells are independent and may run in worker
processes without changing any result.
"""

import collections.abc
import dataclasses
import json
import logging
import math
import multiprocessing
import pathlib
import typing

import numpy
import pandas
import rich.console
import rich.table

from exmart import (
    datatypes,
    detectors,
    engine,
    evaluation,
    ingest,
    interfaces,
    martingale,
    monitor,
    simulate,
)

logger = logging.getLogger(__name__)

SCENARIOS = (*simulate.SCENARIOS, "csv", "recipe")
PROVIDERS = ("knn", "svm")

SWEEP_COLUMNS = (
    "scenario",
    "lambda",
    "epsilon",
    "provider",
    "seed",
    "replica",
    "precision",
    "recall",
    "meanDelay",
    "medianDelay",
    "falseAlarms",
    "missed",
    "detections",
    "status",
    "error",
)


@typing.final
@dataclasses.dataclass(frozen=True, slots=True)
class RunConfig:
    """
    Complete description of an experiment sweep.

    Parameters
    ----------
    scenario : str
        One of A-E (synthetic), "csv" or "recipe".
    lambdas : tuple[float, ...] (default: (10.0,))
        Detection thresholds of the sweep.
    epsilon : float (default: 0.92)
        Martingale exponent.
    seed : int (default: 0)
        Root seed.
    segments : int (default: 10)
        Segments of synthetic streams.
    segment_len : int (default: 1000)
        Points per synthetic segment.
    dim : typing.Optional[int] (default: None)
        Dimension override of synthetic streams.
    noise_pct : typing.Optional[float] (default: None)
        Label noise override of synthetic streams.
    strangeness : str (default: "knn")
        Strangeness provider, "knn" or "svm".
    k : int (default: 1)
        Neighbors of the kNN provider.
    gamma : typing.Optional[float] (default: None)
        Kernel width of the SVM provider.
    C : float (default: 10.0)
        Box constraint of the SVM provider.
    retrain_every : int (default: 1)
        SVM retraining cadence.
    window_cap : typing.Optional[int] (default: None)
        Maximum bag size of the detectors.
    replicas : int (default: 20)
        Replicas per threshold.
    input_path : typing.Optional[str] (default: None)
        Labeled CSV of the "csv" scenario.
    recipe_path : typing.Optional[str] (default: None)
        Recipe file of the "recipe" scenario.
    label_column : str (default: "label")
        Label column of CSV inputs.
    out_dir : typing.Optional[str] (default: None)
        Directory receiving the artifacts; nothing is written if None.
    emit_trajectory : bool (default: False)
        Write one trajectory CSV per cell.
    jobs : int (default: 1)
        Worker processes.
    """

    scenario: str
    lambdas: tuple[float, ...] = (10.0,)
    epsilon: float = 0.92
    seed: int = 0
    segments: int = 10
    segment_len: int = 1000
    dim: typing.Optional[int] = None
    noise_pct: typing.Optional[float] = None
    strangeness: str = "knn"
    k: int = 1
    gamma: typing.Optional[float] = None
    C: float = 10.0
    retrain_every: int = 1
    window_cap: typing.Optional[int] = None
    replicas: int = 20
    input_path: typing.Optional[str] = None
    recipe_path: typing.Optional[str] = None
    label_column: str = "label"
    out_dir: typing.Optional[str] = None
    emit_trajectory: bool = False
    jobs: int = 1

    def __post_init__(self) -> None:
        scenario = self.scenario.upper()
        if scenario in ("CSV", "RECIPE"):
            scenario = scenario.lower()
        object.__setattr__(self, "scenario", scenario)
        object.__setattr__(
            self, "lambdas", tuple(float(lam) for lam in self.lambdas)
        )
        if scenario not in SCENARIOS:
            raise interfaces.ConfigurationError(
                f"Unknown scenario {self.scenario!r}; expected one of "
                f"{SCENARIOS}"
            )
        if not self.lambdas:
            raise interfaces.ConfigurationError("At least one lambda needed")
        if len(set(self.lambdas)) != len(self.lambdas):
            raise interfaces.ConfigurationError(
                f"Duplicate thresholds in {self.lambdas}"
            )
        if self.replicas < 1:
            raise interfaces.ConfigurationError(
                f"replicas must be positive, got {self.replicas}"
            )
        if self.jobs < 1:
            raise interfaces.ConfigurationError(
                f"jobs must be positive, got {self.jobs}"
            )
        if self.strangeness not in PROVIDERS:
            raise interfaces.ConfigurationError(
                f"Unknown strangeness provider {self.strangeness!r}; "
                f"expected one of {PROVIDERS}"
            )
        if scenario == "csv" and self.input_path is None:
            raise interfaces.ConfigurationError(
                "Scenario csv requires an input file"
            )
        if scenario == "recipe" and self.recipe_path is None:
            raise interfaces.ConfigurationError(
                "Scenario recipe requires a recipe file"
            )
        for lam in self.lambdas:
            self.detector_config(lam)
        self.provider_config()
        if scenario in simulate.SCENARIOS:
            self.generator_config()

    @property
    def synthetic(self) -> bool:
        return self.scenario in simulate.SCENARIOS

    def detector_config(self, threshold: float) -> datatypes.DetectorConfig:
        return datatypes.DetectorConfig(
            threshold=threshold,
            epsilon=self.epsilon,
            window_cap=self.window_cap,
            seed=self.seed,
            retrain_every=self.retrain_every,
        )

    def provider_config(
        self, eng: typing.Optional[interfaces.DetectionEngine] = None
    ) -> interfaces.ProviderFactory:
        if eng is None:
            eng = engine.create_engine()
        if self.strangeness == "svm":
            return eng.provider.svm(
                gamma=self.gamma, C=self.C, retrain_every=self.retrain_every
            )
        return eng.provider.knn(k=self.k)

    def generator_config(self) -> simulate.GeneratorConfig:
        return simulate.scenario_config(
            self.scenario,
            num_segments=self.segments,
            segment_len=self.segment_len,
            dim=self.dim,
            noise_pct=self.noise_pct,
        )

    def to_dict(self) -> dict[str, typing.Any]:
        record = dataclasses.asdict(self)
        record["lambdas"] = list(self.lambdas)
        return record


class StreamSource(typing.NamedTuple):
    """Stream ingredients resolved once, before any cell runs."""

    generator: typing.Optional[simulate.GeneratorConfig]
    stream: typing.Optional[datatypes.StreamSpec]
    recipe: typing.Optional[ingest.SegmentRecipe]

    def build(self, seed: int, replica: int) -> datatypes.StreamSpec:
        if self.generator is not None:
            return simulate.generate_stream(self.generator, seed, replica)
        if self.recipe is not None:
            return ingest.compose_stream(self.recipe, seed, replica)
        return typing.cast(datatypes.StreamSpec, self.stream)


def resolve_source(cfg: RunConfig) -> StreamSource:
    """
    Load or configure the stream of a run.

    Raises
    ------
    exmart.interfaces.StreamFormatError
        If an input file cannot be parsed.
    OSError
        If an input file cannot be read.
    """
    if cfg.synthetic:
        return StreamSource(cfg.generator_config(), None, None)
    if cfg.scenario == "csv":
        stream = ingest.load_csv_stream(
            typing.cast(str, cfg.input_path), cfg.label_column
        )
        if len(stream) == 0:
            raise interfaces.StreamFormatError(
                f"{cfg.input_path}: stream holds no points"
            )
        return StreamSource(None, stream, None)
    recipe = ingest.load_recipe(typing.cast(str, cfg.recipe_path))
    return StreamSource(None, None, recipe)


@typing.final
@dataclasses.dataclass(frozen=True, slots=True)
class CellResult:
    threshold: float
    replica: int
    report: typing.Optional[evaluation.EvalReport]
    trajectory: typing.Optional[pandas.DataFrame] = None
    error: typing.Optional[str] = None
    fallbacks: int = 0

    @property
    def ok(self) -> bool:
        return self.error is None


def run_cell(
    cfg: RunConfig,
    source: StreamSource,
    provider: interfaces.ProviderFactory,
    threshold: float,
    replica: int,
) -> CellResult:
    """
    Monitor one replica stream at one threshold and score the detections.

    Exceptions are recorded in the result instead of being raised.
    """
    try:
        stream = source.build(cfg.seed, replica)
        detector = detectors.detector_for_stream(
            cfg.detector_config(threshold),
            provider,
            stream.label_set,
            replica=replica,
        )
        hooks: list[interfaces.MonitorHook] = []
        recorder = None
        if cfg.emit_trajectory:
            recorder = engine.create_engine().hook.trajectory()
            hooks.append(recorder)
        result = monitor.run_monitor(detector, stream, hooks)
        report = evaluation.evaluate_run(
            result.detection_indices,
            stream.change_points,
            len(stream),
            result.p_values[:, 0],
        )
    except Exception as err:
        logger.error(
            "Replica %d at lambda %g failed: %s", replica, threshold, err
        )
        return CellResult(
            threshold, replica, None, error=f"{type(err).__name__}: {err}"
        )
    fallbacks = getattr(detector, "fallback_count", 0)
    if fallbacks:
        logger.info(
            "Replica %d at lambda %g scored %d step(s) with the kNN fallback",
            replica,
            threshold,
            fallbacks,
        )
    logger.info(
        "Replica %d at lambda %g: %d detection(s), precision %.3f, "
        "recall %.3f",
        replica,
        threshold,
        len(result.detections),
        report.precision,
        report.recall,
    )
    return CellResult(
        threshold,
        replica,
        report,
        None if recorder is None else recorder.to_frame(),
        fallbacks=fallbacks,
    )


def _nan_to_none(value: typing.Any) -> typing.Any:
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, list):
        return [_nan_to_none(v) for v in value]
    if isinstance(value, dict):
        return {k: _nan_to_none(v) for k, v in value.items()}
    return value


def _cell_name(scenario: str, threshold: float, replica: int) -> str:
    return f"{scenario}_lam{threshold:g}_rep{replica}"


@typing.final
@dataclasses.dataclass(frozen=True, slots=True)
class ExperimentResult:
    """
    Outcome of a sweep.

    Parameters
    ----------
    config : RunConfig
        Configuration of the sweep.
    cells : tuple[CellResult, ...]
        Per-cell results ordered by threshold, then replica.
    sweep : pandas.DataFrame
        One row per cell plus one aggregate row per threshold.
    artifacts : tuple[str, ...]
        Written files relative to the output directory.
    """

    config: RunConfig
    cells: tuple[CellResult, ...]
    sweep: pandas.DataFrame
    artifacts: tuple[str, ...] = ()

    @property
    def aggregate(self) -> pandas.DataFrame:
        return self.sweep[self.sweep["replica"] == "median"].reset_index(
            drop=True
        )

    @property
    def failures(self) -> tuple[CellResult, ...]:
        return tuple(cell for cell in self.cells if not cell.ok)

    def report(
        self, threshold: float, replica: int
    ) -> typing.Optional[evaluation.EvalReport]:
        for cell in self.cells:
            if cell.threshold == threshold and cell.replica == replica:
                return cell.report
        raise KeyError((threshold, replica))


def _sweep_row(
    cfg: RunConfig, cell: CellResult
) -> dict[str, typing.Any]:
    row: dict[str, typing.Any] = {
        "scenario": cfg.scenario,
        "lambda": cell.threshold,
        "epsilon": cfg.epsilon,
        "provider": cfg.strangeness,
        "seed": cfg.seed,
        "replica": str(cell.replica),
    }
    report = cell.report
    if report is None:
        row.update(
            dict.fromkeys(
                (
                    "precision",
                    "recall",
                    "meanDelay",
                    "medianDelay",
                    "falseAlarms",
                    "missed",
                    "detections",
                ),
                math.nan,
            )
        )
        row.update(status="failed", error=cell.error)
        return row
    row.update(
        precision=report.precision,
        recall=report.recall,
        meanDelay=report.mean_delay,
        medianDelay=report.median_delay,
        falseAlarms=report.false_alarms,
        missed=report.missed,
        detections=len(report.detections),
        status="ok",
        error="",
    )
    return row


def _aggregate_row(
    cfg: RunConfig, threshold: float, rows: list[dict[str, typing.Any]]
) -> dict[str, typing.Any]:
    ok = [row for row in rows if row["status"] == "ok"]
    row: dict[str, typing.Any] = {
        "scenario": cfg.scenario,
        "lambda": threshold,
        "epsilon": cfg.epsilon,
        "provider": cfg.strangeness,
        "seed": cfg.seed,
        "replica": "median",
    }
    for key in (
        "precision",
        "recall",
        "meanDelay",
        "medianDelay",
        "falseAlarms",
        "missed",
        "detections",
    ):
        values = numpy.asarray([r[key] for r in ok], dtype=numpy.float64)
        values = values[~numpy.isnan(values)]
        row[key] = float(numpy.median(values)) if values.size else math.nan
    row["status"] = "aggregate"
    failed = len(rows) - len(ok)
    row["error"] = f"{failed} failed" if failed else ""
    return row


def build_sweep_frame(
    cfg: RunConfig, cells: collections.abc.Sequence[CellResult]
) -> pandas.DataFrame:
    """Sweep table with per-cell rows followed by each threshold's median."""
    rows = []
    for threshold in cfg.lambdas:
        cell_rows = [
            _sweep_row(cfg, cell)
            for cell in cells
            if cell.threshold == threshold
        ]
        rows.extend(cell_rows)
        rows.append(_aggregate_row(cfg, threshold, cell_rows))
    return pandas.DataFrame(rows, columns=list(SWEEP_COLUMNS))


def _write_artifacts(
    cfg: RunConfig,
    cells: collections.abc.Sequence[CellResult],
    sweep: pandas.DataFrame,
) -> tuple[str, ...]:
    out = pathlib.Path(typing.cast(str, cfg.out_dir))
    (out / "reports").mkdir(parents=True, exist_ok=True)
    artifacts = ["sweep.csv"]
    sweep.to_csv(out / "sweep.csv", index=False)
    if cfg.emit_trajectory:
        (out / "trajectories").mkdir(exist_ok=True)
    for cell in cells:
        name = _cell_name(cfg.scenario, cell.threshold, cell.replica)
        record: dict[str, typing.Any] = {
            "scenario": cfg.scenario,
            "lambda": cell.threshold,
            "epsilon": cfg.epsilon,
            "provider": cfg.strangeness,
            "seed": cfg.seed,
            "replica": cell.replica,
            "status": "ok" if cell.ok else "failed",
            "error": cell.error,
            "fallbacks": cell.fallbacks,
        }
        if cell.report is not None:
            record.update(cell.report.to_dict())
        report_path = f"reports/{name}.json"
        (out / report_path).write_text(
            json.dumps(_nan_to_none(record), indent=2, sort_keys=True) + "\n"
        )
        artifacts.append(report_path)
        if cell.trajectory is not None:
            trajectory_path = f"trajectories/{name}.csv"
            cell.trajectory.to_csv(out / trajectory_path, index=False)
            artifacts.append(trajectory_path)
    manifest = {
        "config": cfg.to_dict(),
        "artifacts": artifacts,
        "failed_cells": [
            _cell_name(cfg.scenario, c.threshold, c.replica)
            for c in cells
            if not c.ok
        ],
    }
    (out / "manifest.json").write_text(
        json.dumps(_nan_to_none(manifest), indent=2, sort_keys=True) + "\n"
    )
    artifacts.append("manifest.json")
    logger.info("Wrote %d artifacts to %s", len(artifacts), out)
    return tuple(artifacts)


def run_experiment(
    cfg: RunConfig, eng: typing.Optional[interfaces.DetectionEngine] = None
) -> ExperimentResult:
    """
    Run every (threshold, replica) cell of a sweep.

    Parameters
    ----------
    cfg : RunConfig
        Sweep configuration, validated on construction.
    eng : typing.Optional[exmart.interfaces.DetectionEngine] (default: None)
        Engine supplying provider constructors and the worker count;
        ``create_engine(np=cfg.jobs)`` if None.

    Returns
    -------
    ExperimentResult
        Cell results, the sweep table and the written artifacts.
    """
    if eng is None:
        eng = engine.create_engine(np=cfg.jobs)
    source = resolve_source(cfg)
    provider = cfg.provider_config(eng)
    work = [
        (cfg, source, provider, threshold, replica)
        for threshold in cfg.lambdas
        for replica in range(cfg.replicas)
    ]
    logger.info(
        "Running %d cell(s) of scenario %s on %d process(es)",
        len(work),
        cfg.scenario,
        eng.np,
    )
    if eng.np == 1:
        cells = [run_cell(*args) for args in work]
    else:
        with multiprocessing.Pool(processes=eng.np) as pool:
            pending = [pool.apply_async(run_cell, args=args) for args in work]
            cells = [r.get() for r in pending]
    sweep = build_sweep_frame(cfg, cells)
    artifacts: tuple[str, ...] = ()
    if cfg.out_dir is not None:
        artifacts = _write_artifacts(cfg, cells, sweep)
    failed = sum(1 for cell in cells if not cell.ok)
    if failed:
        logger.warning("%d of %d cell(s) failed", failed, len(cells))
    return ExperimentResult(cfg, tuple(cells), sweep, artifacts)


def _fmt(value: float) -> str:
    return "-" if math.isnan(value) else f"{value:.3f}"


def summary_table(result: ExperimentResult) -> rich.table.Table:
    """Rich table of the aggregate precision, recall and delay per lambda."""
    cfg = result.config
    table = rich.table.Table(
        title=f"Scenario {cfg.scenario}, {cfg.strangeness} strangeness, "
        f"{cfg.replicas} replica(s)"
    )
    for column in (
        "lambda",
        "precision",
        "recall",
        "median delay",
        "false alarms",
    ):
        table.add_column(column, justify="right")
    for _, row in result.aggregate.iterrows():
        table.add_row(
            f"{row['lambda']:g}",
            _fmt(row["precision"]),
            _fmt(row["recall"]),
            _fmt(row["medianDelay"]),
            _fmt(row["falseAlarms"]),
        )
    return table


def print_summary(
    result: ExperimentResult,
    console: typing.Optional[rich.console.Console] = None,
) -> None:
    if console is None:
        console = rich.console.Console()
    console.print(summary_table(result))
    if result.failures:
        console.print(
            f"[red]{len(result.failures)} cell(s) failed[/red]; see sweep.csv"
        )


class DesignSummary(typing.NamedTuple):
    """Threshold design derived from a test size and type-II error."""

    alpha: float
    beta: float
    epsilon: float
    threshold: float
    false_alarm_bound: float
    crossover_p: float
    mean_delay: typing.Optional[float]


def design_summary(
    alpha: float,
    beta: float = 0.0,
    epsilon: float = 0.92,
    post_change_p_values: typing.Optional[
        collections.abc.Sequence[float]
    ] = None,
) -> DesignSummary:
    """
    Collect the threshold design quantities of a martingale test.

    The mean delay is None when no post-change p-values are given.

    Raises
    ------
    exmart.interfaces.UndefinedDelayError
        If the p-values do not indicate a change.
    """
    design = datatypes.TestDesign(alpha, beta)
    threshold = martingale.threshold_from_design(design)
    mean_delay = None
    if post_change_p_values is not None:
        mean_delay = martingale.estimate_mean_delay(
            threshold, beta, post_change_p_values, epsilon
        )
    return DesignSummary(
        alpha,
        beta,
        epsilon,
        threshold,
        martingale.doob_false_alarm_bound(threshold),
        martingale.likelihood_ratio_crossover(epsilon),
        mean_delay,
    )
