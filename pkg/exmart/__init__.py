"""Online concept-change detection with exchangeability martingales."""

__all__ = [
    "cli",
    "create_engine",
    "datatypes",
    "detectors",
    "engine",
    "evaluation",
    "experiment",
    "hooks",
    "ingest",
    "interfaces",
    "martingale",
    "monitor",
    "simulate",
    "strangeness",
    "utils",
]

from exmart.engine import create_engine

from . import (
    cli,
    datatypes,
    detectors,
    engine,
    evaluation,
    experiment,
    hooks,
    ingest,
    interfaces,
    martingale,
    monitor,
    simulate,
    strangeness,
    utils,
)
