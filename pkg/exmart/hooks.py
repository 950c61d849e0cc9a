"""Contains classes which implement monitor hook functions."""

import dataclasses

import pandas

from exmart import interfaces


@dataclasses.dataclass(slots=True)
class TrajectoryRecorder(interfaces.MonitorHook):
    """
    Records the p-values and log martingales of every step.

    The recorder never stops monitoring.  `to_frame` lays the records out
    with one row per point and the columns ``index``, ``logM_<ch>``,
    ``p_<ch>`` for every channel, and ``detection``.
    """

    _rows: list[dict[str, float | int]] = dataclasses.field(
        default_factory=list
    )

    def __call__(
        self, step: interfaces.StepInfo
    ) -> interfaces.HookReturnValue:
        row: dict[str, float | int] = {"index": step.index}
        for channel, log_m in step.log_martingales.items():
            row[f"logM_{channel}"] = log_m
        for channel, p in step.p_values.items():
            row[f"p_{channel}"] = p
        row["detection"] = int(step.event is not None)
        self._rows.append(row)
        return interfaces.HookReturnValue.CONTINUE

    def __len__(self) -> int:
        return len(self._rows)

    def to_frame(self) -> pandas.DataFrame:
        frame = pandas.DataFrame.from_records(self._rows)
        if frame.empty:
            return pandas.DataFrame(columns=["index", "detection"])
        log_cols = sorted(
            (c for c in frame.columns if c.startswith("logM_")),
            key=lambda c: int(c[5:]),
        )
        p_cols = sorted(
            (c for c in frame.columns if c.startswith("p_")),
            key=lambda c: int(c[2:]),
        )
        return frame[["index", *log_cols, *p_cols, "detection"]]


@dataclasses.dataclass(slots=True)
class MaxDetectionsCondition(interfaces.MonitorHook):
    _max_detections: int

    def __call__(
        self, step: interfaces.StepInfo
    ) -> interfaces.HookReturnValue:
        if step.event is not None:
            self._max_detections -= 1
        if self._max_detections <= 0:
            return interfaces.HookReturnValue.STOP
        return interfaces.HookReturnValue.CONTINUE


@dataclasses.dataclass(frozen=True, slots=True)
class MaxPointsCondition(interfaces.MonitorHook):
    _max_points: int

    def __call__(
        self, step: interfaces.StepInfo
    ) -> interfaces.HookReturnValue:
        if step.index >= self._max_points:
            return interfaces.HookReturnValue.STOP
        return interfaces.HookReturnValue.CONTINUE
