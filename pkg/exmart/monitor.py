"""Contains the loop feeding a stream through a change detector."""

import collections.abc
import dataclasses
import logging
import typing

import numpy

from exmart import datatypes, interfaces

logger = logging.getLogger(__name__)


@typing.final
@dataclasses.dataclass(frozen=True, slots=True)
class MonitorResult:
    """
    Outcome of monitoring a stream.

    Parameters
    ----------
    detections : tuple[exmart.datatypes.DetectionEvent, ...]
        Detections in stream order.
    channels : tuple[int, ...]
        Channel identifiers of the detector.
    p_values : numpy.ndarray
        Matrix of shape (points processed, channels).
    log_martingales : numpy.ndarray
        Log martingale after each update, before any reset, same shape as
        `p_values`.
    """

    detections: tuple[datatypes.DetectionEvent, ...]
    channels: tuple[int, ...]
    p_values: interfaces.FloatArray
    log_martingales: interfaces.FloatArray

    @property
    def detection_indices(self) -> tuple[int, ...]:
        return tuple(event.index for event in self.detections)

    @property
    def points_processed(self) -> int:
        return self.p_values.shape[0]

    def channel_p_values(self, channel: int) -> interfaces.FloatArray:
        return self.p_values[:, self.channels.index(channel)]


def run_monitor(
    detector: interfaces.ChangeDetector,
    stream: typing.Union[
        datatypes.StreamSpec, collections.abc.Iterable[datatypes.LabeledPoint]
    ],
    hooks: typing.Optional[
        collections.abc.Sequence[interfaces.MonitorHook]
    ] = None,
) -> MonitorResult:
    """
    Feed every point of a stream through a detector.

    Parameters
    ----------
    detector : exmart.interfaces.ChangeDetector
        Single- or multi-channel detector, usually freshly constructed.
    stream : exmart.datatypes.StreamSpec | Iterable[LabeledPoint]
        Points in arrival order.
    hooks : typing.Optional[collections.abc.Sequence[MonitorHook]]
        Called after every point; may stop monitoring early.

    Returns
    -------
    MonitorResult
        Detections and per-step trajectories.
    """
    points: collections.abc.Iterable[datatypes.LabeledPoint]
    if isinstance(stream, datatypes.StreamSpec):
        points = stream.pool
    else:
        points = stream
    hook_list = [] if hooks is None else list(hooks)
    channels = detector.channels
    detections: list[datatypes.DetectionEvent] = []
    p_rows: list[list[float]] = []
    log_rows: list[list[float]] = []

    for point in points:
        step = detector.observe(point)
        p_rows.append([step.p_values[c] for c in channels])
        log_rows.append([step.log_martingales[c] for c in channels])
        if step.event is not None:
            detections.append(step.event)

        end_on_completion = False
        short_circuit = False
        for hook_func in hook_list:
            rval = hook_func(step)
            if rval is interfaces.HookReturnValue.STOP_SHORTCIRCUIT:
                short_circuit = True
                break
            if rval is interfaces.HookReturnValue.STOP:
                end_on_completion = True
        if short_circuit or end_on_completion:
            logger.debug("Monitoring stopped by hook at point %d", step.index)
            break

    width = len(channels)
    return MonitorResult(
        tuple(detections),
        tuple(int(c) for c in channels),
        numpy.asarray(p_rows, dtype=numpy.float64).reshape(-1, width),
        numpy.asarray(log_rows, dtype=numpy.float64).reshape(-1, width),
    )
