"""Test the monitoring loop and its hooks."""

import numpy

import exmart as xm
from exmart import detectors, hooks, interfaces, monitor, simulate
from exmart.datatypes import DetectorConfig


class _ShortCircuit(interfaces.MonitorHook):
    def __init__(self, at):
        self.at = at

    def __call__(self, step):
        if step.index >= self.at:
            return interfaces.HookReturnValue.STOP_SHORTCIRCUIT
        return interfaces.HookReturnValue.CONTINUE


def _detector(threshold=10.0):
    return detectors.MartingaleDetector(DetectorConfig(threshold=threshold))


def test_monitor_processes_whole_stream():
    stream = simulate.exchangeable_stream(120, seed=1)
    result = monitor.run_monitor(_detector(1e300), stream)
    assert result.points_processed == 120  # noqa: PLR2004
    assert result.channels == (1,)
    assert result.p_values.shape == (120, 1)
    assert result.log_martingales.shape == (120, 1)
    assert result.detections == ()
    numpy.testing.assert_array_equal(
        result.channel_p_values(1), result.p_values[:, 0]
    )


def test_monitor_accepts_point_iterables():
    stream = simulate.exchangeable_stream(30, seed=2)
    result = monitor.run_monitor(_detector(1e300), list(stream.pool))
    assert result.points_processed == 30  # noqa: PLR2004


def test_max_points_stops_monitoring():
    stream = simulate.exchangeable_stream(100, seed=3)
    result = monitor.run_monitor(
        _detector(1e300), stream, [hooks.MaxPointsCondition(25)]
    )
    assert result.points_processed == 25  # noqa: PLR2004


def test_max_detections_stops_after_first_detection():
    rng = numpy.random.default_rng(0)
    features = rng.uniform(-1.0, 1.0, (600, 2))
    labels = numpy.where(features[:, 0] >= 0.0, 1, -1)
    labels[300:] *= -1
    flipped = xm.datatypes.StreamSpec(
        xm.datatypes.PointPool(features, labels), (301,)
    )
    result = monitor.run_monitor(
        _detector(10.0), flipped, [hooks.MaxDetectionsCondition(1)]
    )
    assert len(result.detections) == 1
    assert result.points_processed == result.detections[0].index


def test_short_circuit_skips_remaining_hooks():
    recorder = hooks.TrajectoryRecorder()
    stream = simulate.exchangeable_stream(50, seed=4)
    result = monitor.run_monitor(
        _detector(1e300), stream, [_ShortCircuit(10), recorder]
    )
    assert result.points_processed == 10  # noqa: PLR2004
    assert len(recorder) == 9  # noqa: PLR2004


def test_stop_lets_remaining_hooks_run():
    recorder = hooks.TrajectoryRecorder()
    stream = simulate.exchangeable_stream(50, seed=4)
    monitor.run_monitor(
        _detector(1e300), stream, [hooks.MaxPointsCondition(10), recorder]
    )
    assert len(recorder) == 10  # noqa: PLR2004


def test_trajectory_frame_layout():
    recorder = hooks.TrajectoryRecorder()
    rng = numpy.random.default_rng(5)
    features = rng.uniform(-1.0, 1.0, (40, 2))
    labels = rng.integers(0, 3, 40)
    labels[:3] = [0, 1, 2]
    stream = xm.datatypes.StreamSpec(xm.datatypes.PointPool(features, labels))
    det = detectors.MultiChannelDetector(
        DetectorConfig(threshold=1e300), label_set=(0, 1, 2)
    )
    result = monitor.run_monitor(det, stream, [recorder])
    frame = recorder.to_frame()
    assert list(frame.columns) == [
        "index",
        "logM_0",
        "logM_1",
        "logM_2",
        "p_0",
        "p_1",
        "p_2",
        "detection",
    ]
    assert len(frame) == 40  # noqa: PLR2004
    numpy.testing.assert_array_equal(frame["index"], numpy.arange(1, 41))
    numpy.testing.assert_array_equal(frame["p_2"], result.p_values[:, 2])
    assert frame["detection"].sum() == 0


def test_empty_trajectory_frame():
    frame = hooks.TrajectoryRecorder().to_frame()
    assert frame.empty
    assert list(frame.columns) == ["index", "detection"]
