"""Test the single- and multi-channel martingale detectors."""

import dataclasses
import math

import numpy
import pytest

import exmart as xm
from exmart import detectors, monitor, simulate, strangeness, utils
from exmart.datatypes import DetectorConfig, LabeledPoint, PointPool, StreamSpec


def _flip_stream(n_before=300, n_after=300, seed=1):
    rng = numpy.random.default_rng(seed)
    features = rng.uniform(-1.0, 1.0, (n_before + n_after, 2))
    labels = numpy.where(features[:, 0] >= 0.0, 1, -1)
    labels[n_before:] *= -1
    return StreamSpec(PointPool(features, labels), (n_before + 1,))


def _theta_in_range(p):
    return xm.martingale.THETA_LOW <= p <= xm.martingale.THETA_HIGH


def _three_class_stream(seed=2):
    rng = numpy.random.default_rng(seed)
    features = rng.uniform(-1.0, 1.0, (600, 2))
    angle = numpy.arctan2(features[:, 1], features[:, 0])
    labels = numpy.digitize(angle, [-math.pi / 3, math.pi / 3])
    labels[300:] = (labels[300:] + 1) % 3
    return StreamSpec(PointPool(features, labels), (301,))


def test_first_point_does_not_trigger():
    det = detectors.MartingaleDetector(DetectorConfig(threshold=4.0))
    step = det.observe(LabeledPoint(numpy.zeros(2), 1))
    assert step.index == 1
    assert step.event is None
    assert _theta_in_range(step.p_values[1])
    assert len(det.bag) == 1


def test_detection_resets_detector():
    det = detectors.MartingaleDetector(DetectorConfig(threshold=10.0))
    stream = _flip_stream()
    events = []
    for point in stream.pool:
        step = det.observe(point)
        if step.event is not None:
            events.append(step.event)
            assert len(det.bag) == 0
            assert det.log_martingale == 0.0
            assert step.log_martingales[1] >= math.log(10.0)
            assert step.event.log_martingale == step.log_martingales[1]
    assert events
    assert det.points_seen == len(stream)


def _run_until_detection(det, stream):
    for point in stream.pool:
        if det.observe(point).event is not None:
            return
    pytest.fail("no detection in the prefix stream")


def test_behavior_after_reset_ignores_history():
    cfg = DetectorConfig(threshold=10.0)
    rng_a = numpy.random.default_rng(100)
    rng_b = numpy.random.default_rng(200)
    det_a = detectors.MartingaleDetector(cfg, rng=rng_a)
    det_b = detectors.MartingaleDetector(cfg, rng=rng_b)
    _run_until_detection(det_a, _flip_stream(seed=1))
    _run_until_detection(det_b, _flip_stream(200, 400, seed=3))
    rng_b.bit_generator.state = rng_a.bit_generator.state
    for point in simulate.exchangeable_stream(150, seed=9).pool:
        step_a = det_a.observe(point)
        step_b = det_b.observe(point)
        assert step_a.p_values[1] == step_b.p_values[1]
        assert step_a.log_martingales[1] == step_b.log_martingales[1]
        assert (step_a.event is None) == (step_b.event is None)
    numpy.testing.assert_array_equal(det_a.bag.features, det_b.bag.features)


def test_detects_label_flip():
    det = detectors.MartingaleDetector(DetectorConfig(threshold=100.0))
    result = monitor.run_monitor(det, _flip_stream())
    assert any(301 <= t <= 400 for t in result.detection_indices)  # noqa: PLR2004


def test_same_seed_reproduces_run():
    stream = _flip_stream()
    runs = [
        monitor.run_monitor(
            detectors.MartingaleDetector(
                DetectorConfig(threshold=10.0, seed=42)
            ),
            stream,
        )
        for _ in range(2)
    ]
    numpy.testing.assert_array_equal(runs[0].p_values, runs[1].p_values)
    numpy.testing.assert_array_equal(
        runs[0].log_martingales, runs[1].log_martingales
    )
    assert runs[0].detections == runs[1].detections


def test_different_seeds_draw_different_p_values():
    stream = _flip_stream()
    runs = [
        monitor.run_monitor(
            detectors.MartingaleDetector(
                DetectorConfig(threshold=10.0, seed=seed)
            ),
            stream,
        )
        for seed in (1, 2)
    ]
    assert not numpy.array_equal(runs[0].p_values, runs[1].p_values)


def test_window_cap_bounds_bag():
    det = detectors.MartingaleDetector(
        DetectorConfig(threshold=1e300, window_cap=50)
    )
    for point in simulate.exchangeable_stream(200, seed=3).pool:
        det.observe(point)
        assert len(det.bag) <= 50  # noqa: PLR2004
    assert len(det.bag) == 50  # noqa: PLR2004


def test_label_outside_declared_set_is_rejected():
    det = detectors.MartingaleDetector(
        DetectorConfig(threshold=10.0), label_set=(-1, 1)
    )
    with pytest.raises(xm.interfaces.StreamFormatError):
        det.observe(LabeledPoint(numpy.zeros(2), 2))


def test_dimension_mismatch_is_rejected():
    det = detectors.MartingaleDetector(DetectorConfig(threshold=10.0))
    det.observe(LabeledPoint(numpy.zeros(2), 1))
    with pytest.raises(xm.interfaces.StreamFormatError):
        det.observe(LabeledPoint(numpy.zeros(3), 1))


def test_detector_config_validation():
    with pytest.raises(xm.interfaces.ConfigurationError):
        DetectorConfig(threshold=1.0)
    with pytest.raises(xm.interfaces.ConfigurationError):
        DetectorConfig(threshold=10.0, epsilon=1.0)
    with pytest.raises(xm.interfaces.ConfigurationError):
        DetectorConfig(threshold=10.0, window_cap=0)


def test_svm_detector_falls_back_on_single_label_bag():
    det = detectors.MartingaleDetector(
        DetectorConfig(threshold=10.0), strangeness.SvmProviderConfig()
    )
    rng = numpy.random.default_rng(6)
    for x in rng.uniform(-1.0, 1.0, (5, 2)):
        step = det.observe(LabeledPoint(x, 1))
        assert 0.0 < step.p_values[1] <= 1.0
    assert det.fallback_count == 5  # noqa: PLR2004
    det.observe(LabeledPoint(numpy.array([0.5, 0.5]), -1))
    assert det.fallback_count == 5  # noqa: PLR2004


def test_detector_cadence_overrides_svm_provider():
    det = detectors.MartingaleDetector(
        DetectorConfig(threshold=10.0, retrain_every=4),
        strangeness.SvmProviderConfig(),
    )
    provider = det._provider
    assert isinstance(provider, strangeness.SvmStrangeness)
    assert provider.config.retrain_every == 4  # noqa: PLR2004


def test_detector_for_stream_picks_channel_layout():
    cfg = DetectorConfig(threshold=10.0)
    knn = strangeness.KnnProviderConfig()
    binary = detectors.detector_for_stream(cfg, knn, (-1, 1))
    assert isinstance(binary, detectors.MartingaleDetector)
    assert binary.channels == (1,)
    multi = detectors.detector_for_stream(cfg, knn, (2, 0, 1))
    assert isinstance(multi, detectors.MultiChannelDetector)
    assert multi.channels == (0, 1, 2)
    assert isinstance(
        detectors.detector_for_stream(cfg, knn, (0, 1)),
        detectors.MultiChannelDetector,
    )


def test_multi_channel_needs_two_classes():
    with pytest.raises(xm.interfaces.ConfigurationError):
        detectors.MultiChannelDetector(
            DetectorConfig(threshold=10.0), label_set=(1,)
        )


def test_multi_channel_rejects_unknown_label():
    det = detectors.MultiChannelDetector(
        DetectorConfig(threshold=10.0), label_set=(0, 1, 2)
    )
    with pytest.raises(xm.interfaces.StreamFormatError):
        det.observe(LabeledPoint(numpy.zeros(2), 3))


def test_multi_channel_dimension_error_names_global_index():
    det = detectors.MultiChannelDetector(
        DetectorConfig(threshold=1e300), label_set=(0, 1, 2)
    )
    for i in range(5):
        det.observe(LabeledPoint(numpy.full(2, i / 10.0), i % 3))
    with pytest.raises(xm.interfaces.StreamFormatError, match="Point 6 "):
        det.observe(LabeledPoint(numpy.zeros(3), 0))
    assert det.points_seen == 5  # noqa: PLR2004


def test_multi_channel_reports_lowest_crossing_class():
    cfg = DetectorConfig(threshold=5.0)
    det = detectors.MultiChannelDetector(cfg, label_set=(0, 1, 2))
    seen = 0
    for point in _three_class_stream().pool:
        step = det.observe(point)
        assert set(step.p_values) == {0, 1, 2}
        if step.event is None:
            continue
        seen += 1
        crossing = [
            c
            for c, log_m in step.event.channel_log_martingales
            if log_m >= cfg.log_threshold
        ]
        assert step.event.channel == min(crossing)
        for sub in det.detectors:
            assert len(sub.bag) == 0
            assert sub.log_martingale == 0.0
    assert seen > 0


def test_binary_multi_channel_matches_single_detector():
    cfg = DetectorConfig(threshold=20.0, seed=5)
    multi = detectors.MultiChannelDetector(cfg, label_set=(-1, 1))
    single = detectors.MartingaleDetector(
        cfg, rng=utils.derive_rng(5, 0, utils.SeedPurpose.DETECTOR, 1)
    )
    for point in _flip_stream().pool:
        multi_step = multi.observe(point)
        single_step = single.observe(point)
        assert multi_step.p_values[1] == single_step.p_values[1]
        assert multi_step.log_martingales[1] == pytest.approx(
            single_step.log_martingales[1]
        )
        if multi_step.event is not None or single_step.event is not None:
            break


def test_provider_replace_keeps_other_settings():
    cfg = DetectorConfig(threshold=10.0, retrain_every=3)
    svm = strangeness.SvmProviderConfig(gamma=0.5, C=2.0)
    det = detectors.MartingaleDetector(cfg, svm)
    assert det._provider.config == dataclasses.replace(svm, retrain_every=3)


@pytest.mark.slow
def test_scenario_b_change_is_detected():
    cfg = simulate.scenario_config("B", num_segments=2, segment_len=1000)
    hits = 0
    for seed in range(10):
        stream = simulate.generate_stream(cfg, seed)
        det = detectors.MartingaleDetector(
            DetectorConfig(threshold=10.0, seed=seed)
        )
        result = monitor.run_monitor(det, stream)
        if any(1001 <= t <= 2000 for t in result.detection_indices):  # noqa: PLR2004
            hits += 1
    assert hits >= 6  # noqa: PLR2004


@pytest.mark.slow
def test_false_alarm_rate_respects_doob_bound():
    runs = 400
    maxima = []
    for seed in range(runs):
        det = detectors.MartingaleDetector(
            DetectorConfig(threshold=1e300, seed=seed)
        )
        result = monitor.run_monitor(
            det, simulate.exchangeable_stream(2000, seed=seed)
        )
        maxima.append(float(result.log_martingales[:, 0].max()))
    maxima_arr = numpy.asarray(maxima)
    for threshold in (4.0, 10.0, 20.0):
        rate = float(numpy.mean(maxima_arr >= math.log(threshold)))
        bound = 1.0 / threshold
        assert rate <= bound + 2.0 * math.sqrt(bound * (1.0 - bound) / runs)


@pytest.mark.slow
def test_p_values_are_uniform_without_change():
    rejections = 0
    for seed in range(50):
        det = detectors.MartingaleDetector(
            DetectorConfig(threshold=1e300, seed=seed)
        )
        result = monitor.run_monitor(
            det, simulate.exchangeable_stream(500, seed=seed)
        )
        if xm.evaluation.ks_uniform_test(result.p_values[:, 0]).p_value < 0.05:  # noqa: PLR2004
            rejections += 1
    assert rejections <= 7  # noqa: PLR2004


@pytest.mark.slow
def test_p_values_lose_uniformity_after_change():
    rejected = 0
    for seed in range(20):
        stream = _flip_stream(n_before=500, n_after=300, seed=seed)
        det = detectors.MartingaleDetector(
            DetectorConfig(threshold=1e300, seed=seed)
        )
        result = monitor.run_monitor(det, stream)
        delay = xm.evaluation.ks_rejection_delay(result.p_values[:, 0], 501)
        if delay is not None:
            rejected += 1
    assert rejected >= 16  # noqa: PLR2004
