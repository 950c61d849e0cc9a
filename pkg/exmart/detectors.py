"""Contains classes which implement online martingale change detectors."""

import collections.abc
import dataclasses
import logging
import math
import typing

import numpy

from exmart import datatypes, interfaces, martingale, strangeness, utils

logger = logging.getLogger(__name__)


def _provider_for(
    factory: interfaces.ProviderFactory, config: datatypes.DetectorConfig
) -> interfaces.StrangenessProvider:
    if (
        isinstance(factory, strangeness.SvmProviderConfig)
        and config.retrain_every > 1
    ):
        factory = dataclasses.replace(
            factory, retrain_every=config.retrain_every
        )
    return factory.build()


@typing.final
class MartingaleDetector(interfaces.ChangeDetector):
    """
    Randomized power martingale test over a single binary channel.

    Every observed point is scored against the retained bag, converted into
    a randomized p-value and folded into the log martingale.  Crossing the
    threshold emits a DetectionEvent and restarts the test from an empty bag.

    Parameters
    ----------
    config : exmart.datatypes.DetectorConfig
        Threshold, exponent, window cap and seed.
    provider : exmart.interfaces.ProviderFactory (default: KnnProviderConfig())
        Configuration building this detector's strangeness provider.
    channel : int (default: 1)
        Identifier reported in detection events.
    label_set : typing.Optional[collections.abc.Collection[int]]
        Labels the stream may carry; unchecked if None.
    rng : typing.Optional[numpy.random.Generator] (default: None)
        Source of tie-breaking draws.  Derived from ``config.seed`` and
        `replica` if None.
    replica : int (default: 0)
        Replica index mixed into the derived seed.
    """

    __slots__ = (
        "_config",
        "_provider",
        "_fallback",
        "_channel",
        "_label_set",
        "_rng",
        "_bag",
        "_log_m",
        "_points_seen",
        "_last_p",
        "_fallbacks",
    )

    def __init__(
        self,
        config: datatypes.DetectorConfig,
        provider: interfaces.ProviderFactory = strangeness.KnnProviderConfig(),
        channel: int = 1,
        label_set: typing.Optional[collections.abc.Collection[int]] = None,
        rng: typing.Optional[numpy.random.Generator] = None,
        replica: int = 0,
    ) -> None:
        self._config = config
        self._provider = _provider_for(provider, config)
        self._fallback = strangeness.KnnProviderConfig().build()
        self._channel = interfaces.ChannelId(int(channel))
        self._label_set = (
            None if label_set is None else frozenset(int(c) for c in label_set)
        )
        if rng is None:
            rng = utils.derive_rng(
                config.seed, replica, utils.SeedPurpose.DETECTOR, 0
            )
        self._rng = rng
        self._bag = datatypes.PointBag()
        self._log_m = 0.0
        self._points_seen = 0
        self._last_p: typing.Optional[float] = None
        self._fallbacks = 0

    @property
    def config(self) -> datatypes.DetectorConfig:
        return self._config

    @property
    def channel(self) -> interfaces.ChannelId:
        return self._channel

    @property
    def channels(self) -> tuple[interfaces.ChannelId, ...]:
        return (self._channel,)

    @property
    def points_seen(self) -> int:
        return self._points_seen

    @property
    def log_martingale(self) -> float:
        return self._log_m

    @property
    def martingale(self) -> float:
        return math.exp(min(self._log_m, 709.0))

    @property
    def bag(self) -> datatypes.PointBag:
        return self._bag

    @property
    def last_p_value(self) -> typing.Optional[float]:
        return self._last_p

    @property
    def fallback_count(self) -> int:
        """Number of steps scored by the kNN fallback provider."""
        return self._fallbacks

    def _check(self, point: datatypes.LabeledPoint) -> None:
        if self._label_set is not None and point.label not in self._label_set:
            raise interfaces.StreamFormatError(
                f"Label {point.label} at point {self._points_seen + 1} is "
                f"outside the declared label set {sorted(self._label_set)}"
            )
        dim = self._bag.dim
        if dim is not None and point.dim != dim:
            raise interfaces.StreamFormatError(
                f"Point {self._points_seen + 1} has dimension {point.dim}, "
                f"expected {dim}"
            )

    def _score(self, point: datatypes.LabeledPoint) -> interfaces.FloatArray:
        try:
            return self._provider.score(self._bag, point)
        except interfaces.ProviderUntrainableError as err:
            self._fallbacks += 1
            logger.debug(
                "Channel %d falls back to kNN strangeness: %s",
                self._channel,
                err,
            )
            return self._fallback.score(self._bag, point)

    def evaluate(self, point: datatypes.LabeledPoint) -> float:
        """
        Score a point and fold its p-value into the martingale.

        The bag is left untouched; follow with `commit` or `reset`.

        Returns
        -------
        float
            Randomized p-value of the point.
        """
        self._check(point)
        scores = self._score(point)
        theta = martingale.draw_theta(self._rng)
        p = martingale.compute_p_value(scores, theta)
        self._log_m += martingale.log_update_factor(p, self._config.epsilon)
        self._last_p = p
        return p

    def crossed(self) -> bool:
        return self._log_m >= self._config.log_threshold

    def commit(self, point: datatypes.LabeledPoint) -> None:
        """Retain a point, evicting the oldest one beyond the window cap."""
        self._bag.append(point)
        cap = self._config.window_cap
        if cap is not None and len(self._bag) > cap:
            self._bag.evict_oldest()

    def reset(self) -> None:
        """Clear the bag and return the martingale to one."""
        self._bag.clear()
        self._provider.reset()
        self._fallback.reset()
        self._log_m = 0.0

    def observe(self, point: datatypes.LabeledPoint) -> interfaces.StepInfo:
        p = self.evaluate(point)
        self._points_seen += 1
        log_m = self._log_m
        event = None
        if self.crossed():
            event = datatypes.DetectionEvent(
                self._points_seen,
                log_m,
                self._channel,
                ((self._channel, log_m),),
            )
            logger.info(
                "Change detected at point %d (log M = %.3f)",
                self._points_seen,
                log_m,
            )
            self.reset()
        else:
            self.commit(point)
        return interfaces.StepInfo(
            self._points_seen,
            {self._channel: p},
            {self._channel: log_m},
            event,
        )


@typing.final
class MultiChannelDetector(interfaces.ChangeDetector):
    """
    One-vs-rest martingale detector for multi-class streams.

    Channel c sees the stream relabeled +1 where the label equals c and -1
    elsewhere.  When any channel crosses the threshold the lowest crossing
    class id is reported and every channel restarts.

    Parameters
    ----------
    config : exmart.datatypes.DetectorConfig
        Settings shared by all channels.
    provider : exmart.interfaces.ProviderFactory (default: KnnProviderConfig())
        Configuration building one provider per channel.
    label_set : collections.abc.Collection[int]
        Declared classes of the stream; at least two.
    replica : int (default: 0)
        Replica index mixed into the channel seeds.
    """

    __slots__ = ("_channels", "_detectors", "_points_seen", "_config")

    def __init__(
        self,
        config: datatypes.DetectorConfig,
        provider: interfaces.ProviderFactory = strangeness.KnnProviderConfig(),
        label_set: collections.abc.Collection[int] = (-1, 1),
        replica: int = 0,
    ) -> None:
        channels = tuple(sorted({int(c) for c in label_set}))
        if len(channels) < 2:  # noqa: PLR2004
            raise interfaces.ConfigurationError(
                f"Need at least two classes, got {channels}"
            )
        self._config = config
        self._channels = tuple(interfaces.ChannelId(c) for c in channels)
        self._detectors = tuple(
            MartingaleDetector(
                config,
                provider,
                channel=c,
                rng=utils.derive_rng(
                    config.seed, replica, utils.SeedPurpose.DETECTOR, pos
                ),
            )
            for pos, c in enumerate(channels)
        )
        self._points_seen = 0

    @property
    def config(self) -> datatypes.DetectorConfig:
        return self._config

    @property
    def channels(self) -> tuple[interfaces.ChannelId, ...]:
        return self._channels

    @property
    def points_seen(self) -> int:
        return self._points_seen

    @property
    def detectors(self) -> tuple[MartingaleDetector, ...]:
        return self._detectors

    @property
    def fallback_count(self) -> int:
        return sum(det.fallback_count for det in self._detectors)

    def reset(self) -> None:
        for det in self._detectors:
            det.reset()

    def observe(self, point: datatypes.LabeledPoint) -> interfaces.StepInfo:
        if point.label not in self._channels:
            raise interfaces.StreamFormatError(
                f"Label {point.label} at point {self._points_seen + 1} is "
                f"outside the declared label set {list(self._channels)}"
            )
        # channels retain the same points, so one bag gives the dimension
        dim = self._detectors[0].bag.dim
        if dim is not None and point.dim != dim:
            raise interfaces.StreamFormatError(
                f"Point {self._points_seen + 1} has dimension {point.dim}, "
                f"expected {dim}"
            )
        relabeled = [
            point.relabel(1 if point.label == c else -1)
            for c in self._channels
        ]
        p_values = {
            c: det.evaluate(rp)
            for c, det, rp in zip(
                self._channels, self._detectors, relabeled, strict=True
            )
        }
        self._points_seen += 1
        log_ms = {
            c: det.log_martingale
            for c, det in zip(self._channels, self._detectors, strict=True)
        }
        event = None
        for c, det in zip(self._channels, self._detectors, strict=True):
            if det.crossed():
                event = datatypes.DetectionEvent(
                    self._points_seen,
                    log_ms[c],
                    c,
                    tuple(log_ms.items()),
                )
                break
        if event is not None:
            logger.info(
                "Change detected at point %d on channel %d (log M = %.3f)",
                event.index,
                event.channel,
                event.log_martingale,
            )
            self.reset()
        else:
            for det, rp in zip(self._detectors, relabeled, strict=True):
                det.commit(rp)
        return interfaces.StepInfo(self._points_seen, p_values, log_ms, event)


def detector_for_stream(
    config: datatypes.DetectorConfig,
    provider: interfaces.ProviderFactory,
    label_set: collections.abc.Collection[int],
    replica: int = 0,
) -> interfaces.ChangeDetector:
    """
    Build the detector suited to a stream's label set.

    Binary streams labeled -1/+1 get a single channel; any other label set
    gets one one-vs-rest channel per class.
    """
    labels = {int(c) for c in label_set}
    if labels <= {-1, 1}:
        return MartingaleDetector(
            config, provider, channel=1, label_set=(-1, 1), replica=replica
        )
    return MultiChannelDetector(config, provider, labels, replica=replica)
