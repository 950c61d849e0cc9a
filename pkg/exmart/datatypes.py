"""Contains classes which define points, streams and detector settings."""

import collections.abc
import dataclasses
import math
import typing

import numpy

from exmart import interfaces

_MAX_LOG_FLOAT = math.log(numpy.finfo(numpy.float64).max)


@typing.final
@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class LabeledPoint:
    """
    One observation of a labeled stream.

    Parameters
    ----------
    features : numpy.ndarray
        Real-valued feature vector of dimension m.
    label : int
        Class identifier (-1/+1 for binary streams).
    """

    features: interfaces.FloatArray
    label: int

    def __post_init__(self) -> None:
        features = numpy.asarray(self.features, dtype=numpy.float64)
        if features.ndim != 1:
            raise interfaces.StreamFormatError(
                f"Point features must be one-dimensional, got shape "
                f"{features.shape}"
            )
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "label", int(self.label))

    @property
    def dim(self) -> int:
        return self.features.shape[0]

    def relabel(self, label: int) -> "LabeledPoint":
        return LabeledPoint(self.features, label)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabeledPoint):
            return NotImplemented
        return self.label == other.label and numpy.array_equal(
            self.features, other.features
        )

    def __repr__(self) -> str:
        return f"LabeledPoint({self.features.tolist()}, {self.label})"


def _as_arrays(
    features: typing.Any, labels: typing.Any
) -> tuple[interfaces.FloatArray, interfaces.IntArray]:
    feat = numpy.asarray(features, dtype=numpy.float64)
    lab = numpy.asarray(labels, dtype=numpy.int64)
    if feat.ndim == 1 and feat.shape[0] == 0:
        feat = feat.reshape(0, 0)
    if feat.ndim != 2:  # noqa: PLR2004
        raise interfaces.StreamFormatError(
            f"Feature matrix must be two-dimensional, got shape {feat.shape}"
        )
    if lab.ndim != 1 or lab.shape[0] != feat.shape[0]:
        raise interfaces.StreamFormatError(
            f"Expected {feat.shape[0]} labels, got shape {lab.shape}"
        )
    return feat, lab


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class PointPool(collections.abc.Sequence):
    """
    Ordered, immutable collection of labeled points.

    Stored column-wise as a feature matrix and a label vector.

    Parameters
    ----------
    features : numpy.ndarray
        Matrix of shape (n, m).
    labels : numpy.ndarray
        Integer vector of length n.
    """

    features: interfaces.FloatArray
    labels: interfaces.IntArray

    def __post_init__(self) -> None:
        feat, lab = _as_arrays(self.features, self.labels)
        object.__setattr__(self, "features", feat)
        object.__setattr__(self, "labels", lab)

    @classmethod
    def from_points(
        cls, points: collections.abc.Iterable[LabeledPoint]
    ) -> "PointPool":
        point_list = list(points)
        if not point_list:
            return cls(numpy.zeros((0, 0)), numpy.zeros(0, dtype=numpy.int64))
        dims = {point.dim for point in point_list}
        if len(dims) != 1:
            raise interfaces.StreamFormatError(
                f"Points have inconsistent dimensions {sorted(dims)}"
            )
        return cls(
            numpy.stack([point.features for point in point_list]),
            numpy.array([point.label for point in point_list]),
        )

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def label_set(self) -> tuple[int, ...]:
        return tuple(int(label) for label in numpy.unique(self.labels))

    def take(self, indices: collections.abc.Sequence[int]) -> "PointPool":
        idx = numpy.asarray(indices, dtype=numpy.int64)
        return PointPool(self.features[idx], self.labels[idx])

    def with_labels(self, labels: interfaces.IntArray) -> "PointPool":
        return PointPool(self.features, labels)

    def __len__(self) -> int:
        return self.labels.shape[0]

    @typing.overload
    def __getitem__(self, item: int) -> LabeledPoint: ...

    @typing.overload
    def __getitem__(self, item: slice) -> "PointPool": ...

    def __getitem__(self, item):
        if isinstance(item, slice):
            return PointPool(self.features[item], self.labels[item])
        return LabeledPoint(self.features[item], int(self.labels[item]))

    def __iter__(self) -> collections.abc.Iterator[LabeledPoint]:
        for row, label in zip(self.features, self.labels, strict=True):
            yield LabeledPoint(row, int(label))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PointPool):
            return NotImplemented
        return numpy.array_equal(
            self.features, other.features
        ) and numpy.array_equal(self.labels, other.labels)

    def __repr__(self) -> str:
        return f"PointPool(n={len(self)}, dim={self.dim})"


def concat_pools(pools: collections.abc.Sequence[PointPool]) -> PointPool:
    non_empty = [pool for pool in pools if len(pool) > 0]
    if not non_empty:
        return PointPool(numpy.zeros((0, 0)), numpy.zeros(0, dtype=numpy.int64))
    dims = {pool.dim for pool in non_empty}
    if len(dims) != 1:
        raise interfaces.StreamFormatError(
            f"Cannot concatenate pools of dimensions {sorted(dims)}"
        )
    return PointPool(
        numpy.concatenate([pool.features for pool in non_empty]),
        numpy.concatenate([pool.labels for pool in non_empty]),
    )


@typing.final
@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class StreamSpec:
    """
    Labeled stream together with its ground-truth change points.

    Parameters
    ----------
    pool : PointPool
        Points of the stream in arrival order.
    change_points : tuple[int, ...]
        Sorted 1-based indices of the first point of each new concept.
    """

    pool: PointPool
    change_points: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        change_points = tuple(int(c) for c in self.change_points)
        n = len(self.pool)
        previous = 1
        for c in change_points:
            if c <= previous or c > n:
                raise interfaces.StreamFormatError(
                    f"Invalid change points {change_points} for a stream of "
                    f"{n} points"
                )
            previous = c
        object.__setattr__(self, "change_points", change_points)

    @property
    def points(self) -> PointPool:
        return self.pool

    @property
    def features(self) -> interfaces.FloatArray:
        return self.pool.features

    @property
    def labels(self) -> interfaces.IntArray:
        return self.pool.labels

    @property
    def label_set(self) -> tuple[int, ...]:
        return self.pool.label_set

    def __len__(self) -> int:
        return len(self.pool)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StreamSpec):
            return NotImplemented
        return (
            self.change_points == other.change_points
            and self.pool == other.pool
        )

    def __repr__(self) -> str:
        return (
            f"StreamSpec(n={len(self)}, dim={self.pool.dim}, "
            f"changes={len(self.change_points)})"
        )


@typing.final
@dataclasses.dataclass(frozen=True, slots=True)
class DetectorConfig:
    """
    Settings of a martingale change detector.

    Parameters
    ----------
    threshold : float
        Detection threshold lambda, > 1.
    epsilon : float (default: 0.92)
        Exponent of the randomized power martingale, in (0, 1).
    window_cap : typing.Optional[int] (default: None)
        Maximum number of points kept in the bag; unbounded if None.
    seed : int (default: 0)
        Seed of the detector's random stream.
    retrain_every : int (default: 1)
        Retraining cadence handed to model-based strangeness providers.
    """

    threshold: float
    epsilon: float = 0.92
    window_cap: typing.Optional[int] = None
    seed: int = 0
    retrain_every: int = 1

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 1.0:
            raise interfaces.ConfigurationError(
                f"epsilon must lie in (0, 1), got {self.epsilon}"
            )
        if not self.threshold > 1.0:
            raise interfaces.ConfigurationError(
                f"threshold must be greater than 1, got {self.threshold}"
            )
        if self.window_cap is not None and self.window_cap < 1:
            raise interfaces.ConfigurationError(
                f"window_cap must be positive, got {self.window_cap}"
            )
        if self.retrain_every < 1:
            raise interfaces.ConfigurationError(
                f"retrain_every must be positive, got {self.retrain_every}"
            )

    @property
    def log_threshold(self) -> float:
        return math.log(self.threshold)


@typing.final
@dataclasses.dataclass(frozen=True, slots=True)
class TestDesign:
    """
    Size and type-II error of a one-sided sequential test.

    Parameters
    ----------
    alpha : float
        Size of the test, in (0, 1).
    beta : float (default: 0.0)
        Probability of a type-II error, in [0, 1).
    """

    __test__: typing.ClassVar[bool] = False

    alpha: float
    beta: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise interfaces.ConfigurationError(
                f"alpha must lie in (0, 1), got {self.alpha}"
            )
        if not 0.0 <= self.beta < 1.0:
            raise interfaces.ConfigurationError(
                f"beta must lie in [0, 1), got {self.beta}"
            )


@typing.final
@dataclasses.dataclass(frozen=True, slots=True)
class DetectionEvent:
    """
    Change declared by a detector.

    Parameters
    ----------
    index : int
        Global 1-based index of the point at which the threshold was crossed.
    log_martingale : float
        Natural log of the martingale of the triggering channel.
    channel : int
        Class identifier of the triggering channel.
    channel_log_martingales : tuple[tuple[int, float], ...]
        Log martingale of every channel at the crossing.
    """

    index: int
    log_martingale: float
    channel: int
    channel_log_martingales: tuple[tuple[int, float], ...] = ()

    @property
    def martingale_value(self) -> float:
        if self.log_martingale >= _MAX_LOG_FLOAT:
            return math.inf
        return math.exp(self.log_martingale)


class PointBag:
    """
    Growable, ordered store of the points retained by a detector.

    Points are kept contiguously so providers receive plain matrix views.
    The revision counter changes whenever points leave the bag, which lets
    providers tell a pure extension of a cached bag from any other change.
    """

    __slots__ = ("_features", "_labels", "_start", "_stop", "_revision")

    def __init__(self, dim: typing.Optional[int] = None) -> None:
        self._features = numpy.zeros((0, dim or 0))
        self._labels = numpy.zeros(0, dtype=numpy.int64)
        self._start = 0
        self._stop = 0
        self._revision = 0

    @property
    def features(self) -> interfaces.FloatArray:
        return self._features[self._start : self._stop]

    @property
    def labels(self) -> interfaces.IntArray:
        return self._labels[self._start : self._stop]

    @property
    def revision(self) -> int:
        return self._revision

    @property
    def dim(self) -> typing.Optional[int]:
        if self._stop == self._start and self._features.shape[1] == 0:
            return None
        return self._features.shape[1]

    def __len__(self) -> int:
        return self._stop - self._start

    def append(self, point: LabeledPoint) -> None:
        dim = self.dim
        if dim is None:
            self._features = numpy.zeros((16, point.dim))
            self._labels = numpy.zeros(16, dtype=numpy.int64)
            self._start = self._stop = 0
        elif dim != point.dim:
            raise interfaces.StreamFormatError(
                f"Point of dimension {point.dim} does not match bag "
                f"dimension {dim}"
            )
        if self._stop == self._features.shape[0]:
            self._compact()
        self._features[self._stop] = point.features
        self._labels[self._stop] = point.label
        self._stop += 1

    def evict_oldest(self) -> None:
        if len(self) == 0:
            raise IndexError("Cannot evict from an empty bag")
        self._start += 1
        self._revision += 1

    def clear(self) -> None:
        self._start = self._stop = 0
        self._revision += 1

    def _compact(self) -> None:
        n = len(self)
        capacity = max(16, 2 * n)
        features = numpy.zeros((capacity, self._features.shape[1]))
        labels = numpy.zeros(capacity, dtype=numpy.int64)
        features[:n] = self.features
        labels[:n] = self.labels
        self._features, self._labels = features, labels
        self._start, self._stop = 0, n

    def extended(self, point: LabeledPoint) -> PointPool:
        return PointPool(
            numpy.vstack([self.features, point.features[numpy.newaxis, :]])
            if len(self) > 0
            else point.features[numpy.newaxis, :],
            numpy.append(self.labels, point.label),
        )
