"""Contains classes which implement strangeness (nonconformity) providers."""

import collections.abc
import dataclasses
import logging
import typing

import numpy
import sklearn.exceptions
import sklearn.svm

from exmart import datatypes, interfaces

logger = logging.getLogger(__name__)

# sorts above every genuine ratio without overflowing comparisons
SENTINEL = float(numpy.finfo(numpy.float64).max / 2.0)


def _distances_to(
    features: interfaces.FloatArray, x: interfaces.FloatArray
) -> interfaces.FloatArray:
    return numpy.sqrt(numpy.sum((features - x) ** 2, axis=1))


def _smallest(values: interfaces.FloatArray, k: int) -> interfaces.FloatArray:
    row = numpy.full(k, numpy.inf)
    if values.shape[0] > 0:
        best = numpy.sort(values)[:k]
        row[: best.shape[0]] = best
    return row


def _neighbor_tables(
    features: interfaces.FloatArray, labels: interfaces.IntArray, k: int
) -> tuple[interfaces.FloatArray, interfaces.FloatArray]:
    n = labels.shape[0]
    same = numpy.full((n, k), numpy.inf)
    other = numpy.full((n, k), numpy.inf)
    for i in range(n):
        d = _distances_to(features, features[i])
        same_mask = labels == labels[i]
        same_mask[i] = False
        other_mask = labels != labels[i]
        same[i] = _smallest(d[same_mask], k)
        other[i] = _smallest(d[other_mask], k)
    return same, other


def _ratio_scores(
    same: interfaces.FloatArray, other: interfaces.FloatArray
) -> interfaces.FloatArray:
    same_finite = numpy.isfinite(same)
    other_finite = numpy.isfinite(other)
    numerator = numpy.where(same_finite, same, 0.0).sum(axis=1)
    denominator = numpy.where(other_finite, other, 0.0).sum(axis=1)
    has_same = same_finite.any(axis=1)
    has_other = other_finite.any(axis=1)

    scores = numpy.zeros(same.shape[0])
    with numpy.errstate(divide="ignore", invalid="ignore"):
        ratio = numpy.where(
            denominator > 0.0,
            numerator / denominator,
            numpy.where(numerator > 0.0, SENTINEL, 0.0),
        )
    ratio = numpy.minimum(ratio, SENTINEL)
    scores = numpy.where(has_same & has_other, ratio, scores)
    scores = numpy.where(has_same & ~has_other, SENTINEL, scores)
    return scores


def _as_pool(
    bag: typing.Union[
        datatypes.PointPool, collections.abc.Sequence[datatypes.LabeledPoint]
    ],
) -> datatypes.PointPool:
    if isinstance(bag, datatypes.PointPool):
        return bag
    return datatypes.PointPool.from_points(bag)


@typing.final
@dataclasses.dataclass(frozen=True, slots=True)
class KnnProviderConfig:
    """
    Settings of the nearest-neighbor strangeness measure.

    Parameters
    ----------
    k : int (default: 1)
        Number of neighbors per class entering each distance sum.
    """

    k: int = 1

    def __post_init__(self) -> None:
        if self.k < 1:
            raise interfaces.ConfigurationError(
                f"k must be at least 1, got {self.k}"
            )

    @property
    def name(self) -> str:
        return "knn"

    def build(self) -> "KnnStrangeness":
        return KnnStrangeness(self)


@typing.final
@dataclasses.dataclass(frozen=True, slots=True)
class SvmProviderConfig:
    """
    Settings of the SVM hyperplane-distance strangeness measure.

    Parameters
    ----------
    gamma : typing.Optional[float] (default: None)
        Width of the Gaussian kernel; None means 1/m for m features.
    C : float (default: 10.0)
        Box constraint of the soft-margin dual.
    retrain_every : int (default: 1)
        Number of scoring calls between refits; the cached model scores the
        bag in between.
    """

    gamma: typing.Optional[float] = None
    C: float = 10.0
    retrain_every: int = 1

    def __post_init__(self) -> None:
        if self.gamma is not None and self.gamma <= 0.0:
            raise interfaces.ConfigurationError(
                f"gamma must be positive, got {self.gamma}"
            )
        if self.C <= 0.0:
            raise interfaces.ConfigurationError(
                f"C must be positive, got {self.C}"
            )
        if self.retrain_every < 1:
            raise interfaces.ConfigurationError(
                f"retrain_every must be positive, got {self.retrain_every}"
            )

    @property
    def name(self) -> str:
        return "svm"

    def build(self) -> "SvmStrangeness":
        return SvmStrangeness(self)


def knn_strangeness(
    bag: typing.Union[
        datatypes.PointPool, collections.abc.Sequence[datatypes.LabeledPoint]
    ],
    cfg: KnnProviderConfig = KnnProviderConfig(),
) -> interfaces.FloatArray:
    """
    Nearest-neighbor distance ratio of every point in a bag.

    For each point the score is the sum of the distances to its k nearest
    same-label points divided by the sum of the distances to its k nearest
    other-label points.  When fewer than k neighbors exist, the available
    ones are summed.

    Parameters
    ----------
    bag : exmart.datatypes.PointPool | Sequence[LabeledPoint]
        Nonempty bag of points.
    cfg : KnnProviderConfig (default: KnnProviderConfig())
        Number of neighbors.

    Returns
    -------
    numpy.ndarray
        One nonnegative score per point.

    Notes
    -----
    A point without any same-label neighbor scores 0.  A point with
    same-label neighbors but no other-label neighbor scores `SENTINEL`.
    The zero rule wins over the sentinel: the lone member of its class, as
    (5, -1) in the bag {(0, +1), (0.1, +1), (5, -1)}, scores 0.
    """
    pool = _as_pool(bag)
    if len(pool) == 0:
        raise ValueError("Cannot score an empty bag")
    same, other = _neighbor_tables(pool.features, pool.labels, cfg.k)
    return _ratio_scores(same, other)


class _KnnCache(typing.NamedTuple):
    revision: int
    size: int
    same: interfaces.FloatArray
    other: interfaces.FloatArray
    last_features: typing.Optional[interfaces.FloatArray]
    last_label: typing.Optional[int]


@typing.final
class KnnStrangeness(interfaces.StrangenessProvider):
    """
    Incremental nearest-neighbor strangeness provider.

    Keeps the k smallest same-label and other-label distances of every bag
    member, so extending the bag by one point costs O(n) distance
    evaluations.  Any other change of the bag triggers a full rebuild.
    Scores equal those of `knn_strangeness`.
    """

    __slots__ = ("_cfg", "_cache", "_pending")

    def __init__(self, cfg: KnnProviderConfig = KnnProviderConfig()) -> None:
        self._cfg = cfg
        self._cache: typing.Optional[_KnnCache] = None
        self._pending: typing.Optional[_KnnCache] = None

    @property
    def config(self) -> KnnProviderConfig:
        return self._cfg

    def reset(self) -> None:
        self._cache = None
        self._pending = None

    def _matches(
        self, cache: typing.Optional[_KnnCache], bag: datatypes.PointBag
    ) -> bool:
        if cache is None:
            return False
        if cache.revision != bag.revision or cache.size != len(bag):
            return False
        if cache.last_features is None or len(bag) == 0:
            return cache.size == 0
        return int(bag.labels[-1]) == cache.last_label and numpy.array_equal(
            bag.features[-1], cache.last_features
        )

    def _tables_for(self, bag: datatypes.PointBag) -> _KnnCache:
        if self._matches(self._cache, bag):
            return typing.cast(_KnnCache, self._cache)
        if self._matches(self._pending, bag):
            self._cache = self._pending
            return typing.cast(_KnnCache, self._cache)
        k = self._cfg.k
        if len(bag) == 0:
            same = numpy.zeros((0, k))
            other = numpy.zeros((0, k))
            last_features, last_label = None, None
        else:
            same, other = _neighbor_tables(bag.features, bag.labels, k)
            last_features = bag.features[-1].copy()
            last_label = int(bag.labels[-1])
        self._cache = _KnnCache(
            bag.revision, len(bag), same, other, last_features, last_label
        )
        return self._cache

    def score(
        self, bag: datatypes.PointBag, candidate: datatypes.LabeledPoint
    ) -> interfaces.FloatArray:
        k = self._cfg.k
        tables = self._tables_for(bag)
        if len(bag) == 0:
            d = numpy.zeros(0)
        else:
            d = _distances_to(bag.features, candidate.features)
        same_mask = bag.labels == candidate.label

        def insert(
            table: interfaces.FloatArray, mask: interfaces.FloatArray
        ) -> interfaces.FloatArray:
            merged = numpy.concatenate([table, d[:, numpy.newaxis]], axis=1)
            merged.sort(axis=1)
            return numpy.where(mask[:, numpy.newaxis], merged[:, :k], table)

        same = numpy.vstack(
            [insert(tables.same, same_mask), _smallest(d[same_mask], k)]
        )
        other = numpy.vstack(
            [insert(tables.other, ~same_mask), _smallest(d[~same_mask], k)]
        )
        self._pending = _KnnCache(
            bag.revision,
            len(bag) + 1,
            same,
            other,
            candidate.features.copy(),
            candidate.label,
        )
        return _ratio_scores(same, other)


@typing.final
class SvmStrangeness(interfaces.StrangenessProvider):
    """
    Strangeness from the signed distance to a Gaussian-kernel SVM boundary.

    The score of a point is ``-y f(x)`` shifted so the bag minimum is zero;
    misclassified and margin-violating points are the strangest.  The
    classifier is refit every `retrain_every` calls and reused otherwise.
    """

    __slots__ = ("_cfg", "_model", "_calls")

    def __init__(self, cfg: SvmProviderConfig = SvmProviderConfig()) -> None:
        self._cfg = cfg
        self._model: typing.Optional[sklearn.svm.SVC] = None
        self._calls = 0

    @property
    def config(self) -> SvmProviderConfig:
        return self._cfg

    def reset(self) -> None:
        self._model = None
        self._calls = 0

    def _fit(
        self, features: interfaces.FloatArray, labels: interfaces.IntArray
    ) -> sklearn.svm.SVC:
        gamma = self._cfg.gamma
        if gamma is None:
            gamma = 1.0 / features.shape[1]
        model = sklearn.svm.SVC(C=self._cfg.C, kernel="rbf", gamma=gamma)
        try:
            model.fit(features, labels)
        except (ValueError, sklearn.exceptions.NotFittedError) as err:
            raise interfaces.ProviderUntrainableError(
                f"SVM training failed: {err}"
            ) from err
        return model

    def score(
        self, bag: datatypes.PointBag, candidate: datatypes.LabeledPoint
    ) -> interfaces.FloatArray:
        pool = bag.extended(candidate)
        return self.score_pool(pool)

    def score_pool(self, pool: datatypes.PointPool) -> interfaces.FloatArray:
        labels = pool.labels
        if not numpy.all(numpy.abs(labels) == 1):
            raise interfaces.StreamFormatError(
                "SVM strangeness requires labels in {-1, +1}"
            )
        retrain = (
            self._model is None
            or self._calls % self._cfg.retrain_every == 0
        )
        self._calls += 1
        if retrain:
            if numpy.unique(labels).shape[0] < 2:  # noqa: PLR2004
                self._model = None
                raise interfaces.ProviderUntrainableError(
                    "SVM needs both labels in the bag"
                )
            self._model = self._fit(pool.features, labels)
            logger.debug("Refit SVM on %d points", len(pool))
        model = typing.cast(sklearn.svm.SVC, self._model)
        raw = -labels * model.decision_function(pool.features)
        return raw - raw.min()


def svm_strangeness(
    bag: typing.Union[
        datatypes.PointPool, collections.abc.Sequence[datatypes.LabeledPoint]
    ],
    cfg: SvmProviderConfig = SvmProviderConfig(),
) -> interfaces.FloatArray:
    """
    SVM hyperplane-distance strangeness of every point in a bag.

    Fits a fresh classifier on the whole bag.

    Parameters
    ----------
    bag : exmart.datatypes.PointPool | Sequence[LabeledPoint]
        Bag containing both labels -1 and +1.
    cfg : SvmProviderConfig (default: SvmProviderConfig())
        Kernel width and box constraint.

    Returns
    -------
    numpy.ndarray
        Nonnegative scores, minimum zero.

    Raises
    ------
    exmart.interfaces.ProviderUntrainableError
        If the bag holds a single label.
    """
    return SvmStrangeness(cfg).score_pool(_as_pool(bag))
