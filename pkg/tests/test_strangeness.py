"""Test the nearest-neighbor and SVM strangeness providers."""

import numpy
import pytest

import exmart as xm
from exmart import strangeness
from exmart.datatypes import LabeledPoint, PointBag, PointPool


def _pool(points):
    return PointPool.from_points(
        LabeledPoint(numpy.atleast_1d(numpy.asarray(x, dtype=float)), y)
        for x, y in points
    )


def test_two_point_bag_scores_zero():
    scores = strangeness.knn_strangeness(_pool([(0.0, 1), (1.0, -1)]))
    numpy.testing.assert_array_equal(scores, [0.0, 0.0])


def test_distance_ratio():
    scores = strangeness.knn_strangeness(
        _pool([(0.0, 1), (0.1, 1), (5.0, -1)])
    )
    assert scores[0] == pytest.approx(0.1 / 5.0)
    assert scores[1] == pytest.approx(0.1 / 4.9)
    # lone member of its class
    assert scores[2] == 0.0


def test_single_label_bag_scores_sentinel():
    scores = strangeness.knn_strangeness(_pool([(0.0, 1), (0.1, 1)]))
    numpy.testing.assert_array_equal(
        scores, [strangeness.SENTINEL, strangeness.SENTINEL]
    )
    assert numpy.all(numpy.isfinite(scores))


def test_duplicate_point_scores_zero():
    scores = strangeness.knn_strangeness(
        _pool([(0.0, 1), (0.0, 1), (3.0, -1), (3.5, -1)])
    )
    assert scores[0] == 0.0
    assert scores[1] == 0.0
    assert scores[2] == pytest.approx(0.5 / 3.0)


def test_coincident_labels_score_sentinel():
    scores = strangeness.knn_strangeness(
        _pool([(0.0, 1), (1.0, 1), (0.0, -1), (1.0, -1)])
    )
    assert scores[0] == strangeness.SENTINEL


def test_k_neighbors_use_available_points():
    pool = _pool([(0.0, 1), (1.0, 1), (3.0, -1)])
    scores = strangeness.knn_strangeness(
        pool, strangeness.KnnProviderConfig(k=3)
    )
    assert scores[0] == pytest.approx(1.0 / 3.0)
    assert scores[1] == pytest.approx(1.0 / 2.0)


def test_knn_rejects_empty_bag_and_bad_k():
    with pytest.raises(ValueError):
        strangeness.knn_strangeness([])
    with pytest.raises(xm.interfaces.ConfigurationError):
        strangeness.KnnProviderConfig(k=0)


def test_knn_is_permutation_equivariant():
    rng = numpy.random.default_rng(8)
    features = rng.uniform(-1.0, 1.0, (40, 3))
    labels = numpy.where(features[:, 0] > 0.0, 1, -1)
    pool = PointPool(features, labels)
    order = rng.permutation(40)
    scores = strangeness.knn_strangeness(pool)
    permuted = strangeness.knn_strangeness(pool.take(order))
    numpy.testing.assert_allclose(permuted, scores[order])


@pytest.mark.parametrize("k", [1, 3])
def test_incremental_scores_match_full_recomputation(k):
    rng = numpy.random.default_rng(17)
    cfg = strangeness.KnnProviderConfig(k=k)
    provider = cfg.build()
    bag = PointBag()
    features = rng.uniform(-1.0, 1.0, (150, 3))
    labels = rng.choice([-1, 1], 150)
    for i, (x, y) in enumerate(zip(features, labels, strict=True)):
        point = LabeledPoint(x, int(y))
        incremental = provider.score(bag, point)
        full = strangeness.knn_strangeness(bag.extended(point), cfg)
        numpy.testing.assert_allclose(incremental, full, rtol=1e-12)
        bag.append(point)
        if len(bag) > 60:  # noqa: PLR2004
            bag.evict_oldest()
        if i == 100:  # noqa: PLR2004
            bag.clear()


def test_incremental_provider_survives_reset():
    provider = strangeness.KnnStrangeness()
    bag = PointBag()
    for x, y in [(0.0, 1), (1.0, -1), (0.2, 1)]:
        point = LabeledPoint(numpy.array([x]), y)
        provider.score(bag, point)
        bag.append(point)
    provider.reset()
    point = LabeledPoint(numpy.array([0.9]), -1)
    numpy.testing.assert_allclose(
        provider.score(bag, point),
        strangeness.knn_strangeness(bag.extended(point)),
    )


def test_first_point_scores_zero():
    provider = strangeness.KnnStrangeness()
    scores = provider.score(PointBag(), LabeledPoint(numpy.zeros(2), 1))
    numpy.testing.assert_array_equal(scores, [0.0])


def _separable_pool(flip=False):
    rng = numpy.random.default_rng(4)
    neg = rng.normal(-2.0, 0.3, (10, 2))
    pos = rng.normal(2.0, 0.3, (10, 2))
    features = numpy.vstack([neg, pos, [[2.0, 2.0]]])
    labels = numpy.array([-1] * 10 + [1] * 10 + [-1 if flip else 1])
    return PointPool(features, labels)


def test_svm_scores_are_shifted_to_zero():
    scores = strangeness.svm_strangeness(_separable_pool())
    assert scores.min() == 0.0
    assert numpy.all(scores >= 0.0)
    assert numpy.all(numpy.isfinite(scores))


def test_svm_flags_mislabeled_point():
    scores = strangeness.svm_strangeness(_separable_pool(flip=True))
    assert scores[-1] > scores[:-1].max()


def test_svm_is_permutation_equivariant():
    pool = _separable_pool(flip=True)
    order = numpy.random.default_rng(12).permutation(len(pool))
    scores = strangeness.svm_strangeness(pool)
    permuted = strangeness.svm_strangeness(pool.take(order))
    # the dual solver stops at a tolerance, so solutions agree only closely
    numpy.testing.assert_allclose(permuted, scores[order], atol=1e-2)
    assert int(numpy.argmax(permuted)) == int(numpy.flatnonzero(order == 20)[0])


def test_svm_needs_both_labels():
    pool = PointPool(numpy.zeros((3, 2)), numpy.ones(3, dtype=numpy.int64))
    with pytest.raises(xm.interfaces.ProviderUntrainableError):
        strangeness.svm_strangeness(pool)


def test_svm_rejects_non_binary_labels():
    pool = PointPool(numpy.zeros((2, 2)), numpy.array([0, 1]))
    with pytest.raises(xm.interfaces.StreamFormatError):
        strangeness.svm_strangeness(pool)


def test_svm_config_validation():
    with pytest.raises(xm.interfaces.ConfigurationError):
        strangeness.SvmProviderConfig(gamma=0.0)
    with pytest.raises(xm.interfaces.ConfigurationError):
        strangeness.SvmProviderConfig(C=-1.0)
    with pytest.raises(xm.interfaces.ConfigurationError):
        strangeness.SvmProviderConfig(retrain_every=0)


def test_svm_retraining_cadence():
    rng = numpy.random.default_rng(9)
    features = rng.uniform(-1.0, 1.0, (40, 2))
    labels = numpy.where(features[:, 0] + features[:, 1] > 0.0, 1, -1)
    cadence = strangeness.SvmProviderConfig(retrain_every=3).build()
    bag = PointBag()
    for i in range(20, 40):
        if len(bag) == 0:
            for j in range(20):
                bag.append(LabeledPoint(features[j], int(labels[j])))
        point = LabeledPoint(features[i], int(labels[i]))
        scores = cadence.score(bag, point)
        if (i - 20) % 3 == 0:
            expected = strangeness.svm_strangeness(bag.extended(point))
            numpy.testing.assert_allclose(scores, expected)
        assert scores.shape == (len(bag) + 1,)
        bag.append(point)
