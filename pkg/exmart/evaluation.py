"""
Contains scoring of detections against ground truth and p-value diagnostics.

A detection is correct when it is the first detection following a true
change and precedes the next one; any other detection is a false alarm.
"""

import collections.abc
import dataclasses
import math
import typing
import warnings

import numpy
import scipy.stats

from exmart import interfaces

KS_MIN_SAMPLES = 5


class Match(typing.NamedTuple):
    detection: int
    change_point: int
    delay: int


class MatchResult(typing.NamedTuple):
    """
    Detections split into correct ones and false alarms.

    Attributes
    ----------
    correct : tuple[Match, ...]
        Correct detections with their matched change point and delay.
    false_alarms : tuple[int, ...]
        Indices of detections not matched to any change.
    missed : tuple[int, ...]
        Change points without a correct detection.
    """

    correct: tuple[Match, ...]
    false_alarms: tuple[int, ...]
    missed: tuple[int, ...]

    @property
    def delays(self) -> tuple[int, ...]:
        return tuple(m.delay for m in self.correct)


def match_detections(
    detections: collections.abc.Sequence[int],
    change_points: collections.abc.Sequence[int],
    stream_len: typing.Optional[int] = None,
) -> MatchResult:
    """
    Match detections to the true change points preceding them.

    Parameters
    ----------
    detections : collections.abc.Sequence[int]
        Sorted 1-based detection indices.
    change_points : collections.abc.Sequence[int]
        Sorted 1-based change points.
    stream_len : typing.Optional[int] (default: None)
        Length of the stream; detections beyond it are rejected.

    Returns
    -------
    MatchResult
        Correct detections, false alarms and missed changes.
    """
    det = [int(t) for t in detections]
    changes = numpy.asarray(change_points, dtype=numpy.int64)
    if any(b < a for a, b in zip(det, det[1:], strict=False)):
        raise ValueError("Detections must be sorted ascending")
    if numpy.any(numpy.diff(changes) < 0):
        raise ValueError("Change points must be sorted ascending")
    if stream_len is not None and det and det[-1] > stream_len:
        raise ValueError(
            f"Detection {det[-1]} lies beyond the stream length {stream_len}"
        )

    matched: set[int] = set()
    correct = []
    false_alarms = []
    for t in det:
        pos = int(numpy.searchsorted(changes, t, side="right")) - 1
        if pos < 0 or pos in matched:
            false_alarms.append(t)
            continue
        matched.add(pos)
        c = int(changes[pos])
        correct.append(Match(t, c, t - c))
    missed = tuple(
        int(c) for i, c in enumerate(changes) if i not in matched
    )
    return MatchResult(tuple(correct), tuple(false_alarms), missed)


@typing.final
@dataclasses.dataclass(frozen=True, slots=True)
class BoxStats:
    """Five-number summary, mean and 1.5 IQR whiskers of a sample."""

    min: float
    q1: float
    median: float
    mean: float
    q3: float
    max: float
    whisker_low: float
    whisker_high: float

    def to_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)


def box_stats(values: collections.abc.Sequence[float]) -> BoxStats:
    """
    Box-plot statistics of a nonempty sample.

    Quartiles use linear interpolation.  Whiskers extend to the most extreme
    values within 1.5 interquartile ranges of the box.
    """
    arr = numpy.asarray(values, dtype=numpy.float64)
    if arr.ndim != 1 or arr.shape[0] == 0:
        raise ValueError("box_stats requires a nonempty one-dimensional sample")
    q1, median, q3 = numpy.percentile(arr, [25.0, 50.0, 75.0])
    iqr = q3 - q1
    inside = arr[(arr >= q1 - 1.5 * iqr) & (arr <= q3 + 1.5 * iqr)]
    return BoxStats(
        min=float(arr.min()),
        q1=float(q1),
        median=float(median),
        mean=float(arr.mean()),
        q3=float(q3),
        max=float(arr.max()),
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
    )


class KsResult(typing.NamedTuple):
    statistic: float
    p_value: float


def _check_unit_samples(samples: typing.Any) -> interfaces.FloatArray:
    arr = numpy.asarray(samples, dtype=numpy.float64)
    if arr.ndim != 1 or arr.shape[0] == 0:
        raise ValueError("Samples must form a nonempty one-dimensional array")
    if numpy.any(arr < 0.0) or numpy.any(arr > 1.0) or numpy.any(
        numpy.isnan(arr)
    ):
        raise ValueError("Samples must lie in [0, 1]")
    return arr


def ks_statistic(samples: collections.abc.Sequence[float]) -> float:
    """
    Kolmogorov-Smirnov distance of a sample from the uniform distribution.

    ``D = max_i max(i/n - x_(i), x_(i) - (i-1)/n)`` over the sorted sample.
    """
    x = numpy.sort(_check_unit_samples(samples))
    n = x.shape[0]
    i = numpy.arange(1, n + 1)
    return float(numpy.max(numpy.maximum(i / n - x, x - (i - 1) / n)))


def kolmogorov_survival(lam: float) -> float:
    """
    Asymptotic Kolmogorov survival function ``Q(lam)``.

    Sums ``2 sum_j (-1)^(j-1) exp(-2 j^2 lam^2)`` until a term drops below
    1e-10; a series that has not settled after 100 terms returns 1.
    """
    total = 0.0
    sign = 1.0
    for j in range(1, 101):
        term = sign * 2.0 * math.exp(-2.0 * j * j * lam * lam)
        total += term
        if abs(term) < 1e-10:  # noqa: PLR2004
            return min(1.0, max(0.0, total))
        sign = -sign
    return 1.0


def ks_uniform_test(samples: collections.abc.Sequence[float]) -> KsResult:
    """
    One-sample Kolmogorov-Smirnov test of uniformity on [0, 1].

    Parameters
    ----------
    samples : collections.abc.Sequence[float]
        At least five values in [0, 1].

    Returns
    -------
    KsResult
        Statistic D and its asymptotic p-value, using the effective
        ``sqrt(n) + 0.12 + 0.11 / sqrt(n)`` scaling of D.
    """
    arr = _check_unit_samples(samples)
    n = arr.shape[0]
    if n < KS_MIN_SAMPLES:
        raise ValueError(
            f"KS test needs at least {KS_MIN_SAMPLES} samples, got {n}"
        )
    d = ks_statistic(arr)
    root = math.sqrt(n)
    p = kolmogorov_survival((root + 0.12 + 0.11 / root) * d)
    return KsResult(d, p)


def ks_rejection_delay(
    p_values: collections.abc.Sequence[float],
    start: int,
    significance: float = 0.05,
    min_points: int = 20,
    max_points: int = 200,
) -> typing.Optional[int]:
    """
    Number of points after `start` at which uniformity is first rejected.

    The KS test is applied to the p-values from the 1-based index `start`
    onwards, growing the window one point at a time.

    Returns
    -------
    typing.Optional[int]
        Window length at the first rejection, or None if the test never
        rejects within `max_points` points.
    """
    if start < 1:
        raise ValueError(f"start must be a 1-based index, got {start}")
    if not KS_MIN_SAMPLES <= min_points <= max_points:
        raise ValueError(
            f"Need {KS_MIN_SAMPLES} <= min_points <= max_points, got "
            f"{min_points} and {max_points}"
        )
    window = numpy.asarray(p_values, dtype=numpy.float64)[
        start - 1 : start - 1 + max_points
    ]
    for k in range(min_points, window.shape[0] + 1):
        if ks_uniform_test(window[:k]).p_value < significance:
            return k
    return None


def p_value_skewness(samples: collections.abc.Sequence[float]) -> float:
    """Sample skewness of p-values; near zero for uniform p-values."""
    arr = _check_unit_samples(samples)
    return float(scipy.stats.skew(arr))


class WelchResult(typing.NamedTuple):
    statistic: float
    df: float
    p_value: float


def _log_delays(
    delays: collections.abc.Sequence[float], name: str
) -> interfaces.FloatArray:
    arr = numpy.asarray(delays, dtype=numpy.float64)
    if numpy.any(arr < 0.0):
        raise ValueError(f"Delays of group {name} must be nonnegative")
    zeros = int(numpy.count_nonzero(arr == 0.0))
    if zeros:
        warnings.warn(
            f"Excluded {zeros} zero delay(s) from group {name}: log undefined",
            RuntimeWarning,
            stacklevel=3,
        )
    arr = arr[arr > 0.0]
    if arr.shape[0] < 2:  # noqa: PLR2004
        raise ValueError(
            f"Group {name} needs at least two positive delays, got "
            f"{arr.shape[0]}"
        )
    return numpy.log(arr)


def welch_t_test_log_delays(
    delays_a: collections.abc.Sequence[float],
    delays_b: collections.abc.Sequence[float],
) -> WelchResult:
    """
    Welch's unequal-variance t-test on log-transformed delays.

    Parameters
    ----------
    delays_a, delays_b : collections.abc.Sequence[float]
        Detection delays of two groups.  Zero delays are excluded with a
        RuntimeWarning.

    Returns
    -------
    WelchResult
        t statistic, Welch-Satterthwaite degrees of freedom and two-sided
        p-value.
    """
    a = _log_delays(delays_a, "A")
    b = _log_delays(delays_b, "B")
    na, nb = a.shape[0], b.shape[0]
    va = float(numpy.var(a, ddof=1)) / na
    vb = float(numpy.var(b, ddof=1)) / nb
    diff = float(numpy.mean(a) - numpy.mean(b))
    if va + vb == 0.0:
        df = float(na + nb - 2)
        if diff == 0.0:
            return WelchResult(0.0, df, 1.0)
        return WelchResult(math.copysign(math.inf, diff), df, 0.0)
    df = (va + vb) ** 2 / (va**2 / (na - 1) + vb**2 / (nb - 1))
    result = scipy.stats.ttest_ind(a, b, equal_var=False)
    return WelchResult(float(result.statistic), df, float(result.pvalue))


@typing.final
@dataclasses.dataclass(frozen=True, slots=True)
class EvalReport:
    """
    Accuracy and delay of one monitored stream.

    Parameters
    ----------
    precision : float
        Correct detections over all detections; 1 without detections.
    recall : float
        Correct detections over true changes; 1 without changes.
    delays : tuple[int, ...]
        Delay of every correct detection.
    false_alarms : int
        Detections not matched to a change.
    missed : int
        Changes without a correct detection.
    detections : tuple[int, ...]
        All detection indices.
    change_points : tuple[int, ...]
        True change points.
    delay_stats : typing.Optional[BoxStats]
        Summary of `delays`; None without correct detections.
    ks_statistic, ks_p_value : typing.Optional[float]
        Uniformity diagnostic of the p-values emitted before the first
        change; None if fewer than five were available.
    """

    precision: float
    recall: float
    delays: tuple[int, ...]
    false_alarms: int
    missed: int
    detections: tuple[int, ...] = ()
    change_points: tuple[int, ...] = ()
    delay_stats: typing.Optional[BoxStats] = None
    ks_statistic: typing.Optional[float] = None
    ks_p_value: typing.Optional[float] = None

    @property
    def correct(self) -> int:
        return len(self.delays)

    @property
    def mean_delay(self) -> float:
        if not self.delays:
            return math.nan
        return float(numpy.mean(self.delays))

    @property
    def median_delay(self) -> float:
        if not self.delays:
            return math.nan
        return float(numpy.median(self.delays))

    def to_dict(self) -> dict[str, typing.Any]:
        """Flat key-value form; delay statistics are prefixed ``delay_``."""
        record: dict[str, typing.Any] = {
            "precision": self.precision,
            "recall": self.recall,
            "correct": self.correct,
            "false_alarms": self.false_alarms,
            "missed": self.missed,
            "mean_delay": self.mean_delay,
            "median_delay": self.median_delay,
            "delays": list(self.delays),
            "detections": list(self.detections),
            "change_points": list(self.change_points),
            "ks_statistic": self.ks_statistic,
            "ks_p_value": self.ks_p_value,
        }
        if self.delay_stats is not None:
            for key, value in self.delay_stats.to_dict().items():
                record[f"delay_{key}"] = value
        return record


def evaluate_run(
    detections: collections.abc.Sequence[int],
    change_points: collections.abc.Sequence[int],
    stream_len: typing.Optional[int] = None,
    p_values: typing.Optional[collections.abc.Sequence[float]] = None,
) -> EvalReport:
    """
    Score detections against the true change points of a stream.

    Parameters
    ----------
    detections : collections.abc.Sequence[int]
        Sorted detection indices.
    change_points : collections.abc.Sequence[int]
        Sorted true change points.
    stream_len : typing.Optional[int] (default: None)
        Length of the stream.
    p_values : typing.Optional[collections.abc.Sequence[float]]
        P-values of one channel, one per point, for the uniformity
        diagnostic.

    Returns
    -------
    EvalReport
        Precision, recall, delays and diagnostics.
    """
    result = match_detections(detections, change_points, stream_len)
    n_det = len(detections)
    n_changes = len(change_points)
    correct = len(result.correct)
    precision = correct / n_det if n_det else 1.0
    recall = correct / n_changes if n_changes else 1.0
    delays = result.delays

    ks_stat: typing.Optional[float] = None
    ks_p: typing.Optional[float] = None
    if p_values is not None:
        head = numpy.asarray(p_values, dtype=numpy.float64)
        if n_changes:
            head = head[: int(change_points[0]) - 1]
        if head.shape[0] >= KS_MIN_SAMPLES:
            ks_stat, ks_p = ks_uniform_test(head)

    return EvalReport(
        precision=precision,
        recall=recall,
        delays=delays,
        false_alarms=len(result.false_alarms),
        missed=len(result.missed),
        detections=tuple(int(t) for t in detections),
        change_points=tuple(int(c) for c in change_points),
        delay_stats=box_stats(delays) if delays else None,
        ks_statistic=ks_stat,
        ks_p_value=ks_p,
    )
