"""
Contains the randomized p-value, the power martingale and SPRT design tools.

All martingale arithmetic is carried out on natural logarithms: a product of
thousands of update factors overflows or underflows in direct arithmetic.
"""

import collections.abc
import math

import numpy

from exmart import datatypes, interfaces

THETA_LOW = 1e-6
THETA_HIGH = 1.0 - 1e-6


def draw_theta(rng: numpy.random.Generator) -> float:
    """
    Draw the tie-breaking variable of the randomized p-value.

    The draw is uniform on [1e-6, 1 - 1e-6], which keeps every p-value
    strictly positive and bounds any single update factor.
    """
    return float(rng.uniform(THETA_LOW, THETA_HIGH))


def compute_p_value(
    strangeness_bag: collections.abc.Sequence[float] | interfaces.FloatArray,
    theta: float,
) -> float:
    """
    Randomized p-value of the newest point of a bag.

    Parameters
    ----------
    strangeness_bag : array_like
        Strangeness scores of the bag; the last entry belongs to the newest
        point.
    theta : float
        Tie-breaking variable in (0, 1).

    Returns
    -------
    float
        ``(#{i: a_i > a_n} + theta * #{i: a_i == a_n}) / n``, in (0, 1].
    """
    scores = numpy.asarray(strangeness_bag, dtype=numpy.float64)
    if scores.ndim != 1 or scores.shape[0] == 0:
        raise ValueError("Strangeness bag must be a nonempty sequence")
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    newest = scores[-1]
    greater = int(numpy.count_nonzero(scores > newest))
    equal = int(numpy.count_nonzero(scores == newest))
    return (greater + theta * equal) / scores.shape[0]


def _check_factor_args(p: float, epsilon: float) -> None:
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p-value must lie in (0, 1], got {p}")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")


def log_update_factor(p: float, epsilon: float) -> float:
    """
    Natural log of the martingale update factor.

    This is ``log(epsilon) + (epsilon - 1) * log(p)``, the per-point
    log-likelihood-ratio approximation used by the mean delay estimate.
    """
    _check_factor_args(p, epsilon)
    return math.log(epsilon) + (epsilon - 1.0) * math.log(p)


def martingale_update_factor(p: float, epsilon: float) -> float:
    """
    Multiplicative update ``epsilon * p ** (epsilon - 1)`` of the martingale.

    Parameters
    ----------
    p : float
        Randomized p-value in (0, 1].
    epsilon : float
        Martingale exponent in (0, 1).

    Returns
    -------
    float
        Update factor, at least `epsilon`.
    """
    return math.exp(log_update_factor(p, epsilon))


def likelihood_ratio(p: float, epsilon: float) -> float:
    """Approximate likelihood ratio ``epsilon * p ** epsilon / p``."""
    return martingale_update_factor(p, epsilon)


def likelihood_ratio_crossover(epsilon: float) -> float:
    """
    P-value at which the approximate likelihood ratio equals one.

    Solves ``epsilon * p ** epsilon = p``; p-values below the result push the
    martingale upwards.  Approaches 1/e from below as epsilon tends to 1.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    return math.exp(math.log(epsilon) / (1.0 - epsilon))


def threshold_from_design(design: datatypes.TestDesign) -> float:
    """
    Largest threshold consistent with a test design.

    Parameters
    ----------
    design : exmart.datatypes.TestDesign
        Size alpha and type-II error beta.

    Returns
    -------
    float
        ``(1 - beta) / alpha``.
    """
    if design.alpha <= 0.0:
        raise ValueError("alpha = 0 leaves the threshold undefined")
    return (1.0 - design.beta) / design.alpha


def size_from_threshold(threshold: float, beta: float = 0.0) -> float:
    """Size alpha implied by a threshold, ``(1 - beta) / threshold``."""
    if threshold <= 0.0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"beta must lie in [0, 1), got {beta}")
    return (1.0 - beta) / threshold


def doob_false_alarm_bound(threshold: float) -> float:
    """
    Bound on the probability that the martingale ever reaches `threshold`.

    Returns ``min(1, 1 / threshold)``.
    """
    if threshold <= 0.0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    return min(1.0, 1.0 / threshold)


def estimate_mean_delay(
    threshold: float,
    beta: float,
    post_change_p_samples: collections.abc.Sequence[float]
    | interfaces.FloatArray,
    epsilon: float,
    tolerance: float = 1e-6,
) -> float:
    """
    Mean detection delay estimated from the average sample number.

    Parameters
    ----------
    threshold : float
        Detection threshold lambda.
    beta : float
        Type-II error probability in [0, 1).
    post_change_p_samples : array_like
        P-values observed or hypothesized after a change.
    epsilon : float
        Martingale exponent.
    tolerance : float (default: 1e-6)
        Mean log ratios at or below this value are treated as carrying no
        evidence of change.  A p-value quoted to five decimals at the
        likelihood-ratio crossover leaves a residue of about 1e-6.

    Returns
    -------
    float
        ``(1 - beta) * ln(threshold) / mean(L)`` with
        ``L = ln(epsilon) + (epsilon - 1) ln(p)``.

    Raises
    ------
    exmart.interfaces.UndefinedDelayError
        If mean(L) does not exceed `tolerance`.  The default only absorbs
        rounding at the crossover p-value, so a genuinely positive mean(L)
        below 1e-6 is also reported as undefined; pass ``tolerance=0`` to
        get the (very long) delay instead.
    """
    samples = numpy.asarray(post_change_p_samples, dtype=numpy.float64)
    if samples.ndim != 1 or samples.shape[0] == 0:
        raise ValueError("At least one post-change p-value is required")
    if numpy.any(samples <= 0.0) or numpy.any(samples > 1.0):
        raise ValueError("p-values must lie in (0, 1]")
    if threshold < 1.0:
        raise ValueError(f"threshold must be at least 1, got {threshold}")
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"beta must lie in [0, 1), got {beta}")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if tolerance < 0.0:
        raise ValueError(f"tolerance must be nonnegative, got {tolerance}")
    mean_log_ratio = float(
        numpy.mean(math.log(epsilon) + (epsilon - 1.0) * numpy.log(samples))
    )
    if mean_log_ratio <= tolerance:
        raise interfaces.UndefinedDelayError(
            "p-value distribution does not indicate a change; delay undefined"
        )
    return (1.0 - beta) * math.log(threshold) / mean_log_ratio
