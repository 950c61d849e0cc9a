"""
Contains generators of synthetic labeled streams with known change points.

Two families are provided.  Rotating hyperplane streams label uniform points
in [-1, 1]^m by the side of a hyperplane which is redrawn for every segment.
Normally distributed cluster (NDC) streams sample every segment from freshly
drawn Gaussian clusters and rescale each dimension to [-1, 1].
"""

import dataclasses
import enum
import logging
import math
import typing

import numpy

from exmart import datatypes, interfaces, utils

logger = logging.getLogger(__name__)


class RotationMode(enum.Enum):
    """How the hyperplane weight vector is redrawn for each segment."""

    RESTRICTED = "restricted"
    ARBITRARY = "arbitrary"
    RANDOM_WEIGHTS = "random_weights"


def hyperplane_label(
    x: interfaces.FloatArray, w: interfaces.FloatArray, c: float = 0.0
) -> int:
    """
    Label a point by its side of the hyperplane ``w . x = c``.

    Points on the hyperplane are positive.

    Returns
    -------
    int
        +1 if ``w . x >= c``, -1 otherwise.
    """
    x_arr = numpy.asarray(x, dtype=numpy.float64)
    w_arr = numpy.asarray(w, dtype=numpy.float64)
    if x_arr.shape != w_arr.shape:
        raise ValueError(
            f"Point shape {x_arr.shape} does not match weights {w_arr.shape}"
        )
    return 1 if float(numpy.dot(w_arr, x_arr)) >= c else -1


def _hyperplane_labels(
    features: interfaces.FloatArray, w: interfaces.FloatArray, c: float
) -> interfaces.IntArray:
    return numpy.where(features @ w >= c, 1, -1).astype(numpy.int64)


def _check_segments(
    segment_len: int, num_segments: int, noise_pct: float
) -> None:
    if segment_len < 1:
        raise interfaces.ConfigurationError(
            f"segment_len must be positive, got {segment_len}"
        )
    if num_segments < 1:
        raise interfaces.ConfigurationError(
            f"num_segments must be positive, got {num_segments}"
        )
    if not 0.0 <= noise_pct < 50.0:  # noqa: PLR2004
        raise interfaces.ConfigurationError(
            f"noise_pct must lie in [0, 50), got {noise_pct}"
        )


@typing.final
@dataclasses.dataclass(frozen=True, slots=True)
class HyperplaneConfig:
    """
    Settings of a rotating hyperplane stream.

    Parameters
    ----------
    m : int (default: 2)
        Dimension of the points.
    c : float (default: 0.0)
        Offset of the hyperplane.
    segment_len : int (default: 1000)
        Points per segment.
    num_segments : int (default: 100)
        Number of segments, each with its own hyperplane.
    rotation_mode : RotationMode (default: RotationMode.ARBITRARY)
        RESTRICTED draws ``w = [cos r, sin r]`` with r in [-pi/3, pi/3];
        ARBITRARY draws r in [-pi, pi]; RANDOM_WEIGHTS draws each weight
        uniformly in [-1, 1].  The first two require m = 2.
    noise_pct : float (default: 0.0)
        Percentage of labels flipped after generation.
    """

    m: int = 2
    c: float = 0.0
    segment_len: int = 1000
    num_segments: int = 100
    rotation_mode: RotationMode = RotationMode.ARBITRARY
    noise_pct: float = 0.0

    def __post_init__(self) -> None:
        try:
            mode = RotationMode(self.rotation_mode)
        except ValueError as err:
            raise interfaces.ConfigurationError(
                f"Unknown rotation mode {self.rotation_mode!r}"
            ) from err
        object.__setattr__(self, "rotation_mode", mode)
        if self.m < 2:  # noqa: PLR2004
            raise interfaces.ConfigurationError(
                f"Hyperplane streams need m >= 2, got {self.m}"
            )
        two_dim = mode is not RotationMode.RANDOM_WEIGHTS
        if two_dim and self.m != 2:  # noqa: PLR2004
            raise interfaces.ConfigurationError(
                f"Rotation mode {mode.value} is defined for m = 2 only, "
                f"got m = {self.m}"
            )
        _check_segments(self.segment_len, self.num_segments, self.noise_pct)


@typing.final
@dataclasses.dataclass(frozen=True, slots=True)
class NdcConfig:
    """
    Settings of a normally distributed clusters stream.

    Parameters
    ----------
    m : int (default: 10)
        Dimension of the points.
    clusters_per_class : int (default: 2)
        Gaussian clusters drawn per class and segment.
    segment_len : int (default: 1000)
        Points per segment.
    num_segments : int (default: 100)
        Number of segments, each with fresh clusters.
    noise_pct : float (default: 0.0)
        Percentage of labels flipped after generation.
    shared_clusters : bool (default: False)
        Both classes sample the same clusters, making labels independent of
        the features.
    mean_range : tuple[float, float] (default: (-2.0, 2.0))
        Interval of the uniform cluster mean draws.
    std_range : tuple[float, float] (default: (0.3, 1.0))
        Interval of the uniform per-dimension standard deviation draws.
    """

    m: int = 10
    clusters_per_class: int = 2
    segment_len: int = 1000
    num_segments: int = 100
    noise_pct: float = 0.0
    shared_clusters: bool = False
    mean_range: tuple[float, float] = (-2.0, 2.0)
    std_range: tuple[float, float] = (0.3, 1.0)

    def __post_init__(self) -> None:
        if self.m < 1:
            raise interfaces.ConfigurationError(
                f"NDC streams need m >= 1, got {self.m}"
            )
        if self.clusters_per_class < 1:
            raise interfaces.ConfigurationError(
                "clusters_per_class must be positive, got "
                f"{self.clusters_per_class}"
            )
        low, high = self.std_range
        if not 0.0 < low <= high:
            raise interfaces.ConfigurationError(
                f"Invalid standard deviation range {self.std_range}"
            )
        if self.mean_range[0] > self.mean_range[1]:
            raise interfaces.ConfigurationError(
                f"Invalid mean range {self.mean_range}"
            )
        _check_segments(self.segment_len, self.num_segments, self.noise_pct)


GeneratorConfig = typing.Union[HyperplaneConfig, NdcConfig]


def segment_change_points(
    segment_len: int, num_segments: int
) -> tuple[int, ...]:
    """Change points ``segment_len * i + 1`` for i = 1 .. num_segments - 1."""
    return tuple(segment_len * i + 1 for i in range(1, num_segments))


def hyperplane_weights(
    cfg: HyperplaneConfig, seed: int, replica: int = 0
) -> interfaces.FloatArray:
    """
    Weight vectors of every segment of a hyperplane stream.

    Returns
    -------
    numpy.ndarray
        Matrix of shape (num_segments, m); row i labels segment i.
    """
    rng = utils.derive_rng(seed, replica, utils.SeedPurpose.STREAM, 0)
    match cfg.rotation_mode:
        case RotationMode.RESTRICTED:
            r = rng.uniform(-math.pi / 3, math.pi / 3, cfg.num_segments)
            return numpy.column_stack([numpy.cos(r), numpy.sin(r)])
        case RotationMode.ARBITRARY:
            r = rng.uniform(-math.pi, math.pi, cfg.num_segments)
            return numpy.column_stack([numpy.cos(r), numpy.sin(r)])
        case RotationMode.RANDOM_WEIGHTS:
            return rng.uniform(-1.0, 1.0, (cfg.num_segments, cfg.m))
    raise interfaces.ConfigurationError(
        f"Unknown rotation mode {cfg.rotation_mode!r}"
    )


def generate_hyperplane_stream(
    cfg: HyperplaneConfig, seed: int, replica: int = 0
) -> datatypes.StreamSpec:
    """
    Generate a rotating hyperplane stream.

    Parameters
    ----------
    cfg : HyperplaneConfig
        Stream settings.
    seed : int
        Root seed.
    replica : int (default: 0)
        Replica index mixed into the seed.

    Returns
    -------
    exmart.datatypes.StreamSpec
        Stream of ``segment_len * num_segments`` points with a change at the
        first point of every segment but the first.
    """
    weights = hyperplane_weights(cfg, seed, replica)
    rng = utils.derive_rng(seed, replica, utils.SeedPurpose.STREAM, 1)
    n = cfg.segment_len * cfg.num_segments
    features = rng.uniform(-1.0, 1.0, (n, cfg.m))
    labels = numpy.empty(n, dtype=numpy.int64)
    for i, w in enumerate(weights):
        rows = slice(i * cfg.segment_len, (i + 1) * cfg.segment_len)
        labels[rows] = _hyperplane_labels(features[rows], w, cfg.c)
    stream = datatypes.StreamSpec(
        datatypes.PointPool(features, labels),
        segment_change_points(cfg.segment_len, cfg.num_segments),
    )
    if cfg.noise_pct > 0.0:
        stream = apply_label_noise(stream, cfg.noise_pct, seed, replica)
    logger.debug("Generated hyperplane stream %r", stream)
    return stream


def _rescale_columns(features: interfaces.FloatArray) -> interfaces.FloatArray:
    low = features.min(axis=0)
    span = features.max(axis=0) - low
    safe = numpy.where(span > 0.0, span, 1.0)
    scaled = 2.0 * (features - low) / safe - 1.0
    scaled = numpy.where(span > 0.0, scaled, 0.0)
    return numpy.clip(scaled, -1.0, 1.0)


def generate_ndc_stream(
    cfg: NdcConfig, seed: int, replica: int = 0
) -> datatypes.StreamSpec:
    """
    Generate a normally distributed clusters stream.

    Every segment draws new cluster means and diagonal standard deviations
    for each class.  A point picks a class, then one of that class's
    clusters, uniformly at random.  Each segment is rescaled dimension-wise
    to [-1, 1].

    Parameters
    ----------
    cfg : NdcConfig
        Stream settings.
    seed : int
        Root seed.
    replica : int (default: 0)
        Replica index mixed into the seed.

    Returns
    -------
    exmart.datatypes.StreamSpec
        Binary stream labeled -1/+1.
    """
    rng = utils.derive_rng(seed, replica, utils.SeedPurpose.STREAM, 0)
    k, m, seg = cfg.clusters_per_class, cfg.m, cfg.segment_len
    segments = []
    label_segments = []
    for _ in range(cfg.num_segments):
        means = rng.uniform(*cfg.mean_range, (2, k, m))
        stds = rng.uniform(*cfg.std_range, (2, k, m))
        if cfg.shared_clusters:
            means[1] = means[0]
            stds[1] = stds[0]
        classes = rng.integers(0, 2, seg)
        clusters = rng.integers(0, k, seg)
        noise = rng.standard_normal((seg, m))
        points = (
            means[classes, clusters] + stds[classes, clusters] * noise
        )
        segments.append(_rescale_columns(points))
        label_segments.append(numpy.where(classes == 1, 1, -1))
    stream = datatypes.StreamSpec(
        datatypes.PointPool(
            numpy.concatenate(segments), numpy.concatenate(label_segments)
        ),
        segment_change_points(seg, cfg.num_segments),
    )
    if cfg.noise_pct > 0.0:
        stream = apply_label_noise(stream, cfg.noise_pct, seed, replica)
    logger.debug("Generated NDC stream %r", stream)
    return stream


def apply_label_noise(
    stream: datatypes.StreamSpec, pct: float, seed: int, replica: int = 0
) -> datatypes.StreamSpec:
    """
    Flip the labels of a fixed percentage of a binary stream.

    Exactly ``round(pct / 100 * n)`` distinct points, chosen uniformly
    without replacement, have their label negated.  The same seed selects
    the same points, so applying the noise twice restores the stream.

    Parameters
    ----------
    stream : exmart.datatypes.StreamSpec
        Stream labeled -1/+1.
    pct : float
        Percentage in [0, 50).
    seed : int
        Root seed.
    replica : int (default: 0)
        Replica index mixed into the seed.

    Returns
    -------
    exmart.datatypes.StreamSpec
        New stream with the same features and change points.
    """
    if not 0.0 <= pct < 50.0:  # noqa: PLR2004
        raise interfaces.ConfigurationError(
            f"Noise percentage must lie in [0, 50), got {pct}"
        )
    labels = stream.labels
    if not numpy.all(numpy.abs(labels) == 1):
        raise interfaces.StreamFormatError(
            "Label noise requires a stream labeled -1/+1"
        )
    n = len(stream)
    count = math.floor(pct * n / 100.0 + 0.5)
    if count == 0:
        return stream
    rng = utils.derive_rng(seed, replica, utils.SeedPurpose.NOISE)
    flipped = rng.choice(n, size=count, replace=False)
    new_labels = labels.copy()
    new_labels[flipped] *= -1
    return datatypes.StreamSpec(
        stream.pool.with_labels(new_labels), stream.change_points
    )


def generate_stream(
    cfg: GeneratorConfig, seed: int, replica: int = 0
) -> datatypes.StreamSpec:
    """Dispatch to the generator matching the configuration type."""
    if isinstance(cfg, HyperplaneConfig):
        return generate_hyperplane_stream(cfg, seed, replica)
    if isinstance(cfg, NdcConfig):
        return generate_ndc_stream(cfg, seed, replica)
    raise TypeError(f"Unsupported generator configuration {cfg!r}")


SCENARIOS = ("A", "B", "C", "D", "E")


def scenario_config(
    scenario: str,
    num_segments: int = 10,
    segment_len: int = 1000,
    dim: typing.Optional[int] = None,
    noise_pct: typing.Optional[float] = None,
) -> GeneratorConfig:
    """
    Generator configuration of a benchmark scenario.

    Parameters
    ----------
    scenario : str
        A: gradual hyperplane rotation, m = 2.
        B: arbitrary hyperplane rotation, m = 2.
        C: B with 5% label noise.
        D: random hyperplane weights, m = 10, 5% label noise.
        E: normally distributed clusters, m = 10, 5% label noise.
    num_segments : int (default: 10)
        Number of segments.
    segment_len : int (default: 1000)
        Points per segment.
    dim : typing.Optional[int] (default: None)
        Dimension override; scenarios A-C accept only 2.
    noise_pct : typing.Optional[float] (default: None)
        Noise override; the scenario's own noise level if None.

    Returns
    -------
    HyperplaneConfig | NdcConfig
        Matching generator configuration.
    """
    name = scenario.upper()
    if name not in SCENARIOS:
        raise interfaces.ConfigurationError(
            f"Unknown scenario {scenario!r}; expected one of {SCENARIOS}"
        )
    if name in ("A", "B", "C"):
        if dim is not None and dim != 2:  # noqa: PLR2004
            raise interfaces.ConfigurationError(
                f"Scenario {name} is two-dimensional, got dim = {dim}"
            )
        mode = (
            RotationMode.RESTRICTED if name == "A" else RotationMode.ARBITRARY
        )
        default_noise = 5.0 if name == "C" else 0.0
        return HyperplaneConfig(
            m=2,
            segment_len=segment_len,
            num_segments=num_segments,
            rotation_mode=mode,
            noise_pct=default_noise if noise_pct is None else noise_pct,
        )
    m = 10 if dim is None else dim
    noise = 5.0 if noise_pct is None else noise_pct
    if name == "D":
        return HyperplaneConfig(
            m=m,
            segment_len=segment_len,
            num_segments=num_segments,
            rotation_mode=RotationMode.RANDOM_WEIGHTS,
            noise_pct=noise,
        )
    return NdcConfig(
        m=m,
        segment_len=segment_len,
        num_segments=num_segments,
        noise_pct=noise,
    )


def exchangeable_stream(
    n: int, dim: int = 2, seed: int = 0, replica: int = 0
) -> datatypes.StreamSpec:
    """
    Single-concept stream of i.i.d. points without any change.

    Points are labeled by one random hyperplane.
    """
    cfg = HyperplaneConfig(
        m=dim,
        segment_len=n,
        num_segments=1,
        rotation_mode=RotationMode.RANDOM_WEIGHTS,
    )
    return generate_hyperplane_stream(cfg, seed, replica)
