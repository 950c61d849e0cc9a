"""Contains interfaces for major datatypes in exmart."""

import abc
import collections.abc
import enum
import typing

import numpy
import numpy.typing

if typing.TYPE_CHECKING:
    from exmart import datatypes

ChannelId = typing.NewType("ChannelId", int)

FloatArray = numpy.typing.NDArray[numpy.float64]
IntArray = numpy.typing.NDArray[numpy.int64]


class ExmartError(Exception):
    """Base class of all errors raised deliberately by exmart."""


class ConfigurationError(ExmartError, ValueError):
    """A configuration value lies outside its valid domain."""


class StreamFormatError(ExmartError, ValueError):
    """Input data (CSV, recipe, stream point) is malformed."""


class ProviderUntrainableError(ExmartError, RuntimeError):
    """A strangeness provider cannot score the current bag."""


class UndefinedDelayError(ExmartError, ArithmeticError):
    """The p-value distribution does not indicate a change."""


class StrangenessProvider(abc.ABC):
    """
    Nonconformity measure mapping a bag of labeled points to scores.

    Each detector channel owns its own provider instance, so providers may
    cache information about the bag they were last asked to score.

    Methods
    -------
    score:
        Score the bag extended by one candidate point.
    reset:
        Drop any cached state.
    """

    __slots__ = ()

    @abc.abstractmethod
    def score(
        self,
        bag: "datatypes.PointBag",
        candidate: "datatypes.LabeledPoint",
    ) -> FloatArray:
        """
        Score every point of the bag extended by a candidate.

        Parameters
        ----------
        bag : exmart.datatypes.PointBag
            Points retained by the detector, oldest first.
        candidate : exmart.datatypes.LabeledPoint
            Newly observed point, treated as the last member of the bag.

        Returns
        -------
        numpy.ndarray
            Nonnegative, finite scores of length ``len(bag) + 1``.  The last
            entry belongs to the candidate.

        Raises
        ------
        exmart.interfaces.ProviderUntrainableError
            If the provider cannot score this bag.
        """

    def reset(self) -> None:
        """Drop any state cached from previous calls."""


class ProviderFactory(typing.Protocol):
    """Configuration object able to build fresh provider instances."""

    def build(self) -> StrangenessProvider: ...


class HookReturnValue(enum.Enum):
    CONTINUE = enum.auto()
    STOP = enum.auto()
    STOP_SHORTCIRCUIT = enum.auto()


class StepInfo(typing.NamedTuple):
    """
    Observation made by a detector after a single stream point.

    Attributes
    ----------
    index : int
        Global 1-based index of the point.
    p_values : collections.abc.Mapping[ChannelId, float]
        Randomized p-value of the point on each channel.
    log_martingales : collections.abc.Mapping[ChannelId, float]
        Natural log of each channel martingale after the update, before any
        reset triggered by this point.
    event : typing.Optional[exmart.datatypes.DetectionEvent]
        Detection declared at this point, if any.
    """

    index: int
    p_values: collections.abc.Mapping[ChannelId, float]
    log_martingales: collections.abc.Mapping[ChannelId, float]
    event: typing.Optional["datatypes.DetectionEvent"]


class MonitorHook(abc.ABC):
    @abc.abstractmethod
    def __call__(self, step: StepInfo) -> HookReturnValue:
        """
        Protocol defining format for monitor hooks.

        Parameters
        ----------
        step : StepInfo
            Information about the point which was just processed.

        Returns
        -------
        HookReturnValue
            CONTINUE -> keep monitoring.
            STOP -> finish running other hooks, then stop monitoring.
            STOP_SHORTCIRCUIT -> stop immediately, do not run other hooks.
        """


class ChangeDetector(abc.ABC):
    """
    Online tester of exchangeability over a labeled stream.

    Attributes
    ----------
    channels : tuple[ChannelId, ...]
        Channels maintained by the detector, in ascending order.
    points_seen : int
        Number of points processed so far.
    """

    __slots__ = ()

    @property
    @abc.abstractmethod
    def channels(self) -> tuple[ChannelId, ...]:
        """Channel identifiers, lowest first."""

    @property
    @abc.abstractmethod
    def points_seen(self) -> int:
        """Global number of processed points."""

    @abc.abstractmethod
    def observe(self, point: "datatypes.LabeledPoint") -> StepInfo:
        """
        Process one point and report what was observed.

        Parameters
        ----------
        point : exmart.datatypes.LabeledPoint
            Next point of the stream.

        Returns
        -------
        StepInfo
            Per-channel p-values and martingales, plus any detection.
        """


class _knn_provider_init(typing.Protocol):
    def __call__(self, k: int = 1) -> ProviderFactory: ...


class _svm_provider_init(typing.Protocol):
    def __call__(
        self,
        gamma: typing.Optional[float] = None,
        C: float = 10.0,
        retrain_every: int = 1,
    ) -> ProviderFactory: ...


class ProviderTypes(typing.NamedTuple):
    """
    Contains strangeness provider configuration constructors.

    Attributes
    ----------
    knn
        Nearest-neighbor distance ratio.
    svm
        Signed distance from a Gaussian-kernel SVM decision boundary.
    """

    knn: _knn_provider_init
    svm: _svm_provider_init


class DetectorTypes(typing.NamedTuple):
    """
    Contains detector constructors.

    Attributes
    ----------
    single
        One martingale over a binary stream.
    multi
        One-vs-rest martingale per class.
    """

    single: collections.abc.Callable[..., ChangeDetector]
    multi: collections.abc.Callable[..., ChangeDetector]


class StreamTypes(typing.NamedTuple):
    """
    Contains stream constructors.

    Attributes
    ----------
    hyperplane
        Rotating hyperplane generator.
    ndc
        Normally distributed clusters generator.
    csv
        Labeled-CSV loader.
    recipe
        Segment recipe composer.
    """

    hyperplane: collections.abc.Callable[..., "datatypes.StreamSpec"]
    ndc: collections.abc.Callable[..., "datatypes.StreamSpec"]
    csv: collections.abc.Callable[..., "datatypes.StreamSpec"]
    recipe: collections.abc.Callable[..., "datatypes.StreamSpec"]


class HookTypes(typing.NamedTuple):
    """
    Contains monitor hook constructors.

    Attributes
    ----------
    trajectory
        Records p-values and martingales of every step.
    max_detections
        Stops monitoring after a number of detections.
    max_points
        Stops monitoring after a number of points.
    """

    trajectory: collections.abc.Callable[[], MonitorHook]
    max_detections: collections.abc.Callable[[int], MonitorHook]
    max_points: collections.abc.Callable[[int], MonitorHook]


class DetectionEngine(abc.ABC):
    """
    Factory object for the components used in change detection.

    Attributes
    ----------
    np : int
        Number of worker processes used by experiment sweeps.
    provider : ProviderTypes
    detector : DetectorTypes
    stream : StreamTypes
    hook : HookTypes
    """

    __slots__ = ()

    @property
    @abc.abstractmethod
    def np(self) -> int:
        """
        Number of processes to be used for experiment replicas.

        Returns
        -------
        int
            Number of worker processes.
        """

    @property
    @abc.abstractmethod
    def provider(self) -> ProviderTypes:
        """Strangeness provider constructors."""

    @property
    @abc.abstractmethod
    def detector(self) -> DetectorTypes:
        """Detector constructors."""

    @property
    @abc.abstractmethod
    def stream(self) -> StreamTypes:
        """Stream constructors."""

    @property
    @abc.abstractmethod
    def hook(self) -> HookTypes:
        """Monitor hook constructors."""
