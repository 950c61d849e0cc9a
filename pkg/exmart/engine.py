"""Contains classes which define and implement dependency-injection engines."""

import collections.abc
import dataclasses

from exmart import (
    datatypes,
    detectors,
    hooks,
    ingest,
    interfaces,
    simulate,
    strangeness,
)


def create_engine(np: int = 1) -> interfaces.DetectionEngine:
    """
    Initialize and return a DetectionEngine based on configuration parameters.

    Parameters
    ----------
    np : int (default: 1)
        Number of processes used by experiment sweeps.
    """
    if np < 1:
        raise ValueError("Must have number of processes greater than 0.")
    return DetectionEngineBasic(np=np)


@dataclasses.dataclass(frozen=True, slots=True)
class _multi_detector_init:
    def __call__(
        self,
        config: datatypes.DetectorConfig,
        provider: interfaces.ProviderFactory = strangeness.KnnProviderConfig(),
        label_set: collections.abc.Collection[int] = (-1, 1),
        replica: int = 0,
    ) -> detectors.MultiChannelDetector:
        """
        Create a one-vs-rest detector with one channel per class.

        Parameters
        ----------
        config : exmart.datatypes.DetectorConfig
            Settings shared by all channels.
        provider : exmart.interfaces.ProviderFactory
            Strangeness provider configuration.
        label_set : collections.abc.Collection[int] (default: (-1, 1))
            Declared classes of the stream.
        replica : int (default: 0)
            Replica index mixed into the channel seeds.
        """
        return detectors.MultiChannelDetector(
            config, provider, label_set, replica
        )


class DetectionEngineBasic(interfaces.DetectionEngine):
    """
    Implements DetectionEngine with the built-in providers and streams.

    Default for module.

    Parameters
    ----------
    np : int (default: 1)
        Number of processes used by experiment sweeps.
    """

    __slots__ = ("_np",)

    def __init__(self, np: int = 1):
        if np < 1:
            raise ValueError(f"np = {np} is invalid")
        self._np = np

    @property
    def np(self) -> int:
        return self._np

    @property
    def provider(self) -> interfaces.ProviderTypes:
        return interfaces.ProviderTypes(
            strangeness.KnnProviderConfig, strangeness.SvmProviderConfig
        )

    @property
    def detector(self) -> interfaces.DetectorTypes:
        return interfaces.DetectorTypes(
            detectors.MartingaleDetector, _multi_detector_init()
        )

    @property
    def stream(self) -> interfaces.StreamTypes:
        return interfaces.StreamTypes(
            simulate.generate_hyperplane_stream,
            simulate.generate_ndc_stream,
            ingest.load_csv_stream,
            ingest.load_recipe_stream,
        )

    @property
    def hook(self) -> interfaces.HookTypes:
        return interfaces.HookTypes(
            hooks.TrajectoryRecorder,
            hooks.MaxDetectionsCondition,
            hooks.MaxPointsCondition,
        )
