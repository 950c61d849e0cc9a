"""Contains utility functions for seeding and bookkeeping."""

import enum

import numpy


class SeedPurpose(enum.IntEnum):
    """Separates the random streams drawn from one (seed, replica) pair."""

    STREAM = 0
    DETECTOR = 1
    NOISE = 2
    SHUFFLE = 3


def derive_seed_sequence(seed: int, *key: int) -> numpy.random.SeedSequence:
    """
    Build a seed sequence for one independent consumer of randomness.

    Parameters
    ----------
    seed : int
        Root seed of the run.
    *key : int
        Nonnegative integers identifying the consumer, for example
        (replica, purpose, channel position).

    Returns
    -------
    numpy.random.SeedSequence
        Sequence whose state depends only on `seed` and `key`, never on the
        order in which consumers are created.
    """
    if any(k < 0 for k in key):
        raise ValueError(f"Seed keys must be nonnegative, got {key}")
    return numpy.random.SeedSequence(
        entropy=abs(int(seed)), spawn_key=tuple(int(k) for k in key)
    )


def derive_rng(seed: int, *key: int) -> numpy.random.Generator:
    """Return a PCG64 generator for `derive_seed_sequence(seed, *key)`."""
    return numpy.random.Generator(
        numpy.random.PCG64(derive_seed_sequence(seed, *key))
    )
