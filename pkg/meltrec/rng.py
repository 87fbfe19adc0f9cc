"""
Counter-based random streams.

Every random draw in meltrec comes from a stream keyed on the run seed, a
purpose and a few counters (epoch, batch, user, ...). Streams never share
state, so a draw for one purpose cannot shift the draws of another.
"""

from __future__ import annotations

import enum

import numpy as np
import torch

__all__ = ("Purpose", "numpy_stream", "torch_stream")


class Purpose(enum.IntEnum):
    """What a random stream is used for."""

    INIT = 0
    SHUFFLE = 1
    NEGATIVES = 2
    DROPOUT = 3
    USER_BRANCH = 4
    ITEM_BRANCH = 5
    CONTEXT = 6
    EVALUATION = 7
    SYNTHETIC = 8
    ITEM_SCHEDULE = 9
    BRANCH_DROPOUT = 10
    WARM_START = 11


def _seed_sequence(seed: int, purpose: Purpose, keys: tuple[int, ...]) -> np.random.SeedSequence:
    return np.random.SeedSequence((int(seed), int(purpose), *(int(key) for key in keys)))


def numpy_stream(seed: int, purpose: Purpose, *keys: int) -> np.random.Generator:
    """
    Return a numpy generator keyed on `(seed, purpose, *keys)`.

    >>> a = numpy_stream(7, Purpose.SHUFFLE, 3).integers(1000, size=3)
    >>> b = numpy_stream(7, Purpose.SHUFFLE, 3).integers(1000, size=3)
    >>> bool((a == b).all())
    True
    """
    return np.random.Generator(np.random.Philox(_seed_sequence(seed, purpose, keys)))


def torch_stream(seed: int, purpose: Purpose, *keys: int) -> torch.Generator:
    """Return a CPU torch generator keyed on `(seed, purpose, *keys)`."""
    state = _seed_sequence(seed, purpose, keys).generate_state(1, np.uint64)
    generator = torch.Generator()
    # torch seeds are limited to 63 bits on some builds.
    generator.manual_seed(int(state[0]) & (2**63 - 1))
    return generator
