"""Uniform negative items for sampled ranking evaluation."""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from meltrec.errors import EvaluationError

if TYPE_CHECKING:
    from collections.abc import Iterable


__all__ = ("sample_negatives",)


def sample_negatives(
    user: int,
    n_items: int,
    consumed: Iterable[int],
    n: int,
    rng: np.random.Generator,
) -> list[int]:
    """
    Draw `n` distinct items the user never interacted with.

    `consumed` must cover the user's training, validation and test items.
    """
    pool = np.setdiff1d(np.arange(n_items), np.fromiter(consumed, dtype=np.int64))
    if len(pool) < n:
        msg = f"Only {len(pool)} unconsumed items are left to draw {n} negatives from"
        raise EvaluationError(msg, user)
    return rng.choice(pool, size=n, replace=False).tolist()
