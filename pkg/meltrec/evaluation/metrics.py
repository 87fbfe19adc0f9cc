"""Ranking metrics for a single relevant item."""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

from meltrec.errors import ConfigError

if TYPE_CHECKING:
    from collections.abc import Sequence


__all__ = (
    "hit_at_k",
    "ndcg_at_k",
    "rank_of",
)


def _check_rank(rank: int) -> None:
    if rank < 1:
        msg = f"Ranks start at 1, got {rank}"
        raise ConfigError(msg)


def hit_at_k(rank: int, k: int) -> int:
    """
    1 if the ground truth is ranked within the top `k`, else 0.

    >>> hit_at_k(1, 10), hit_at_k(10, 10), hit_at_k(11, 10)
    (1, 1, 0)
    """
    _check_rank(rank)
    return int(rank <= k)


def ndcg_at_k(rank: int, k: int) -> float:
    """
    `1 / log2(rank + 1)` within the top `k`, else 0.

    >>> ndcg_at_k(1, 10), ndcg_at_k(3, 10), ndcg_at_k(12, 10)
    (1.0, 0.5, 0.0)
    """
    _check_rank(rank)
    if rank > k:
        return 0.0
    return 1.0 / math.log2(rank + 1)


def rank_of(truth: int, candidates: Sequence[int], scores: Sequence[float]) -> int:
    """
    1-based rank of `truth`: higher scores first, equal scores by smaller id.

    >>> rank_of(7, [7, 3, 9], [0.5, 0.5, 0.9])
    3
    """
    truth_score = scores[list(candidates).index(truth)]
    return 1 + sum(
        score > truth_score or (score == truth_score and item < truth)
        for item, score in zip(candidates, scores)
    )
