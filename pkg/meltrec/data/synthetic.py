"""Seeded long-tailed interaction logs for desk-scale runs."""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING

import numpy as np

from meltrec.data.interactions import Interaction, InteractionLog
from meltrec.errors import ConfigError
from meltrec.rng import Purpose, numpy_stream

if TYPE_CHECKING:
    from meltrec.config import SyntheticConfig


__all__ = ("generate_synthetic", "item_clusters")

logger = logging.getLogger(__name__)

MIN_ITEM_COUNT = 5
MAX_SWAP_ATTEMPTS = 10_000

# Sub-stream keys under Purpose.SYNTHETIC.
_LENGTHS, _RANKING, _POPULAR, _SHUFFLE, _REPAIR, _CLUSTERS, _ARRANGE = range(7)


def _sequence_lengths(config: SyntheticConfig, rng: np.random.Generator) -> np.ndarray:
    # Lomax-distributed activity, shifted by the minimum length.
    shape = config.user_activity_exponent
    excess = max(config.mean_seq_len - config.min_seq_len, 0.0)
    scale = (excess + 0.5) * (shape - 1) if shape > 1 else excess + 0.5
    draws = np.floor(rng.pareto(shape, size=config.n_users) * scale)
    lengths = config.min_seq_len + draws.astype(np.int64)
    return np.minimum(lengths, config.n_items)


def _item_pool(
    config: SyntheticConfig,
    total: int,
    seed: int,
) -> np.ndarray:
    # Every item appears MIN_ITEM_COUNT times; the rest follows a Zipf law
    # over a random popularity ranking.
    ranking = numpy_stream(seed, Purpose.SYNTHETIC, _RANKING).permutation(config.n_items)
    weights = 1.0 / np.arange(1, config.n_items + 1, dtype=np.float64) ** config.zipf_exponent
    popular = numpy_stream(seed, Purpose.SYNTHETIC, _POPULAR).choice(
        ranking,
        size=total - MIN_ITEM_COUNT * config.n_items,
        p=weights / weights.sum(),
    )
    pool = np.concatenate([np.repeat(np.arange(config.n_items), MIN_ITEM_COUNT), popular])
    numpy_stream(seed, Purpose.SYNTHETIC, _SHUFFLE).shuffle(pool)
    return pool


def item_clusters(config: SyntheticConfig) -> np.ndarray:
    """
    Taste cluster of every item; cluster sizes differ by at most one.

    >>> from meltrec.config import SyntheticConfig
    >>> clusters = item_clusters(SyntheticConfig(n_users=20, n_items=10, n_clusters=3))
    >>> sorted(np.bincount(clusters).tolist())
    [3, 3, 4]
    """
    order = numpy_stream(config.seed, Purpose.SYNTHETIC, _CLUSTERS).permutation(config.n_items)
    clusters = np.empty(config.n_items, dtype=np.int64)
    clusters[order] = np.arange(config.n_items) % config.n_clusters
    return clusters


def _user_clusters(
    lengths: np.ndarray,
    pool: np.ndarray,
    clusters: np.ndarray,
    n_clusters: int,
) -> np.ndarray:
    # Longest users first, each joins the cluster with the most unclaimed interactions.
    capacity = np.bincount(clusters[pool], minlength=n_clusters).astype(np.float64)
    assigned = np.empty(len(lengths), dtype=np.int64)
    for user in np.argsort(-lengths, kind="stable").tolist():
        cluster = int(np.argmax(capacity))
        assigned[user] = cluster
        capacity[cluster] -= lengths[user]
    return assigned


def _arrange_by_taste(
    pool: np.ndarray,
    lengths: np.ndarray,
    config: SyntheticConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    # Each user takes about `cluster_affinity` of their interactions from their
    # own cluster's share of the pool; the leftovers are dealt out at random.
    # The multiset of items, and so every item count, stays the same.
    clusters = item_clusters(config)
    owners = _user_clusters(lengths, pool, clusters, config.n_clusters)
    queues = [pool[clusters[pool] == cluster].tolist() for cluster in range(config.n_clusters)]
    chosen: list[list[int]] = []
    for user, length in enumerate(lengths.tolist()):
        queue = queues[owners[user]]
        take = min(round(config.cluster_affinity * length), len(queue))
        chosen.append([queue.pop() for _ in range(take)])
    rest = np.asarray([item for queue in queues for item in queue], dtype=np.int64)
    rng.shuffle(rest)
    arranged = []
    cursor = 0
    for user, length in enumerate(lengths.tolist()):
        missing = length - len(chosen[user])
        items = np.asarray(chosen[user] + rest[cursor : cursor + missing].tolist(), dtype=np.int64)
        cursor += missing
        arranged.append(rng.permutation(items))
    return np.concatenate(arranged)


def _repeats_at(pool: np.ndarray, owners: np.ndarray, position: int) -> bool:
    before = position > 0 and owners[position - 1] == owners[position]
    after = position + 1 < len(pool) and owners[position + 1] == owners[position]
    return bool(
        (before and pool[position - 1] == pool[position])
        or (after and pool[position + 1] == pool[position])
    )


def _remove_immediate_repeats(
    pool: np.ndarray,
    owners: np.ndarray,
    rng: np.random.Generator,
) -> int:
    swaps = 0
    for position in range(1, len(pool)):
        if owners[position] != owners[position - 1] or pool[position] != pool[position - 1]:
            continue
        for _ in range(MAX_SWAP_ATTEMPTS):
            other = int(rng.integers(len(pool)))
            pool[position], pool[other] = pool[other], pool[position]
            if not _repeats_at(pool, owners, position) and not _repeats_at(pool, owners, other):
                swaps += 1
                break
            pool[position], pool[other] = pool[other], pool[position]
        else:
            msg = "Could not arrange items without immediate repetition"
            raise ConfigError(msg)
    return swaps


def generate_synthetic(config: SyntheticConfig) -> InteractionLog:
    """
    Generate a long-tailed log that passes `core_filter(log, 5)` unchanged.

    Sequence lengths follow a power law clamped to `[min_seq_len, n_items]`,
    item popularity follows a Zipf law, no user consumes the same item twice
    in a row, and timestamps are sequence positions. Users are `u0, u1, ...`
    and items `i0, i1, ...`.

    Items fall into `n_clusters` taste clusters and every user draws about
    `cluster_affinity` of their interactions from one of them, so a
    sequence says something about its next item beyond popularity. The
    arrangement moves interactions between users without changing any item
    count; `cluster_affinity=0` deals the pool out at random.
    """
    config.check_feasible()
    seed = config.seed
    lengths = _sequence_lengths(config, numpy_stream(seed, Purpose.SYNTHETIC, _LENGTHS))
    total = int(lengths.sum())
    if total < MIN_ITEM_COUNT * config.n_items:
        msg = f"{total} interactions cannot give every item {MIN_ITEM_COUNT}"
        raise ConfigError(msg)

    pool = _arrange_by_taste(
        _item_pool(config, total, seed),
        lengths,
        config,
        numpy_stream(seed, Purpose.SYNTHETIC, _ARRANGE),
    )
    owners = np.repeat(np.arange(config.n_users), lengths)
    swaps = _remove_immediate_repeats(
        pool,
        owners,
        numpy_stream(seed, Purpose.SYNTHETIC, _REPAIR),
    )
    logger.debug("Generated %d interactions (%d repeat swaps)", total, swaps)

    starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    interactions = [
        Interaction(f"u{user}", f"i{pool[start + position]}", position)
        for user, (start, length) in enumerate(zip(starts.tolist(), lengths.tolist()))
        for position in range(length)
    ]
    return InteractionLog.from_interactions(interactions)
