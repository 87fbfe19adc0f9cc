"""Interaction logs: parsing, core filtering and per-user sequences."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from meltrec.errors import ConfigError, ParseError

if TYPE_CHECKING:
    from collections.abc import Iterable, Iterator
    from typing import IO


__all__ = (
    "Interaction",
    "InteractionLog",
    "UserSequence",
    "build_sequences",
    "core_filter",
    "dataset_stats",
    "format_interactions",
    "parse_interactions",
)

logger = logging.getLogger(__name__)

FIELD_COUNT = 3


@dataclass(frozen=True)
class Interaction:
    """A single (user, item, timestamp) triple."""

    user_id: str
    item_id: str
    timestamp: int

    def __post_init__(self) -> None:
        if self.timestamp < 0:
            msg = f"Negative timestamp {self.timestamp} for {self.user_id!r}"
            raise ValueError(msg)


def _first_appearance_index(keys: Iterable[str]) -> dict[str, int]:
    index: dict[str, int] = {}
    for key in keys:
        if key not in index:
            index[key] = len(index)
    return index


@dataclass(frozen=True)
class InteractionLog:
    """
    A multiset of interactions with dense user and item ids.

    Dense ids are contiguous from 0 in first-appearance order.
    """

    interactions: tuple[Interaction, ...] = ()
    user_index: dict[str, int] = field(default_factory=dict)
    item_index: dict[str, int] = field(default_factory=dict)

    @classmethod
    def from_interactions(cls, interactions: Iterable[Interaction]) -> InteractionLog:
        """Build a log, assigning dense ids in first-appearance order."""
        interactions = tuple(interactions)
        return cls(
            interactions=interactions,
            user_index=_first_appearance_index(it.user_id for it in interactions),
            item_index=_first_appearance_index(it.item_id for it in interactions),
        )

    @property
    def n_users(self) -> int:
        """Number of distinct users."""
        return len(self.user_index)

    @property
    def n_items(self) -> int:
        """Number of distinct items."""
        return len(self.item_index)

    @property
    def user_keys(self) -> list[str]:
        """User keys in dense id order."""
        return list(self.user_index)

    @property
    def item_keys(self) -> list[str]:
        """Item keys in dense id order."""
        return list(self.item_index)

    def __len__(self) -> int:
        """Return the number of interactions."""
        return len(self.interactions)

    def __iter__(self) -> Iterator[Interaction]:
        """Iterate over interactions in log order."""
        return iter(self.interactions)


@dataclass(frozen=True)
class UserSequence:
    """A user's items sorted by time (ties by dense item id)."""

    user: int
    items: tuple[int, ...]

    def __len__(self) -> int:
        """Return the sequence length."""
        return len(self.items)


def parse_interactions(raw: Iterable[str] | IO[str]) -> InteractionLog:
    """
    Parse tab-separated `user_id`, `item_id`, `timestamp` lines.

    >>> log = parse_interactions(["u1\\ti1\\t5", "u1\\ti2\\t9", "u2\\ti1\\t7"])
    >>> (log.n_users, log.n_items, len(log))
    (2, 2, 3)
    """
    interactions = []
    for line_number, line in enumerate(raw, start=1):
        stripped = line.rstrip("\r\n")
        if not stripped.strip():
            continue
        fields = stripped.split("\t")
        if len(fields) != FIELD_COUNT:
            msg = f"Expected {FIELD_COUNT} tab-separated fields, got {len(fields)}"
            raise ParseError(msg, line_number)
        user_id, item_id, raw_timestamp = fields
        if not (raw_timestamp.isascii() and raw_timestamp.isdecimal()):
            msg = f"Timestamp {raw_timestamp!r} is not a non-negative decimal integer"
            raise ParseError(msg, line_number)
        interactions.append(Interaction(user_id, item_id, int(raw_timestamp)))
    return InteractionLog.from_interactions(interactions)


def format_interactions(log: InteractionLog) -> str:
    """Serialize a log back to tab-separated lines."""
    return "".join(
        f"{it.user_id}\t{it.item_id}\t{it.timestamp}\n" for it in log.interactions
    )


def _filter_pass(
    interactions: tuple[Interaction, ...],
    min_count: int,
) -> tuple[Interaction, ...]:
    user_counts = Counter(it.user_id for it in interactions)
    item_counts = Counter(it.item_id for it in interactions)
    return tuple(
        it
        for it in interactions
        if user_counts[it.user_id] >= min_count and item_counts[it.item_id] >= min_count
    )


def core_filter(
    log: InteractionLog,
    min_count: int = 5,
    *,
    iterate: bool = True,
) -> InteractionLog:
    """
    Remove users and items with fewer than `min_count` interactions.

    With `iterate` (the default) passes repeat until nothing changes;
    dense ids are reassigned over the survivors.
    """
    if min_count < 1:
        msg = f"min_count must be at least 1, got {min_count}"
        raise ConfigError(msg)
    interactions = log.interactions
    passes = 0
    while True:
        filtered = _filter_pass(interactions, min_count)
        passes += 1
        if len(filtered) == len(interactions) or not iterate:
            interactions = filtered
            break
        interactions = filtered
    logger.debug(
        "Core filter kept %d of %d interactions after %d pass(es)",
        len(interactions),
        len(log),
        passes,
    )
    return InteractionLog.from_interactions(interactions)


def build_sequences(log: InteractionLog) -> dict[int, UserSequence]:
    """Group a log into per-user sequences ordered by (timestamp, item id)."""
    events: dict[int, list[tuple[int, int]]] = {}
    for it in log.interactions:
        user = log.user_index[it.user_id]
        events.setdefault(user, []).append((it.timestamp, log.item_index[it.item_id]))
    return {
        user: UserSequence(user, tuple(item for _, item in sorted(events[user])))
        for user in sorted(events)
    }


def dataset_stats(log: InteractionLog) -> dict[str, float]:
    """Users, items, interactions, average sequence length and density."""
    n_users, n_items, n_interactions = log.n_users, log.n_items, len(log)
    return {
        "users": n_users,
        "items": n_items,
        "interactions": n_interactions,
        "avg_seq_len": n_interactions / n_users if n_users else 0.0,
        "density": n_interactions / (n_users * n_items) if n_users and n_items else 0.0,
    }
