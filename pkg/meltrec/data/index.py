"""
The key-value dictionary of training subsequences per item.

For every training sequence `[i_1, ..., i_n]` and position `t`, the forward
prefix `[i_1, ..., i_t]` is stored under `i_t`. With reversed subsequences
enabled, the reversed suffix `[i_n, ..., i_t]` is stored under `i_t` too,
so both directions end with the key item.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from meltrec.errors import SamplingError, TruncationError

if TYPE_CHECKING:
    import numpy as np

    from meltrec.data.interactions import UserSequence
    from meltrec.data.split import SplitDataset


__all__ = (
    "Subsequence",
    "SubsequenceIndex",
    "build_subsequence_index",
    "sample_subsequences",
    "truncate_recent",
)


@dataclass(frozen=True)
class Subsequence:
    """A training subsequence ending with its key item."""

    owner_user: int
    items: tuple[int, ...]

    def __len__(self) -> int:
        """Return the number of items."""
        return len(self.items)


@dataclass
class SubsequenceIndex:
    """Item id -> subsequences ending with that item."""

    entries: dict[int, list[Subsequence]] = field(default_factory=dict)
    include_reversed: bool = True
    max_len: int | None = None

    def get(self, item: int) -> list[Subsequence]:
        """Return the subsequences of an item (empty if it has none)."""
        return self.entries.get(item, [])

    def size(self, item: int) -> int:
        """Return `|C_i|`."""
        return len(self.entries.get(item, ()))

    def add(self, item: int, subsequence: Subsequence) -> None:
        """Append a subsequence under an item key."""
        self.entries.setdefault(item, []).append(subsequence)

    def __contains__(self, item: object) -> bool:
        """Whether an item has at least one subsequence."""
        return bool(self.entries.get(item))  # type: ignore[call-overload]

    def __len__(self) -> int:
        """Return the number of stored subsequences."""
        return sum(map(len, self.entries.values()))


def _keep_recent(items: Sequence[int], max_len: int | None) -> tuple[int, ...]:
    if max_len is not None and len(items) > max_len:
        return tuple(items[-max_len:])
    return tuple(items)


def build_subsequence_index(
    split: SplitDataset,
    include_reversed: bool = True,  # noqa: FBT001, FBT002
    max_len: int | None = None,
) -> SubsequenceIndex:
    """
    Build `C_i` for every item from training sequences only.

    Users are visited in ascending id order and positions left to right.
    Subsequences longer than `max_len` keep the elements nearest the key item.
    """
    index = SubsequenceIndex(include_reversed=include_reversed, max_len=max_len)
    for user in split.users:
        items = split.train_sequences[user].items
        for position, item in enumerate(items):
            prefix = items[: position + 1]
            index.add(item, Subsequence(user, _keep_recent(prefix, max_len)))
            if include_reversed:
                suffix = items[position:][::-1]
                index.add(item, Subsequence(user, _keep_recent(suffix, max_len)))
    return index


def sample_subsequences(
    index: SubsequenceIndex,
    item: int,
    k: int,
    rng: np.random.Generator,
) -> list[Subsequence]:
    """Sample `k` distinct subsequences of an item uniformly without replacement."""
    pool = index.get(item)
    if not 1 <= k <= len(pool):
        msg = f"Cannot sample {k} subsequences of item {item}; it has {len(pool)}"
        raise SamplingError(msg)
    chosen = rng.choice(len(pool), size=k, replace=False)
    return [pool[position] for position in sorted(chosen.tolist())]


def truncate_recent(sequence: UserSequence | Sequence[int], r: int) -> tuple[int, ...]:
    """
    Return the `r` most recent items in order.

    >>> truncate_recent([1, 2, 3, 4, 5], 2)
    (4, 5)
    """
    items = sequence if isinstance(sequence, Sequence) else sequence.items
    if not 1 <= r <= len(items):
        msg = f"Cannot keep {r} recent items of a sequence of length {len(items)}"
        raise TruncationError(msg)
    return tuple(items[-r:])
