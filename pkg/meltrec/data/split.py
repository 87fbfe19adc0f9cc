"""Leave-one-out splitting and the head/tail partition of users and items."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import TYPE_CHECKING, Literal

from meltrec.data.interactions import UserSequence
from meltrec.errors import ConfigError, SplitError

if TYPE_CHECKING:
    from collections.abc import Mapping

    from meltrec.data.index import SubsequenceIndex


__all__ = (
    "Group",
    "HeadTailPartition",
    "SplitDataset",
    "group_sizes",
    "head_count",
    "leave_one_out_split",
    "partition_head_tail",
)

MIN_SPLIT_LENGTH = 3

Group = Literal["head", "tail"]


@dataclass(frozen=True)
class SplitDataset:
    """Per-user training sequences plus validation and test targets."""

    train_sequences: dict[int, UserSequence]
    valid_target: dict[int, int]
    test_target: dict[int, int]
    n_items: int

    @property
    def users(self) -> list[int]:
        """Dense user ids in ascending order."""
        return sorted(self.train_sequences)

    def full_sequence(self, user: int) -> tuple[int, ...]:
        """Reassemble train, validation and test items of a user."""
        return (
            *self.train_sequences[user].items,
            self.valid_target[user],
            self.test_target[user],
        )

    def consumed(self, user: int) -> frozenset[int]:
        """All items the user interacted with, targets included."""
        return frozenset(self.full_sequence(user))

    def item_popularity(self) -> Counter[int]:
        """Training interaction count per item (validation and test excluded)."""
        counts: Counter[int] = Counter()
        for sequence in self.train_sequences.values():
            counts.update(sequence.items)
        return counts


def leave_one_out_split(
    sequences: Mapping[int, UserSequence],
    n_items: int | None = None,
) -> SplitDataset:
    """
    Hold out each user's last item for test and second-to-last for validation.

    `n_items` defaults to one past the largest item id seen.
    """
    train: dict[int, UserSequence] = {}
    valid: dict[int, int] = {}
    test: dict[int, int] = {}
    largest = -1
    for user, sequence in sequences.items():
        if len(sequence) < MIN_SPLIT_LENGTH:
            msg = (
                f"Sequence of length {len(sequence)} is shorter than "
                f"{MIN_SPLIT_LENGTH}, the minimum for leave-one-out"
            )
            raise SplitError(msg, user)
        *head, valid[user], test[user] = sequence.items
        train[user] = UserSequence(user, tuple(head))
        largest = max(largest, *sequence.items)
    return SplitDataset(
        train_sequences=train,
        valid_target=valid,
        test_target=test,
        n_items=largest + 1 if n_items is None else n_items,
    )


def head_count(alpha: float, total: int) -> int:
    """
    Number of head entities, ceil(alpha * total).

    >>> head_count(0.2, 10), head_count(0.7, 10), head_count(0.01, 3)
    (2, 7, 1)
    """
    if not 0 < alpha <= 1:
        msg = f"alpha must lie in (0, 1], got {alpha}"
        raise ConfigError(msg)
    # Rounding first keeps 0.7 * 10 == 7.000000000000001 from ceiling to 8.
    return math.ceil(round(alpha * total, 9))


@dataclass(frozen=True)
class HeadTailPartition:
    """Head/tail membership of users and items with curriculum bounds."""

    head_users: frozenset[int]
    tail_users: frozenset[int]
    head_items: frozenset[int]
    tail_items: frozenset[int]
    alpha: float
    kappa_u: int
    kappa_i: int
    L_min_user: int  # noqa: N815
    L_max_user: int  # noqa: N815
    L_min_item: int  # noqa: N815
    L_max_item: int  # noqa: N815

    def user_group(self, user: int) -> Group:
        """Whether a user is a head or a tail user."""
        return "head" if user in self.head_users else "tail"

    def item_group(self, item: int) -> Group:
        """Whether an item is a head or a tail item."""
        return "head" if item in self.head_items else "tail"


def partition_head_tail(
    split: SplitDataset,
    alpha: float,
    *,
    index: SubsequenceIndex | None = None,
) -> HeadTailPartition:
    """
    Split users by training length and items by training popularity.

    Ties are broken by dense id ascending. Item curriculum bounds are taken
    over `|C_i|` of head items when an index is given, and over popularity
    counts otherwise.
    """
    lengths = {user: len(seq) for user, seq in split.train_sequences.items()}
    users = sorted(lengths, key=lambda user: (-lengths[user], user))
    n_head_users = head_count(alpha, len(users))
    head_users = users[:n_head_users]

    popularity = split.item_popularity()
    items = sorted(range(split.n_items), key=lambda item: (-popularity[item], item))
    n_head_items = head_count(alpha, len(items))
    head_items = items[:n_head_items]

    user_bounds = [lengths[user] for user in head_users] or [0]
    if index is not None:
        item_bounds = [index.size(item) for item in head_items]
    else:
        item_bounds = [popularity[item] for item in head_items]
    item_bounds = item_bounds or [0]

    return HeadTailPartition(
        head_users=frozenset(head_users),
        tail_users=frozenset(users[n_head_users:]),
        head_items=frozenset(head_items),
        tail_items=frozenset(items[n_head_items:]),
        alpha=alpha,
        kappa_u=min(user_bounds),
        kappa_i=min((popularity[item] for item in head_items), default=0),
        L_min_user=min(user_bounds),
        L_max_user=max(user_bounds),
        L_min_item=min(item_bounds),
        L_max_item=max(item_bounds),
    )


def group_sizes(
    split: SplitDataset,
    partition: HeadTailPartition,
    target: Literal["validation", "test"] = "test",
) -> dict[str, int]:
    """Count users per head/tail group and per fine-grained cell."""
    targets = split.test_target if target == "test" else split.valid_target
    cells: Counter[str] = Counter()
    for user, item in targets.items():
        cell = partition.user_group(user)[0] + partition.item_group(item)[0]
        cells[cell.upper()] += 1
    return {
        "head_users": len(partition.head_users),
        "tail_users": len(partition.tail_users),
        "head_items": len(partition.head_items),
        "tail_items": len(partition.tail_items),
        **{cell: cells[cell] for cell in ("HH", "HT", "TH", "TT")},
    }
