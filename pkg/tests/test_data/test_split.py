from __future__ import annotations

import pytest

from meltrec.data.index import build_subsequence_index
from meltrec.data.interactions import UserSequence
from meltrec.data.split import (
    SplitDataset,
    group_sizes,
    head_count,
    leave_one_out_split,
    partition_head_tail,
)
from meltrec.errors import ConfigError, SplitError


def test_leave_one_out() -> None:
    split = leave_one_out_split({0: UserSequence(0, (3, 1, 4, 1, 5))})
    assert split.train_sequences[0].items == (3, 1, 4)
    assert split.valid_target[0] == 1
    assert split.test_target[0] == 5
    assert split.n_items == 6
    assert split.full_sequence(0) == (3, 1, 4, 1, 5)
    assert split.consumed(0) == {1, 3, 4, 5}


def test_leave_one_out_minimum_length() -> None:
    split = leave_one_out_split({0: UserSequence(0, (7, 8, 9))}, n_items=10)
    assert split.train_sequences[0].items == (7,)
    assert (split.valid_target[0], split.test_target[0]) == (8, 9)


def test_leave_one_out_too_short() -> None:
    sequences = {0: UserSequence(0, (1, 2, 3)), 7: UserSequence(7, (1, 2))}
    with pytest.raises(SplitError, match=r"\(user 7\)") as exc_info:
        leave_one_out_split(sequences)
    assert exc_info.value.user == 7


def test_item_popularity_counts_training_only(toy_split: SplitDataset) -> None:
    popularity = toy_split.item_popularity()
    # Item 8 only appears as a held-out target.
    assert popularity[8] == 0
    assert popularity[0] == 8


@pytest.mark.parametrize(
    "alpha, total, expected",
    [(0.2, 10, 2), (0.7, 10, 7), (0.5, 5, 3), (1.0, 4, 4), (0.01, 3, 1)],
)
def test_head_count(alpha: float, total: int, expected: int) -> None:
    assert head_count(alpha, total) == expected


@pytest.mark.parametrize("alpha", [0.0, -0.1, 1.5])
def test_head_count_invalid(alpha: float) -> None:
    with pytest.raises(ConfigError):
        head_count(alpha, 10)


def test_partition_users() -> None:
    lengths = [9, 8, 7, 6, 5, 5, 4, 3, 2, 2]
    sequences = {
        user: UserSequence(user, tuple(range(length + 2)))
        for user, length in enumerate(lengths)
    }
    split = leave_one_out_split(sequences, n_items=20)
    partition = partition_head_tail(split, 0.2)
    assert partition.head_users == {0, 1}
    assert partition.tail_users == set(range(2, 10))
    assert partition.kappa_u == 8
    assert (partition.L_min_user, partition.L_max_user) == (8, 9)


def test_partition_user_ties_by_id() -> None:
    sequences = {user: UserSequence(user, (0, 1, 2, 3)) for user in range(4)}
    partition = partition_head_tail(leave_one_out_split(sequences), 0.5)
    assert partition.head_users == {0, 1}


def test_partition_items() -> None:
    train = (0,) * 7 + (1,) * 5 + (2,) * 5 + (3,) * 2
    # The held-out targets must not count towards popularity.
    split = leave_one_out_split({0: UserSequence(0, (*train, 3, 3))}, n_items=4)
    partition = partition_head_tail(split, 0.5)
    assert partition.head_items == {0, 1}
    assert partition.tail_items == {2, 3}
    assert partition.kappa_i == 5


def test_partition_alpha_one(toy_split: SplitDataset) -> None:
    partition = partition_head_tail(toy_split, 1.0)
    assert partition.head_users == set(toy_split.users)
    assert not partition.tail_users
    assert partition.head_items == set(range(toy_split.n_items))
    assert not partition.tail_items
    assert partition.kappa_i == 0


def test_partition_item_bounds_from_index(toy_split: SplitDataset) -> None:
    index = build_subsequence_index(toy_split, include_reversed=True)
    partition = partition_head_tail(toy_split, 0.5, index=index)
    sizes = [index.size(item) for item in partition.head_items]
    assert partition.L_min_item == min(sizes)
    assert partition.L_max_item == max(sizes)


def test_partition_is_disjoint(toy_split: SplitDataset) -> None:
    partition = partition_head_tail(toy_split, 0.3)
    assert not partition.head_users & partition.tail_users
    assert partition.head_users | partition.tail_users == set(toy_split.users)
    assert not partition.head_items & partition.tail_items
    assert len(partition.head_items | partition.tail_items) == toy_split.n_items


def test_group_sizes(toy_split: SplitDataset) -> None:
    partition = partition_head_tail(toy_split, 0.5)
    sizes = group_sizes(toy_split, partition)
    assert sizes["head_users"] + sizes["tail_users"] == 8
    assert sizes["head_items"] + sizes["tail_items"] == 12
    assert sum(sizes[cell] for cell in ("HH", "HT", "TH", "TT")) == 8


def test_held_out_items_do_not_leak(toy_split: SplitDataset) -> None:
    shuffled = SplitDataset(
        train_sequences=toy_split.train_sequences,
        valid_target={user: (item + 5) % 12 for user, item in toy_split.valid_target.items()},
        test_target={user: (item + 7) % 12 for user, item in toy_split.test_target.items()},
        n_items=toy_split.n_items,
    )
    assert shuffled.item_popularity() == toy_split.item_popularity()
    index = build_subsequence_index(toy_split)
    assert build_subsequence_index(shuffled) == index
    assert partition_head_tail(shuffled, 0.5, index=index) == partition_head_tail(
        toy_split, 0.5, index=index
    )
