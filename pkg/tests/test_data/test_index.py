from __future__ import annotations

import numpy as np
import pytest

from meltrec.data.index import (
    Subsequence,
    SubsequenceIndex,
    build_subsequence_index,
    sample_subsequences,
    truncate_recent,
)
from meltrec.data.interactions import UserSequence
from meltrec.data.split import SplitDataset
from meltrec.errors import SamplingError, TruncationError


@pytest.fixture
def small_split() -> SplitDataset:
    return SplitDataset(
        train_sequences={
            0: UserSequence(0, (1, 2, 4)),
            1: UserSequence(1, (1, 3, 2, 4)),
        },
        valid_target={0: 0, 1: 0},
        test_target={0: 5, 1: 5},
        n_items=6,
    )


def test_forward_only(small_split: SplitDataset) -> None:
    index = build_subsequence_index(small_split, include_reversed=False)
    assert index.get(2) == [Subsequence(0, (1, 2)), Subsequence(1, (1, 3, 2))]
    assert index.get(4) == [Subsequence(0, (1, 2, 4)), Subsequence(1, (1, 3, 2, 4))]
    assert index.size(3) == 1
    assert len(index) == 7


def test_with_reversed(small_split: SplitDataset) -> None:
    index = build_subsequence_index(small_split, include_reversed=True)
    assert {subsequence.items for subsequence in index.get(2)} == {
        (1, 2),
        (1, 3, 2),
        (4, 2),
    }
    assert index.get(2) == [
        Subsequence(0, (1, 2)),
        Subsequence(0, (4, 2)),
        Subsequence(1, (1, 3, 2)),
        Subsequence(1, (4, 2)),
    ]
    assert len(index) == 14


def test_unknown_item(small_split: SplitDataset) -> None:
    index = build_subsequence_index(small_split)
    # Targets never enter the index.
    assert 5 not in index
    assert index.get(5) == []
    assert index.size(0) == 0


def test_max_len_keeps_key_item(small_split: SplitDataset) -> None:
    index = build_subsequence_index(small_split, include_reversed=True, max_len=2)
    assert Subsequence(1, (3, 2)) in index.get(2)
    assert Subsequence(0, (2, 1)) in index.get(1)
    assert Subsequence(1, (3, 1)) in index.get(1)
    assert all(len(subsequence) <= 2 for subsequence in index.entries[4])


def _oracle(sequences: dict[int, tuple[int, ...]], include_reversed: bool) -> dict:
    expected: dict[int, list[tuple[int, ...]]] = {}
    for items in (sequences[user] for user in sorted(sequences)):
        for t in range(len(items)):
            expected.setdefault(items[t], []).append(items[: t + 1])
            if include_reversed:
                expected[items[t]].append(tuple(reversed(items[t:])))
    return expected


@pytest.mark.parametrize("include_reversed", [False, True])
def test_random_logs_match_oracle(include_reversed: bool) -> None:
    rng = np.random.default_rng(7)
    for _ in range(100):
        n_users = int(rng.integers(1, 6))
        sequences = {
            user: tuple(rng.integers(0, 6, size=int(rng.integers(1, 8))).tolist())
            for user in range(n_users)
        }
        split = SplitDataset(
            train_sequences={user: UserSequence(user, items) for user, items in sequences.items()},
            valid_target=dict.fromkeys(sequences, 0),
            test_target=dict.fromkeys(sequences, 0),
            n_items=6,
        )
        index = build_subsequence_index(split, include_reversed=include_reversed)
        actual = {
            item: [subsequence.items for subsequence in subsequences]
            for item, subsequences in index.entries.items()
        }
        assert actual == _oracle(sequences, include_reversed)
        for item, subsequences in index.entries.items():
            for subsequence in subsequences:
                assert subsequence.items[-1] == item


def test_sample_subsequences(small_split: SplitDataset) -> None:
    index = build_subsequence_index(small_split)
    first = sample_subsequences(index, 2, 3, np.random.default_rng(0))
    second = sample_subsequences(index, 2, 3, np.random.default_rng(0))
    assert first == second
    assert len(set(first)) == 3
    assert set(first) <= set(index.get(2))
    assert sample_subsequences(index, 2, 4, np.random.default_rng(1)) == index.get(2)


@pytest.mark.parametrize("k", [0, 5])
def test_sample_subsequences_out_of_range(small_split: SplitDataset, k: int) -> None:
    index = build_subsequence_index(small_split)
    with pytest.raises(SamplingError):
        sample_subsequences(index, 2, k, np.random.default_rng(0))


def test_sample_from_empty_item() -> None:
    with pytest.raises(SamplingError):
        sample_subsequences(SubsequenceIndex(), 3, 1, np.random.default_rng(0))


def test_truncate_recent() -> None:
    assert truncate_recent([1, 2, 3, 4, 5], 2) == (4, 5)
    assert truncate_recent(UserSequence(0, (1, 2, 3)), 3) == (1, 2, 3)
    assert truncate_recent((9,), 1) == (9,)


@pytest.mark.parametrize("r", [0, 4])
def test_truncate_recent_out_of_range(r: int) -> None:
    with pytest.raises(TruncationError):
        truncate_recent((1, 2, 3), r)
