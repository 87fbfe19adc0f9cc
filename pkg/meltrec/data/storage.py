"""
Plain-text and JSON files holding a prepared dataset.

The `data/` directory of a workdir contains:

- `interactions.tsv`: the core-filtered log, one tab-separated triple per line.
- `split.json`: per-user training sequence, validation and test targets, and
  the original user and item keys in dense id order.
- `partition.json`: head/tail membership, thresholds and curriculum bounds.
- `index.json`: the subsequence dictionary, keyed by dense item id.
- `stats.json`: dataset and group statistics.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, fields
from typing import TYPE_CHECKING, Any

from meltrec.data.index import Subsequence, SubsequenceIndex
from meltrec.data.interactions import InteractionLog, UserSequence, format_interactions
from meltrec.data.split import HeadTailPartition, SplitDataset
from meltrec.errors import DataError
from meltrec.sources import FileSource

if TYPE_CHECKING:
    from pathlib import Path


__all__ = (
    "PreparedData",
    "load_prepared",
    "partition_from_dict",
    "partition_to_dict",
    "save_prepared",
    "split_from_dict",
    "split_to_dict",
)

logger = logging.getLogger(__name__)

INTERACTIONS_FILE = "interactions.tsv"
SPLIT_FILE = "split.json"
PARTITION_FILE = "partition.json"
INDEX_FILE = "index.json"
STATS_FILE = "stats.json"


@dataclass(frozen=True)
class PreparedData:
    """Everything `prepare` derives from an interaction log."""

    split: SplitDataset
    partition: HeadTailPartition
    index: SubsequenceIndex
    user_keys: list[str]
    item_keys: list[str]


def split_to_dict(split: SplitDataset) -> dict[str, Any]:
    """Represent a split as JSON-compatible data."""
    return {
        "n_items": split.n_items,
        "users": [
            {
                "user": user,
                "train": list(split.train_sequences[user].items),
                "valid": split.valid_target[user],
                "test": split.test_target[user],
            }
            for user in split.users
        ],
    }


def split_from_dict(data: dict[str, Any]) -> SplitDataset:
    """Inverse of [`split_to_dict`][meltrec.data.storage.split_to_dict]."""
    train, valid, test = {}, {}, {}
    for record in data["users"]:
        user = int(record["user"])
        train[user] = UserSequence(user, tuple(map(int, record["train"])))
        valid[user] = int(record["valid"])
        test[user] = int(record["test"])
    return SplitDataset(train, valid, test, n_items=int(data["n_items"]))


def partition_to_dict(partition: HeadTailPartition) -> dict[str, Any]:
    """Represent a partition as JSON-compatible data; sets become sorted lists."""
    data: dict[str, Any] = {}
    for member in fields(partition):
        value = getattr(partition, member.name)
        data[member.name] = sorted(value) if isinstance(value, frozenset) else value
    return data


def partition_from_dict(data: dict[str, Any]) -> HeadTailPartition:
    """Inverse of [`partition_to_dict`][meltrec.data.storage.partition_to_dict]."""
    values = {member.name: data[member.name] for member in fields(HeadTailPartition)}
    for name in ("head_users", "tail_users", "head_items", "tail_items"):
        values[name] = frozenset(values[name])
    return HeadTailPartition(**values)


def _index_to_dict(index: SubsequenceIndex) -> dict[str, Any]:
    return {
        "include_reversed": index.include_reversed,
        "max_len": index.max_len,
        "entries": {
            str(item): [
                {"owner": subsequence.owner_user, "items": list(subsequence.items)}
                for subsequence in index.entries[item]
            ]
            for item in sorted(index.entries)
        },
    }


def _index_from_dict(data: dict[str, Any]) -> SubsequenceIndex:
    return SubsequenceIndex(
        entries={
            int(item): [
                Subsequence(int(record["owner"]), tuple(map(int, record["items"])))
                for record in records
            ]
            for item, records in data["entries"].items()
        },
        include_reversed=bool(data["include_reversed"]),
        max_len=data["max_len"],
    )


def save_prepared(
    directory: Path,
    log: InteractionLog,
    prepared: PreparedData,
    stats: dict[str, Any],
) -> None:
    """Write a prepared dataset into `directory`."""
    directory.mkdir(parents=True, exist_ok=True)
    (directory / INTERACTIONS_FILE).write_text(format_interactions(log), encoding="utf-8")
    split_data = split_to_dict(prepared.split)
    split_data["user_keys"] = prepared.user_keys
    split_data["item_keys"] = prepared.item_keys
    FileSource(directory / SPLIT_FILE).dump(split_data)
    FileSource(directory / PARTITION_FILE).dump(partition_to_dict(prepared.partition))
    FileSource(directory / INDEX_FILE, json={"indent": None}).dump(
        _index_to_dict(prepared.index),
    )
    FileSource(directory / STATS_FILE).dump(stats)
    logger.info("Prepared dataset written to %s", directory)


def load_prepared(directory: Path) -> PreparedData:
    """Read a dataset written by [`save_prepared`][meltrec.data.storage.save_prepared]."""
    try:
        split_data = FileSource(directory / SPLIT_FILE).load()
        partition_data = FileSource(directory / PARTITION_FILE).load()
        index_data = FileSource(directory / INDEX_FILE).load()
        return PreparedData(
            split=split_from_dict(dict(split_data)),
            partition=partition_from_dict(dict(partition_data)),
            index=_index_from_dict(dict(index_data)),
            user_keys=list(split_data.get("user_keys", [])),  # type: ignore[call-overload]
            item_keys=list(split_data.get("item_keys", [])),  # type: ignore[call-overload]
        )
    except FileNotFoundError as err:
        msg = f"{directory} holds no prepared dataset; run `meltrec prepare` first"
        raise DataError(msg) from err
    except (KeyError, TypeError, ValueError) as err:
        msg = f"Prepared dataset in {directory} is corrupt: {err}"
        raise DataError(msg) from err
