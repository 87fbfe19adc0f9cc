from __future__ import annotations

import json
import math
from typing import TYPE_CHECKING

import pytest

from meltrec.errors import DataError
from meltrec.evaluation.report import (
    UserRecord,
    aggregate,
    average_summaries,
    cells_table,
    render_table,
    summary_table,
    write_report,
)

if TYPE_CHECKING:
    from pathlib import Path


def _record(user: int, rank: int, user_group: str, item_group: str) -> UserRecord:
    hit = int(rank <= 2)
    return UserRecord(
        user=user,
        truth=0,
        rank=rank,
        hit=hit,
        ndcg=1 / math.log2(rank + 1) if hit else 0.0,
        user_group=user_group,  # type: ignore[arg-type]
        item_group=item_group,  # type: ignore[arg-type]
    )


RECORDS = [
    _record(0, 1, "head", "head"),
    _record(1, 3, "head", "tail"),
    _record(2, 2, "tail", "head"),
    _record(3, 1, "tail", "head"),
]


def test_groups() -> None:
    report = aggregate(RECORDS, k=2, target="test", n_negatives=3, seed=0)
    assert report.overall.users == 4
    assert report.overall.hr == 0.75
    assert report.head_user.hr == 0.5
    assert report.tail_user.hr == 1.0
    assert report.head_item.hr == 1.0
    assert report.tail_item.hr == 0.0
    assert report.mean_hr == (0.5 + 1.0 + 1.0 + 0.0) / 4
    assert report.mean_ndcg == pytest.approx(
        (report.head_user.ndcg + report.tail_user.ndcg + report.head_item.ndcg + 0.0) / 4
    )


def test_cells_partition_users() -> None:
    report = aggregate(RECORDS, k=2, target="test", n_negatives=3, seed=0)
    assert {cell: metrics.users for cell, metrics in report.cells.items()} == {
        "HH": 1,
        "HT": 1,
        "TH": 2,
        "TT": 0,
    }
    assert report.cells["TT"].hr is None
    assert sum(metrics.users for metrics in report.cells.values()) == report.overall.users


def test_empty_group_is_left_out_of_mean() -> None:
    records = [_record(0, 1, "head", "head"), _record(1, 3, "head", "head")]
    report = aggregate(records, k=2, target="validation", n_negatives=3, seed=0)
    assert report.tail_user.hr is None
    assert report.tail_item.ndcg is None
    assert report.mean_hr == 0.5


def test_no_records() -> None:
    report = aggregate([], k=2, target="test", n_negatives=3, seed=0)
    assert report.overall.hr is None
    assert report.mean_hr is None


def test_tables() -> None:
    report = aggregate(RECORDS, k=2, target="test", n_negatives=3, seed=0)
    summary = summary_table(report)
    assert list(summary.columns) == [
        "Overall HR@2",
        "Overall ND@2",
        "Head User HR@2",
        "Head User ND@2",
        "Tail User HR@2",
        "Tail User ND@2",
        "Head Item HR@2",
        "Head Item ND@2",
        "Tail Item HR@2",
        "Tail Item ND@2",
        "Mean HR@2",
        "Mean ND@2",
    ]
    assert summary["Overall HR@2"][0] == 0.75
    assert list(cells_table(report).columns)[:2] == ["HH HR@2", "HH ND@2"]
    assert "Overall HR@2" in render_table(summary)
    assert "0.7500" in render_table(summary)


def test_write_and_average(tmp_path: Path) -> None:
    first = aggregate(RECORDS, k=2, target="test", n_negatives=3, seed=0)
    second = aggregate(RECORDS[:2], k=2, target="test", n_negatives=3, seed=1)
    paths = write_report(first, tmp_path, "melt-test-seed0")
    write_report(second, tmp_path, "melt-test-seed1")
    assert [path.name for path in paths] == [
        "melt-test-seed0.json",
        "melt-test-seed0-summary.csv",
        "melt-test-seed0-cells.csv",
    ]
    saved = json.loads(paths[0].read_text())
    assert saved["overall"]["hr"] == 0.75
    assert len(saved["records"]) == 4

    averaged = average_summaries(sorted(tmp_path.glob("*-summary.csv")))
    assert averaged["Overall HR@2"][0] == pytest.approx((0.75 + 0.5) / 2)
    # The second report has no tail users; the mean skips the missing value.
    assert averaged["Tail User HR@2"][0] == 1.0


def test_average_nothing() -> None:
    with pytest.raises(DataError):
        average_summaries([])
