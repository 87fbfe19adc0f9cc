"""Group-wise metric reports and their JSON and CSV renderings."""

from __future__ import annotations

import logging
from statistics import fmean
from typing import TYPE_CHECKING, Literal

import pandas as pd
from pydantic import BaseModel, Field

from meltrec.errors import DataError

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence
    from pathlib import Path


__all__ = (
    "CELLS",
    "GroupMetrics",
    "MetricsReport",
    "UserRecord",
    "aggregate",
    "average_summaries",
    "cells_table",
    "render_table",
    "summary_table",
    "write_report",
)

logger = logging.getLogger(__name__)

Group = Literal["head", "tail"]
CELLS = ("HH", "HT", "TH", "TT")


class UserRecord(BaseModel):
    """Outcome for one evaluated user."""

    user: int
    truth: int
    rank: int = Field(ge=1)
    hit: int
    ndcg: float
    user_group: Group
    item_group: Group

    @property
    def cell(self) -> str:
        """Fine-grained cell: own group, then the ground-truth item's group."""
        return f"{self.user_group[0]}{self.item_group[0]}".upper()


class GroupMetrics(BaseModel):
    """Average metrics over a group of users; absent when the group is empty."""

    users: int = 0
    hr: float | None = None
    ndcg: float | None = None

    @classmethod
    def over(cls, records: Sequence[UserRecord]) -> GroupMetrics:
        """Average a group of records."""
        if not records:
            return cls()
        return cls(
            users=len(records),
            hr=fmean(record.hit for record in records),
            ndcg=fmean(record.ndcg for record in records),
        )


class MetricsReport(BaseModel):
    """Overall, head/tail, mean and fine-grained metrics plus per-user records."""

    k: int
    target: Literal["validation", "test"]
    n_negatives: int
    seed: int
    overall: GroupMetrics
    head_user: GroupMetrics
    tail_user: GroupMetrics
    head_item: GroupMetrics
    tail_item: GroupMetrics
    mean_hr: float | None
    mean_ndcg: float | None
    cells: dict[str, GroupMetrics]
    records: list[UserRecord]

    @property
    def groups(self) -> dict[str, GroupMetrics]:
        """The four head/tail groups, in table order."""
        return {
            "Head User": self.head_user,
            "Tail User": self.tail_user,
            "Head Item": self.head_item,
            "Tail Item": self.tail_item,
        }


def _mean_present(values: Iterable[float | None]) -> float | None:
    present = [value for value in values if value is not None]
    return fmean(present) if present else None


def aggregate(
    records: Sequence[UserRecord],
    *,
    k: int,
    target: Literal["validation", "test"],
    n_negatives: int,
    seed: int,
) -> MetricsReport:
    """
    Aggregate per-user records.

    `mean_*` is the mean over the four head/tail groups that are not empty.
    """
    def where(**conditions: str) -> list[UserRecord]:
        return [
            record
            for record in records
            if all(getattr(record, name) == value for name, value in conditions.items())
        ]

    groups = {
        "head_user": GroupMetrics.over(where(user_group="head")),
        "tail_user": GroupMetrics.over(where(user_group="tail")),
        "head_item": GroupMetrics.over(where(item_group="head")),
        "tail_item": GroupMetrics.over(where(item_group="tail")),
    }
    return MetricsReport(
        k=k,
        target=target,
        n_negatives=n_negatives,
        seed=seed,
        overall=GroupMetrics.over(records),
        **groups,
        mean_hr=_mean_present(group.hr for group in groups.values()),
        mean_ndcg=_mean_present(group.ndcg for group in groups.values()),
        cells={
            cell: GroupMetrics.over([record for record in records if record.cell == cell])
            for cell in CELLS
        },
        records=list(records),
    )


def summary_table(report: MetricsReport) -> pd.DataFrame:
    """One-row table: Overall, the four groups and Mean, each with HR@k and ND@k."""
    k = report.k
    row: dict[str, float | None] = {
        f"Overall HR@{k}": report.overall.hr,
        f"Overall ND@{k}": report.overall.ndcg,
    }
    for name, group in report.groups.items():
        row[f"{name} HR@{k}"] = group.hr
        row[f"{name} ND@{k}"] = group.ndcg
    row[f"Mean HR@{k}"] = report.mean_hr
    row[f"Mean ND@{k}"] = report.mean_ndcg
    return pd.DataFrame([row])


def cells_table(report: MetricsReport) -> pd.DataFrame:
    """One-row table of HR@k and ND@k per fine-grained cell."""
    k = report.k
    row: dict[str, float | None] = {}
    for cell in CELLS:
        row[f"{cell} HR@{k}"] = report.cells[cell].hr
        row[f"{cell} ND@{k}"] = report.cells[cell].ndcg
    return pd.DataFrame([row])


def write_report(report: MetricsReport, directory: Path, stem: str) -> list[Path]:
    """Write `<stem>.json`, `<stem>-summary.csv` and `<stem>-cells.csv`."""
    directory.mkdir(parents=True, exist_ok=True)
    json_path = directory / f"{stem}.json"
    json_path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    summary_path = directory / f"{stem}-summary.csv"
    summary_table(report).to_csv(summary_path, index=False)
    cells_path = directory / f"{stem}-cells.csv"
    cells_table(report).to_csv(cells_path, index=False)
    logger.info("Report written to %s", json_path)
    return [json_path, summary_path, cells_path]


def average_summaries(paths: Sequence[Path]) -> pd.DataFrame:
    """Per-column mean over several summary (or cells) CSV files."""
    if not paths:
        msg = "No report tables to average"
        raise DataError(msg)
    frames = [pd.read_csv(path) for path in paths]
    return pd.concat(frames, ignore_index=True).mean(numeric_only=True).to_frame().T


def render_table(table: pd.DataFrame) -> str:
    """Render a table for the terminal, one metric per line."""
    return table.T.to_string(header=False, float_format=lambda value: f"{value:.4f}")
