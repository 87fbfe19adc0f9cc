"""Leave-one-out ranking evaluation against sampled negatives."""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING

import torch
from tqdm import tqdm

from meltrec.config import EvalConfig, TrainConfig
from meltrec.evaluation.metrics import hit_at_k, ndcg_at_k, rank_of
from meltrec.evaluation.negatives import sample_negatives
from meltrec.evaluation.report import MetricsReport, UserRecord, aggregate
from meltrec.evaluation.scoring import (
    InferenceContext,
    build_inference,
    user_representations,
)
from meltrec.model.encoder import ENCODE_CHUNK_SIZE, batched
from meltrec.rng import Purpose, numpy_stream

if TYPE_CHECKING:
    from meltrec.data.index import SubsequenceIndex
    from meltrec.data.split import HeadTailPartition, SplitDataset
    from meltrec.model.params import ModelParams


__all__ = (
    "evaluate",
    "evaluation_inputs",
)

logger = logging.getLogger(__name__)


def evaluation_inputs(
    split: SplitDataset,
    user: int,
    config: EvalConfig,
) -> tuple[tuple[int, ...], int]:
    """Input sequence and ground-truth item of a user for the configured target."""
    train_items = split.train_sequences[user].items
    if config.target == "validation":
        return train_items, split.valid_target[user]
    if config.append_validation:
        return (*train_items, split.valid_target[user]), split.test_target[user]
    return train_items, split.test_target[user]


def evaluate(
    params: ModelParams,
    split: SplitDataset,
    partition: HeadTailPartition,
    index: SubsequenceIndex,
    config: EvalConfig | None = None,
    *,
    train_config: TrainConfig | None = None,
    context: InferenceContext | None = None,
    progress: bool = False,
) -> MetricsReport:
    """
    Rank each user's ground truth among `n_negatives` unconsumed items.

    Unless a ready `context` is passed, the enhanced inference tables are
    built from `train_config` (defaults when omitted).
    """
    config = config or EvalConfig()
    if context is None:
        context = build_inference(
            params, split, partition, index, train_config or TrainConfig()
        )
    users = split.users
    records: list[UserRecord] = []
    chunks = batched(users, ENCODE_CHUNK_SIZE)
    with tqdm(total=len(users), desc="evaluate", disable=not progress) as bar:
        for chunk in chunks:
            inputs = [evaluation_inputs(split, user, config) for user in chunk]
            reps = user_representations(
                context, chunk, [sequence for sequence, _ in inputs]
            )
            for row, user in enumerate(chunk):
                truth = inputs[row][1]
                negatives = sample_negatives(
                    user,
                    split.n_items,
                    split.consumed(user),
                    config.n_negatives,
                    numpy_stream(config.seed, Purpose.EVALUATION, user),
                )
                candidates = [truth, *negatives]
                with torch.no_grad():
                    rows = context.item_table[torch.tensor(candidates, dtype=torch.long)]
                    scores = (rows @ reps[row]).tolist()
                rank = rank_of(truth, candidates, scores)
                records.append(
                    UserRecord(
                        user=user,
                        truth=truth,
                        rank=rank,
                        hit=hit_at_k(rank, config.k),
                        ndcg=ndcg_at_k(rank, config.k),
                        user_group=partition.user_group(user),
                        item_group=partition.item_group(truth),
                    )
                )
            bar.update(len(chunk))
    report = aggregate(
        records,
        k=config.k,
        target=config.target,
        n_negatives=config.n_negatives,
        seed=config.seed,
    )
    logger.info(
        "Evaluated %d users on %s: HR@%d=%s ND@%d=%s",
        len(records),
        config.target,
        config.k,
        report.overall.hr,
        config.k,
        report.overall.ndcg,
    )
    return report
