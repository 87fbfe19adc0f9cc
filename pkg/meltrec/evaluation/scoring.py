"""
Inference-time representations and candidate scoring.

Tail items are embedded as `G_I(r_i) + gamma * q_i` both inside user
sequences and as candidates; tail users are represented by
`G_U(p_u) + beta * p_u`. Head users and head items use the plain encoder
output and the plain item table.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import torch

from meltrec.model.encoder import encode_many
from meltrec.model.enhance import (
    TailItemReps,
    enhance_tail_user_rep,
    enhanced_item_table,
    tail_item_reps,
)
from meltrec.rng import Purpose, numpy_stream

if TYPE_CHECKING:
    from collections.abc import Sequence

    from meltrec.config import TrainConfig
    from meltrec.data.index import SubsequenceIndex
    from meltrec.data.split import HeadTailPartition, SplitDataset
    from meltrec.model.params import ModelParams


__all__ = (
    "InferenceContext",
    "build_inference",
    "full_user_reps",
    "score_candidates",
    "user_representations",
)

logger = logging.getLogger(__name__)

# Key of the subsequence sample used for capped full-set reps at inference.
INFERENCE_KEY = 2**32 - 1


@dataclass(frozen=True)
class InferenceContext:
    """Frozen tables and settings used to score candidates."""

    params: ModelParams
    item_table: torch.Tensor
    tail_users: frozenset[int] = field(default_factory=frozenset)
    beta: float = 1.0

    @classmethod
    def backbone(cls, params: ModelParams) -> InferenceContext:
        """Plain encoder and item table; nothing is enhanced."""
        return cls(params, params.item_embeddings.detach().clone())


def full_user_reps(params: ModelParams, split: SplitDataset) -> torch.Tensor:
    """`p_u = f(S_u)` for every user, one row per dense user id."""
    users = split.users
    reps = encode_many(params, [split.train_sequences[user].items for user in users])
    table = reps.new_zeros(max(users, default=-1) + 1, params.config.d)
    table[torch.tensor(users, dtype=torch.long)] = reps
    return table


def build_inference(
    params: ModelParams,
    split: SplitDataset,
    partition: HeadTailPartition,
    index: SubsequenceIndex,
    config: TrainConfig,
) -> InferenceContext:
    """Freeze the enhanced item table and the tail-user set of the current parameters."""
    with torch.no_grad():
        cache = TailItemReps.empty(params)
        if config.item_branch and partition.tail_items:
            cache = tail_item_reps(
                params,
                index,
                partition.tail_items,
                cap=config.max_context_subsequences,
                rng_for=lambda item: numpy_stream(
                    config.seed, Purpose.CONTEXT, INFERENCE_KEY, item
                ),
                enhance_subsequences=config.mutual_enhancement,
                beta=config.beta,
                full_user_reps=(
                    full_user_reps(params, split) if config.mutual_enhancement else None
                ),
            )
        table = enhanced_item_table(params, cache, config.gamma).detach().clone()
    missing = len(partition.tail_items) - int(cache.mask.sum())
    if config.item_branch and missing:
        logger.info("%d tail item(s) without subsequences are scored unenhanced", missing)
    return InferenceContext(
        params,
        table,
        tail_users=partition.tail_users if config.user_branch else frozenset(),
        beta=config.beta,
    )


def user_representations(
    context: InferenceContext,
    users: Sequence[int],
    sequences: Sequence[Sequence[int]],
) -> torch.Tensor:
    """User vectors, `B x d`, enhanced for tail users."""
    params = context.params
    reps = encode_many(params, sequences, embeddings=context.item_table)
    tail = torch.tensor([user in context.tail_users for user in users], dtype=torch.bool)
    if not tail.any():
        return reps
    with torch.no_grad():
        enhanced = enhance_tail_user_rep(params, reps, reps, context.beta)
    return torch.where(tail.unsqueeze(-1), enhanced, reps)


def score_candidates(
    context: InferenceContext,
    user: int,
    train_seq: Sequence[int],
    candidates: Sequence[int],
) -> list[tuple[int, float]]:
    """Candidates with their scores, best first; equal scores go by smaller id."""
    if not candidates:
        return []
    rep = user_representations(context, [user], [train_seq])[0]
    rows = context.item_table[torch.tensor(list(candidates), dtype=torch.long)]
    scores = (rows @ rep).tolist()
    return sorted(zip(candidates, scores), key=lambda pair: (-pair[1], pair[0]))
