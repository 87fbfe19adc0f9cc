"""Next-item loss, the two distillation losses and their combination."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import torch
import torch.nn.functional as F  # noqa: N812

from meltrec.data.index import sample_subsequences, truncate_recent
from meltrec.errors import ConfigError, LossError
from meltrec.model.encoder import encode_batch, encode_hidden, encode_many
from meltrec.model.enhance import (
    contextualized_item_reps,
    item_generator_apply,
    user_generator_apply,
)

if TYPE_CHECKING:
    from collections.abc import Sequence

    import numpy as np

    from meltrec.data.index import Subsequence, SubsequenceIndex
    from meltrec.model.params import ModelParams


__all__ = (
    "LossBreakdown",
    "item_branch_loss",
    "item_branch_losses",
    "rec_loss",
    "rec_loss_batch",
    "total_loss",
    "user_branch_loss",
    "user_branch_losses",
)


def _left_pad(values: Sequence[int], max_len: int, pad_id: int) -> list[int]:
    recent = list(values[-max_len:])
    return [pad_id] * (max_len - len(recent)) + recent


def rec_loss_batch(
    params: ModelParams,
    sequences: Sequence[Sequence[int]],
    negatives: Sequence[Sequence[int]],
    *,
    embeddings: torch.Tensor | None = None,
    train_mode: bool = False,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """
    Binary cross-entropy next-item loss, averaged over all predicted positions.

    Position `t` of a sequence predicts item `t + 1` against `negatives[t]`.
    Inputs are embedded and targets scored with `embeddings` (the enhanced
    table, if any), the table that also scores candidates at inference.
    """
    max_len, pad_id = params.config.max_len, params.pad_id
    inputs, positives, sampled = [], [], []
    for items, negative in zip(sequences, negatives):
        if len(items) < 2:  # noqa: PLR2004
            msg = f"A sequence of length {len(items)} has no next-item pair"
            raise LossError(msg)
        if len(negative) != len(items) - 1:
            msg = f"Expected {len(items) - 1} negatives, got {len(negative)}"
            raise LossError(msg)
        if any(n in {p, pad_id} for n, p in zip(negative, items[1:])):
            msg = "A negative coincides with its positive item or the pad id"
            raise LossError(msg)
        inputs.append(_left_pad(items[:-1], max_len, pad_id))
        positives.append(_left_pad(items[1:], max_len, pad_id))
        sampled.append(_left_pad(negative, max_len, pad_id))
    if not inputs:
        msg = "Cannot compute the next-item loss of an empty batch"
        raise LossError(msg)

    batch = torch.tensor(inputs, dtype=torch.long)
    hidden = encode_hidden(
        params,
        batch,
        embeddings=embeddings,
        train_mode=train_mode,
        generator=generator,
    )
    positive_ids = torch.tensor(positives, dtype=torch.long)
    negative_ids = torch.tensor(sampled, dtype=torch.long)
    table = params.item_embeddings if embeddings is None else embeddings
    positive_scores = (hidden * table[positive_ids]).sum(-1)
    negative_scores = (hidden * table[negative_ids]).sum(-1)
    losses = F.softplus(-positive_scores) + F.softplus(negative_scores)
    return losses[positive_ids != pad_id].mean()


def rec_loss(
    params: ModelParams,
    train_seq: Sequence[int],
    negatives: Sequence[int],
    *,
    embeddings: torch.Tensor | None = None,
    train_mode: bool = False,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """Next-item loss of a single sequence."""
    return rec_loss_batch(
        params,
        [train_seq],
        [negatives],
        embeddings=embeddings,
        train_mode=train_mode,
        generator=generator,
    )


def user_branch_losses(
    params: ModelParams,
    sequences: Sequence[Sequence[int]],
    recent: Sequence[int],
    weights: Sequence[float],
    *,
    embeddings: torch.Tensor | None = None,
    train_mode: bool = False,
    generator: torch.Generator | None = None,
    targets: torch.Tensor | None = None,
) -> torch.Tensor:
    """
    `sum_u w_u * ||p_u - G_U(r̄_u)||^2` over head users.

    `p_u` encodes the whole sequence and is a constant; `r̄_u` encodes its
    `recent[u]` most recent items. Passing `targets` fixes every `p_u` in
    advance.
    """
    if not sequences:
        return params.item_embeddings.new_zeros(())
    partial = [truncate_recent(items, r) for items, r in zip(sequences, recent)]
    if targets is None:
        targets = encode_many(params, sequences, embeddings=embeddings)
    partial_reps = encode_batch(
        params,
        partial,
        embeddings=embeddings,
        train_mode=train_mode,
        generator=generator,
    )
    difference = targets - user_generator_apply(params, partial_reps)
    w = torch.tensor(weights, dtype=difference.dtype)
    return (w * difference.pow(2).sum(-1)).sum()


def user_branch_loss(
    params: ModelParams,
    train_seq: Sequence[int],
    r: int,
    w_u: float,
    *,
    embeddings: torch.Tensor | None = None,
    train_mode: bool = False,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """`w_u * ||p_u - G_U(f(last r items))||^2` for one head user."""
    return user_branch_losses(
        params,
        [train_seq],
        [r],
        [w_u],
        embeddings=embeddings,
        train_mode=train_mode,
        generator=generator,
    )


def item_branch_losses(
    params: ModelParams,
    items: Sequence[int],
    samples: Sequence[Sequence[Subsequence]],
    weights: Sequence[float],
    *,
    enhance_subsequences: bool = True,
    beta: float = 1.0,
    full_user_reps: torch.Tensor | dict[int, torch.Tensor] | None = None,
    embeddings: torch.Tensor | None = None,
    targets: torch.Tensor | None = None,
    encoded: torch.Tensor | None = None,
) -> torch.Tensor:
    """
    `sum_i w_i * ||q_i - G_I(r̂_i)||^2` over head items.

    `q_i` is a constant; `r̂_i` averages the sampled subsequences of `i`.
    `targets` fixes every `q_i` and `encoded` the subsequence encodings in
    advance.
    """
    if not items:
        return params.item_embeddings.new_zeros(())
    reps = contextualized_item_reps(
        params,
        samples,
        enhance_subsequences=enhance_subsequences,
        beta=beta,
        full_user_reps=full_user_reps,
        embeddings=embeddings,
        encoded=encoded,
    )
    if targets is None:
        targets = params.item_embeddings[torch.tensor(list(items), dtype=torch.long)].detach()
    difference = targets - item_generator_apply(params, reps)
    w = torch.tensor(weights, dtype=difference.dtype)
    return (w * difference.pow(2).sum(-1)).sum()


def item_branch_loss(
    params: ModelParams,
    item: int,
    index: SubsequenceIndex,
    k: int,
    w_i: float,
    rng: np.random.Generator,
    *,
    enhance_subsequences: bool = True,
    beta: float = 1.0,
    full_user_reps: torch.Tensor | dict[int, torch.Tensor] | None = None,
    embeddings: torch.Tensor | None = None,
) -> torch.Tensor:
    """`w_i * ||q_i - G_I(r̂_i)||^2` for one head item with `k` sampled subsequences."""
    return item_branch_losses(
        params,
        [item],
        [sample_subsequences(index, item, k, rng)],
        [w_i],
        enhance_subsequences=enhance_subsequences,
        beta=beta,
        full_user_reps=full_user_reps,
        embeddings=embeddings,
    )


@dataclass(frozen=True)
class LossBreakdown:
    """Components of the training objective of one step."""

    rec: torch.Tensor
    user_branch: torch.Tensor
    item_branch: torch.Tensor
    total: torch.Tensor

    def as_floats(self) -> dict[str, float]:
        """Detached component values."""
        return {
            "rec": self.rec.detach().item(),
            "user_branch": self.user_branch.detach().item(),
            "item_branch": self.item_branch.detach().item(),
            "total": self.total.detach().item(),
        }


def total_loss(
    rec: torch.Tensor,
    user_branch: torch.Tensor,
    item_branch: torch.Tensor,
    lambda_u: float,
    lambda_i: float,
) -> LossBreakdown:
    """`lambda_u * user_branch + lambda_i * item_branch + rec`."""
    if lambda_u < 0 or lambda_i < 0:
        msg = f"Loss weights must be non-negative, got {lambda_u} and {lambda_i}"
        raise ConfigError(msg)
    total = lambda_u * user_branch + lambda_i * item_branch + rec
    return LossBreakdown(rec, user_branch, item_branch, total)
