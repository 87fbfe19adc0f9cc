"""Embedding generators and the enhancement of tail users and tail items."""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING

import torch

from meltrec.data.index import sample_subsequences
from meltrec.errors import RepresentationError
from meltrec.model.encoder import encode_many

if TYPE_CHECKING:
    from collections.abc import Callable, Iterable, Sequence

    import numpy as np

    from meltrec.data.index import Subsequence, SubsequenceIndex
    from meltrec.data.split import HeadTailPartition
    from meltrec.model.params import EmbeddingGenerator, ModelParams


__all__ = (
    "TailItemReps",
    "contextualized_item_rep",
    "contextualized_item_reps",
    "enhance_item_embedding",
    "enhance_tail_user_rep",
    "enhanced_item_table",
    "fit_generator",
    "item_generator_apply",
    "tail_item_reps",
    "user_generator_apply",
)

logger = logging.getLogger(__name__)


def user_generator_apply(params: ModelParams, r: torch.Tensor) -> torch.Tensor:
    """`G_U(r)`."""
    return params.user_generator(r)


def item_generator_apply(params: ModelParams, r: torch.Tensor) -> torch.Tensor:
    """`G_I(r)`."""
    return params.item_generator(r)


def enhance_tail_user_rep(
    params: ModelParams,
    r_u: torch.Tensor,
    p_u: torch.Tensor,
    beta: float,
) -> torch.Tensor:
    """Enhanced tail-user representation `G_U(r_u) + beta * p_u`."""
    return user_generator_apply(params, r_u) + beta * p_u


def enhance_item_embedding(
    params: ModelParams,
    item: int,
    r_i: torch.Tensor,
    gamma: float,
    partition: HeadTailPartition,
) -> torch.Tensor:
    """`G_I(r_i) + gamma * q_i` for a tail item; `q_i` unchanged for a head item."""
    q_i = params.item_embeddings[item]
    if item in partition.head_items:
        return q_i
    return item_generator_apply(params, r_i) + gamma * q_i


def _enhance_subsequence_reps(
    params: ModelParams,
    encoded: torch.Tensor,
    owners: Sequence[int],
    beta: float,
    full_user_reps: torch.Tensor | dict[int, torch.Tensor],
) -> torch.Tensor:
    if isinstance(full_user_reps, dict):
        owner_reps = torch.stack([full_user_reps[owner] for owner in owners])
    else:
        owner_reps = full_user_reps[torch.tensor(list(owners), dtype=torch.long)]
    return user_generator_apply(params, encoded) + beta * owner_reps


def contextualized_item_reps(
    params: ModelParams,
    groups: Sequence[Sequence[Subsequence]],
    *,
    enhance_subsequences: bool = False,
    beta: float = 1.0,
    full_user_reps: torch.Tensor | dict[int, torch.Tensor] | None = None,
    embeddings: torch.Tensor | None = None,
    encoded: torch.Tensor | None = None,
) -> torch.Tensor:
    """
    Mean (optionally enhanced) encoding of each group of subsequences, `G x d`.

    The encoder runs without gradient; with `enhance_subsequences` the user
    generator is applied on top and does receive gradient. `encoded` supplies
    the encodings of the flattened groups instead of running the encoder.
    """
    if any(not group for group in groups):
        msg = "Cannot average the representation of an empty subsequence set"
        raise RepresentationError(msg)
    flat = [subsequence for group in groups for subsequence in group]
    if encoded is None:
        encoded = encode_many(params, [s.items for s in flat], embeddings=embeddings)
    elif len(encoded) != len(flat):
        msg = f"Expected {len(flat)} subsequence encodings, got {len(encoded)}"
        raise RepresentationError(msg)
    if enhance_subsequences:
        if full_user_reps is None:
            msg = "Enhancing subsequences needs the owners' full representations"
            raise RepresentationError(msg)
        owners = [subsequence.owner_user for subsequence in flat]
        encoded = _enhance_subsequence_reps(params, encoded, owners, beta, full_user_reps)
    sizes = torch.tensor([len(group) for group in groups])
    segments = torch.repeat_interleave(torch.arange(len(groups)), sizes)
    sums = torch.zeros(len(groups), encoded.shape[-1], dtype=encoded.dtype)
    sums = sums.index_add(0, segments, encoded)
    return sums / sizes.unsqueeze(-1).to(encoded.dtype)


def contextualized_item_rep(
    params: ModelParams,
    index: SubsequenceIndex,
    item: int,
    subset: Sequence[Subsequence] | None = None,
    *,
    enhance_subsequences: bool = False,
    beta: float = 1.0,
    full_user_reps: torch.Tensor | dict[int, torch.Tensor] | None = None,
    embeddings: torch.Tensor | None = None,
) -> torch.Tensor:
    """
    Contextualized representation of an item.

    The mean encoding of `subset` (the sampled `r̂_i`) or, without a subset,
    of the whole of `C_i` (the full-set `r_i`).
    """
    chosen = index.get(item) if subset is None else subset
    if not chosen:
        msg = f"Item {item} has no training subsequences"
        raise RepresentationError(msg)
    return contextualized_item_reps(
        params,
        [chosen],
        enhance_subsequences=enhance_subsequences,
        beta=beta,
        full_user_reps=full_user_reps,
        embeddings=embeddings,
    )[0]


class TailItemReps:
    """
    Full-set contextualized representations of tail items, refreshed per epoch.

    `reps` holds one row per item (zero for items without a representation)
    and `mask` marks the rows that are tail items with a representation.
    """

    def __init__(self, reps: torch.Tensor, mask: torch.Tensor) -> None:
        self.reps = reps
        self.mask = mask

    @classmethod
    def empty(cls, params: ModelParams) -> TailItemReps:
        """No tail item is enhanced."""
        rows = params.n_items + 1
        dtype = params.item_embeddings.dtype
        return cls(
            torch.zeros(rows, params.config.d, dtype=dtype),
            torch.zeros(rows, dtype=torch.bool),
        )


def tail_item_reps(
    params: ModelParams,
    index: SubsequenceIndex,
    tail_items: Iterable[int],
    *,
    cap: int | None = None,
    rng_for: Callable[[int], np.random.Generator] | None = None,
    enhance_subsequences: bool = False,
    beta: float = 1.0,
    full_user_reps: torch.Tensor | None = None,
) -> TailItemReps:
    """
    Compute `r_i` for every tail item, without gradient.

    With `cap`, items with more than `cap` subsequences are represented by a
    sample of `cap` of them drawn from `rng_for(item)`. Tail items without
    subsequences keep their plain embedding and are logged.
    """
    cache = TailItemReps.empty(params)
    items, groups = [], []
    for item in sorted(tail_items):
        pool = index.get(item)
        if not pool:
            logger.debug("Tail item %d has no subsequences; it stays unenhanced", item)
            continue
        if cap is not None and len(pool) > cap and rng_for is not None:
            pool = sample_subsequences(index, item, cap, rng_for(item))
        items.append(item)
        groups.append(pool[:cap] if cap is not None else pool)
    if not items:
        return cache
    with torch.no_grad():
        reps = contextualized_item_reps(
            params,
            groups,
            enhance_subsequences=enhance_subsequences,
            beta=beta,
            full_user_reps=full_user_reps,
        )
    rows = torch.tensor(items, dtype=torch.long)
    cache.reps[rows] = reps
    cache.mask[rows] = True
    return cache


def enhanced_item_table(
    params: ModelParams,
    cache: TailItemReps,
    gamma: float,
    *,
    detach_generator: bool = False,
) -> torch.Tensor:
    """
    The item table `E+` with every cached tail item replaced by `G_I(r_i) + gamma * q_i`.

    With `detach_generator`, the generator output is a constant and only the
    `gamma * q_i` path carries gradient.
    """
    table = params.item_embeddings
    generated = item_generator_apply(params, cache.reps)
    if detach_generator:
        generated = generated.detach()
    return torch.where(cache.mask.unsqueeze(-1), generated + gamma * table, table)


def fit_generator(
    generator: EmbeddingGenerator,
    inputs: torch.Tensor,
    targets: torch.Tensor,
    *,
    ridge: float = 1.0,
) -> None:
    """
    Set the last affine map of `generator` to the ridge fit of `targets` on `inputs`.

    Earlier maps are applied to `inputs` first and kept as they are. The
    bias is not penalized.
    """
    if len(inputs) != len(targets) or not len(inputs):
        msg = f"Cannot fit a generator on {len(inputs)} inputs and {len(targets)} targets"
        raise RepresentationError(msg)
    last = generator.layers[-1]
    with torch.no_grad():
        hidden = inputs
        for layer in generator.layers[:-1]:
            hidden = layer(hidden)
        design = torch.cat([hidden, hidden.new_ones(len(hidden), 1)], dim=1).double()
        penalty = torch.full((design.shape[1],), ridge, dtype=torch.float64)
        penalty[-1] = 0.0
        gram = design.T @ design + torch.diag(penalty)
        solution = torch.linalg.solve(gram, design.T @ targets.double())
        last.weight.copy_(solution[:-1].T)
        last.bias.copy_(solution[-1])
