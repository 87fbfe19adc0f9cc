"""
The causal self-attention sequence encoder.

Sequences are left-padded to `max_len` so that the most recent item always
sits in the last slot; positional embeddings are indexed by slot. Padding
slots are masked out of every attention row of a real item and zeroed after
every sub-layer, so an encoding does not depend on how much padding it got.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from typing import TYPE_CHECKING, TypeVar

import torch
import torch.nn.functional as F  # noqa: N812

from meltrec.errors import EncodingError

if TYPE_CHECKING:
    from collections.abc import Iterator

    from meltrec.model.params import AttentionBlock, ModelParams


__all__ = (
    "batched",
    "encode_batch",
    "encode_hidden",
    "encode_many",
    "encode_sequence",
    "pad_batch",
)

T = TypeVar("T")

ENCODE_CHUNK_SIZE = 1024


def batched(items: Sequence[T], size: int) -> Iterator[Sequence[T]]:
    """
    Split a sequence into consecutive chunks of at most `size` elements.

    >>> [list(chunk) for chunk in batched([1, 2, 3, 4, 5], 2)]
    [[1, 2], [3, 4], [5]]
    """
    for start in range(0, len(items), size):
        yield items[start : start + size]


def pad_batch(
    params: ModelParams,
    sequences: Sequence[Sequence[int]],
) -> torch.Tensor:
    """Left-pad (and left-truncate) item sequences into a `B x max_len` id tensor."""
    max_len, pad_id = params.config.max_len, params.pad_id
    rows = []
    for items in sequences:
        if not items:
            msg = "Cannot encode an empty sequence"
            raise EncodingError(msg)
        recent = list(items[-max_len:])
        if min(recent) < 0 or max(recent) >= params.n_items:
            unknown = next(item for item in recent if not 0 <= item < params.n_items)
            msg = f"Unknown item id {unknown} (there are {params.n_items} items)"
            raise EncodingError(msg)
        rows.append([pad_id] * (max_len - len(recent)) + recent)
    return torch.tensor(rows, dtype=torch.long)


def _dropout(
    x: torch.Tensor,
    rate: float,
    generator: torch.Generator | None,
) -> torch.Tensor:
    if rate == 0:
        return x
    keep = torch.rand(x.shape, generator=generator, dtype=x.dtype) >= rate
    return x * keep / (1 - rate)


def _attend(
    block: AttentionBlock,
    x: torch.Tensor,
    blocked: torch.Tensor,
) -> torch.Tensor:
    batch_size, length, d = x.shape
    head_size = d // block.n_heads

    def heads(t: torch.Tensor) -> torch.Tensor:
        return t.view(batch_size, length, block.n_heads, head_size).transpose(1, 2)

    h = block.attention_norm(x)
    queries, keys, values = heads(block.query(h)), heads(block.key(h)), heads(block.value(h))
    scores = queries @ keys.transpose(-2, -1) / math.sqrt(head_size)
    scores = scores.masked_fill(blocked.unsqueeze(1), float("-inf"))
    attended = torch.softmax(scores, dim=-1) @ values
    return block.output(attended.transpose(1, 2).reshape(batch_size, length, d))


def encode_hidden(
    params: ModelParams,
    batch: torch.Tensor,
    *,
    embeddings: torch.Tensor | None = None,
    train_mode: bool = False,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """
    Hidden states `B x max_len x d` of a padded id batch.

    `embeddings` replaces the item table (same shape). Dropout is applied
    only in `train_mode`, with masks drawn from `generator`.
    """
    config = params.config
    table = params.item_embeddings if embeddings is None else embeddings
    rate = config.dropout_rate if train_mode else 0.0
    is_pad = batch == params.pad_id
    timeline = (~is_pad).unsqueeze(-1).to(table.dtype)
    length = batch.shape[1]

    x = table[batch] * math.sqrt(config.d) + params.positional_embeddings[-length:]
    x = _dropout(x * timeline, rate, generator)

    causal = torch.triu(torch.ones(length, length, dtype=torch.bool), diagonal=1)
    own = torch.eye(length, dtype=torch.bool)
    # A padding slot attends to itself only; real slots never see padding.
    blocked = causal | (is_pad.unsqueeze(1) & ~own)

    for block in params.blocks:
        x = (x + _dropout(_attend(block, x, blocked), rate, generator)) * timeline
        h = block.forward_norm(x)
        feed_forward = block.feed_forward_out(F.relu(block.feed_forward_in(h)))
        x = (x + _dropout(feed_forward, rate, generator)) * timeline
    return params.last_norm(x) * timeline


def encode_batch(
    params: ModelParams,
    sequences: Sequence[Sequence[int]],
    *,
    embeddings: torch.Tensor | None = None,
    train_mode: bool = False,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """Sequence representations `B x d`: the hidden state of each last item."""
    hidden = encode_hidden(
        params,
        pad_batch(params, sequences),
        embeddings=embeddings,
        train_mode=train_mode,
        generator=generator,
    )
    return hidden[:, -1]


def encode_sequence(
    params: ModelParams,
    items: Sequence[int],
    *,
    embedding_override: Mapping[int, torch.Tensor] | torch.Tensor | None = None,
    train_mode: bool = False,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """
    Encode one item sequence into a `d`-vector, `r = f(S)`.

    `embedding_override` either maps item ids to replacement vectors or is
    a full replacement table. Only the most recent `max_len` items are used.
    """
    embeddings = embedding_override
    if isinstance(embedding_override, Mapping):
        embeddings = params.item_embeddings
        if embedding_override:
            rows = torch.tensor(list(embedding_override), dtype=torch.long)
            vectors = torch.stack(list(embedding_override.values()))
            embeddings = embeddings.index_put((rows,), vectors)
    return encode_batch(
        params,
        [items],
        embeddings=embeddings,
        train_mode=train_mode,
        generator=generator,
    )[0]


def encode_many(
    params: ModelParams,
    sequences: Sequence[Sequence[int]],
    *,
    embeddings: torch.Tensor | None = None,
    chunk_size: int = ENCODE_CHUNK_SIZE,
) -> torch.Tensor:
    """Encode any number of sequences in evaluation mode, without gradient."""
    if not sequences:
        return params.item_embeddings.new_zeros(0, params.config.d)
    with torch.no_grad():
        return torch.cat([
            encode_batch(params, chunk, embeddings=embeddings)
            for chunk in batched(sequences, chunk_size)
        ])
