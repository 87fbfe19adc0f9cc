"""Trainable parameters: item table, positional table, attention blocks, generators."""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

import torch
from torch import nn

from meltrec.errors import ConfigError
from meltrec.rng import Purpose, torch_stream

if TYPE_CHECKING:
    from meltrec.config import EncoderConfig


__all__ = (
    "AttentionBlock",
    "EmbeddingGenerator",
    "ModelParams",
    "initialize_params",
)

LAYER_NORM_EPS = 1e-8


class AttentionBlock(nn.Module):
    """One causal multi-head self-attention block with a point-wise feed-forward."""

    def __init__(self, d: int, n_heads: int) -> None:
        super().__init__()
        self.n_heads = n_heads
        self.attention_norm = nn.LayerNorm(d, eps=LAYER_NORM_EPS)
        self.query = nn.Linear(d, d)
        self.key = nn.Linear(d, d)
        self.value = nn.Linear(d, d)
        self.output = nn.Linear(d, d)
        self.forward_norm = nn.LayerNorm(d, eps=LAYER_NORM_EPS)
        self.feed_forward_in = nn.Linear(d, d)
        self.feed_forward_out = nn.Linear(d, d)


class EmbeddingGenerator(nn.Module):
    """
    A stack of affine maps `R^d -> R^d` with no non-linearity.

    A single layer is `W r + b`. The last layer starts at zero, earlier layers
    start at the identity, so a fresh generator maps everything to zero.
    """

    def __init__(self, d: int, n_layers: int = 1) -> None:
        super().__init__()
        self.layers = nn.ModuleList(nn.Linear(d, d) for _ in range(n_layers))

    def reset_parameters(self) -> None:
        """Zero the last layer and make the others the identity."""
        with torch.no_grad():
            for layer in self.layers[:-1]:
                nn.init.eye_(layer.weight)
                nn.init.zeros_(layer.bias)
            nn.init.zeros_(self.layers[-1].weight)
            nn.init.zeros_(self.layers[-1].bias)

    def forward(self, r: torch.Tensor) -> torch.Tensor:
        """Apply every affine map in turn."""
        for layer in self.layers:
            r = layer(r)
        return r


class ModelParams(nn.Module):
    """
    Every trainable tensor of the model.

    Row `config.pad_id` of the item table is the padding row; it stays zero.
    """

    def __init__(self, config: EncoderConfig) -> None:
        super().__init__()
        if config.n_items is None:
            msg = "EncoderConfig.n_items must be set to build parameters"
            raise ConfigError(msg)
        self.config = config
        d = config.d
        self.item_embeddings = nn.Parameter(torch.zeros(config.n_items + 1, d))
        self.positional_embeddings = nn.Parameter(torch.zeros(config.max_len, d))
        self.blocks = nn.ModuleList(
            AttentionBlock(d, config.n_heads) for _ in range(config.n_blocks)
        )
        self.last_norm = nn.LayerNorm(d, eps=LAYER_NORM_EPS)
        self.user_generator = EmbeddingGenerator(d, config.generator_layers)
        self.item_generator = EmbeddingGenerator(d, config.generator_layers)
        self.to(config.torch_dtype)

    @property
    def n_items(self) -> int:
        """Number of real items (the pad row excluded)."""
        return self.item_embeddings.shape[0] - 1

    @property
    def pad_id(self) -> int:
        """Index of the padding row."""
        return self.config.pad_id

    def backbone_parameters(self) -> list[tuple[str, nn.Parameter]]:
        """Named parameters of the encoder and item table (generators excluded)."""
        return [
            (name, param)
            for name, param in self.named_parameters()
            if not name.startswith(("user_generator.", "item_generator."))
        ]


def initialize_params(config: EncoderConfig, seed: int = 0) -> ModelParams:
    """
    Draw fresh parameters from the `INIT` stream of `seed`.

    Embeddings and projection weights are uniform in `[-1/sqrt(d), 1/sqrt(d)]`,
    biases are zero, layer norms start at the identity and generators at zero.
    """
    params = ModelParams(config)
    generator = torch_stream(seed, Purpose.INIT)
    bound = 1.0 / math.sqrt(config.d)

    def uniform_(tensor: torch.Tensor) -> None:
        draw = torch.rand(tensor.shape, generator=generator, dtype=torch.float64)
        tensor.copy_((draw * 2 - 1) * bound)

    with torch.no_grad():
        uniform_(params.item_embeddings)
        params.item_embeddings[params.pad_id].zero_()
        uniform_(params.positional_embeddings)
        for block in params.blocks:
            for linear in (
                block.query,
                block.key,
                block.value,
                block.output,
                block.feed_forward_in,
                block.feed_forward_out,
            ):
                uniform_(linear.weight)
                nn.init.zeros_(linear.bias)
            for norm in (block.attention_norm, block.forward_norm):
                nn.init.ones_(norm.weight)
                nn.init.zeros_(norm.bias)
        nn.init.ones_(params.last_norm.weight)
        nn.init.zeros_(params.last_norm.bias)
    params.user_generator.reset_parameters()
    params.item_generator.reset_parameters()
    return params
