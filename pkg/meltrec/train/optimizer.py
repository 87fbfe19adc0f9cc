"""Adaptive moment estimation with a constant learning rate."""

from __future__ import annotations

from typing import TYPE_CHECKING

import torch

from meltrec.errors import NumericError
from meltrec.model.gradcheck import collect_gradients

if TYPE_CHECKING:
    from meltrec.config import TrainConfig
    from meltrec.model.params import ModelParams


__all__ = (
    "make_optimizer",
    "optimizer_step",
)


def make_optimizer(params: ModelParams, config: TrainConfig) -> torch.optim.Adam:
    """A fresh Adam optimizer over every parameter."""
    return torch.optim.Adam(
        params.parameters(),
        lr=config.learning_rate,
        betas=(config.adam_beta1, config.adam_beta2),
        eps=config.adam_eps,
        foreach=False,
    )


def optimizer_step(params: ModelParams, optimizer: torch.optim.Optimizer) -> None:
    """
    Apply one update with the gradients currently held by `params`.

    Non-finite gradients raise a `GradientError` before anything changes;
    a non-finite result raises a `NumericError`.
    """
    collect_gradients(params)
    optimizer.step()
    for name, param in params.named_parameters():
        if not torch.isfinite(param).all():
            msg = f"Optimizer update made parameter {name} non-finite"
            raise NumericError(msg)
