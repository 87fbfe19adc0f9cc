"""Exact gradients per parameter block and a central finite-difference check."""

from __future__ import annotations

from typing import TYPE_CHECKING

import torch

from meltrec.errors import GradientError

if TYPE_CHECKING:
    from collections.abc import Callable, Iterable

    from meltrec.model.params import ModelParams


__all__ = (
    "collect_gradients",
    "finite_difference_gradients",
    "gradient_check",
    "gradients",
    "relative_error",
)


def collect_gradients(params: ModelParams) -> dict[str, torch.Tensor]:
    """
    Gradient of every named parameter; untouched parameters get zeros.

    Raises a `GradientError` naming the first block with a non-finite entry.
    """
    grads = {}
    for name, param in params.named_parameters():
        grad = torch.zeros_like(param) if param.grad is None else param.grad.detach()
        if not torch.isfinite(grad).all():
            msg = "Non-finite gradient"
            raise GradientError(msg, name)
        grads[name] = grad.clone()
    return grads


def gradients(params: ModelParams, loss: torch.Tensor) -> dict[str, torch.Tensor]:
    """Backpropagate a scalar loss from clean gradients and collect the result."""
    params.zero_grad(set_to_none=True)
    loss.backward()
    return collect_gradients(params)


def finite_difference_gradients(
    params: ModelParams,
    loss_fn: Callable[[], torch.Tensor],
    *,
    step: float = 1e-4,
    blocks: Iterable[str] | None = None,
) -> dict[str, torch.Tensor]:
    """
    Central differences `(L(x + h) - L(x - h)) / 2h` for every entry of each block.

    `loss_fn` must be deterministic (dropout off, fixed samples).
    """
    named = dict(params.named_parameters())
    estimates = {}
    with torch.no_grad():
        for name in named if blocks is None else blocks:
            flat = named[name].view(-1)
            estimate = torch.zeros_like(flat)
            for position in range(flat.numel()):
                original = flat[position].item()
                flat[position] = original + step
                upper = float(loss_fn())
                flat[position] = original - step
                lower = float(loss_fn())
                flat[position] = original
                estimate[position] = (upper - lower) / (2 * step)
            estimates[name] = estimate.view_as(named[name])
    return estimates


def relative_error(
    exact: torch.Tensor,
    estimate: torch.Tensor,
    *,
    floor: float = 1e-4,
) -> float:
    """
    Largest absolute difference relative to the largest magnitude of either tensor.

    The magnitude is clamped below at `floor`, so a block whose gradient is
    zero compares its rounding noise against `floor` rather than against itself.

    >>> round(relative_error(torch.tensor([1.0, 2.0]), torch.tensor([1.0, 2.002])), 4)
    0.001
    >>> relative_error(torch.zeros(3), torch.zeros(3))
    0.0
    >>> relative_error(torch.tensor([2.8e-18]), torch.zeros(1)) < 1e-5
    True
    """
    scale = max(exact.abs().max().item(), estimate.abs().max().item(), floor)
    return (exact - estimate).abs().max().item() / scale


def gradient_check(
    params: ModelParams,
    loss_fn: Callable[[], torch.Tensor],
    *,
    step: float = 1e-4,
    blocks: Iterable[str] | None = None,
) -> dict[str, float]:
    """Relative error between autograd and finite differences, per block."""
    exact = gradients(params, loss_fn())
    names = list(exact) if blocks is None else list(blocks)
    estimates = finite_difference_gradients(params, loss_fn, step=step, blocks=names)
    return {name: relative_error(exact[name], estimates[name]) for name in names}
