"""
Single-file checkpoints.

A checkpoint holds a format tag and version, the encoder configuration, the
parameter state in module order, the optimizer state, the last finished
epoch, the random-stream position and whatever bookkeeping the trainer adds.

Tensors are stored with safetensors and everything else as one JSON document
in the file's metadata, with tensors replaced by references to their names.
Saving what was loaded reproduces the file byte for byte.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any

import torch
from safetensors import SafetensorError, safe_open
from safetensors.torch import save as save_tensors

from meltrec.config import EncoderConfig
from meltrec.errors import CheckpointError, ConfigError
from meltrec.model.params import ModelParams

if TYPE_CHECKING:
    from os import PathLike


__all__ = (
    "CHECKPOINT_FORMAT",
    "CHECKPOINT_VERSION",
    "METADATA_KEY",
    "Checkpoint",
    "load_checkpoint",
    "save_checkpoint",
)

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "meltrec-checkpoint"
CHECKPOINT_VERSION = 2

METADATA_KEY = "meltrec"

# Markers of values JSON cannot hold directly.
_TENSOR = "__tensor__"
_INT_KEYS = "__int_keys__"
_TUPLE = "__tuple__"


@dataclass
class Checkpoint:
    """A loaded checkpoint."""

    params: ModelParams
    optimizer_state: dict[str, Any] | None
    epoch: int
    rng_state: dict[str, int]
    extra: dict[str, Any] = field(default_factory=dict)


def _flatten(value: Any, path: str, tensors: dict[str, torch.Tensor]) -> Any:
    if isinstance(value, torch.Tensor):
        if path in tensors:
            msg = f"Two checkpoint entries are both named {path!r}"
            raise CheckpointError(msg)
        tensors[path] = value.detach().cpu().clone().contiguous()
        return {_TENSOR: path}
    if isinstance(value, dict):
        if all(isinstance(key, str) for key in value):
            return {key: _flatten(item, f"{path}.{key}", tensors) for key, item in value.items()}
        if all(isinstance(key, int) and not isinstance(key, bool) for key in value):
            return {
                _INT_KEYS: [
                    [key, _flatten(item, f"{path}.{key}", tensors)] for key, item in value.items()
                ]
            }
        msg = f"Cannot store a mapping with mixed keys at {path}"
        raise CheckpointError(msg)
    if isinstance(value, (list, tuple)):
        items = [_flatten(item, f"{path}.{number}", tensors) for number, item in enumerate(value)]
        return {_TUPLE: items} if isinstance(value, tuple) else items
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    msg = f"Cannot store a {type(value).__name__} at {path}"
    raise CheckpointError(msg)


def _restore(value: Any, tensors: dict[str, torch.Tensor]) -> Any:
    if isinstance(value, list):
        return [_restore(item, tensors) for item in value]
    if not isinstance(value, dict):
        return value
    if value.keys() == {_TENSOR}:
        return tensors[value[_TENSOR]]
    if value.keys() == {_INT_KEYS}:
        return {int(key): _restore(item, tensors) for key, item in value[_INT_KEYS]}
    if value.keys() == {_TUPLE}:
        return tuple(_restore(item, tensors) for item in value[_TUPLE])
    return {key: _restore(item, tensors) for key, item in value.items()}


def save_checkpoint(
    path: str | PathLike[str],
    params: ModelParams,
    optimizer: torch.optim.Optimizer | dict[str, Any] | None,
    epoch: int,
    *,
    rng_state: dict[str, int] | None = None,
    extra: dict[str, Any] | None = None,
) -> None:
    """
    Write a checkpoint, creating parent directories as needed.

    The file goes to a sibling temporary file first and then replaces `path`,
    so an interrupted save leaves the previous checkpoint intact.
    """
    optimizer_state = (
        optimizer.state_dict() if isinstance(optimizer, torch.optim.Optimizer) else optimizer
    )
    tensors: dict[str, torch.Tensor] = {}
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "encoder": params.config.config_dump(),
        "params": _flatten(params.state_dict(), "params", tensors),
        "optimizer": _flatten(optimizer_state, "optimizer", tensors),
        "epoch": epoch,
        "rng": dict(rng_state or {}),
        "extra": _flatten(dict(extra or {}), "extra", tensors),
    }
    content = save_tensors(tensors, metadata={METADATA_KEY: json.dumps(header)})
    destination = Path(path)
    destination.parent.mkdir(parents=True, exist_ok=True)
    partial = destination.with_name(destination.name + ".partial")
    partial.write_bytes(content)
    partial.replace(destination)
    logger.debug("Saved checkpoint of epoch %d to %s", epoch, destination)


def _read(path: str | PathLike[str]) -> tuple[dict[str, str], dict[str, torch.Tensor]]:
    if not Path(path).is_file():
        msg = f"Checkpoint {path} does not exist"
        raise CheckpointError(msg)
    try:
        with safe_open(str(path), framework="pt") as file:
            metadata = file.metadata() or {}
            tensors = {name: file.get_tensor(name).clone() for name in file.keys()}  # noqa: SIM118
    except (SafetensorError, OSError, ValueError, RuntimeError) as err:
        msg = f"Checkpoint {path} is corrupt: {err}"
        raise CheckpointError(msg) from err
    return metadata, tensors


def load_checkpoint(path: str | PathLike[str]) -> Checkpoint:
    """Read a checkpoint written by [`save_checkpoint`][meltrec.train.checkpoint.save_checkpoint]."""
    metadata, tensors = _read(path)
    try:
        header = json.loads(metadata[METADATA_KEY])
    except KeyError as err:
        msg = f"{path} is not a meltrec checkpoint"
        raise CheckpointError(msg) from err
    except ValueError as err:
        msg = f"Checkpoint {path} is corrupt: {err}"
        raise CheckpointError(msg) from err
    if not isinstance(header, dict) or header.get("format") != CHECKPOINT_FORMAT:
        msg = f"{path} is not a meltrec checkpoint"
        raise CheckpointError(msg)
    if header.get("version") != CHECKPOINT_VERSION:
        msg = (
            f"Checkpoint {path} has version {header.get('version')!r}; "
            f"this meltrec reads version {CHECKPOINT_VERSION}"
        )
        raise CheckpointError(msg)
    try:
        payload = _restore(header, tensors)
        config = EncoderConfig.config_validate(payload["encoder"])
        params = ModelParams(config)
        params.load_state_dict(payload["params"])
        return Checkpoint(
            params=params,
            optimizer_state=payload["optimizer"],
            epoch=int(payload["epoch"]),
            rng_state=dict(payload["rng"]),
            extra=dict(payload["extra"]),
        )
    except (ConfigError, KeyError, TypeError, RuntimeError) as err:
        msg = f"Checkpoint {path} does not match its encoder configuration: {err}"
        raise CheckpointError(msg) from err
