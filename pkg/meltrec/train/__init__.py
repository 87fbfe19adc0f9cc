"""`meltrec.train`: Curriculum weights, optimization, checkpoints and the training stages."""

from __future__ import annotations

from . import checkpoint, curriculum, optimizer, trainer
from .checkpoint import *  # noqa: F403
from .curriculum import *  # noqa: F403
from .optimizer import *  # noqa: F403
from .trainer import *  # noqa: F403

__all__ = (
    curriculum.__all__
    + optimizer.__all__
    + checkpoint.__all__
    + trainer.__all__
)
