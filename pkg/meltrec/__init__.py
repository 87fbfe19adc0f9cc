"""Jointly alleviate long-tailed users and items in sequential recommendation."""

from __future__ import annotations

from . import config, data, errors, evaluation, formats, model, rng, sources, train
from .config import *  # noqa: F403
from .data import *  # noqa: F403
from .errors import *  # noqa: F403
from .evaluation import *  # noqa: F403
from .formats import *  # noqa: F403
from .model import *  # noqa: F403
from .rng import *  # noqa: F403
from .sources import *  # noqa: F403
from .train import *  # noqa: F403

__all__ = (  # noqa: PLE0604
    *config.__all__,
    *data.__all__,
    *errors.__all__,
    *evaluation.__all__,
    *formats.__all__,
    *model.__all__,
    *rng.__all__,
    *sources.__all__,
    *train.__all__,
)
