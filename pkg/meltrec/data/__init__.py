"""`meltrec.data`: Ingest, filter, split, partition and index interaction data."""

from __future__ import annotations

from . import index, interactions, split, storage, synthetic
from .index import *  # noqa: F403
from .interactions import *  # noqa: F403
from .split import *  # noqa: F403
from .storage import *  # noqa: F403
from .synthetic import *  # noqa: F403

__all__ = (
    interactions.__all__
    + split.__all__
    + index.__all__
    + synthetic.__all__
    + storage.__all__
)
