"""`meltrec.model`: Parameters, the sequence encoder, generators, losses and gradients."""

from __future__ import annotations

from . import encoder, enhance, gradcheck, losses, params
from .encoder import *  # noqa: F403
from .enhance import *  # noqa: F403
from .gradcheck import *  # noqa: F403
from .losses import *  # noqa: F403
from .params import *  # noqa: F403

__all__ = (
    params.__all__
    + encoder.__all__
    + enhance.__all__
    + losses.__all__
    + gradcheck.__all__
)
