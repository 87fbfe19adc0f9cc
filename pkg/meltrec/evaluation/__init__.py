"""`meltrec.evaluation`: Sampled ranking evaluation and group-wise reports."""

from __future__ import annotations

from . import metrics, negatives, ranking, report, scoring
from .metrics import *  # noqa: F403
from .negatives import *  # noqa: F403
from .ranking import *  # noqa: F403
from .report import *  # noqa: F403
from .scoring import *  # noqa: F403

__all__ = (
    metrics.__all__
    + negatives.__all__
    + scoring.__all__
    + report.__all__
    + ranking.__all__
)
