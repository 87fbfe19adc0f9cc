"""Sine-annealed loss weights for head users and head items."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING

from meltrec.errors import CurriculumError

if TYPE_CHECKING:
    from meltrec.data.split import HeadTailPartition


__all__ = (
    "CurriculumState",
    "curriculum_weight",
)


def curriculum_weight(e: int, e_max: int, x: int, l_min: int, l_max: int) -> float:
    """
    `sin(pi/2 * e/e_max + pi/2 * (x - l_min)/(l_max - l_min))`.

    Early epochs favour entities with long sequences (large `x`), late epochs
    favour those close to `l_min`. A degenerate range `l_min == l_max` has a
    length term of 0.

    >>> curriculum_weight(0, 10, 3, 3, 9), curriculum_weight(10, 10, 3, 3, 9)
    (0.0, 1.0)
    >>> curriculum_weight(10, 10, 9, 3, 9), curriculum_weight(0, 10, 9, 3, 9)
    (0.0, 1.0)
    """
    if not 0 <= e <= e_max or e_max < 1:
        msg = f"Epoch {e} is outside [0, {e_max}]"
        raise CurriculumError(msg)
    if not l_min <= x <= l_max:
        msg = f"Length {x} is outside [{l_min}, {l_max}]"
        raise CurriculumError(msg)
    turns = Fraction(e, e_max)
    if l_max > l_min:
        turns += Fraction(x - l_min, l_max - l_min)
    # sin is symmetric around a quarter turn; folding keeps both ends exact.
    if turns > 1:
        turns = 2 - turns
    if turns == 0:
        return 0.0
    if turns == 1:
        return 1.0
    return math.sin(math.pi / 2 * float(turns))


@dataclass(frozen=True)
class CurriculumState:
    """The epoch and the length bounds that head-entity weights depend on."""

    epoch: int
    e_max: int
    l_min_user: int
    l_max_user: int
    l_min_item: int
    l_max_item: int
    enabled: bool = True

    @classmethod
    def from_partition(
        cls,
        partition: HeadTailPartition,
        epoch: int,
        e_max: int,
        *,
        enabled: bool = True,
    ) -> CurriculumState:
        """Take the length bounds from a partition."""
        return cls(
            epoch=epoch,
            e_max=e_max,
            l_min_user=partition.L_min_user,
            l_max_user=partition.L_max_user,
            l_min_item=partition.L_min_item,
            l_max_item=partition.L_max_item,
            enabled=enabled,
        )

    def user_weight(self, length: int) -> float:
        """`w_u` of a head user with a training sequence of `length` items."""
        if not self.enabled:
            return 1.0
        return curriculum_weight(
            self.epoch, self.e_max, length, self.l_min_user, self.l_max_user
        )

    def item_weight(self, size: int) -> float:
        """`w_i` of a head item with `size` subsequences."""
        if not self.enabled:
            return 1.0
        return curriculum_weight(
            self.epoch, self.e_max, size, self.l_min_item, self.l_max_item
        )
