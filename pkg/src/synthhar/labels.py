"""Activity label taxonomy.

Annotations use ten fine-grained activities; the classifier works on five
coarse classes obtained by merging the lying postures and the transfers.
"""

from __future__ import annotations

from enum import Enum


class FineLabel(str, Enum):
    WALKING = "walking"
    STANDING = "standing"
    SITTING = "sitting"
    SUPINE = "supine"
    LEFT_LATERAL = "left_lateral"
    RIGHT_LATERAL = "right_lateral"
    SIT_TO_STAND = "sit_to_stand"
    STAND_TO_SIT = "stand_to_sit"
    SIT_TO_LIE = "sit_to_lie"
    LIE_TO_SIT = "lie_to_sit"

    def __str__(self) -> str:
        return self.value


class CoarseLabel(str, Enum):
    WALK = "walk"
    STAND = "stand"
    SIT = "sit"
    LIE_DOWN = "lie_down"
    TRANSFER = "transfer"

    def __str__(self) -> str:
        return self.value


FINE_LABELS = tuple(FineLabel)
COARSE_LABELS = tuple(CoarseLabel)

_COARSE_OF = {
    FineLabel.WALKING: CoarseLabel.WALK,
    FineLabel.STANDING: CoarseLabel.STAND,
    FineLabel.SITTING: CoarseLabel.SIT,
    FineLabel.SUPINE: CoarseLabel.LIE_DOWN,
    FineLabel.LEFT_LATERAL: CoarseLabel.LIE_DOWN,
    FineLabel.RIGHT_LATERAL: CoarseLabel.LIE_DOWN,
    FineLabel.SIT_TO_STAND: CoarseLabel.TRANSFER,
    FineLabel.STAND_TO_SIT: CoarseLabel.TRANSFER,
    FineLabel.SIT_TO_LIE: CoarseLabel.TRANSFER,
    FineLabel.LIE_TO_SIT: CoarseLabel.TRANSFER,
}

TRANSFERS = frozenset(f for f, c in _COARSE_OF.items() if c is CoarseLabel.TRANSFER)
STATIC_POSTURES = frozenset(
    {FineLabel.STANDING, FineLabel.SITTING, FineLabel.SUPINE,
     FineLabel.LEFT_LATERAL, FineLabel.RIGHT_LATERAL}
)


def parse_label(value: str | FineLabel | CoarseLabel) -> FineLabel | CoarseLabel:
    """Parse a label identifier (``sit_to_stand``, ``lie_down``, ...)."""
    if isinstance(value, (FineLabel, CoarseLabel)):
        return value
    key = str(value).strip().lower()
    try:
        return FineLabel(key)
    except ValueError:
        pass
    try:
        return CoarseLabel(key)
    except ValueError:
        raise ValueError(f"unknown activity label {value!r}") from None


def fine(value: str | FineLabel) -> FineLabel:
    label = parse_label(value)
    if not isinstance(label, FineLabel):
        raise ValueError(f"{value!r} is a coarse label, expected a fine one")
    return label


def to_coarse(value: str | FineLabel | CoarseLabel) -> CoarseLabel:
    """Map a fine label to its coarse class; coarse labels map to themselves."""
    label = parse_label(value)
    if isinstance(label, CoarseLabel):
        return label
    return _COARSE_OF[label]
