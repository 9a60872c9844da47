"""Label and subset enumerations shared across the pipeline.

Integer codes are part of the binary cache and design-matrix formats and
must never be renumbered.
"""

from __future__ import annotations

from enum import Enum


class Category(Enum):
    """Dermatopathological slide category."""

    BASALOID = 0
    MELANOCYTIC = 1
    SQUAMOUS = 2
    OTHER = 3

    @classmethod
    def from_text(cls, text: str) -> "Category":
        key = text.strip().lower()
        try:
            return _CATEGORY_BY_NAME[key]
        except KeyError:
            raise ValueError(f"unknown category {text!r}") from None

    @classmethod
    def from_code(cls, code: int) -> "Category":
        try:
            return cls(code)
        except ValueError:
            raise ValueError(f"unknown category code {code}") from None

    def to_text(self) -> str:
        return self.name.lower()


# The three categories used for classification; OTHER is excluded upstream.
CLASSIFIED_CATEGORIES = (Category.BASALOID, Category.MELANOCYTIC, Category.SQUAMOUS)
N_CLASSES = len(CLASSIFIED_CATEGORIES)


class Subset(Enum):
    """Raw subset assignment as recorded in the manifest."""

    TRAIN = 0
    VALIDATION = 1
    TEST = 2

    @classmethod
    def from_text(cls, text: str) -> "Subset":
        key = text.strip().lower()
        try:
            return _SUBSET_BY_NAME[key]
        except KeyError:
            raise ValueError(f"unknown subset {text!r}") from None

    def to_text(self) -> str:
        return self.name.capitalize()


class EffectiveSubset(Enum):
    """Two-way split actually used for training and evaluation.

    Validation slides are folded into the test partition.
    """

    TRAIN = 0
    TEST = 1

    @classmethod
    def from_code(cls, code: int) -> "EffectiveSubset":
        try:
            return cls(code)
        except ValueError:
            raise ValueError(f"unknown effective subset code {code}") from None


_CATEGORY_BY_NAME = {c.name.lower(): c for c in Category}
_SUBSET_BY_NAME = {s.name.lower(): s for s in Subset}


def effective_subset(subset: Subset) -> EffectiveSubset:
    """Map a raw subset to its effective two-way partition."""
    if subset is Subset.TRAIN:
        return EffectiveSubset.TRAIN
    return EffectiveSubset.TEST
