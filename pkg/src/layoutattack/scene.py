"""Label space and scene-layout domain types."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

from .boxes import BoundingBox
from .errors import ValidationError


class LabelSpace:
    """Ordered set of category identifiers with stable integer indices."""

    def __init__(self, categories: Sequence[str]):
        names = list(categories)
        if len(set(names)) != len(names):
            raise ValidationError("duplicate category identifiers in label space")
        if not all(isinstance(n, str) and n for n in names):
            raise ValidationError("category identifiers must be nonempty strings")
        self._names: tuple[str, ...] = tuple(names)
        self._index = {name: i for i, name in enumerate(names)}

    @property
    def categories(self) -> tuple[str, ...]:
        return self._names

    def index(self, category: str) -> int:
        try:
            return self._index[category]
        except KeyError:
            raise ValidationError(f"category {category!r} not in label space") from None

    def name(self, index: int) -> str:
        return self._names[index]

    def __contains__(self, category: str) -> bool:
        return category in self._index

    def __len__(self) -> int:
        return len(self._names)

    def __iter__(self) -> Iterator[str]:
        return iter(self._names)

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelSpace) and self._names == other._names

    def __repr__(self) -> str:
        return f"LabelSpace({len(self._names)} categories)"


@dataclass(frozen=True)
class LabeledBox:
    """A box with its category; confidence is present iff it is a prediction."""

    box: BoundingBox
    category: str
    confidence: Optional[float] = None

    def __post_init__(self):
        if self.confidence is not None and not (0.0 <= self.confidence <= 1.0):
            raise ValidationError(f"confidence outside [0,1]: {self.confidence}")


@dataclass(frozen=True)
class SceneLayout:
    """One image's set of labeled boxes (annotations or predictions)."""

    scene_id: str
    width: int
    height: int
    objects: tuple[LabeledBox, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(
                f"scene {self.scene_id!r}: invalid size {self.width}x{self.height}"
            )
        object.__setattr__(self, "objects", tuple(self.objects))

    def __len__(self) -> int:
        return len(self.objects)

    def categories(self) -> set[str]:
        return {obj.category for obj in self.objects}

    def category_count(self, category: str) -> int:
        return sum(1 for obj in self.objects if obj.category == category)
