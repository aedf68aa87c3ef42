"""Word-vector distances and target-label ranking.

Target labels are always chosen among categories absent from the scene,
ranked by their mean cosine distance to the objects already present.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import FormatError, ValidationError
from .scene import LabelSpace, SceneLayout

VALID_PERCENTILES = (5, 50, 95)


class WordVectorTable:
    """Category -> embedding vector, ordered like the label space."""

    def __init__(self, label_space: LabelSpace, vectors: Mapping[str, np.ndarray]):
        self.label_space = label_space
        self._vectors: dict[str, np.ndarray] = {}
        dim = None
        for category in label_space:
            if category not in vectors:
                raise ValidationError(f"no vector for category {category!r}")
            vec = np.asarray(vectors[category], dtype=float)
            if vec.ndim != 1:
                raise ValidationError(f"vector for {category!r} is not 1-d")
            if dim is None:
                dim = vec.shape[0]
            elif vec.shape[0] != dim:
                raise ValidationError(
                    f"vector for {category!r} has dimension {vec.shape[0]}, "
                    f"expected {dim}"
                )
            if not np.linalg.norm(vec) > 0:
                raise ValidationError(f"zero vector for category {category!r}")
            self._vectors[category] = vec

    @property
    def dimension(self) -> int:
        return next(iter(self._vectors.values())).shape[0]

    def vector(self, category: str) -> np.ndarray:
        try:
            return self._vectors[category]
        except KeyError:
            raise ValidationError(f"no vector for category {category!r}") from None


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    """1 - cos(a, b), in [0, 2]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValidationError("cosine distance undefined for zero vectors")
    return 1.0 - float(np.dot(a, b)) / (na * nb)


def avg_distance(category: str, scene: SceneLayout, table: WordVectorTable) -> float:
    """Mean cosine distance from a candidate category to every scene object.

    Duplicated categories count once per instance. The candidate must be
    absent from the scene.
    """
    if len(scene) == 0:
        raise ValidationError(f"scene {scene.scene_id!r} has no objects")
    if category in scene.categories():
        raise ValidationError(
            f"category {category!r} already present in scene {scene.scene_id!r}"
        )
    target = table.vector(category)
    total = sum(cosine_distance(target, table.vector(obj.category)) for obj in scene.objects)
    return total / len(scene)


def absent_categories(scene: SceneLayout, table: WordVectorTable) -> list[str]:
    present = scene.categories()
    return [c for c in table.label_space if c not in present]


def rank_targets(scene: SceneLayout, table: WordVectorTable, percentile: int) -> str:
    """Pick the target category at a distance percentile.

    Absent categories are ordered by descending mean distance, so
    percentile 5 lands near the most distant labels (the hard end) and
    95 near the closest. Ties break by label-space index.
    """
    if percentile not in VALID_PERCENTILES:
        raise ValidationError(
            f"percentile must be one of {VALID_PERCENTILES}, got {percentile}"
        )
    candidates = absent_categories(scene, table)
    if not candidates:
        raise ValidationError(
            f"scene {scene.scene_id!r} already contains every category"
        )
    scored = sorted(
        candidates,
        key=lambda c: (-avg_distance(c, scene, table), table.label_space.index(c)),
    )
    k = len(scored)
    rank = min(max(math.ceil(percentile / 100.0 * k), 1), k)
    return scored[rank - 1]


def load_word_vectors(path: str | Path, label_space: LabelSpace) -> WordVectorTable:
    """Load a plain-text embedding file (token then D floats per line).

    Multiword categories embed as the mean of their token vectors.
    """
    tokens: dict[str, np.ndarray] = {}
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if len(parts) < 2:
                raise FormatError(f"{path}:{lineno}: expected token and floats")
            try:
                vec = np.array([float(v) for v in parts[1:]], dtype=float)
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: bad float: {exc}") from exc
            if dim is None:
                dim = vec.shape[0]
            elif vec.shape[0] != dim:
                raise FormatError(
                    f"{path}:{lineno}: dimension {vec.shape[0]} != {dim}"
                )
            tokens[parts[0]] = vec

    vectors: dict[str, np.ndarray] = {}
    for category in label_space:
        words = category.split()
        missing = [w for w in words if w not in tokens]
        if missing:
            raise ValidationError(
                f"embedding file has no vector for token(s) {missing} "
                f"of category {category!r}"
            )
        vectors[category] = np.mean([tokens[w] for w in words], axis=0)
    return WordVectorTable(label_space, vectors)
