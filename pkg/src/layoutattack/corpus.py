"""Corpus ingestion: COCO-style annotations, prediction dumps, sample pools,
and the category co-occurrence matrix."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .boxes import BoundingBox, from_pixel_xywh
from .errors import FormatError, ValidationError
from .scene import LabeledBox, LabelSpace, SceneLayout
from .util import canonical_json, read_jsonl

log = logging.getLogger(__name__)


class Corpus:
    """Annotated scenes plus a per-category pool of normalized box samples."""

    def __init__(self, label_space: LabelSpace, scenes: Sequence[SceneLayout]):
        self.label_space = label_space
        self.scenes: tuple[SceneLayout, ...] = tuple(scenes)
        for scene in self.scenes:
            for obj in scene.objects:
                if obj.category not in label_space:
                    raise ValidationError(
                        f"scene {scene.scene_id!r} references category "
                        f"{obj.category!r} outside the label space"
                    )
        self._samples: dict[str, np.ndarray] = {}
        buckets: dict[str, list[list[float]]] = {c: [] for c in label_space}
        for scene in self.scenes:
            for obj in scene.objects:
                b = obj.box
                buckets[obj.category].append([b.cx, b.cy, b.w, b.h])
        for category, rows in buckets.items():
            self._samples[category] = (
                np.array(rows, dtype=float) if rows else np.zeros((0, 4))
            )

    def __len__(self) -> int:
        return len(self.scenes)

    @property
    def annotation_count(self) -> int:
        return sum(len(scene) for scene in self.scenes)

    def scene(self, scene_id: str) -> SceneLayout:
        for s in self.scenes:
            if s.scene_id == scene_id:
                return s
        raise KeyError(scene_id)


def category_samples(corpus: Corpus, category: str) -> np.ndarray:
    """All normalized (cx, cy, w, h) samples of one category, (n, 4)."""
    if category not in corpus.label_space:
        raise ValidationError(f"category {category!r} not in label space")
    return corpus._samples[category]


@dataclass(frozen=True)
class CooccurrenceMatrix:
    """Scene-level co-occurrence counts.

    Off-diagonal (i, j) counts scenes containing both categories; the
    diagonal counts scenes with at least two instances of the category.
    """

    label_space: LabelSpace
    counts: np.ndarray

    def count(self, a: str, b: str) -> int:
        return int(
            self.counts[self.label_space.index(a), self.label_space.index(b)]
        )

    def cooccurs(self, a: str, b: str) -> bool:
        return self.count(a, b) > 0


def build_cooccurrence(corpus: Corpus) -> CooccurrenceMatrix:
    size = len(corpus.label_space)
    counts = np.zeros((size, size), dtype=np.int64)
    for scene in corpus.scenes:
        per_category: dict[int, int] = {}
        for obj in scene.objects:
            idx = corpus.label_space.index(obj.category)
            per_category[idx] = per_category.get(idx, 0) + 1
        present = sorted(per_category)
        for i in present:
            if per_category[i] >= 2:
                counts[i, i] += 1
            for j in present:
                if j > i:
                    counts[i, j] += 1
                    counts[j, i] += 1
    return CooccurrenceMatrix(corpus.label_space, counts)


def load_annotations(path: str | Path) -> Corpus:
    """Load a COCO-style instances file into a Corpus.

    Boxes are converted from top-left pixel (x, y, w, h) to normalized
    center form. Crowd regions and degenerate (zero-area) boxes are
    skipped with a warning.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(
            f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}"
        ) from exc

    for key in ("images", "annotations", "categories"):
        if key not in payload:
            raise FormatError(f"{path}: missing top-level key {key!r}")

    categories = sorted(payload["categories"], key=lambda c: c["id"])
    label_space = LabelSpace([c["name"] for c in categories])
    id_to_name = {c["id"]: c["name"] for c in categories}

    images: dict[Any, dict] = {}
    for image in payload["images"]:
        if image["id"] in images:
            raise ValidationError(f"{path}: duplicate image id {image['id']!r}")
        images[image["id"]] = image

    boxes_by_image: dict[Any, list[LabeledBox]] = {iid: [] for iid in images}
    skipped = 0
    for ann in payload["annotations"]:
        image_id = ann["image_id"]
        if image_id not in images:
            raise ValidationError(
                f"{path}: annotation references unknown image id {image_id!r}"
            )
        category_id = ann["category_id"]
        if category_id not in id_to_name:
            raise ValidationError(
                f"{path}: annotation references unknown category id {category_id!r}"
            )
        if ann.get("iscrowd", 0):
            continue
        image = images[image_id]
        x, y, w, h = ann["bbox"]
        if w <= 0 or h <= 0:
            skipped += 1
            continue
        box = from_pixel_xywh(x, y, w, h, image["width"], image["height"])
        boxes_by_image[image_id].append(LabeledBox(box=box, category=id_to_name[category_id]))
    if skipped:
        log.warning("%s: skipped %d zero-area annotation boxes", path, skipped)

    scenes = [
        SceneLayout(
            scene_id=str(image_id),
            width=images[image_id]["width"],
            height=images[image_id]["height"],
            objects=tuple(boxes_by_image[image_id]),
        )
        for image_id in sorted(images, key=lambda i: str(i))
    ]
    return Corpus(label_space, scenes)


def load_predictions(
    path: str | Path, label_space: LabelSpace
) -> dict[str, SceneLayout]:
    """Load a line-delimited prediction file into scenes keyed by id.

    Each record is one scene: {"scene_id", "width", "height", "objects"}
    where every object carries "category", "cx", "cy", "w", "h" and a
    mandatory "confidence". Records with a "header" key are metadata
    emitted by the simulator and are skipped.
    """
    scenes: dict[str, SceneLayout] = {}
    for lineno, record in read_jsonl(path):
        if not isinstance(record, dict):
            raise FormatError(f"{path}:{lineno}: record is not an object")
        if "header" in record:
            continue
        try:
            scene = _prediction_record_to_scene(record, label_space)
        except (KeyError, TypeError) as exc:
            raise FormatError(f"{path}:{lineno}: bad prediction record: {exc}") from exc
        except ValidationError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from exc
        if scene.scene_id in scenes:
            raise ValidationError(f"{path}:{lineno}: duplicate scene id {scene.scene_id!r}")
        scenes[scene.scene_id] = scene
    return scenes


def _prediction_record_to_scene(
    record: Mapping[str, Any], label_space: LabelSpace
) -> SceneLayout:
    objects = []
    for entry in record["objects"]:
        category = entry["category"]
        if category not in label_space:
            raise ValidationError(f"category {category!r} not in label space")
        if "confidence" not in entry or entry["confidence"] is None:
            raise ValidationError(
                f"prediction for scene {record['scene_id']!r} missing confidence"
            )
        objects.append(
            LabeledBox(
                box=BoundingBox(entry["cx"], entry["cy"], entry["w"], entry["h"]),
                category=category,
                confidence=float(entry["confidence"]),
            )
        )
    return SceneLayout(
        scene_id=str(record["scene_id"]),
        width=int(record["width"]),
        height=int(record["height"]),
        objects=tuple(objects),
    )


def prediction_record(scene: SceneLayout) -> dict:
    """Serialize a prediction scene back to its file record form."""
    return {
        "scene_id": scene.scene_id,
        "width": scene.width,
        "height": scene.height,
        "objects": [
            {
                "category": obj.category,
                "cx": obj.box.cx,
                "cy": obj.box.cy,
                "w": obj.box.w,
                "h": obj.box.h,
                "confidence": obj.confidence,
            }
            for obj in scene.objects
        ],
    }


def write_predictions(
    scenes: Sequence[SceneLayout],
    path: str | Path,
    header: Optional[dict] = None,
) -> None:
    """Write scenes as a prediction dump, sorted by scene id.

    An optional header record (seed, attacker settings, ...) is written
    first under the "header" key.
    """
    with open(path, "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(canonical_json({"header": header}))
            fh.write("\n")
        for scene in sorted(scenes, key=lambda s: s.scene_id):
            fh.write(canonical_json(prediction_record(scene)))
            fh.write("\n")
