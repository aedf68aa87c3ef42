"""Synthetic scene generator.

Builds small worlds where each category has a characteristic image
position (categories sharing an anchor differ only in identity), so
placement models have real structure to learn and layout-aware planning
measurably beats label shuffling. Used by the demo scripts and the test
suite; handy for trying the pipeline without a real dataset.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .boxes import BoundingBox
from .corpus import Corpus
from .scene import LabeledBox, LabelSpace, SceneLayout
from .victims import AttackRequest

# Pairs share an anchor; vertical position tracks the pair index, so
# category identity correlates with where boxes sit in the image.
ANCHOR_PAIRS: tuple[tuple[str, str], ...] = (
    ("balloon", "kite"),
    ("bird", "drone"),
    ("awning", "window"),
    ("bench", "hydrant"),
)
_ANCHORS: dict[str, tuple[float, float, float, float]] = {}
for _i, (_a, _b) in enumerate(ANCHOR_PAIRS):
    _geom = (0.3 if _i % 2 == 0 else 0.7, 0.15 + 0.2333 * _i, 0.16, 0.14)
    _ANCHORS[_a] = _geom
    _ANCHORS[_b] = _geom

CATEGORIES: tuple[str, ...] = tuple(c for pair in ANCHOR_PAIRS for c in pair)
POSITION_SIGMA = 0.01


def label_space() -> LabelSpace:
    return LabelSpace(CATEGORIES)


def partner(category: str) -> str:
    """The category sharing this category's anchor."""
    for a, b in ANCHOR_PAIRS:
        if category == a:
            return b
        if category == b:
            return a
    raise KeyError(category)


def anchor(category: str) -> tuple[float, float, float, float]:
    return _ANCHORS[category]


def sample_box(
    rng: np.random.Generator, category: str, sigma: float = POSITION_SIGMA
) -> BoundingBox:
    cx, cy, w, h = _ANCHORS[category]
    jitter = rng.normal(0.0, sigma, size=4)
    return BoundingBox(
        cx=float(np.clip(cx + jitter[0], 0.0, 1.0)),
        cy=float(np.clip(cy + jitter[1], 0.0, 1.0)),
        w=float(np.clip(w + jitter[2], 0.02, 1.0)),
        h=float(np.clip(h + jitter[3], 0.02, 1.0)),
    )


def _choose_anchor_categories(
    rng: np.random.Generator, n: int
) -> list[str]:
    """One category per anchor, so every present category has its partner absent."""
    pair_ids = rng.choice(len(ANCHOR_PAIRS), size=n, replace=False)
    return [ANCHOR_PAIRS[int(p)][int(rng.integers(2))] for p in sorted(pair_ids)]


def make_scene(
    rng: np.random.Generator,
    scene_id: str,
    n_objects: Optional[int] = None,
    predicted: bool = False,
    duplicate_category: Optional[str] = None,
    sigma: float = POSITION_SIGMA,
) -> SceneLayout:
    """Sample a scene with one category per anchor.

    `predicted` attaches confidences; `duplicate_category` forces a second
    instance of that category (for exact-count scenarios).
    """
    n = int(n_objects) if n_objects is not None else int(rng.integers(2, 5))
    categories = _choose_anchor_categories(rng, min(n, len(ANCHOR_PAIRS)))
    if duplicate_category is not None:
        categories.append(duplicate_category)
    objects = tuple(
        LabeledBox(
            box=sample_box(rng, category, sigma),
            category=category,
            confidence=0.9 if predicted else None,
        )
        for category in categories
    )
    return SceneLayout(scene_id=scene_id, width=640, height=480, objects=objects)


def relabeled_copy(
    scene: SceneLayout, new_scene_id: str, relabel: dict[int, str]
) -> SceneLayout:
    """Annotation copy of a scene with some object labels replaced."""
    objects = tuple(
        LabeledBox(box=obj.box, category=relabel.get(i, obj.category))
        for i, obj in enumerate(scene.objects)
    )
    return SceneLayout(
        scene_id=new_scene_id, width=scene.width, height=scene.height, objects=objects
    )


@dataclass
class SyntheticWorld:
    corpus: Corpus
    victim_scenes: dict[str, SceneLayout]
    requests: list[AttackRequest] = field(default_factory=list)


def build_world(
    seed: int = 7,
    corpus_size: int = 200,
    victim_count: int = 50,
    kind: str = "r2",
    count: int = 1,
    include_siblings: bool = True,
) -> SyntheticWorld:
    """Corpus plus victim scenes plus requests targeting absent partners.

    With `include_siblings`, each victim scene gets one corpus entry that
    repeats its layout with the partner box relabeled to the target, so a
    well-matching layout is always available.
    """
    rng = np.random.default_rng(seed)
    space = label_space()
    corpus_scenes = [
        make_scene(rng, f"c{i:05d}", n_objects=int(rng.integers(2, 5)))
        for i in range(corpus_size)
    ]

    victim_scenes: dict[str, SceneLayout] = {}
    requests: list[AttackRequest] = []
    siblings: list[SceneLayout] = []
    for i in range(victim_count):
        scene = make_scene(rng, f"v{i:05d}", n_objects=int(rng.integers(2, 5)), predicted=True)
        victim_scenes[scene.scene_id] = scene
        present = sorted(scene.categories(), key=space.index)
        target = partner(present[0])
        requests.append(
            AttackRequest(
                scene_id=scene.scene_id,
                kind=kind,
                target_category=target,
                percentile=50,
                count=count if kind == "r3" else 1,
            )
        )
        if include_siblings:
            # Relabel the boxes that sit on the target's anchor.
            donor_indices = [
                j
                for j, obj in enumerate(scene.objects)
                if obj.category == partner(target)
            ][: max(count, 1)]
            extra = scene
            if kind == "r3" and len(donor_indices) < count:
                # Guarantee enough target instances in the sibling.
                needed = count - len(donor_indices)
                extra_objects = list(scene.objects) + [
                    LabeledBox(box=sample_box(rng, partner(target)), category=partner(target))
                    for _ in range(needed)
                ]
                extra = SceneLayout(
                    scene_id=scene.scene_id,
                    width=scene.width,
                    height=scene.height,
                    objects=tuple(extra_objects),
                )
                donor_indices = [
                    j
                    for j, obj in enumerate(extra.objects)
                    if obj.category == partner(target)
                ][:count]
            siblings.append(
                relabeled_copy(
                    extra,
                    f"s{i:05d}",
                    {j: target for j in donor_indices},
                )
            )

    corpus = Corpus(space, corpus_scenes + siblings)
    return SyntheticWorld(corpus=corpus, victim_scenes=victim_scenes, requests=requests)


def write_coco_file(corpus: Corpus, path: str | Path) -> None:
    """Serialize a corpus in COCO instances form (pixel xywh boxes)."""
    categories = [
        {"id": i + 1, "name": name}
        for i, name in enumerate(corpus.label_space)
    ]
    name_to_id = {c["name"]: c["id"] for c in categories}
    images = []
    annotations = []
    ann_id = 1
    for scene in corpus.scenes:
        images.append(
            {"id": scene.scene_id, "width": scene.width, "height": scene.height}
        )
        for obj in scene.objects:
            x, y, w, h = obj.box.to_pixel_xywh(scene.width, scene.height)
            annotations.append(
                {
                    "id": ann_id,
                    "image_id": scene.scene_id,
                    "category_id": name_to_id[obj.category],
                    "bbox": [x, y, w, h],
                    "iscrowd": 0,
                }
            )
            ann_id += 1
    payload = {"images": images, "annotations": annotations, "categories": categories}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def write_embeddings(
    path: str | Path,
    categories: Sequence[str] = CATEGORIES,
    seed: int = 13,
    dim: int = 12,
) -> None:
    """Embedding file whose vectors track the category anchors, so word
    distance loosely mirrors spatial similarity."""
    rng = np.random.default_rng(seed)
    with open(path, "w", encoding="utf-8") as fh:
        for category in categories:
            base = np.array(_ANCHORS[category], dtype=float)
            noise = rng.normal(0.0, 0.05, size=dim - 4)
            vec = np.concatenate([base, noise])
            fh.write(category + " " + " ".join(f"{v:.8f}" for v in vec) + "\n")
