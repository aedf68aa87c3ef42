"""Resolve attack requests into victim objects.

A request either names its victim (kind r1) or asks the system to localize
one or more victims (r2, r3) by maximizing the per-category placement
density over the scene's existing prediction boxes. Victims are always
existing predictions; nothing is synthesized.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .boxes import BoundingBox, boxes_to_array
from .errors import FormatError, ValidationError
from .mixture import CategoryGMM, weighted_density
from .scene import SceneLayout
from .util import read_jsonl, write_jsonl

log = logging.getLogger(__name__)

REQUEST_KINDS = ("r1", "r2", "r3")
R1_CONFIDENCE_GATE = 0.85


@dataclass(frozen=True)
class AttackRequest:
    """One attack request against one scene."""

    scene_id: str
    kind: str
    target_category: str
    percentile: Optional[int] = None
    count: int = 1
    victim_index: Optional[int] = None

    def __post_init__(self):
        if self.kind not in REQUEST_KINDS:
            raise ValidationError(f"unknown request kind {self.kind!r}")
        if self.kind == "r3" and self.count < 2:
            raise ValidationError(f"r3 requests need count >= 2, got {self.count}")
        if self.kind != "r3" and self.count != 1:
            raise ValidationError(f"{self.kind} requests carry count 1")
        if self.victim_index is not None and self.kind != "r1":
            raise ValidationError("only r1 requests may name a victim index")
        if self.percentile is not None and self.percentile not in (5, 50, 95):
            raise ValidationError(f"percentile tag must be 5, 50 or 95")


@dataclass(frozen=True)
class VictimObject:
    index: int
    box: BoundingBox
    category: str


@dataclass(frozen=True)
class VictimSet:
    """Victim objects with their target categories; X = len(entries)."""

    entries: tuple[VictimObject, ...]
    warnings: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(v.index for v in self.entries)

    @property
    def categories(self) -> tuple[str, ...]:
        return tuple(v.category for v in self.entries)


def select_victim_r1(scene: SceneLayout) -> tuple[int, bool]:
    """Largest-area prediction above the confidence gate.

    Returns (index, fell_back); when nothing clears the gate the
    highest-confidence prediction is used and fell_back is True.
    """
    if len(scene) == 0:
        raise ValidationError(f"scene {scene.scene_id!r} has no predictions")
    gated = [
        (obj.box.area, -i, i)
        for i, obj in enumerate(scene.objects)
        if obj.confidence is not None and obj.confidence >= R1_CONFIDENCE_GATE
    ]
    if gated:
        return max(gated)[2], False
    best = max(
        (obj.confidence or 0.0, -i, i) for i, obj in enumerate(scene.objects)
    )
    return best[2], True


def _density_candidates(
    scene: SceneLayout, target_category: str, model: CategoryGMM
) -> tuple[list[int], np.ndarray]:
    # Predictions already labeled with the target are pointless victims.
    indices = [
        i for i, obj in enumerate(scene.objects) if obj.category != target_category
    ]
    if not indices:
        raise ValidationError(
            f"scene {scene.scene_id!r} has no victim candidates for "
            f"target {target_category!r}"
        )
    arr = boxes_to_array([scene.objects[i].box for i in indices])
    return indices, np.asarray(weighted_density(model, arr))


def localize_r2(scene: SceneLayout, target_category: str, model: CategoryGMM) -> int:
    """Index of the prediction whose geometry best fits the target category."""
    if len(scene) == 0:
        raise ValidationError(f"scene {scene.scene_id!r} has no predictions")
    indices, densities = _density_candidates(scene, target_category, model)
    best = int(np.argmax(densities))  # ties resolve to the lower index
    return indices[best]


def localize_r3(
    scene: SceneLayout, target_category: str, count: int, model: CategoryGMM
) -> tuple[int, ...]:
    """Top `count` prediction indices by target-fit density, descending."""
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}")
    if len(scene) == 0:
        raise ValidationError(f"scene {scene.scene_id!r} has no predictions")
    indices, densities = _density_candidates(scene, target_category, model)
    if len(indices) < count:
        raise ValidationError(
            f"scene {scene.scene_id!r} has {len(indices)} victim candidates "
            f"but the request needs {count}"
        )
    # Stable sort on (-density, index): density-descending, lower index first.
    order = sorted(range(len(indices)), key=lambda j: (-densities[j], indices[j]))
    return tuple(indices[j] for j in order[:count])


def build_victim_set(
    request: AttackRequest,
    scene: SceneLayout,
    models: Mapping[str, CategoryGMM],
) -> VictimSet:
    """Resolve a request into victims drawn from the scene's predictions."""
    warnings: list[str] = []
    if request.kind == "r1":
        if request.victim_index is not None:
            if not 0 <= request.victim_index < len(scene):
                raise ValidationError(
                    f"victim index {request.victim_index} out of range for "
                    f"scene {scene.scene_id!r} with {len(scene)} predictions"
                )
            indices = [request.victim_index]
        else:
            index, fell_back = select_victim_r1(scene)
            if fell_back:
                warnings.append("no prediction above the r1 confidence gate")
            indices = [index]
    else:
        model = models.get(request.target_category)
        if model is None:
            raise ValidationError(
                f"no location model for category {request.target_category!r}"
            )
        if request.kind == "r2":
            indices = [localize_r2(scene, request.target_category, model)]
        else:
            indices = list(
                localize_r3(scene, request.target_category, request.count, model)
            )
    entries = tuple(
        VictimObject(index=i, box=scene.objects[i].box, category=request.target_category)
        for i in indices
    )
    return VictimSet(entries=entries, warnings=tuple(warnings))


def random_victim_set(
    request: AttackRequest, scene: SceneLayout, seed: int
) -> VictimSet:
    """Baseline victim policy: r1 as usual, r2/r3 pick victims at random."""
    if request.kind == "r1":
        return build_victim_set(request, scene, models={})
    candidates = [
        i
        for i, obj in enumerate(scene.objects)
        if obj.category != request.target_category
    ]
    if len(candidates) < request.count:
        raise ValidationError(
            f"scene {scene.scene_id!r} has {len(candidates)} victim candidates "
            f"but the request needs {request.count}"
        )
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(candidates), size=request.count, replace=False)
    entries = tuple(
        VictimObject(
            index=candidates[int(j)],
            box=scene.objects[candidates[int(j)]].box,
            category=request.target_category,
        )
        for j in sorted(chosen)
    )
    return VictimSet(entries=entries)


def request_record(request: AttackRequest) -> dict:
    return {
        "scene_id": request.scene_id,
        "kind": request.kind,
        "target_category": request.target_category,
        "percentile": request.percentile,
        "count": request.count,
        "victim_index": request.victim_index,
    }


def write_requests(requests: Sequence[AttackRequest], path: str | Path) -> None:
    write_jsonl([request_record(r) for r in requests], path)


def load_requests(path: str | Path) -> list[AttackRequest]:
    requests = []
    for lineno, record in read_jsonl(path):
        try:
            requests.append(
                AttackRequest(
                    scene_id=str(record["scene_id"]),
                    kind=record["kind"],
                    target_category=record["target_category"],
                    percentile=record.get("percentile"),
                    count=int(record.get("count", 1)),
                    victim_index=record.get("victim_index"),
                )
            )
        except (KeyError, TypeError) as exc:
            raise FormatError(f"{path}:{lineno}: bad request record: {exc}") from exc
        except ValidationError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from exc
    return requests
