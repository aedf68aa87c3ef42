"""Seeded simulated attacker.

Stands in for a real perturbation attacker so that planning and metrics
can be exercised end to end: each object's label flips to its plan target
with a configured probability, boxes optionally receive Gaussian jitter,
and the output is an ordinary prediction scene.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boxes import BoundingBox
from .errors import ValidationError
from .planning import AttackPlan
from .scene import LabeledBox, SceneLayout

_MIN_SIZE = 1e-6


@dataclass(frozen=True)
class OracleConfig:
    flip_probability: float = 1.0
    jitter_scale: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.flip_probability <= 1.0):
            raise ValidationError(
                f"flip probability outside [0,1]: {self.flip_probability}"
            )
        if self.jitter_scale < 0.0:
            raise ValidationError(f"jitter scale must be >= 0: {self.jitter_scale}")


def execute_plan(
    scene: SceneLayout, plan: AttackPlan, config: OracleConfig
) -> SceneLayout:
    """Produce the post-attack prediction scene.

    Flip decisions are independent per object; with flip probability 1 and
    zero jitter the output labels equal the plan exactly on the original
    boxes. Never drops or invents detections; confidences come out as 1.0.
    """
    targets = {a.index: a.target_category for a in plan.assignments}
    if sorted(targets) != list(range(len(scene))):
        raise ValidationError(
            f"plan for scene {plan.scene_id!r} covers objects "
            f"{sorted(targets)} but the scene has {len(scene)}"
        )
    rng = np.random.default_rng(config.seed)
    objects = []
    for i, obj in enumerate(scene.objects):
        flip = rng.random() < config.flip_probability
        category = targets[i] if flip else obj.category
        box = obj.box
        if config.jitter_scale > 0.0:
            noise = rng.normal(0.0, config.jitter_scale, size=4)
            box = BoundingBox(
                cx=float(np.clip(box.cx + noise[0], 0.0, 1.0)),
                cy=float(np.clip(box.cy + noise[1], 0.0, 1.0)),
                w=float(np.clip(box.w + noise[2], _MIN_SIZE, 1.0)),
                h=float(np.clip(box.h + noise[3], _MIN_SIZE, 1.0)),
            )
        objects.append(LabeledBox(box=box, category=category, confidence=1.0))
    return SceneLayout(
        scene_id=scene.scene_id,
        width=scene.width,
        height=scene.height,
        objects=tuple(objects),
    )
