"""Outcome metrics over post-attack prediction sets.

Five per-scene checks and the composite columns reported per request kind:

  T  mean placement density of the victim boxes under the target's mixture
  F  victim predicted as target with enough overlap, plus co-occurrence check
  R  best layout recall against any corpus scene
  E  target label exists among predictions
  C  target label count matches the request exactly

Boundary rules: T passes at its floor inclusively, R strictly above its
floor. Both are overridable and every report echoes the rules it used.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .boxes import boxes_to_array, iou, iou_matrix
from .corpus import Corpus, CooccurrenceMatrix, build_cooccurrence
from .errors import ValidationError
from .mixture import CategoryGMM, weighted_density
from .planning import AttackPlan, min_cost_assignment, pair_cost_matrix
from .scene import SceneLayout
from .victims import AttackRequest, VictimSet

log = logging.getLogger(__name__)

COLUMNS_BY_KIND = {
    "r1": ("F", "F+R"),
    "r2": ("T", "F+T", "E+R"),
    "r3": ("T", "F+T+C", "C+R"),
}


@dataclass(frozen=True)
class MetricConfig:
    density_floor: float = 0.02
    density_inclusive: bool = True
    recall_floor: float = 0.5
    recall_strict: bool = True
    fool_iou_floor: float = 0.3
    recall_iou_threshold: float = 0.5

    def to_dict(self) -> dict:
        return {
            "density_floor": self.density_floor,
            "density_inclusive": self.density_inclusive,
            "recall_floor": self.recall_floor,
            "recall_strict": self.recall_strict,
            "fool_iou_floor": self.fool_iou_floor,
            "recall_iou_threshold": self.recall_iou_threshold,
        }


def metric_T(
    victims: VictimSet,
    models: Mapping[str, CategoryGMM],
    density_floor: float = 0.02,
    inclusive: bool = True,
) -> tuple[float, bool]:
    """Mean victim-box density under each victim's target-category mixture."""
    if len(victims) == 0:
        raise ValidationError("empty victim set")
    total = 0.0
    for victim in victims.entries:
        model = models.get(victim.category)
        if model is None:
            raise ValidationError(f"no location model for category {victim.category!r}")
        total += weighted_density(model, victim.box.as_array())
    mean = total / len(victims)
    passed = mean >= density_floor if inclusive else mean > density_floor
    return mean, passed


def metric_F(
    predictions: SceneLayout,
    victims: VictimSet,
    cooccurrence: CooccurrenceMatrix,
    reference_boxes=None,
    iou_floor: float = 0.3,
) -> bool:
    """Victims fooled and the scene semantically plausible.

    Every victim needs a predicted box of its target category overlapping
    its reference box (the planned victim box unless overridden) strictly
    above the floor, and every pair of distinct predicted categories must
    have co-occurred in the corpus.
    """
    if reference_boxes is None:
        reference_boxes = [v.box for v in victims.entries]
    if len(reference_boxes) != len(victims):
        raise ValidationError("one reference box per victim required")
    for victim, reference in zip(victims.entries, reference_boxes):
        hit = any(
            obj.category == victim.category and iou(obj.box, reference) > iou_floor
            for obj in predictions.objects
        )
        if not hit:
            return False
    present = sorted(predictions.categories())
    for i, a in enumerate(present):
        for b in present[i + 1 :]:
            if not cooccurrence.cooccurs(a, b):
                return False
    return True


def metric_R(
    predictions: SceneLayout,
    corpus: Corpus,
    recall_floor: float = 0.5,
    strict: bool = True,
    iou_threshold: float = 0.5,
) -> tuple[float, bool]:
    """Maximum layout recall of the predictions against any corpus scene.

    Predicted objects are assigned to corpus boxes by the same
    minimum-cost matcher used for planning; an object counts as recalled
    when its assigned box shares its category with IoU at or above the
    threshold.
    """
    if len(predictions) == 0:
        return 0.0, False
    pred_arr = boxes_to_array([o.box for o in predictions.objects])
    pred_categories = [o.category for o in predictions.objects]
    best = 0.0
    for scene in corpus.scenes:
        if len(scene) == 0:
            continue
        corpus_arr = boxes_to_array([o.box for o in scene.objects])
        cost = pair_cost_matrix(pred_arr, corpus_arr)
        rows, cols = min_cost_assignment(cost)
        ious = iou_matrix(pred_arr, corpus_arr)
        matched = sum(
            1
            for r, c in zip(rows, cols)
            if pred_categories[r] == scene.objects[c].category
            and ious[r, c] >= iou_threshold
        )
        best = max(best, matched / len(predictions))
    passed = best > recall_floor if strict else best >= recall_floor
    return best, passed


def metric_E(predictions: SceneLayout, target_category: str) -> bool:
    """Target label exists among the predictions."""
    return any(obj.category == target_category for obj in predictions.objects)


def metric_C(predictions: SceneLayout, target_category: str, count: int) -> bool:
    """Target label appears the exact requested number of times."""
    return predictions.category_count(target_category) == count


@dataclass
class EvaluationReport:
    request_kind: str
    columns: tuple[str, ...]
    per_scene: list[dict] = field(default_factory=list)
    rates: dict = field(default_factory=dict)
    evaluated_count: int = 0
    unevaluated: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "request_kind": self.request_kind,
            "columns": list(self.columns),
            "per_scene": self.per_scene,
            "rates": self.rates,
            "evaluated_count": self.evaluated_count,
            "unevaluated_count": len(self.unevaluated),
            "unevaluated": self.unevaluated,
            "config": self.config,
        }

    def render_table(self) -> str:
        header = " | ".join(f"{c:>8}" for c in self.columns)
        row = " | ".join(
            f"{self.rates.get(c, float('nan')):>8.3f}" for c in self.columns
        )
        lines = [
            f"request kind: {self.request_kind}   scenes evaluated: "
            f"{self.evaluated_count}   unevaluated: {len(self.unevaluated)}",
            header,
            "-" * len(header),
            row,
        ]
        return "\n".join(lines)


def _scene_outcome(
    request: AttackRequest,
    plan: AttackPlan,
    predictions: SceneLayout,
    corpus: Corpus,
    models: Mapping[str, CategoryGMM],
    cooccurrence: CooccurrenceMatrix,
    config: MetricConfig,
) -> dict:
    outcome: dict = {"scene_id": request.scene_id}
    fooled = metric_F(
        predictions,
        plan.victims,
        cooccurrence,
        iou_floor=config.fool_iou_floor,
    )
    recall, recall_pass = metric_R(
        predictions,
        corpus,
        recall_floor=config.recall_floor,
        strict=config.recall_strict,
        iou_threshold=config.recall_iou_threshold,
    )
    outcome["F"] = {"value": None, "pass": fooled}
    outcome["R"] = {"value": recall, "pass": recall_pass}

    if request.kind == "r1":
        outcome["F+R"] = fooled and recall_pass
        return outcome

    density, density_pass = metric_T(
        plan.victims,
        models,
        density_floor=config.density_floor,
        inclusive=config.density_inclusive,
    )
    exists = metric_E(predictions, request.target_category)
    outcome["T"] = {"value": density, "pass": density_pass}
    outcome["E"] = {"value": None, "pass": exists}

    if request.kind == "r2":
        outcome["F+T"] = fooled and density_pass
        outcome["E+R"] = exists and recall_pass
        return outcome

    counted = metric_C(predictions, request.target_category, request.count)
    outcome["C"] = {"value": None, "pass": counted}
    outcome["F+T+C"] = fooled and density_pass and counted
    outcome["C+R"] = counted and recall_pass
    return outcome


def evaluate(
    requests: Sequence[AttackRequest],
    plans: Sequence[AttackPlan],
    predictions: Mapping[str, SceneLayout],
    corpus: Corpus,
    models: Mapping[str, CategoryGMM],
    cooccurrence: Optional[CooccurrenceMatrix] = None,
    config: MetricConfig = MetricConfig(),
) -> EvaluationReport:
    """Score every request and aggregate pass rates.

    Requests pair with plans on (scene id, kind, percentile). Scenes with
    no plan, no prediction record, or a per-scene metric failure are
    reported as unevaluated and excluded from the rates.
    """
    kinds = {r.kind for r in requests}
    if len(kinds) > 1:
        raise ValidationError(f"mixed request kinds in one evaluation: {sorted(kinds)}")
    kind = kinds.pop() if kinds else "r2"
    if cooccurrence is None:
        cooccurrence = build_cooccurrence(corpus)

    plan_index = {(p.scene_id, p.request_kind, p.percentile): p for p in plans}
    report = EvaluationReport(
        request_kind=kind,
        columns=COLUMNS_BY_KIND[kind],
        config=config.to_dict(),
    )
    tallies: dict[str, int] = {}
    for request in sorted(requests, key=lambda r: (r.scene_id, r.percentile or 0)):
        plan = plan_index.get((request.scene_id, request.kind, request.percentile))
        if plan is None:
            report.unevaluated.append(
                {"scene_id": request.scene_id, "reason": "no plan"}
            )
            continue
        scene_predictions = predictions.get(request.scene_id)
        if scene_predictions is None:
            report.unevaluated.append(
                {"scene_id": request.scene_id, "reason": "no prediction dump"}
            )
            continue
        try:
            outcome = _scene_outcome(
                request, plan, scene_predictions, corpus, models, cooccurrence, config
            )
        except ValidationError as exc:
            log.warning("scene %s unevaluated: %s", request.scene_id, exc)
            report.unevaluated.append(
                {"scene_id": request.scene_id, "reason": str(exc)}
            )
            continue
        report.per_scene.append(outcome)
        report.evaluated_count += 1
        for key, value in outcome.items():
            if key == "scene_id":
                continue
            passed = value["pass"] if isinstance(value, dict) else value
            tallies[key] = tallies.get(key, 0) + (1 if passed else 0)

    if report.evaluated_count:
        report.rates = {
            key: count / report.evaluated_count for key, count in sorted(tallies.items())
        }
    return report
