"""Full-scene attack plan generation.

The layout generator relabels every non-victim object after the corpus
scene whose layout best matches the victim scene: victims are scored by
IoU alignment against same-category corpus boxes (s1), non-victims by the
mean cost of an optimal one-to-one box assignment (s2), and candidates
compete on s1 - lambda * s2 after passing a matched-fraction gate.

Three baselines (same / random / identity) produce unscored plans.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .boxes import BoundingBox, boxes_to_array, giou_matrix, iou_matrix, l1_matrix
from .corpus import Corpus
from .errors import (
    AllCandidatesRejectedError,
    FormatError,
    InfeasibleMatchError,
    NoFeasibleLayoutError,
    ValidationError,
)
from .scene import LabelSpace, SceneLayout
from .util import read_jsonl, write_jsonl
from .victims import VictimObject, VictimSet

log = logging.getLogger(__name__)

GENERATOR_NAMES = ("glow", "same", "random", "identity")


@dataclass(frozen=True)
class PlanConfig:
    """Knobs of the layout generator."""

    lambda_weight: float = 1.0
    match_fraction_threshold: float = 0.95
    matched_giou_floor: float = 0.0
    candidate_cap: int = 20000

    def __post_init__(self):
        if self.lambda_weight < 0:
            raise ValidationError(f"lambda must be >= 0, got {self.lambda_weight}")
        if not (0.0 < self.match_fraction_threshold <= 1.0):
            raise ValidationError(
                f"match fraction threshold must be in (0,1], got "
                f"{self.match_fraction_threshold}"
            )
        if self.candidate_cap < 1:
            raise ValidationError("candidate cap must be >= 1")

    def to_dict(self) -> dict:
        return {
            "lambda_weight": self.lambda_weight,
            "match_fraction_threshold": self.match_fraction_threshold,
            "matched_giou_floor": self.matched_giou_floor,
            "candidate_cap": self.candidate_cap,
        }


@dataclass(frozen=True)
class PlanAssignment:
    """Target label for one scene object."""

    index: int
    original_category: str
    target_category: str
    box: BoundingBox


@dataclass(frozen=True)
class AttackPlan:
    """Full-scene target-label assignment handed to an attacker."""

    scene_id: str
    generator: str
    victims: VictimSet
    assignments: tuple[PlanAssignment, ...]
    source_scene_id: Optional[str] = None
    s1: Optional[float] = None
    s2: Optional[float] = None
    score: Optional[float] = None
    matched_fraction: Optional[float] = None
    config: Optional[PlanConfig] = None
    request_kind: Optional[str] = None
    percentile: Optional[int] = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        by_index = {a.index: a for a in self.assignments}
        if len(by_index) != len(self.assignments):
            raise ValidationError("duplicate object index in plan assignments")
        for victim in self.victims.entries:
            assigned = by_index.get(victim.index)
            if assigned is None or assigned.target_category != victim.category:
                raise ValidationError(
                    f"victim object {victim.index} must be assigned its target "
                    f"category {victim.category!r}"
                )

    def target_count(self, category: str) -> int:
        return sum(1 for a in self.assignments if a.target_category == category)


@dataclass(frozen=True)
class CandidateScore:
    """Audit record for one corpus candidate."""

    scene_id: str
    s1: float
    s2: Optional[float]
    score: Optional[float]
    matched_fraction: Optional[float]
    feasible: bool
    passed_gate: bool


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[tuple[int, int], ...]  # (scene object index, corpus object index)
    s2: float
    matched_fraction: float
    total_cost: float


def pair_cost_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """L1 plus (1 - generalized IoU) between every box pair."""
    return l1_matrix(a, b) + 1.0 - giou_matrix(a, b)


def min_cost_assignment(cost: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Optimal rectangular assignment; returns (row indices, column indices)."""
    return linear_sum_assignment(cost)


def candidate_pool(
    corpus: Corpus,
    target_categories: Sequence[str],
    cap: int = PlanConfig.candidate_cap,
) -> list[SceneLayout]:
    """Corpus scenes holding enough instances of every target category.

    A category requested k times (r3) requires at least k instances.
    When more than `cap` scenes qualify, the densest in target-category
    instances are kept.
    """
    required = Counter(target_categories)
    if not required:
        raise ValidationError("no target categories requested")
    pool = [
        scene
        for scene in corpus.scenes
        if all(scene.category_count(c) >= k for c, k in required.items())
    ]
    if not pool:
        raise NoFeasibleLayoutError(
            f"no feasible corpus layout: no scene contains "
            f"{dict(required)} target instances"
        )
    if len(pool) > cap:
        pool.sort(
            key=lambda s: (
                -sum(s.category_count(c) for c in required),
                s.scene_id,
            )
        )
        pool = pool[:cap]
    return pool


def victim_alignment(victims: VictimSet, corpus_scene: SceneLayout) -> float:
    """Mean best IoU of each victim against same-category corpus boxes.

    Multiple victims of one category claim distinct corpus boxes; the
    claims are chosen to maximize the summed IoU. Victims with no
    same-category box contribute zero.
    """
    if len(victims) == 0:
        raise ValidationError("empty victim set")
    total = 0.0
    by_category: dict[str, list[VictimObject]] = {}
    for victim in victims.entries:
        by_category.setdefault(victim.category, []).append(victim)
    for category, group in by_category.items():
        candidates = [o.box for o in corpus_scene.objects if o.category == category]
        if not candidates:
            continue
        ious = iou_matrix(
            boxes_to_array([v.box for v in group]), boxes_to_array(candidates)
        )
        if len(group) == 1:
            total += float(ious.max())
        else:
            rows, cols = linear_sum_assignment(-ious)
            total += float(ious[rows, cols].sum())
    return total / len(victims)


def match_layout(
    scene: SceneLayout,
    victims: VictimSet,
    corpus_scene: SceneLayout,
    giou_floor: float = 0.0,
) -> MatchResult:
    """Assign every non-victim object to a distinct corpus object.

    Minimizes the summed pair cost. s2 is the mean assigned cost (zero
    when there is nothing to match); the matched fraction counts assigned
    pairs whose GIoU exceeds the floor. Raises InfeasibleMatchError when
    the corpus scene is too small.
    """
    victim_indices = set(victims.indices)
    non_victims = [i for i in range(len(scene)) if i not in victim_indices]
    n = len(non_victims)
    if n == 0:
        return MatchResult(pairs=(), s2=0.0, matched_fraction=1.0, total_cost=0.0)
    m = len(corpus_scene)
    if m < n:
        raise InfeasibleMatchError(needed=n, available=m)

    scene_arr = boxes_to_array([scene.objects[i].box for i in non_victims])
    corpus_arr = boxes_to_array([o.box for o in corpus_scene.objects])
    gious = giou_matrix(scene_arr, corpus_arr)
    cost = l1_matrix(scene_arr, corpus_arr) + 1.0 - gious
    rows, cols = linear_sum_assignment(cost)

    assigned_cost = cost[rows, cols]
    total = float(assigned_cost.sum())
    matched = float(np.count_nonzero(gious[rows, cols] > giou_floor)) / n
    pairs = tuple(
        (non_victims[int(r)], int(c)) for r, c in zip(rows, cols)
    )
    return MatchResult(
        pairs=pairs, s2=total / n, matched_fraction=matched, total_cost=total
    )


def composite_score(s1: float, s2: float, lambda_weight: float) -> float:
    return s1 - lambda_weight * s2


def generate_plan(
    scene: SceneLayout,
    victims: VictimSet,
    corpus: Corpus,
    config: PlanConfig = PlanConfig(),
) -> tuple[AttackPlan, list[CandidateScore]]:
    """Search the corpus for the best layout match and derive the plan.

    Candidates below the matched-fraction gate are filtered before the
    score argmax; ties break toward the lower corpus scene id. Returns the
    winning plan plus the scored candidate list for audit.
    """
    pool = candidate_pool(corpus, list(victims.categories), cap=config.candidate_cap)
    scored: list[CandidateScore] = []
    best_key: Optional[tuple] = None
    best: Optional[tuple[SceneLayout, MatchResult, CandidateScore]] = None
    best_rejected: Optional[CandidateScore] = None

    for candidate in pool:
        s1 = victim_alignment(victims, candidate)
        try:
            match = match_layout(scene, victims, candidate, config.matched_giou_floor)
        except InfeasibleMatchError:
            scored.append(
                CandidateScore(
                    scene_id=candidate.scene_id,
                    s1=s1,
                    s2=None,
                    score=None,
                    matched_fraction=None,
                    feasible=False,
                    passed_gate=False,
                )
            )
            continue
        score = composite_score(s1, match.s2, config.lambda_weight)
        passed = match.matched_fraction > config.match_fraction_threshold
        record = CandidateScore(
            scene_id=candidate.scene_id,
            s1=s1,
            s2=match.s2,
            score=score,
            matched_fraction=match.matched_fraction,
            feasible=True,
            passed_gate=passed,
        )
        scored.append(record)
        if passed:
            key = (-score, candidate.scene_id)
            if best_key is None or key < best_key:
                best_key = key
                best = (candidate, match, record)
        elif best_rejected is None or (record.score or 0.0) > (best_rejected.score or 0.0):
            best_rejected = record

    scored.sort(key=lambda c: (-(c.score if c.score is not None else -np.inf), c.scene_id))
    if best is None:
        raise AllCandidatesRejectedError(
            f"all {len(pool)} candidates failed the matched-fraction gate "
            f"for scene {scene.scene_id!r}"
            + (
                f"; best rejected: corpus scene {best_rejected.scene_id!r} with "
                f"score {best_rejected.score:.4f} at fraction "
                f"{best_rejected.matched_fraction:.3f}"
                if best_rejected is not None
                else ""
            ),
            best_rejected=best_rejected,
        )

    candidate, match, record = best
    mapping = {scene_idx: corpus_idx for scene_idx, corpus_idx in match.pairs}
    victim_targets = {v.index: v.category for v in victims.entries}
    assignments = []
    for i, obj in enumerate(scene.objects):
        if i in victim_targets:
            target = victim_targets[i]
        else:
            target = candidate.objects[mapping[i]].category
        assignments.append(
            PlanAssignment(
                index=i,
                original_category=obj.category,
                target_category=target,
                box=obj.box,
            )
        )
    plan = AttackPlan(
        scene_id=scene.scene_id,
        generator="glow",
        victims=victims,
        assignments=tuple(assignments),
        source_scene_id=candidate.scene_id,
        s1=record.s1,
        s2=record.s2,
        score=record.score,
        matched_fraction=record.matched_fraction,
        config=config,
        warnings=victims.warnings,
    )
    return plan, scored


def _baseline_plan(
    scene: SceneLayout, victims: VictimSet, generator: str, mapper
) -> AttackPlan:
    victim_targets = {v.index: v.category for v in victims.entries}
    assignments = tuple(
        PlanAssignment(
            index=i,
            original_category=obj.category,
            target_category=victim_targets.get(i, mapper(obj.category)),
            box=obj.box,
        )
        for i, obj in enumerate(scene.objects)
    )
    return AttackPlan(
        scene_id=scene.scene_id,
        generator=generator,
        victims=victims,
        assignments=assignments,
        warnings=victims.warnings,
    )


def plan_same(scene: SceneLayout, victims: VictimSet, target_category: str) -> AttackPlan:
    """Baseline: every object gets the target label."""
    return _baseline_plan(scene, victims, "same", lambda _: target_category)


def plan_random(
    scene: SceneLayout, victims: VictimSet, label_space: LabelSpace, seed: int
) -> AttackPlan:
    """Baseline: non-victim labels pass through a seeded label permutation."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(label_space))
    mapping = {
        category: label_space.name(int(perm[i]))
        for i, category in enumerate(label_space)
    }
    return _baseline_plan(scene, victims, "random", mapping.__getitem__)


def plan_identity(scene: SceneLayout, victims: VictimSet) -> AttackPlan:
    """Baseline: non-victims keep their current labels."""
    return _baseline_plan(scene, victims, "identity", lambda c: c)


def plan_record(plan: AttackPlan) -> dict:
    return {
        "scene_id": plan.scene_id,
        "generator": plan.generator,
        "request_kind": plan.request_kind,
        "percentile": plan.percentile,
        "victims": [
            {
                "index": v.index,
                "target_category": v.category,
                "box": {"cx": v.box.cx, "cy": v.box.cy, "w": v.box.w, "h": v.box.h},
            }
            for v in plan.victims.entries
        ],
        "assignments": [
            {
                "index": a.index,
                "original_category": a.original_category,
                "target_category": a.target_category,
                "box": {"cx": a.box.cx, "cy": a.box.cy, "w": a.box.w, "h": a.box.h},
            }
            for a in plan.assignments
        ],
        "source_scene_id": plan.source_scene_id,
        "s1": plan.s1,
        "s2": plan.s2,
        "score": plan.score,
        "matched_fraction": plan.matched_fraction,
        "config": plan.config.to_dict() if plan.config else None,
        "warnings": list(plan.warnings),
    }


def _plan_from_record(record: dict) -> AttackPlan:
    victims = VictimSet(
        entries=tuple(
            VictimObject(
                index=int(v["index"]),
                box=BoundingBox(**v["box"]),
                category=v["target_category"],
            )
            for v in record["victims"]
        ),
        warnings=tuple(record.get("warnings", ())),
    )
    assignments = tuple(
        PlanAssignment(
            index=int(a["index"]),
            original_category=a["original_category"],
            target_category=a["target_category"],
            box=BoundingBox(**a["box"]),
        )
        for a in record["assignments"]
    )
    config = record.get("config")
    return AttackPlan(
        scene_id=str(record["scene_id"]),
        generator=record["generator"],
        victims=victims,
        assignments=assignments,
        source_scene_id=record.get("source_scene_id"),
        s1=record.get("s1"),
        s2=record.get("s2"),
        score=record.get("score"),
        matched_fraction=record.get("matched_fraction"),
        config=PlanConfig(**config) if config else None,
        request_kind=record.get("request_kind"),
        percentile=record.get("percentile"),
        warnings=tuple(record.get("warnings", ())),
    )


def write_plans(plans: Sequence[AttackPlan], path: str | Path) -> None:
    write_jsonl([plan_record(p) for p in plans], path)


def load_plans(path: str | Path) -> list[AttackPlan]:
    plans = []
    for lineno, record in read_jsonl(path):
        try:
            plans.append(_plan_from_record(record))
        except (KeyError, TypeError) as exc:
            raise FormatError(f"{path}:{lineno}: bad plan record: {exc}") from exc
    return plans
