"""Shared fixtures and independent oracles.

The oracles here intentionally avoid the library's own code paths:
geometry is redone with explicit corner arithmetic and assignments are
solved by exhaustive permutation, so the tests check implementations
against independently computed values.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from layoutattack.boxes import BoundingBox
from layoutattack.scene import LabeledBox, SceneLayout


def box(cx, cy, w, h) -> BoundingBox:
    return BoundingBox(cx=cx, cy=cy, w=w, h=h)


def corners(b: BoundingBox):
    return (b.cx - b.w / 2, b.cy - b.h / 2, b.cx + b.w / 2, b.cy + b.h / 2)


def iou_oracle(a: BoundingBox, b: BoundingBox) -> float:
    ax0, ay0, ax1, ay1 = corners(a)
    bx0, by0, bx1, by1 = corners(b)
    iw = max(0.0, min(ax1, bx1) - max(ax0, bx0))
    ih = max(0.0, min(ay1, by1) - max(ay0, by0))
    inter = iw * ih
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    return inter / union


def giou_oracle(a: BoundingBox, b: BoundingBox) -> float:
    ax0, ay0, ax1, ay1 = corners(a)
    bx0, by0, bx1, by1 = corners(b)
    iw = max(0.0, min(ax1, bx1) - max(ax0, bx0))
    ih = max(0.0, min(ay1, by1) - max(ay0, by0))
    inter = iw * ih
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    hull = (max(ax1, bx1) - min(ax0, bx0)) * (max(ay1, by1) - min(ay0, by0))
    return inter / union - (hull - union) / hull


def brute_force_assignment(cost: np.ndarray) -> tuple[tuple[int, ...], float]:
    """Exhaustive minimum-cost injective assignment of rows to columns."""
    n, m = cost.shape
    assert n <= m, "brute force expects rows <= columns"
    best_perm = None
    best_total = np.inf
    for perm in itertools.permutations(range(m), n):
        total = float(cost[np.arange(n), list(perm)].sum())
        if total < best_total:
            best_total = total
            best_perm = perm
    return best_perm, best_total


def random_box(rng: np.random.Generator) -> BoundingBox:
    w = float(rng.uniform(0.02, 0.6))
    h = float(rng.uniform(0.02, 0.6))
    return BoundingBox(
        cx=float(rng.uniform(0.0, 1.0)),
        cy=float(rng.uniform(0.0, 1.0)),
        w=w,
        h=h,
    )


def make_prediction_scene(scene_id, boxes_with_categories, confidence=0.9):
    objects = tuple(
        LabeledBox(box=b, category=c, confidence=confidence)
        for b, c in boxes_with_categories
    )
    return SceneLayout(scene_id=scene_id, width=640, height=480, objects=objects)


def make_annotation_scene(scene_id, boxes_with_categories):
    objects = tuple(
        LabeledBox(box=b, category=c) for b, c in boxes_with_categories
    )
    return SceneLayout(scene_id=scene_id, width=640, height=480, objects=objects)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
