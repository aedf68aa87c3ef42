"""Axis-aligned box geometry in normalized image coordinates.

Boxes are stored center-based as (cx, cy, w, h), all expressed as fractions
of the image dimensions. Corner form is computed on demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class BoundingBox:
    """Normalized center-format box. Zero-area boxes are rejected."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        values = (self.cx, self.cy, self.w, self.h)
        if not all(math.isfinite(v) for v in values):
            raise ValidationError(f"non-finite box coordinates: {values}")
        if not (0.0 <= self.cx <= 1.0 and 0.0 <= self.cy <= 1.0):
            raise ValidationError(f"box center outside [0,1]: ({self.cx}, {self.cy})")
        if not (0.0 < self.w <= 1.0 and 0.0 < self.h <= 1.0):
            raise ValidationError(f"box size outside (0,1]: ({self.w}, {self.h})")

    @property
    def area(self) -> float:
        return self.w * self.h

    def corners(self) -> tuple[float, float, float, float]:
        """(x0, y0, x1, y1); may extend past [0,1] for jittered boxes."""
        return (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.w, self.h], dtype=float)

    def to_pixel_xywh(
        self, image_width: float, image_height: float
    ) -> tuple[float, float, float, float]:
        """Top-left (x, y, w, h) in pixels for the given image size."""
        w = self.w * image_width
        h = self.h * image_height
        return (self.cx * image_width - w / 2.0, self.cy * image_height - h / 2.0, w, h)


def from_pixel_xywh(
    x: float, y: float, w: float, h: float, image_width: float, image_height: float
) -> BoundingBox:
    """Build a normalized box from a top-left pixel (x, y, w, h) record."""
    if image_width <= 0 or image_height <= 0:
        raise ValidationError(f"invalid image size {image_width}x{image_height}")
    return BoundingBox(
        cx=(x + w / 2.0) / image_width,
        cy=(y + h / 2.0) / image_height,
        w=w / image_width,
        h=h / image_height,
    )


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union, in [0, 1].

    All areas derive from corner differences, so coinciding boxes score
    exactly 1.0.
    """
    ax0, ay0, ax1, ay1 = a.corners()
    bx0, by0, bx1, by1 = b.corners()
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    return inter / union


def giou(a: BoundingBox, b: BoundingBox) -> float:
    """Generalized IoU: iou minus the hull area not covered by the union.

    Equals iou for coinciding boxes and approaches -1 for far-apart boxes
    of vanishing relative size. Range (-1, 1].
    """
    ax0, ay0, ax1, ay1 = a.corners()
    bx0, by0, bx1, by1 = b.corners()
    iw = max(0.0, min(ax1, bx1) - max(ax0, bx0))
    ih = max(0.0, min(ay1, by1) - max(ay0, by0))
    inter = iw * ih
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    hull = (max(ax1, bx1) - min(ax0, bx0)) * (max(ay1, by1) - min(ay0, by0))
    return inter / union - (hull - union) / hull


def l1_box(a: BoundingBox, b: BoundingBox) -> float:
    """Sum of absolute differences over (cx, cy, w, h)."""
    return (
        abs(a.cx - b.cx) + abs(a.cy - b.cy) + abs(a.w - b.w) + abs(a.h - b.h)
    )


def boxes_to_array(boxes) -> np.ndarray:
    """Stack boxes into an (n, 4) cx/cy/w/h array; (0, 4) when empty."""
    if not boxes:
        return np.zeros((0, 4), dtype=float)
    return np.array([[b.cx, b.cy, b.w, b.h] for b in boxes], dtype=float)


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between (n, 4) and (m, 4) center-format arrays."""
    return _iou_giou_matrices(a, b)[0]


def giou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise generalized IoU between center-format arrays."""
    return _iou_giou_matrices(a, b)[1]


def l1_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise L1 distance over (cx, cy, w, h)."""
    return np.abs(a[:, None, :] - b[None, :, :]).sum(axis=2)


def _iou_giou_matrices(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ac = _corners(a)[:, None, :]
    bc = _corners(b)[None, :, :]
    iw = np.minimum(ac[..., 2], bc[..., 2]) - np.maximum(ac[..., 0], bc[..., 0])
    ih = np.minimum(ac[..., 3], bc[..., 3]) - np.maximum(ac[..., 1], bc[..., 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    # Corner-derived areas keep coinciding boxes at exactly iou 1.
    area_a = (ac[..., 2] - ac[..., 0]) * (ac[..., 3] - ac[..., 1])
    area_b = (bc[..., 2] - bc[..., 0]) * (bc[..., 3] - bc[..., 1])
    union = area_a + area_b - inter
    hull_w = np.maximum(ac[..., 2], bc[..., 2]) - np.minimum(ac[..., 0], bc[..., 0])
    hull_h = np.maximum(ac[..., 3], bc[..., 3]) - np.minimum(ac[..., 1], bc[..., 1])
    hull = hull_w * hull_h
    iou_values = inter / union
    return iou_values, iou_values - (hull - union) / hull


def _corners(a: np.ndarray) -> np.ndarray:
    half_w = a[:, 2] / 2.0
    half_h = a[:, 3] / 2.0
    return np.stack(
        [a[:, 0] - half_w, a[:, 1] - half_h, a[:, 0] + half_w, a[:, 1] + half_h],
        axis=1,
    )
