"""Geometry primitives and value types shared across the tracker."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True, slots=True)
class BBox:
    """Axis-aligned box stored as top-left corner plus size (MOT layout)."""

    left: float
    top: float
    width: float
    height: float

    def __post_init__(self):
        if not (self.width >= 0 and self.height >= 0):
            raise ValueError(f"box size must be non-negative, got {self.width}x{self.height}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.left + self.width / 2, self.top + self.height / 2)

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def bottom(self) -> float:
        return self.top + self.height

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "BBox":
        w, h = max(w, 0.0), max(h, 0.0)
        return cls(cx - w / 2, cy - h / 2, w, h)

    def as_array(self) -> np.ndarray:
        return np.array([self.left, self.top, self.width, self.height], dtype=float)


@dataclass(frozen=True, slots=True)
class Detection:
    box: BBox
    score: float
    class_id: int = 0

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"detection score must lie in [0, 1], got {self.score}")


@dataclass(frozen=True, eq=False)
class GrayFrame:
    """Grayscale image with intensities normalized to [0, 1].

    ``intensities`` is a row-major ``(height, width)`` float64 array. It is
    copied and marked read-only on construction.
    """

    intensities: np.ndarray
    frame_index: int = 0
    width: int = field(init=False)
    height: int = field(init=False)

    def __post_init__(self):
        data = np.array(self.intensities, dtype=np.float64, order="C")
        if data.ndim != 2 or data.size == 0:
            raise ValueError(f"intensities must be a non-empty 2D array, got shape {data.shape}")
        if self.frame_index < 0:
            raise ValueError("frame_index must be >= 0")
        if data.min() < 0.0 or data.max() > 1.0:
            raise ValueError("intensities must lie in [0, 1]")
        data.setflags(write=False)
        object.__setattr__(self, "intensities", data)
        object.__setattr__(self, "height", data.shape[0])
        object.__setattr__(self, "width", data.shape[1])

    @classmethod
    def from_uint8(cls, pixels: np.ndarray, frame_index: int = 0) -> "GrayFrame":
        return cls(np.asarray(pixels, dtype=np.float64) / 255.0, frame_index)

    def to_uint8(self) -> np.ndarray:
        return np.clip(np.rint(self.intensities * 255.0), 0, 255).astype(np.uint8)


@dataclass(frozen=True, slots=True)
class Keypoint:
    """Subpixel image location; x is the column, y the row."""

    x: float
    y: float


def keypoints_to_array(points: Sequence[Keypoint]) -> np.ndarray:
    return np.array([[p.x, p.y] for p in points], dtype=float).reshape(-1, 2)


def array_to_keypoints(arr: np.ndarray) -> list[Keypoint]:
    return [Keypoint(float(x), float(y)) for x, y in np.asarray(arr).reshape(-1, 2)]


@dataclass(frozen=True, eq=False)
class AffineTransform:
    """2D affine map ``p -> R @ p + d`` with a 2x2 linear block and a displacement."""

    rotation: np.ndarray
    displacement: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=float).reshape(2, 2)
        d = np.array(self.displacement, dtype=float).reshape(2)
        r.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "displacement", d)

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls(np.eye(2), np.zeros(2))

    @classmethod
    def from_matrix(cls, matrix) -> "AffineTransform":
        m = np.asarray(matrix, dtype=float).reshape(2, 3)
        return cls(m[:, :2], m[:, 2])

    @classmethod
    def translation(cls, dx: float, dy: float) -> "AffineTransform":
        return cls(np.eye(2), [dx, dy])

    @classmethod
    def rotation_about(cls, angle_deg: float, center=(0.0, 0.0), shift=(0.0, 0.0)) -> "AffineTransform":
        """Rotate by ``angle_deg`` about ``center``, then translate by ``shift``."""
        a = math.radians(angle_deg)
        r = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
        c = np.asarray(center, dtype=float)
        return cls(r, c - r @ c + np.asarray(shift, dtype=float))

    @property
    def matrix(self) -> np.ndarray:
        return np.hstack([self.rotation, self.displacement[:, None]])

    @property
    def angle_deg(self) -> float:
        """Rotation angle read off the first column of the linear block."""
        return math.degrees(math.atan2(self.rotation[1, 0], self.rotation[0, 0]))

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.rotation, np.eye(2)) and not self.displacement.any())

    def apply(self, points) -> np.ndarray:
        """Map an ``(N, 2)`` array (or a single point) of xy coordinates."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.displacement

    def inverse(self) -> "AffineTransform":
        r_inv = np.linalg.inv(self.rotation)
        return AffineTransform(r_inv, -r_inv @ self.displacement)

    def __eq__(self, other):
        if not isinstance(other, AffineTransform):
            return NotImplemented
        return bool(np.array_equal(self.rotation, other.rotation) and np.array_equal(self.displacement, other.displacement))

    def __repr__(self):
        return f"AffineTransform({self.matrix.tolist()})"


def compose(a2: AffineTransform, a1: AffineTransform) -> AffineTransform:
    """Return the transform that applies ``a1`` first and then ``a2``."""
    return AffineTransform(a2.rotation @ a1.rotation, a2.rotation @ a1.displacement + a2.displacement)


def _overlap(a0, aw, b0, bw):
    # measured from each box's own origin so identical boxes give exactly their size
    lo = np.maximum(a0, b0)
    return np.minimum(aw - (lo - a0), bw - (lo - b0))


def iou(a: BBox, b: BBox) -> float:
    iw = float(_overlap(a.left, a.width, b.left, b.width))
    ih = float(_overlap(a.top, a.height, b.top, b.height))
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return min(1.0, inter / union)


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between ``(N, 4)`` and ``(M, 4)`` arrays of ltwh boxes."""
    a = np.asarray(a, dtype=float).reshape(-1, 4)
    b = np.asarray(b, dtype=float).reshape(-1, 4)
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))
    iw = _overlap(a[:, None, 0], a[:, None, 2], b[None, :, 0], b[None, :, 2])
    ih = _overlap(a[:, None, 1], a[:, None, 3], b[None, :, 1], b[None, :, 3])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    union = (a[:, 2] * a[:, 3])[:, None] + (b[:, 2] * b[:, 3])[None, :] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where((inter > 0) & (union > 0), inter / union, 0.0)
    return np.clip(out, 0.0, 1.0)


def boxes_to_array(boxes: Sequence[BBox]) -> np.ndarray:
    return np.array([[b.left, b.top, b.width, b.height] for b in boxes], dtype=float).reshape(-1, 4)
