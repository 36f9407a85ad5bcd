"""Boxes, crop-window transforms, IoU and the SIoU regression loss."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor

DEGENERATE_EPS = 1e-9


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle in corner form."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        for name in ("x_min", "y_min", "x_max", "y_max"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.x_min <= self.x_max and self.y_min <= self.y_max):
            raise ValueError(f"invalid box corners {self.as_tuple()}")

    @classmethod
    def canonical(cls, x0: float, y0: float, x1: float, y1: float) -> "Box":
        """Build a box from two arbitrary corners, swapping inverted pairs."""
        return cls(min(x0, x1), min(y0, y1), max(x0, x1), max(y0, y1))

    @classmethod
    def from_xywh(cls, x: float, y: float, w: float, h: float) -> "Box":
        return cls(x, y, x + w, y + h)

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "Box":
        return cls.canonical(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return 0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    def to_xywh(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.width, self.height)

    def translate(self, dx: float, dy: float) -> "Box":
        return Box(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)

    def scale(self, s: float) -> "Box":
        return Box(self.x_min * s, self.y_min * s, self.x_max * s, self.y_max * s)

    def clip(self, width: float, height: float) -> "Box":
        return Box(min(max(self.x_min, 0.0), width), min(max(self.y_min, 0.0), height),
                   min(max(self.x_max, 0.0), width), min(max(self.y_max, 0.0), height))

    # text forms
    def format_corners(self) -> str:
        return ",".join(repr(float(v)) for v in self.as_tuple())

    def format_xywh(self) -> str:
        return ",".join(repr(float(v)) for v in self.to_xywh())

    @classmethod
    def parse_corners(cls, text: str) -> "Box":
        return cls(*_parse4(text))

    @classmethod
    def parse_xywh(cls, text: str) -> "Box":
        return cls.from_xywh(*_parse4(text))


def _parse4(text: str) -> list[float]:
    parts = [p for p in text.replace("\t", ",").replace(" ", ",").split(",") if p]
    if len(parts) != 4:
        raise ValueError(f"expected 4 comma-separated numbers, got {text!r}")
    return [float(p) for p in parts]


@dataclass(frozen=True)
class SearchFrame:
    """Square crop window in image pixels."""

    center: tuple[float, float]
    side: float
    scale_factor: float = 4.0

    def __post_init__(self):
        if not self.side > 0:
            raise ValueError("search frame side must be positive")

    @classmethod
    def around(cls, box: Box, scale_factor: float, min_side: float = 1.0) -> "SearchFrame":
        side = max(scale_factor * max(box.width, box.height), min_side)
        return cls(box.center, side, scale_factor)

    @property
    def origin(self) -> tuple[float, float]:
        return self.center[0] - 0.5 * self.side, self.center[1] - 0.5 * self.side


def to_search_frame(b: Box, f: SearchFrame) -> Box:
    ox, oy = f.origin
    s = f.side
    return Box((b.x_min - ox) / s, (b.y_min - oy) / s, (b.x_max - ox) / s, (b.y_max - oy) / s)


def from_search_frame(b: Box, f: SearchFrame) -> Box:
    ox, oy = f.origin
    s = f.side
    return Box(b.x_min * s + ox, b.y_min * s + oy, b.x_max * s + ox, b.y_max * s + oy)


def iou(a: Box, b: Box) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    inter = max(iw, 0.0) * max(ih, 0.0)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def center_distance(a: Box, b: Box) -> float:
    (ax, ay), (bx, by) = a.center, b.center
    return math.hypot(ax - bx, ay - by)


def normalized_center_distance(pred: Box, gt: Box) -> float:
    """Center distance divided by the ground-truth diagonal."""
    return center_distance(pred, gt) / max(gt.diagonal, DEGENERATE_EPS)


def _as_box_tensor(b) -> Tensor:
    if isinstance(b, Tensor):
        return b
    if isinstance(b, Box):
        return Tensor(b.as_tuple())
    return Tensor(np.asarray(b, dtype=np.float64))


def siou_loss(pred, gt, theta: float = 4.0):
    """SIoU box loss: 1 - IoU + (distance cost + shape cost) / 2.

    ``pred`` and ``gt`` are Boxes or length-4 corner Tensors. With Tensor
    input the result is a differentiable scalar Tensor; with Boxes a float.
    The angle cost uses sin(2a) = 2|dx||dy| / (dx^2 + dy^2), which equals
    1 - 2 sin^2(arcsin(|dy|/sigma) - pi/4) for either choice of angle.
    """
    scalar = not isinstance(pred, Tensor) and not isinstance(gt, Tensor)
    gt_box = gt if isinstance(gt, Box) else None
    if gt_box is not None and gt_box.area <= 0.0:
        raise ValueError("siou_loss needs a ground-truth box with positive area")
    p, g = _as_box_tensor(pred), _as_box_tensor(gt).detach()
    if gt_box is None and (g.data[2] - g.data[0]) * (g.data[3] - g.data[1]) <= 0.0:
        raise ValueError("siou_loss needs a ground-truth box with positive area")

    px0, py0, px1, py1 = p[0], p[1], p[2], p[3]
    gx0, gy0, gx1, gy1 = (float(v) for v in g.data)
    pw, ph = px1 - px0, py1 - py0
    gw, gh = gx1 - gx0, gy1 - gy0

    iw = T.clamp_min(T.minimum(px1, gx1) - T.maximum(px0, gx0), 0.0)
    ih = T.clamp_min(T.minimum(py1, gy1) - T.maximum(py0, gy0), 0.0)
    inter = iw * ih
    union = T.maximum(pw * ph + gw * gh - inter, DEGENERATE_EPS)
    iou_t = inter / union

    # enclosing box
    cw = T.maximum(T.maximum(px1, gx1) - T.minimum(px0, gx0), DEGENERATE_EPS)
    ch = T.maximum(T.maximum(py1, gy1) - T.minimum(py0, gy0), DEGENERATE_EPS)

    dx = (gx0 + gx1) * 0.5 - (px0 + px1) * 0.5
    dy = (gy0 + gy1) * 0.5 - (py0 + py1) * 0.5
    sigma2 = T.maximum(dx * dx + dy * dy, DEGENERATE_EPS * DEGENERATE_EPS)
    angle = 2.0 * T.absolute(dx) * T.absolute(dy) / sigma2

    gamma = 2.0 - angle
    rho_x = (dx / cw) ** 2
    rho_y = (dy / ch) ** 2
    distance = 2.0 - T.exp(-(gamma * rho_x)) - T.exp(-(gamma * rho_y))

    omega_w = T.absolute(pw - gw) / T.maximum(pw, gw)
    omega_h = T.absolute(ph - gh) / T.maximum(ph, gh)
    shape = (1.0 - T.exp(-omega_w)) ** theta + (1.0 - T.exp(-omega_h)) ** theta

    loss = 1.0 - iou_t + 0.5 * (distance + shape)
    return loss.item() if scalar else loss


def box_tensor_iou(pred: Tensor, gt: Box) -> float:
    """IoU of a corner Tensor against a Box, as a plain float."""
    d = pred.data
    return iou(Box.canonical(*d), gt)
