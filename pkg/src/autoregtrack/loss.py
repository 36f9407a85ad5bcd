"""Per-frame training objective: coordinate CE, SIoU, reconstruction MSE, IoU L1."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .geometry import Box, siou_loss
from .tensor import Tensor
from .tokenizer import BoxFormat, TokenizedBox, VocabularyConfig

VISIBILITY_THRESHOLD = 0.5


@dataclass
class LossWeights:
    lambda_siou: float = 2.0
    lambda_mse: float = 1.0
    lambda_l1: float = 1.0

    def __post_init__(self):
        if min(self.lambda_siou, self.lambda_mse, self.lambda_l1) < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass
class FrameLossReport:
    ce: float
    siou: float
    mse: float
    l1: float
    total: float
    predicted_iou: float = 0.0
    actual_iou: float = 0.0
    visible: bool = True


def is_visible(ratio: float) -> bool:
    return ratio >= VISIBILITY_THRESHOLD


def coordinate_ce(logits: Tensor, gt: TokenizedBox) -> Tensor:
    """Mean over the four slots of -log softmax(logits)[gt]."""
    lp = T.log_softmax(logits, axis=1)
    picked = lp[np.arange(4), np.asarray(gt.tokens, dtype=np.intp)]
    return -T.mean(picked)


def expected_box(logits: Tensor, vocab: VocabularyConfig) -> Tensor:
    """Soft-argmax corners [x0, y0, x1, y1] in search-frame units (differentiable)."""
    probs = T.softmax(logits, axis=1)
    values = np.stack([vocab.slot_values(i) for i in range(4)])
    v = T.tsum(probs * values, axis=1)
    a, b, c, d = v[0], v[1], v[2], v[3]
    if vocab.format is not BoxFormat.CORNERS:
        hw, hh = 0.5 * T.absolute(c), 0.5 * T.absolute(d)
        a, b, c, d = a - hw, b - hh, a + hw, b + hh
    x0, x1 = T.minimum(a, c), T.maximum(a, c)
    y0, y1 = T.minimum(b, d), T.maximum(b, d)
    return T.concat([x0.reshape(1), y0.reshape(1), x1.reshape(1), y1.reshape(1)])


def coordinate_siou(logits: Tensor, gt: Box, vocab: VocabularyConfig) -> Tensor:
    return siou_loss(expected_box(logits, vocab), gt)


def reconstruction_mse(recon: Tensor, target: np.ndarray, prev_appearance: np.ndarray,
                       visible: bool) -> Tensor:
    """MSE against the cropped target when visible, else against the previous tokens."""
    anchor = target if visible else prev_appearance
    anchor = np.asarray(anchor, dtype=np.float64)
    if anchor.shape != recon.shape:
        raise T.ShapeError(f"reconstruction {recon.shape} vs target {anchor.shape}")
    diff = recon - Tensor(anchor)
    return T.mean(diff * diff)


def iou_l1(predicted, actual: float):
    """|predicted - actual|; ``actual`` is a constant."""
    if isinstance(predicted, Tensor):
        return T.mean(T.absolute(predicted - float(actual)))
    return abs(float(predicted) - float(actual))


def _val(x) -> float:
    return x.item() if isinstance(x, Tensor) else float(x)


def total_frame_loss(ce, siou, mse, l1, weights: LossWeights, predicted_iou: float = 0.0,
                     actual_iou: float = 0.0, visible: bool = True):
    """Weighted sum of the four parts; returns (total, report).

    ``total`` is a Tensor when any part is a Tensor, otherwise a float. A
    zero weight drops its term from the graph entirely.
    """
    terms = [ce]
    for w, part in ((weights.lambda_siou, siou), (weights.lambda_mse, mse),
                    (weights.lambda_l1, l1)):
        if w != 0.0 and part is not None:
            terms.append(part * w)
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    vals = [_val(x) if x is not None else 0.0 for x in (ce, siou, mse, l1)]
    if not np.isfinite(vals).all() or not np.isfinite(_val(total)):
        raise T.NumericError("non-finite frame loss")
    report = FrameLossReport(*vals, total=_val(total), predicted_iou=predicted_iou,
                             actual_iou=actual_iou, visible=visible)
    return total, report


def format_log_line(step: int, ce: float, siou: float, mse: float, l1: float, total: float,
                    lr: float) -> str:
    return "\t".join([str(step)] + [repr(float(v)) for v in (ce, siou, mse, l1, total, lr)])
