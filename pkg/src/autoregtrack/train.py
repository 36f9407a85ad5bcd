"""Sequence-level training over rolled-out clips."""

from __future__ import annotations

import math
import re
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from . import tensor as T
from .data import Sequence
from .geometry import Box, from_search_frame, iou, to_search_frame
from .loss import (FrameLossReport, LossWeights, coordinate_ce, coordinate_siou, is_visible,
                   iou_l1, reconstruction_mse, total_frame_loss)
from .model import AppearanceState, Model, Params, ReconTarget, param_group, patchify, \
    reconstruction_target
from .tensor import Tensor
from .tokenizer import tokenize_box
from .track import crop, decode_box, search_frame, template_frame, window_tokens

_INTERVAL = re.compile(r"^(NONE|FIXED\((\d+)\)|RANDOM\((\d+)\))$")


@dataclass
class TrainConfig:
    clip_len: int = 8
    reverse_prob: float = 0.5
    interval_mode: str = "NONE"
    lr_backbone: float = 1e-4
    lr_other: float = 1e-3
    weight_decay: float = 0.05
    steps: int = 500
    seed: int = 0
    grad_clip: float = 1.0
    detach_prompts: bool = True
    teacher_forcing: bool = False
    jitter: float = 0.0
    warmup_steps: int = 100
    batch_size: int = 1
    # frame-level stage run before the sequence steps
    pretrain_steps: int = 0
    pretrain_batch: int = 8
    pretrain_jitter: float = 0.5

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.clip_len < 2:
            raise ValueError("clip_len must be at least 2")
        if not 0.0 <= self.reverse_prob <= 1.0:
            raise ValueError("reverse_prob must lie in [0, 1]")
        for name in ("jitter", "pretrain_jitter"):
            if not 0.0 <= getattr(self, name) <= 2.0:
                raise ValueError(f"{name} must lie in [0, 2]")
        if self.pretrain_steps < 0 or self.pretrain_batch < 1:
            raise ValueError("pretrain_steps must be >= 0 and pretrain_batch >= 1")
        self.interval_mode = self.interval_mode.strip().upper()
        if not _INTERVAL.match(self.interval_mode):
            raise ValueError(f"bad interval_mode {self.interval_mode!r}")

    def interval(self) -> tuple[str, int]:
        m = _INTERVAL.match(self.interval_mode)
        if m.group(2):
            return "FIXED", int(m.group(2))
        if m.group(3):
            return "RANDOM", int(m.group(3))
        return "NONE", 1

    def frame_level(self) -> "TrainConfig":
        """Teacher-forced two-frame clips around jittered boxes."""
        return replace(self, clip_len=2, reverse_prob=0.0, interval_mode="NONE",
                       teacher_forcing=True, jitter=self.pretrain_jitter,
                       batch_size=self.pretrain_batch)


# -- sampling ------------------------------------------------------------------
def clip_indices(length: int, cfg: TrainConfig, rng) -> list[int] | None:
    """Frame indices of one clip, or None if the source is too short."""
    mode, k = cfg.interval()
    t = cfg.clip_len
    if mode == "RANDOM":
        gaps = rng.integers(1, max(k, 1) + 1, size=t - 1)
        span = int(gaps.sum())
        if span >= length:
            return None
        start = int(rng.integers(0, length - span))
        return [start] + list(start + np.cumsum(gaps))
    stride = k if mode == "FIXED" else 1
    span = (t - 1) * stride
    if span >= length:
        return None
    start = int(rng.integers(0, length - span))
    return list(range(start, start + span + 1, stride))


def sample_clip(dataset: list[Sequence], cfg: TrainConfig, rng, max_tries: int = 100) -> Sequence:
    """Random window of ``clip_len`` frames, reversed with probability ``reverse_prob``."""
    for _ in range(max_tries):
        seq = dataset[int(rng.integers(0, len(dataset)))]
        idx = clip_indices(len(seq), cfg, rng)
        if idx is None:
            continue
        clip = seq.subset([int(i) for i in idx])
        if rng.random() < cfg.reverse_prob:
            clip = clip.reversed()
        return clip
    raise ValueError("no sequence long enough for the requested clip")


def mask_selection(k: int, ratio: float, rng) -> np.ndarray:
    """floor(ratio * k) distinct indices, uniformly without replacement."""
    if not 0.0 <= ratio < 1.0:
        raise ValueError("mask ratio must lie in [0, 1)")
    n = int(math.floor(ratio * k + 1e-9))
    if n == 0:
        return np.zeros(0, dtype=np.intp)
    return np.sort(rng.choice(k, size=n, replace=False))


# -- optimiser -----------------------------------------------------------------
class AdamW:
    """Adam with decoupled weight decay and per-group learning rates."""

    def __init__(self, params: Params, lr: dict, weight_decay: float = 0.05,
                 betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = dict(lr)
        self.weight_decay = weight_decay
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v.data) for k, v in params.items()}
        self.v = {k: np.zeros_like(v.data) for k, v in params.items()}

    def step(self, grads: dict | None = None, lr_scale: float = 1.0) -> bool:
        """Apply one update; returns False (and leaves params alone) on non-finite grads."""
        if grads is None:
            grads = {k: (p.grad if p.grad is not None else np.zeros_like(p.data))
                     for k, p in self.params.items()}
        if not all(np.isfinite(g).all() for g in grads.values()):
            return False
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for name, p in self.params.items():
            g = grads[name]
            lr = self.lr[param_group(name)] * lr_scale
            m = self.m[name]
            v = self.v[name]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p.data *= 1.0 - lr * self.weight_decay
            p.data -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return True


def clip_gradients(params: Params, max_norm: float) -> float:
    total = math.sqrt(sum(float((p.grad ** 2).sum()) for p in params.values()
                          if p.grad is not None))
    if max_norm > 0 and total > max_norm:
        s = max_norm / (total + 1e-12)
        for p in params.values():
            if p.grad is not None:
                p.grad *= s
    return total


# -- rollout -------------------------------------------------------------------
@dataclass
class RolloutResult:
    loss: Tensor | None
    reports: list[FrameLossReport]
    boxes: list[Box]
    targets: list = field(default_factory=list)
    anchors: list = field(default_factory=list)
    mask_counts: list = field(default_factory=list)
    states: list = field(default_factory=list)

    def mean(self, key: str) -> float:
        return float(np.mean([getattr(r, key) for r in self.reports])) if self.reports else 0.0


def sample_jitter(amount: float, rng) -> tuple[float, float, float]:
    """Center shift as a fraction of box size on each axis, and a scale factor."""
    fx, fy, fs = rng.uniform(-amount, amount, size=3)
    return float(fx), float(fy), math.exp(fs / 4)


def jitter_box(box: Box, jitter: tuple[float, float, float]) -> Box:
    fx, fy, s = jitter
    cx, cy = box.center
    cx, cy = cx + fx * box.width, cy + fy * box.height
    hw, hh = s * box.width / 2, s * box.height / 2
    return Box(cx - hw, cy - hh, cx + hw, cy + hh)


def _jittered(box: Box, jitter, w, h) -> Box:
    out = jitter_box(box, jitter).clip(w, h)
    return out if out.width > 0 and out.height > 0 else box


def rollout(model: Model, clip: Sequence, weights: LossWeights, cfg: TrainConfig, rng,
            training: bool = True, keep_targets: bool = False) -> RolloutResult:
    """Roll the model through a clip, accumulating the per-frame losses.

    Frame 0 seeds the caches; every later frame is read out with one encoder
    pass, scored against ground truth, and its argmax box, appearance tokens
    and confidence embedding are carried into the next frame.
    """
    mcfg = model.cfg
    vocab = mcfg.vocabulary
    P = model.params
    box0 = clip.boxes[0]
    h, w = clip.frames[0].shape[:2]

    tmpl_img = crop(clip.frames[0], template_frame(box0, mcfg.template_factor), mcfg.template_side)
    tmpl_feat = model.embed_patches(tmpl_img)
    tmpl_tokens = tmpl_feat + P["pos.template"]
    app0 = tmpl_feat.detach() if cfg.detach_prompts else tmpl_feat
    state = AppearanceState(app0, P["confidence.init"], 1.0)
    pixel = mcfg.reconstruction_target is ReconTarget.PIXEL
    # what an invisible frame's reconstruction is anchored to
    anchor = patchify(tmpl_img, mcfg.patch_size) if pixel else app0.data

    window = deque([box0] * mcfg.trajectory_len, maxlen=mcfg.trajectory_len)
    prev_box = box0
    jitter = cfg.teacher_forcing and cfg.jitter > 0
    totals, reports, boxes = [], [], [box0]
    result = RolloutResult(None, reports, boxes)
    for t in range(1, len(clip)):
        gt = clip.boxes[t]
        shown, center_on = window, prev_box
        if jitter:
            # one offset for the whole history: a biased tracker keeps the motion cue
            # but not the absolute position, and the crop follows the newest entry
            j = sample_jitter(cfg.jitter, rng)
            shown = [_jittered(b, j, w, h) for b in window]
            center_on = shown[-1]
        sf = search_frame(center_on, mcfg.search_factor)
        img = crop(clip.frames[t], sf, mcfg.search_side)
        traj = window_tokens(shown, sf, vocab)
        masked = mask_selection(mcfg.appearance_tokens, mcfg.mask_ratio, rng) \
            if training and mcfg.use_appearance else ()
        result.mask_counts.append(len(masked))
        out = model.frame_forward(tmpl_tokens, img, state, traj, masked)

        gt_n = to_search_frame(gt, sf)
        ce = coordinate_ce(out.logits, tokenize_box(gt_n, vocab))
        siou = coordinate_siou(out.logits, gt_n, vocab) if gt_n.area > 0 else None
        pred_n = decode_box(out.logits.data, vocab)
        raw = from_search_frame(pred_n, sf)
        actual = iou(raw, gt)
        iou_pred = out.predicted_iou
        l1 = iou_l1(iou_pred, actual)

        visible = is_visible(clip.visibility[t])
        mse = None
        if mcfg.use_appearance:
            inside = gt_n.x_max > 0 and gt_n.y_max > 0 and gt_n.x_min < 1 and gt_n.y_min < 1
            use_target = visible and inside and gt_n.width > 0 and gt_n.height > 0
            if use_target:
                src = img if pixel else out.search_features
                target = reconstruction_target(src, gt_n, mcfg.appearance_tokens,
                                               mcfg.reconstruction_target, mcfg.patch_size)
            else:
                target = anchor
            mse = reconstruction_mse(out.reconstruction, target, anchor, use_target)
            if keep_targets:
                result.targets.append(np.array(target, copy=True))
                result.anchors.append(np.array(anchor, copy=True))

        total, rep = total_frame_loss(ce, siou, mse, l1, weights,
                                      predicted_iou=iou_pred.item(), actual_iou=actual,
                                      visible=visible)
        totals.append(total)
        reports.append(rep)

        out_box = raw.clip(w, h)
        if out_box.width <= 0 or out_box.height <= 0:
            out_box = prev_box
        boxes.append(out_box)
        if cfg.teacher_forcing:
            window.append(gt)
            prev_box = gt
        else:
            window.append(raw)
            prev_box = out_box
        nxt = model.next_appearance(out, state)
        conf = out.confidence_out
        if cfg.detach_prompts:
            nxt, conf = nxt.detach(), conf.detach()
        state = AppearanceState(nxt, conf, iou_pred.item())
        if keep_targets:
            result.states.append(state)
        if mcfg.use_appearance:
            anchor = out.reconstruction.data if pixel else nxt.data

    if totals:
        loss = totals[0]
        for x in totals[1:]:
            loss = loss + x
        result.loss = T.scale(loss, 1.0 / len(totals))
    return result


# -- training loop -----------------------------------------------------------------
@dataclass
class StepLog:
    step: int
    ce: float
    siou: float
    mse: float
    l1: float
    total: float
    lr: float
    skipped: bool = False
    phase: str = "sequence"


class Trainer:
    def __init__(self, model: Model, dataset: list[Sequence], cfg: TrainConfig,
                 weights: LossWeights | None = None):
        if not dataset:
            raise ValueError("empty training set")
        self.model = model
        self.dataset = dataset
        self.cfg = cfg
        self.weights = weights or LossWeights()
        self.rng = np.random.default_rng(cfg.seed)
        self.opt = AdamW(model.params, {"backbone": cfg.lr_backbone, "other": cfg.lr_other},
                         cfg.weight_decay)
        self.step_count = 0

    @property
    def in_pretraining(self) -> bool:
        return self.step_count < self.cfg.pretrain_steps

    @property
    def total_steps(self) -> int:
        return self.cfg.pretrain_steps + self.cfg.steps

    def lr_scale(self) -> float:
        if self.cfg.warmup_steps <= 0:
            return 1.0
        return min(1.0, (self.step_count + 1) / self.cfg.warmup_steps)

    def train_step(self, clips: list[Sequence] | None = None) -> StepLog:
        """One optimiser step over ``batch_size`` rolled-out clips (mean loss).

        The first ``pretrain_steps`` steps are frame-level and score the
        coordinate CE alone.
        """
        frame_level = self.in_pretraining
        cfg = self.cfg.frame_level() if frame_level else self.cfg
        weights = LossWeights(0.0, 0.0, 0.0) if frame_level else self.weights
        if clips is None:
            clips = [sample_clip(self.dataset, cfg, self.rng) for _ in range(cfg.batch_size)]
        params = self.model.params
        params.zero_grad()
        results = [rollout(self.model, c, weights, cfg, self.rng, training=True)
                   for c in clips]
        loss = results[0].loss
        for r in results[1:]:
            loss = loss + r.loss
        loss = T.scale(loss, 1.0 / len(results))
        scale = self.lr_scale()
        means = [float(np.mean([r.mean(k) for r in results]))
                 for k in ("ce", "siou", "mse", "l1", "total")]
        log = StepLog(self.step_count, *means, self.cfg.lr_other * scale,
                      phase="frame" if frame_level else "sequence")
        loss.backward()
        clip_gradients(params, self.cfg.grad_clip)
        log.skipped = not self.opt.step(lr_scale=scale)
        self.step_count += 1
        return log

    def fit(self, steps: int | None = None, callback=None) -> list[StepLog]:
        logs = []
        for _ in range(self.total_steps if steps is None else steps):
            log = self.train_step()
            logs.append(log)
            if callback is not None:
                callback(log)
        return logs


def evaluate_clips(model: Model, clips: list[Sequence], weights: LossWeights | None = None,
                   cfg: TrainConfig | None = None) -> dict:
    """Inference-mode rollout (no masking) over clips: mean CE and mean IoU."""
    weights = weights or LossWeights()
    cfg = cfg or TrainConfig(reverse_prob=0.0)
    rng = np.random.default_rng(0)
    ce, ious = [], []
    with T.no_grad():
        for clip in clips:
            res = rollout(model, clip, weights, cfg, rng, training=False)
            ce.extend(r.ce for r in res.reports)
            ious.extend(iou(b, g) for b, g in zip(res.boxes[1:], clip.boxes[1:]))
    return {"ce": float(np.mean(ce)), "iou": float(np.mean(ious))}
