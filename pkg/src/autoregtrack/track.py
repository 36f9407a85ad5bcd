"""Frame-by-frame autoregressive inference."""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .geometry import Box, SearchFrame, from_search_frame, to_search_frame
from .model import AppearanceState, Model
from .tensor import Tensor, no_grad
from .tokenizer import TokenizedBox, VocabularyConfig, detokenize, tokenize_box, values_to_box

MIN_CROP_SIDE = 8.0


def mean_pixel(image: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(image.reshape(-1, image.shape[-1]).mean(axis=0))


def crop(image: np.ndarray, frame: SearchFrame, out_side: int) -> np.ndarray:
    """Resample a crop window to out_side^2 pixels, padding with the mean pixel."""
    return K.crop_resize(np.ascontiguousarray(image, dtype=np.float64), float(frame.center[0]),
                         float(frame.center[1]), float(frame.side), int(out_side),
                         mean_pixel(image))


def snapped_frame(box: Box, factor: float) -> SearchFrame:
    """Crop window around ``box`` with integer side and integer origin.

    Snapping keeps the crop fixed under sub-pixel jitter of the previous
    estimate, so nearby predictions see identical search images.
    """
    side = float(max(round(factor * max(box.width, box.height)), MIN_CROP_SIDE))
    cx, cy = box.center
    ox, oy = math.floor(cx - 0.5 * side + 0.5), math.floor(cy - 0.5 * side + 0.5)
    return SearchFrame((ox + 0.5 * side, oy + 0.5 * side), side, factor)


def template_frame(box: Box, factor: float) -> SearchFrame:
    return snapped_frame(box, factor)


def search_frame(box: Box, factor: float) -> SearchFrame:
    return snapped_frame(box, factor)


def window_tokens(window, frame: SearchFrame, vocab: VocabularyConfig) -> list[TokenizedBox]:
    """Trajectory boxes mapped into the current crop and quantised."""
    return [tokenize_box(to_search_frame(b, frame), vocab) for b in window]


def argmax_tokens(logits: np.ndarray) -> TokenizedBox:
    return TokenizedBox(tuple(int(i) for i in np.argmax(logits, axis=1)))


def decode_box(logits: np.ndarray, vocab: VocabularyConfig) -> Box:
    """Argmax each row, detokenize, canonicalise (search-frame units)."""
    tb = argmax_tokens(logits)
    vals = [detokenize(t, vocab, *vocab.slot_range(i)) for i, t in enumerate(tb.tokens)]
    return values_to_box(vals, vocab.format)


@dataclass
class TrackerState:
    template_tokens: Tensor
    appearance: AppearanceState
    window: deque
    previous_box: Box
    scale_factor: float
    image_size: tuple[int, int]
    frames: int = 0
    encoder_calls_at_init: int = 0
    times_ms: list = field(default_factory=list)


class Tracker:
    """Runs a Model over a video one frame and one encoder pass at a time."""

    def __init__(self, model: Model):
        self.model = model

    def init(self, frame0: np.ndarray, box0: Box) -> TrackerState:
        h, w = frame0.shape[:2]
        if not (box0.width > 0 and box0.height > 0):
            raise ValueError("initial box must have positive area")
        if box0.x_max <= 0 or box0.y_max <= 0 or box0.x_min >= w or box0.y_min >= h:
            raise ValueError("initial box lies outside the first frame")
        cfg = self.model.cfg
        with no_grad():
            tmpl = crop(frame0, template_frame(box0, cfg.template_factor), cfg.template_side)
            feat = self.model.embed_patches(tmpl)
            tokens = feat + self.model.params["pos.template"]
        state = AppearanceState(feat, self.model.params["confidence.init"].detach(), 1.0)
        window = deque([box0] * cfg.trajectory_len, maxlen=cfg.trajectory_len)
        return TrackerState(tokens, state, window, box0, cfg.search_factor, (h, w),
                            encoder_calls_at_init=self.model.encoder_calls)

    def track_frame(self, state: TrackerState, frame: np.ndarray) -> tuple[Box, float]:
        model, cfg = self.model, self.model.cfg
        vocab = cfg.vocabulary
        start = time.perf_counter()
        sf = search_frame(state.previous_box, state.scale_factor)
        with no_grad():
            img = crop(frame, sf, cfg.search_side)
            traj = window_tokens(state.window, sf, vocab)
            out = model.frame_forward(state.template_tokens, img, state.appearance, traj)
            box_n = decode_box(out.logits.data, vocab)
            raw = from_search_frame(box_n, sf)
            iou_pred = float(out.predicted_iou.data.reshape(-1)[0])
            state.appearance = AppearanceState(model.next_appearance(out, state.appearance),
                                               out.confidence_out, iou_pred)
        state.window.append(raw)
        h, w = state.image_size
        box = raw.clip(w, h)
        if box.width <= 0 or box.height <= 0:
            box = state.previous_box
        state.previous_box = box
        state.frames += 1
        state.times_ms.append(1000.0 * (time.perf_counter() - start))
        return box, iou_pred

    def run(self, video, box0: Box) -> list[tuple[Box, float]]:
        if len(video) == 0:
            raise ValueError("empty video")
        state = self.init(video[0], box0)
        results = [(box0, 1.0)]
        for frame in video[1:]:
            results.append(self.track_frame(state, frame))
        self.last_state = state
        return results


def previous_box_baseline(video, box0: Box) -> list[tuple[Box, float]]:
    """Frozen tracker: reports the initial box on every frame."""
    return [(box0, 1.0)] * len(video)


def encoder_compute(model: Model, video, box0: Box, intra_frame: bool) -> dict:
    """Encoder calls and FLOPs per tracked frame for single-pass vs 4-pass readout."""
    tracker = Tracker(model)
    state = tracker.init(video[0], box0)
    model.reset_counters()
    cfg = model.cfg
    for frame in video[1:]:
        if not intra_frame:
            tracker.track_frame(state, frame)
            continue
        sf = search_frame(state.previous_box, state.scale_factor)
        with no_grad():
            img = crop(frame, sf, cfg.search_side)
            traj = window_tokens(state.window, sf, cfg.vocabulary)
            rows = model.intra_frame_logits(state.template_tokens, img, state.appearance, traj)
        raw = from_search_frame(decode_box(rows, cfg.vocabulary), sf)
        state.window.append(raw)
        box = raw.clip(state.image_size[1], state.image_size[0])
        if box.width > 0 and box.height > 0:
            state.previous_box = box
    n = max(len(video) - 1, 1)
    return {"calls_per_frame": model.encoder_calls / n, "flops_per_frame": model.encoder_flops / n}


# -- result files --------------------------------------------------------------
def write_results(path, results, mean_ms: float) -> None:
    lines = [f"{b.format_corners()},{float(s)!r}" for b, s in results]
    lines.append(f"# mean_ms_per_frame={mean_ms:.6f}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_results(path) -> tuple[list[tuple[Box, float]], float | None]:
    results, mean_ms = [], None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "mean_ms_per_frame=" in line:
                    mean_ms = float(line.split("=", 1)[1])
                continue
            vals = [float(v) for v in line.split(",")]
            if len(vals) != 5:
                raise ValueError(f"{path}: expected 5 fields per line, got {line!r}")
            results.append((Box(*vals[:4]), vals[4]))
    return results, mean_ms
