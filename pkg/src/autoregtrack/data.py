"""Synthetic tracking videos and GOT-10k style sequence directories."""

from __future__ import annotations

import colorsys
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import parse_kv
from .geometry import Box, iou

# box coordinates are snapped to this grid so xywh text round-trips exactly
SNAP = 1.0 / 256.0


class FormatError(ValueError):
    pass


@dataclass
class Sequence:
    frames: list
    boxes: list
    visibility: list
    name: str = "seq"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.frames) == len(self.boxes) == len(self.visibility)):
            raise FormatError("frames, boxes and visibility must have equal length")

    def __len__(self):
        return len(self.frames)

    def reversed(self) -> "Sequence":
        return Sequence(self.frames[::-1], self.boxes[::-1], self.visibility[::-1], self.name,
                        self.meta)

    def subset(self, idx) -> "Sequence":
        return Sequence([self.frames[i] for i in idx], [self.boxes[i] for i in idx],
                        [self.visibility[i] for i in idx], self.name, self.meta)

    def equals(self, other: "Sequence") -> bool:
        return (len(self) == len(other)
                and all(np.array_equal(a, b) for a, b in zip(self.frames, other.frames))
                and self.boxes == other.boxes
                and list(self.visibility) == list(other.visibility))


@dataclass
class SyntheticConfig:
    canvas_h: int = 64
    canvas_w: int = 64
    target_kind: str = "rectangle"
    size_min: float = 8.0
    size_max: float = 16.0
    speed_max: float = 1.5
    accel_sigma: float = 0.0
    bounce: bool = True
    hue_drift: float = 0.0
    scale_drift: float = 0.0
    occluder_start: int = -1
    occluder_duration: int = 0
    occluder_coverage: float = 1.0
    out_of_view_start: int = -1
    out_of_view_duration: int = 0
    distractors: int = 0
    noise_sigma: float = 0.02
    blur_substeps: int = 1
    length: int = 32

    def __post_init__(self):
        if self.canvas_h <= 0 or self.canvas_w <= 0 or self.length <= 0:
            raise ValueError("canvas and length must be positive")
        if not 0 < self.size_min <= self.size_max:
            raise ValueError("size range must be positive and ordered")
        if self.size_max >= min(self.canvas_h, self.canvas_w):
            raise ValueError("target size exceeds canvas")
        if not 0.0 <= self.occluder_coverage <= 1.0:
            raise ValueError("occluder_coverage must lie in [0, 1]")
        if self.target_kind not in ("rectangle", "ellipse"):
            raise ValueError(f"unknown target_kind {self.target_kind!r}")
        if self.blur_substeps < 1:
            raise ValueError("blur_substeps must be >= 1")


def _snap(x):
    return np.round(np.asarray(x) / SNAP) * SNAP


def _fold(x, lo, hi):
    """Reflect x into [lo, hi] (billiard motion)."""
    span = np.maximum(hi - lo, 1e-12)
    y = np.mod(x - lo, 2 * span)
    return lo + np.where(y > span, 2 * span - y, y)


def _colors(hue, n, drift):
    c1, c2 = [], []
    for t in range(n):
        hh = (hue + drift * t) % 1.0
        c1.append(colorsys.hsv_to_rgb(hh, 0.85, 0.95))
        c2.append(colorsys.hsv_to_rgb((hh + 0.5) % 1.0, 0.9, 0.35))
    return np.array(c1), np.array(c2)


def _trajectory(cfg: SyntheticConfig, rng, n_sub):
    """Center and size per (sub)step; index t * n_sub is frame t."""
    steps = cfg.length * n_sub
    t = np.arange(steps) / n_sub
    size = _snap(rng.uniform(cfg.size_min, cfg.size_max, size=2))
    scale = (1.0 + cfg.scale_drift) ** t
    w, h = size[0] * scale, size[1] * scale
    margin = 0.5 * max(size) + 1.0
    c0 = _snap([rng.uniform(margin, cfg.canvas_w - margin),
                rng.uniform(margin, cfg.canvas_h - margin)])
    ang = rng.uniform(0, 2 * np.pi)
    speed = rng.uniform(0.0, cfg.speed_max)
    v0 = _snap(speed * np.array([np.cos(ang), np.sin(ang)]))
    if cfg.accel_sigma > 0:
        acc = rng.normal(0.0, cfg.accel_sigma, size=(cfg.length, 2))
        vel = np.cumsum(acc, axis=0)
        disp = np.vstack([np.zeros((1, 2)), np.cumsum(vel, axis=0)[:-1]])
    else:
        disp = np.zeros((cfg.length, 2))
    # substeps interpolate the per-frame displacement
    frame_idx = np.minimum(np.floor(t).astype(int), cfg.length - 1)
    nxt = np.minimum(frame_idx + 1, cfg.length - 1)
    frac = (t - frame_idx)[:, None]
    d = disp[frame_idx] * (1 - frac) + disp[nxt] * frac
    cx = c0[0] + t * v0[0] + d[:, 0]
    cy = c0[1] + t * v0[1] + d[:, 1]
    if cfg.bounce:
        cx = _fold(cx, 0.5 * w, cfg.canvas_w - 0.5 * w)
        cy = _fold(cy, 0.5 * h, cfg.canvas_h - 0.5 * h)
    return cx, cy, w, h, c0, v0


def _shape_mask(xs, ys, cx, cy, w, h, kind):
    if kind == "rectangle":
        return (np.abs(xs - cx) <= 0.5 * w) & (np.abs(ys - cy) <= 0.5 * h)
    return ((xs - cx) / (0.5 * w)) ** 2 + ((ys - cy) / (0.5 * h)) ** 2 <= 1.0


def _paint(img, cx, cy, w, h, c1, c2, kind):
    hh, ww, _ = img.shape
    x0, x1 = int(np.floor(cx - 0.5 * w)), int(np.ceil(cx + 0.5 * w))
    y0, y1 = int(np.floor(cy - 0.5 * h)), int(np.ceil(cy + 0.5 * h))
    x0, y0 = max(x0, 0), max(y0, 0)
    x1, y1 = min(x1, ww), min(y1, hh)
    if x0 >= x1 or y0 >= y1:
        return
    ys, xs = np.mgrid[y0:y1, x0:x1] + 0.5
    m = _shape_mask(xs, ys, cx, cy, w, h, kind)
    # diagonal stripes fixed to the object frame
    u = (xs - (cx - 0.5 * w)) / max(w, 1e-9) + (ys - (cy - 0.5 * h)) / max(h, 1e-9)
    stripe = (np.floor(u * 3.0).astype(int) % 2 == 0)[..., None]
    patch = np.where(stripe, c1, c2)
    region = img[y0:y1, x0:x1]
    region[m] = patch[m]


def _occluder_rect(cx, cy, w, h, coverage):
    """Integer pixel rectangle [x0, x1) x [y0, y1) hiding the left ``coverage`` of the target."""
    x0 = int(np.floor(cx - 0.5 * w)) - 1
    y0 = int(np.floor(cy - 0.5 * h)) - 1
    y1 = int(np.ceil(cy + 0.5 * h)) + 1
    if coverage >= 1.0:
        x1 = int(np.ceil(cx + 0.5 * w)) + 1
    else:
        x1 = int(np.floor(cx - 0.5 * w + coverage * w))
    return x0, y0, x1, y1


def _visible_fraction(cx, cy, w, h, kind, canvas_w, canvas_h, occ):
    x0, x1 = int(np.floor(cx - 0.5 * w)), int(np.ceil(cx + 0.5 * w))
    y0, y1 = int(np.floor(cy - 0.5 * h)), int(np.ceil(cy + 0.5 * h))
    ys, xs = np.mgrid[y0:y1, x0:x1] + 0.5
    m = _shape_mask(xs, ys, cx, cy, w, h, kind)
    total = int(m.sum())
    if total == 0:
        return 0.0
    inside = (xs >= 0) & (xs < canvas_w) & (ys >= 0) & (ys < canvas_h)
    if occ is not None:
        ox0, oy0, ox1, oy1 = occ
        inside &= ~((xs >= ox0) & (xs < ox1) & (ys >= oy0) & (ys < oy1))
    return int((m & inside).sum()) / total


def _background(cfg: SyntheticConfig, rng):
    ys, xs = np.mgrid[0:cfg.canvas_h, 0:cfg.canvas_w] / max(cfg.canvas_h, cfg.canvas_w)
    base = rng.uniform(0.2, 0.6, size=3)
    gx, gy = rng.uniform(-0.2, 0.2, size=(2, 3))
    return np.clip(base + xs[..., None] * gx + ys[..., None] * gy, 0.0, 1.0)


def generate_sequence(cfg: SyntheticConfig, seed: int, name: str | None = None) -> Sequence:
    """Render one deterministic synthetic clip with exact boxes and visibility."""
    rng = np.random.default_rng(seed)
    n_sub = cfg.blur_substeps
    cx, cy, w, h, c0, v0 = _trajectory(cfg, rng, n_sub)
    cx, cy, w, h = _snap(cx), _snap(cy), _snap(w), _snap(h)
    hue = rng.uniform()
    c1, c2 = _colors(hue, cfg.length, cfg.hue_drift)
    bg = _background(cfg, rng)

    distractors = []
    for _ in range(cfg.distractors):
        for _attempt in range(20):
            dcx, dcy, dw, dh, _, _ = _trajectory(cfg, rng, n_sub)
            ok = all(
                iou(Box.from_center(dcx[i], dcy[i], dw[i], dh[i]),
                    Box.from_center(cx[i], cy[i], w[i], h[i])) <= 0.3
                for i in range(len(cx)))
            if ok:
                distractors.append((dcx, dcy, dw, dh, (hue + rng.uniform(-0.04, 0.04)) % 1.0))
                break

    oov = set(range(cfg.out_of_view_start, cfg.out_of_view_start + cfg.out_of_view_duration)) \
        if cfg.out_of_view_start >= 0 else set()
    occl = set(range(cfg.occluder_start, cfg.occluder_start + cfg.occluder_duration)) \
        if cfg.occluder_start >= 0 else set()
    occ_color = np.array([0.5, 0.5, 0.5])

    frames, boxes, vis = [], [], []
    for t in range(cfg.length):
        acc = np.zeros((cfg.canvas_h, cfg.canvas_w, 3))
        sub_boxes = []
        occ_rect = None
        for s in range(n_sub):
            # substeps trail the frame time: the last substep is frame t itself
            i = max(t * n_sub - (n_sub - 1 - s), 0)
            tx, ty = cx[i], cy[i]
            if t in oov:
                # push the target past the nearest canvas edge
                dl, dr = tx, cfg.canvas_w - tx
                dt, db = ty, cfg.canvas_h - ty
                k = int(np.argmin([dl, dr, dt, db]))
                push = [-(dl + w[i]), dr + w[i], -(dt + h[i]), db + h[i]][k]
                if k < 2:
                    tx = tx + push
                else:
                    ty = ty + push
            img = bg.copy()
            for dcx, dcy, dw, dh, dhue in distractors:
                d1, d2 = _colors(dhue, 1, 0.0)
                _paint(img, dcx[i], dcy[i], dw[i], dh[i], d1[0], d2[0], cfg.target_kind)
            _paint(img, tx, ty, w[i], h[i], c1[t], c2[t], cfg.target_kind)
            sub_boxes.append((tx, ty, w[i], h[i]))
            if t in occl:
                occ_rect = _occluder_rect(tx, ty, w[i], h[i], cfg.occluder_coverage)
                ox0, oy0, ox1, oy1 = occ_rect
                img[max(oy0, 0):max(oy1, 0), max(ox0, 0):max(ox1, 0)] = occ_color
            acc += img
        img = acc / n_sub
        if cfg.noise_sigma > 0:
            img = img + rng.normal(0.0, cfg.noise_sigma, size=img.shape)
        img = np.round(np.clip(img, 0.0, 1.0) * 255.0) / 255.0
        frames.append(img)
        bx = [Box.from_center(*b) for b in sub_boxes]
        boxes.append(Box(min(b.x_min for b in bx), min(b.y_min for b in bx),
                         max(b.x_max for b in bx), max(b.y_max for b in bx)))
        tx, ty, tw, th = sub_boxes[-1]
        vis.append(float(_visible_fraction(tx, ty, tw, th, cfg.target_kind,
                                           cfg.canvas_w, cfg.canvas_h, occ_rect)))
    meta = {"start": (float(c0[0]), float(c0[1])), "velocity": (float(v0[0]), float(v0[1]))}
    return Sequence(frames, boxes, vis, name or f"synthetic_{seed:06d}", meta)


def easy_config(**overrides) -> SyntheticConfig:
    """No occlusion, constant velocity, no distractors."""
    base = dict(accel_sigma=0.0, occluder_start=-1, distractors=0, hue_drift=0.0,
                scale_drift=0.0, out_of_view_start=-1)
    base.update(overrides)
    return SyntheticConfig(**base)


# -- PPM and directory IO --------------------------------------------------------
def write_ppm(path, image: np.ndarray) -> None:
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        arr = np.round(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w, _ = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(arr).tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while data[pos:pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1
    if tokens[0] != b"P6" or int(tokens[3]) != 255:
        raise FormatError(f"{path}: only 8-bit binary P6 images are supported")
    w, h = int(tokens[1]), int(tokens[2])
    arr = np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=pos)
    return arr.reshape(h, w, 3).astype(np.float64) / 255.0


def save_sequence(seq: Sequence, directory, meta: dict | None = None) -> None:
    d = Path(directory)
    (d / "frames").mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(seq.frames, 1):
        write_ppm(d / "frames" / f"{i:06d}.ppm", frame)
    (d / "groundtruth.txt").write_text("".join(b.format_xywh() + "\n" for b in seq.boxes))
    (d / "visibility.txt").write_text("".join(repr(float(v)) + "\n" for v in seq.visibility))
    info = {"name": seq.name, "length": len(seq)}
    info.update(meta or {})
    (d / "meta.txt").write_text("".join(f"{k}={v}\n" for k, v in info.items()))


def load_sequence(directory) -> Sequence:
    d = Path(directory)
    frame_dir = d / "frames"
    paths = sorted(p for p in frame_dir.iterdir() if p.suffix == ".ppm") if frame_dir.is_dir() else []
    lines = [ln for ln in (d / "groundtruth.txt").read_text().splitlines() if ln.strip()]
    if len(lines) != len(paths):
        raise FormatError(f"{d}: {len(paths)} frames but {len(lines)} annotation lines")
    boxes = [Box.parse_xywh(ln) for ln in lines]
    vis_path = d / "visibility.txt"
    if vis_path.exists():
        vis = [float(v) for v in vis_path.read_text().split()]
        if len(vis) != len(paths):
            raise FormatError(f"{d}: visibility.txt has {len(vis)} entries for {len(paths)} frames")
    else:
        vis = [1.0] * len(paths)
    name = d.name
    meta = d / "meta.txt"
    if meta.exists():
        name = parse_kv(meta.read_text()).get("name", name)
    return Sequence([read_ppm(p) for p in paths], boxes, vis, name)


def list_sequences(root) -> list[Path]:
    """Sequence directories under ``root`` (or ``root`` itself if it is one)."""
    root = Path(root)
    if (root / "groundtruth.txt").exists():
        return [root]
    return sorted(p for p in root.iterdir() if (p / "groundtruth.txt").exists())


def load_dataset(root) -> list[Sequence]:
    return [load_sequence(p) for p in list_sequences(root)]


def generate_dataset(cfg: SyntheticConfig, count: int, seed: int) -> list[Sequence]:
    ss = np.random.SeedSequence(seed)
    seeds = [int(s.generate_state(1)[0]) for s in ss.spawn(count)]
    return [generate_sequence(cfg, s, name=f"seq_{i:04d}") for i, s in enumerate(seeds)]


def save_dataset(seqs, root, meta: dict | None = None) -> None:
    os.makedirs(root, exist_ok=True)
    for s in seqs:
        save_sequence(s, Path(root) / s.name, meta)
