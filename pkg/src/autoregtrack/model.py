"""Pure-encoder frame network.

One encoder pass per frame reads out four coordinate-token distributions from
the command tokens, a reconstruction of the target appearance from the
appearance tokens, and an IoU estimate from the confidence token.
"""

from __future__ import annotations

import enum
import io
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from . import tensor as T
from .config import parse_kv, from_mapping, to_lines
from .geometry import Box
from .tensor import Tensor
from .tokenizer import BoxFormat, TokenizedBox, VocabularyConfig, embedding_ids

GROUPS = ("template", "search", "appearance", "trajectory", "command", "confidence")
COMMAND_TOKENS = 4


class ReconTarget(enum.Enum):
    FEATURE = "FEATURE"
    PIXEL = "PIXEL"


class AppearanceSource(enum.Enum):
    DECODER = "DECODER"
    ENCODER = "ENCODER"


class LayoutError(ValueError):
    pass


@dataclass
class ModelConfig:
    embed_dim: int = 64
    encoder_layers: int = 2
    heads: int = 4
    patch_size: int = 8
    template_side: int = 32
    search_side: int = 64
    vocab: int = 400
    vocab_lo: float = -0.5
    vocab_hi: float = 1.5
    box_format: BoxFormat = BoxFormat.CORNERS
    trajectory_len: int = 4
    decoder_layers: int = 2
    mask_ratio: float = 0.9
    reconstruction_target: ReconTarget = ReconTarget.FEATURE
    use_trajectory: bool = True
    use_appearance: bool = True
    appearance_self_attend: bool = True
    appearance_source: AppearanceSource = AppearanceSource.DECODER
    tie_head: bool = True
    mlp_ratio: int = 4
    search_factor: float = 4.0
    template_factor: float = 2.0
    init_std: float = 0.08

    def __post_init__(self):
        p = self.patch_size
        if self.template_side % p or self.search_side % p:
            raise ValueError("template_side and search_side must be multiples of patch_size")
        if not 0.0 <= self.mask_ratio < 1.0:
            raise ValueError("mask_ratio must lie in [0, 1)")
        if self.trajectory_len < 1:
            raise ValueError("trajectory_len must be at least 1")
        if self.embed_dim % self.heads:
            raise ValueError("embed_dim must be divisible by heads")
        side = math.isqrt(self.appearance_tokens)
        if side * side != self.appearance_tokens:
            raise ValueError("appearance token count must be a perfect square")

    @property
    def appearance_tokens(self) -> int:
        return (self.template_side // self.patch_size) ** 2

    @property
    def template_tokens(self) -> int:
        return (self.template_side // self.patch_size) ** 2

    @property
    def search_tokens(self) -> int:
        return (self.search_side // self.patch_size) ** 2

    @property
    def search_grid(self) -> int:
        return self.search_side // self.patch_size

    @property
    def vocabulary(self) -> VocabularyConfig:
        return VocabularyConfig(self.vocab, self.vocab_lo, self.vocab_hi, self.box_format)

    @property
    def target_width(self) -> int:
        if self.reconstruction_target is ReconTarget.PIXEL:
            return 3 * self.patch_size ** 2
        return self.embed_dim

    def to_text(self) -> str:
        return "\n".join(to_lines(self)) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ModelConfig":
        return from_mapping(cls, parse_kv(text))


# -- layout and mask ---------------------------------------------------------
@dataclass(frozen=True)
class TokenLayout:
    """Contiguous index ranges of the token groups, in GROUPS order."""

    sizes: tuple[int, ...]

    @classmethod
    def from_sizes(cls, template: int, search: int, appearance: int, trajectory: int,
                   command: int = COMMAND_TOKENS, confidence: int = 1) -> "TokenLayout":
        return cls((template, search, appearance, trajectory, command, confidence))

    @classmethod
    def for_config(cls, cfg: ModelConfig) -> "TokenLayout":
        return cls.from_sizes(
            cfg.template_tokens,
            cfg.search_tokens,
            cfg.appearance_tokens if cfg.use_appearance else 0,
            4 * cfg.trajectory_len if cfg.use_trajectory else 0,
        )

    def range(self, group: str) -> range:
        i = GROUPS.index(group)
        start = sum(self.sizes[:i])
        return range(start, start + self.sizes[i])

    def slice(self, group: str) -> slice:
        r = self.range(group)
        return slice(r.start, r.stop)

    @property
    def length(self) -> int:
        return sum(self.sizes)

    def group_ids(self) -> np.ndarray:
        return np.repeat(np.arange(len(GROUPS)), self.sizes)


def build_oriented_mask(layout: TokenLayout, self_attend: bool = True) -> np.ndarray:
    """Allowed (query, key) pairs: appearance rows see search, confidence and self only."""
    n = layout.length
    mask = np.ones((n, n), dtype=bool)
    app = layout.slice("appearance")
    if app.stop > app.start:
        mask[app] = False
        mask[app, layout.slice("search")] = True
        mask[app, layout.slice("confidence")] = True
        if self_attend:
            idx = np.arange(app.start, app.stop)
            mask[idx, idx] = True
    return mask


# -- parameters --------------------------------------------------------------
class Params(dict):
    """Ordered name -> Tensor mapping of learnable tensors."""

    def tensors(self):
        return list(self.values())

    def zero_grad(self):
        for t in self.values():
            t.grad = None

    def count(self) -> int:
        return sum(t.data.size for t in self.values())

    def snapshot(self) -> "Params":
        return Params((k, Tensor(v.data.copy(), requires_grad=True)) for k, v in self.items())


# inputs are centred before projection; images live in [0, 1]
PIXEL_MEAN, PIXEL_STD = 0.5, 0.25

BACKBONE_PREFIXES = ("patch.", "pos.", "ident", "enc.", "vocab.")


def param_group(name: str) -> str:
    """'backbone' or 'other', used for per-group learning rates."""
    return "backbone" if name.startswith(BACKBONE_PREFIXES) else "other"


def _trunc_normal(rng, shape, std):
    return np.clip(rng.standard_normal(shape), -2.0, 2.0) * std


def sincos_2d(tokens: int, d: int) -> np.ndarray:
    """Fixed 2-D sine-cosine grid embedding, rows in raster order."""
    side = math.isqrt(tokens)
    quarter = d // 4
    omega = 1.0 / 10000.0 ** (np.arange(quarter) / max(quarter, 1))
    ys, xs = np.divmod(np.arange(tokens), side)
    out = np.zeros((tokens, d))
    for j, coord in enumerate((ys, xs)):
        ang = coord[:, None] * omega[None, :]
        out[:, 2 * j * quarter:(2 * j + 1) * quarter] = np.sin(ang)
        out[:, (2 * j + 1) * quarter:(2 * j + 2) * quarter] = np.cos(ang)
    return out


def _grid_pos(rng, tokens, d, std):
    """Sine-cosine start for square grids, small noise otherwise."""
    if d % 4 or math.isqrt(tokens) ** 2 != tokens:
        return _trunc_normal(rng, (tokens, d), std)
    return sincos_2d(tokens, d)


def _block_params(prefix, d, hidden, rng, std):
    return {
        f"{prefix}.ln1.g": np.ones(d), f"{prefix}.ln1.b": np.zeros(d),
        f"{prefix}.attn.wqkv": _trunc_normal(rng, (d, 3 * d), std),
        f"{prefix}.attn.bqkv": np.zeros(3 * d),
        f"{prefix}.attn.wo": _trunc_normal(rng, (d, d), std),
        f"{prefix}.attn.bo": np.zeros(d),
        f"{prefix}.ln2.g": np.ones(d), f"{prefix}.ln2.b": np.zeros(d),
        f"{prefix}.mlp.w1": _trunc_normal(rng, (d, hidden), std),
        f"{prefix}.mlp.b1": np.zeros(hidden),
        f"{prefix}.mlp.w2": _trunc_normal(rng, (hidden, d), std),
        f"{prefix}.mlp.b2": np.zeros(d),
    }


def init_params(cfg: ModelConfig, seed: int = 0) -> Params:
    rng = np.random.default_rng(seed)
    d, p, std = cfg.embed_dim, cfg.patch_size, cfg.init_std
    hidden = cfg.mlp_ratio * d
    rows = cfg.vocabulary.table_rows
    raw = {
        "patch.w": _trunc_normal(rng, (3 * p * p, d), std),
        "patch.b": np.zeros(d),
        "pos.template": _grid_pos(rng, cfg.template_tokens, d, std),
        "pos.search": _grid_pos(rng, cfg.search_tokens, d, std),
        "pos.appearance": _grid_pos(rng, cfg.appearance_tokens, d, std),
        "pos.trajectory": _trunc_normal(rng, (4 * cfg.trajectory_len, d), std),
        "ident": _trunc_normal(rng, (len(GROUPS), d), std),
        "vocab.table": _trunc_normal(rng, (rows, d), std),
        "command": _trunc_normal(rng, (COMMAND_TOKENS, d), std),
        "confidence.init": _trunc_normal(rng, (1, d), std),
    }
    for i in range(cfg.encoder_layers):
        raw.update(_block_params(f"enc.{i}", d, hidden, rng, std))
    raw["enc.ln.g"], raw["enc.ln.b"] = np.ones(d), np.zeros(d)
    raw["head.bias"] = np.zeros(rows)
    if not cfg.tie_head:
        raw["head.w"] = _trunc_normal(rng, (d, rows), std)
    raw["dec.mask_token"] = _trunc_normal(rng, (1, d), std)
    raw["dec.pos"] = _trunc_normal(rng, (cfg.appearance_tokens, d), std)
    for i in range(cfg.decoder_layers):
        raw.update(_block_params(f"dec.{i}", d, hidden, rng, std))
    raw["dec.ln.g"], raw["dec.ln.b"] = np.ones(d), np.zeros(d)
    raw["dec.out.w"] = _trunc_normal(rng, (d, cfg.target_width), std)
    raw["dec.out.b"] = np.zeros(cfg.target_width)
    raw["iou.w1"] = _trunc_normal(rng, (d, d), std)
    raw["iou.b1"] = np.zeros(d)
    raw["iou.w2"] = _trunc_normal(rng, (d, d), std)
    raw["iou.b2"] = np.zeros(d)
    raw["iou.w3"] = _trunc_normal(rng, (d, 1), std)
    raw["iou.b3"] = np.zeros(1)
    return Params((k, Tensor(v, requires_grad=True)) for k, v in raw.items())


# -- state -------------------------------------------------------------------
@dataclass
class AppearanceState:
    appearance: Tensor  # [K, d]
    confidence_embed: Tensor  # [1, d]
    last_predicted_iou: float = 1.0

    def detached(self) -> "AppearanceState":
        return AppearanceState(self.appearance.detach(), self.confidence_embed.detach(),
                               self.last_predicted_iou)


@dataclass
class FrameOutput:
    logits: Tensor  # [4, V]
    predicted_iou: Tensor  # [1, 1]
    confidence_out: Tensor  # [1, d]
    appearance_out: Tensor | None  # encoder output rows, [K, d]
    reconstruction: Tensor | None  # [K, target width]
    decoder_hidden: Tensor | None  # [K, d]
    layout: TokenLayout
    search_features: np.ndarray  # pre-positional search patch embeddings
    attention: list = field(default_factory=list)


# -- image helpers -------------------------------------------------------------
def patchify(image: np.ndarray, p: int) -> np.ndarray:
    """Split H x W x 3 into row-major non-overlapping p x p patches, flattened."""
    h, w, c = image.shape
    if h % p or w % p:
        raise T.ShapeError(f"image {h}x{w} not divisible by patch size {p}")
    x = image.reshape(h // p, p, w // p, p, c).transpose(0, 2, 1, 3, 4)
    return np.ascontiguousarray(x.reshape((h // p) * (w // p), p * p * c))


def reconstruction_target(source: np.ndarray, gt_box: Box, k: int,
                          target: ReconTarget = ReconTarget.FEATURE,
                          patch_size: int = 8) -> np.ndarray:
    """Resample the region inside ``gt_box`` (search-frame units) to sqrt(k)^2 rows.

    ``source`` is the search feature map [(G*G), d] for FEATURE targets or the
    search image [S, S, 3] for PIXEL targets.
    """
    if not (gt_box.width > 0 and gt_box.height > 0):
        raise ValueError("degenerate reconstruction box")
    side = math.isqrt(k)
    frac = (np.arange(side) + 0.5) / side
    if target is ReconTarget.FEATURE:
        g = math.isqrt(source.shape[0])
        grid = np.ascontiguousarray(source.reshape(g, g, -1))
        xs = gt_box.x_min + frac * gt_box.width
        ys = gt_box.y_min + frac * gt_box.height
        uu, vv = np.meshgrid(xs * g - 0.5, ys * g - 0.5)
        pts = np.ascontiguousarray(np.stack([uu.ravel(), vv.ravel()], axis=1))
        return K.bilinear_sample(grid, pts)
    s = source.shape[0]
    p = patch_size
    sub = (np.arange(side * p) + 0.5) / (side * p)
    xs = gt_box.x_min + sub * gt_box.width
    ys = gt_box.y_min + sub * gt_box.height
    uu, vv = np.meshgrid(xs * s - 0.5, ys * s - 0.5)
    pts = np.ascontiguousarray(np.stack([uu.ravel(), vv.ravel()], axis=1))
    img = K.bilinear_sample(np.ascontiguousarray(source), pts).reshape(side * p, side * p, 3)
    return patchify(img, p)


# -- network -----------------------------------------------------------------
class Model:
    """Frame network over a parameter set, with forward-pass instrumentation."""

    def __init__(self, cfg: ModelConfig, params: Params | None = None, seed: int = 0):
        self.cfg = cfg
        self.params = params if params is not None else init_params(cfg, seed)
        self.encoder_calls = 0
        self.encoder_flops = 0
        self._masks: dict = {}

    def reset_counters(self):
        self.encoder_calls = 0
        self.encoder_flops = 0

    def layout(self) -> TokenLayout:
        return TokenLayout.for_config(self.cfg)

    def mask_for(self, layout: TokenLayout) -> np.ndarray:
        key = (layout.sizes, self.cfg.appearance_self_attend)
        if key not in self._masks:
            self._masks[key] = build_oriented_mask(layout, self.cfg.appearance_self_attend)
        return self._masks[key]

    # embeddings
    def embed_patches(self, image: np.ndarray) -> Tensor:
        """Patch projection without positional embedding."""
        P = self.params
        x = (patchify(image, self.cfg.patch_size) - PIXEL_MEAN) / PIXEL_STD
        return T.matmul(Tensor(x), P["patch.w"]) + P["patch.b"]

    def patchify_embed(self, image: np.ndarray, group: str = "search") -> Tensor:
        return self.embed_patches(image) + self.params[f"pos.{group}"]

    def initial_state(self, template_features: Tensor) -> AppearanceState:
        return AppearanceState(template_features, self.params["confidence.init"], 1.0)

    def assemble_frame(self, template_tokens: Tensor, search_tokens: Tensor,
                       state: AppearanceState, traj: list[TokenizedBox],
                       command: Tensor | None = None) -> tuple[Tensor, TokenLayout]:
        cfg, P = self.cfg, self.params
        n = cfg.trajectory_len
        if cfg.use_trajectory and len(traj) != n:
            raise LayoutError(f"trajectory window has {len(traj)} boxes, expected {n}")
        command = P["command"] if command is None else command
        parts = [template_tokens, search_tokens]
        sizes = [template_tokens.shape[0], search_tokens.shape[0], 0, 0, command.shape[0], 1]
        if cfg.use_appearance:
            parts.append(state.appearance + P["pos.appearance"])
            sizes[2] = state.appearance.shape[0]
        if cfg.use_trajectory:
            vocab = cfg.vocabulary
            ids = [i for tb in traj for i in embedding_ids(tb, vocab)]
            parts.append(T.embedding_lookup(P["vocab.table"], ids) + P["pos.trajectory"])
            sizes[3] = len(ids)
        parts.append(command)
        parts.append(state.confidence_embed)
        layout = TokenLayout(tuple(sizes))
        seq = T.concat(parts, axis=0) + T.embedding_lookup(P["ident"], layout.group_ids())
        return seq, layout

    # blocks
    def _block(self, x: Tensor, prefix: str, mask: np.ndarray, record: list | None) -> Tensor:
        P, d = self.params, self.cfg.embed_dim
        h = T.layer_norm(x, P[f"{prefix}.ln1.g"], P[f"{prefix}.ln1.b"])
        qkv = T.matmul(h, P[f"{prefix}.attn.wqkv"]) + P[f"{prefix}.attn.bqkv"]
        q = qkv[:, 0:d]
        k = qkv[:, d:2 * d]
        v = qkv[:, 2 * d:3 * d]
        a = T.masked_attention(q, k, v, mask, self.cfg.heads, record)
        x = x + (T.matmul(a, P[f"{prefix}.attn.wo"]) + P[f"{prefix}.attn.bo"])
        h = T.layer_norm(x, P[f"{prefix}.ln2.g"], P[f"{prefix}.ln2.b"])
        h = T.gelu(T.matmul(h, P[f"{prefix}.mlp.w1"]) + P[f"{prefix}.mlp.b1"])
        return x + (T.matmul(h, P[f"{prefix}.mlp.w2"]) + P[f"{prefix}.mlp.b2"])

    def _block_flops(self, n: int) -> int:
        d, hidden = self.cfg.embed_dim, self.cfg.mlp_ratio * self.cfg.embed_dim
        return 2 * n * d * 3 * d + 4 * n * n * d + 2 * n * d * d + 4 * n * d * hidden

    def encoder_forward(self, seq: Tensor, mask: np.ndarray,
                        record: list | None = None) -> Tensor:
        n = seq.shape[0]
        if mask.shape != (n, n):
            raise LayoutError(f"mask shape {mask.shape} does not match sequence length {n}")
        self.encoder_calls += 1
        self.encoder_flops += self.cfg.encoder_layers * self._block_flops(n)
        x = seq
        for i in range(self.cfg.encoder_layers):
            x = self._block(x, f"enc.{i}", mask, record)
        return T.layer_norm(x, self.params["enc.ln.g"], self.params["enc.ln.b"])

    # heads
    def head_weight(self) -> Tensor:
        if self.cfg.tie_head:
            return T.transpose(self.params["vocab.table"])
        return self.params["head.w"]

    def decode_coordinate_logits(self, command_out: Tensor) -> Tensor:
        if command_out.shape[0] != COMMAND_TOKENS:
            raise T.ShapeError("coordinate head expects 4 command rows")
        full = T.matmul(command_out, self.head_weight()) + self.params["head.bias"]
        vocab = self.cfg.vocabulary
        if vocab.format is not BoxFormat.CENTER_WH_SPLIT:
            return full
        v = vocab.size
        return T.concat([full[0:2, 0:v], full[2:4, v:2 * v]], axis=0)

    def reconstruct_appearance(self, appearance_out: Tensor,
                               mask_indices=()) -> tuple[Tensor, Tensor]:
        """Decoder over K appearance rows; returns (reconstruction, hidden)."""
        P, k = self.params, appearance_out.shape[0]
        rows = np.zeros(k, dtype=bool)
        rows[list(mask_indices)] = True
        x = T.where_rows(rows, appearance_out, P["dec.mask_token"]) + P["dec.pos"]
        full = np.ones((k, k), dtype=bool)
        for i in range(self.cfg.decoder_layers):
            x = self._block(x, f"dec.{i}", full, None)
        h = T.layer_norm(x, P["dec.ln.g"], P["dec.ln.b"])
        return T.matmul(h, P["dec.out.w"]) + P["dec.out.b"], h

    def predict_iou(self, confidence_out: Tensor) -> Tensor:
        P = self.params
        x = confidence_out.reshape(1, -1)
        x = T.gelu(T.matmul(x, P["iou.w1"]) + P["iou.b1"])
        x = T.gelu(T.matmul(x, P["iou.w2"]) + P["iou.b2"])
        return T.sigmoid(T.matmul(x, P["iou.w3"]) + P["iou.b3"])

    # full frame
    def frame_forward(self, template_tokens: Tensor, search_image: np.ndarray,
                      state: AppearanceState, traj: list[TokenizedBox],
                      mask_indices=(), record: bool = False) -> FrameOutput:
        search_feat = self.embed_patches(search_image)
        search_tokens = search_feat + self.params["pos.search"]
        seq, layout = self.assemble_frame(template_tokens, search_tokens, state, traj)
        attn: list = []
        out = self.encoder_forward(seq, self.mask_for(layout), attn if record else None)
        cmd = out[layout.slice("command")]
        conf = out[layout.slice("confidence")]
        logits = self.decode_coordinate_logits(cmd)
        iou_pred = self.predict_iou(conf)
        app_out = recon = hidden = None
        if self.cfg.use_appearance:
            app_out = out[layout.slice("appearance")]
            recon, hidden = self.reconstruct_appearance(app_out, mask_indices)
        return FrameOutput(logits, iou_pred, conf, app_out, recon, hidden, layout,
                           search_feat.data, attn)

    def next_appearance(self, out: FrameOutput, state: AppearanceState) -> Tensor:
        """Appearance tokens carried to the next frame."""
        if not self.cfg.use_appearance:
            return state.appearance
        if self.cfg.appearance_source is AppearanceSource.ENCODER:
            return out.appearance_out
        if self.cfg.reconstruction_target is ReconTarget.PIXEL:
            return out.decoder_hidden
        return out.reconstruction

    def intra_frame_logits(self, template_tokens: Tensor, search_image: np.ndarray,
                           state: AppearanceState, traj: list[TokenizedBox]) -> np.ndarray:
        """Four sequential encoder passes, one per coordinate token.

        Each pass appends the embedding of the previously chosen token after the
        start command, the way an intra-frame autoregressive decoder would. Used
        only to compare encoder compute against the single-pass readout.
        """
        P = self.params
        search_tokens = self.embed_patches(search_image) + P["pos.search"]
        vocab = self.cfg.vocabulary
        chosen: list[int] = []
        rows = []
        for step in range(COMMAND_TOKENS):
            prev = [t + vocab.slot_offset(i) for i, t in enumerate(chosen)]
            cmd = P["command"][0:1]
            if prev:
                cmd = T.concat([cmd, T.embedding_lookup(P["vocab.table"], prev)], axis=0)
            seq, layout = self.assemble_frame(template_tokens, search_tokens, state, traj, cmd)
            out = self.encoder_forward(seq, self.mask_for(layout))
            last = out[layout.range("command").stop - 1:layout.range("command").stop]
            full = T.matmul(last, self.head_weight()) + P["head.bias"]
            off = vocab.slot_offset(step)
            row = full.data[0, off:off + vocab.size]
            rows.append(row)
            chosen.append(int(np.argmax(row)))
        return np.stack(rows)


# -- checkpoint io -------------------------------------------------------------
MAGIC = b"ARTKCKPT"
VERSION = 1


def save_checkpoint(path, cfg: ModelConfig, params: Params) -> None:
    """Versioned binary checkpoint: header, config text, named little-endian f64 tensors."""
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    text = cfg.to_text().encode("utf-8")
    buf.write(struct.pack("<I", len(text)))
    buf.write(text)
    buf.write(struct.pack("<I", len(params)))
    for name, t in params.items():
        raw = name.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<I", t.data.ndim))
        buf.write(struct.pack(f"<{t.data.ndim}Q", *t.data.shape))
        buf.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path) -> tuple[ModelConfig, Params]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    pos = 8

    def read(fmt):
        nonlocal pos
        vals = struct.unpack_from(fmt, data, pos)
        pos += struct.calcsize(fmt)
        return vals

    (version,) = read("<I")
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    (n,) = read("<I")
    cfg = ModelConfig.from_text(data[pos:pos + n].decode("utf-8"))
    pos += n
    (count,) = read("<I")
    params = Params()
    for _ in range(count):
        (ln,) = read("<I")
        name = data[pos:pos + ln].decode("utf-8")
        pos += ln
        (rank,) = read("<I")
        shape = read(f"<{rank}Q") if rank else ()
        size = int(np.prod(shape)) if rank else 1
        arr = np.frombuffer(data, dtype="<f8", count=size, offset=pos).astype(np.float64)
        pos += 8 * size
        params[name] = Tensor(arr.reshape(shape), requires_grad=True)
    return cfg, params
