"""Finite-difference gradient suite over every differentiable building block."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .geometry import Box, siou_loss
from .loss import LossWeights, coordinate_ce, iou_l1, reconstruction_mse, total_frame_loss
from .model import Model, ModelConfig
from .tensor import Tensor, grad_check
from .tokenizer import TokenizedBox

TOLERANCE = 1e-5


@dataclass
class OpResult:
    name: str
    trials: int
    max_rel_err: float
    seconds: float

    @property
    def ok(self) -> bool:
        return self.max_rel_err <= TOLERANCE


def _probe(rng, shape):
    """Fixed random cotangent so a scalar check covers the whole Jacobian."""
    return Tensor(rng.standard_normal(shape))


def _small_model(seed: int) -> Model:
    cfg = ModelConfig(embed_dim=8, encoder_layers=1, heads=2, patch_size=4, template_side=8,
                      search_side=16, vocab=12, trajectory_len=1, decoder_layers=1,
                      mlp_ratio=2, init_std=0.3)
    return Model(cfg, seed=seed)


def _with_param(model: Model, name: str, fn):
    """f(w) that swaps ``w`` in for one parameter, then restores it."""
    def f(w):
        old = model.params[name]
        model.params[name] = w
        try:
            return fn()
        finally:
            model.params[name] = old
    return f


def _case(name, rng):
    """Return (f, x) for one random trial of the named op."""
    if name == "matmul":
        a = rng.standard_normal((3, 4))
        b = Tensor(rng.standard_normal((4, 5)))
        r = _probe(rng, (3, 5))
        return lambda x: T.tsum(T.matmul(x, b) * r), a
    if name == "softmax":
        r = _probe(rng, (3, 5))
        return lambda x: T.tsum(T.softmax(x, axis=1) * r), rng.standard_normal((3, 5))
    if name == "log_softmax":
        r = _probe(rng, (3, 5))
        return lambda x: T.tsum(T.log_softmax(x, axis=1) * r), rng.standard_normal((3, 5))
    if name == "layer_norm":
        g = Tensor(rng.standard_normal(6))
        b = Tensor(rng.standard_normal(6))
        r = _probe(rng, (3, 6))
        return lambda x: T.tsum(T.layer_norm(x, g, b) * r), rng.standard_normal((3, 6))
    if name == "layer_norm_gamma":
        x = Tensor(rng.standard_normal((3, 6)))
        b = Tensor(rng.standard_normal(6))
        r = _probe(rng, (3, 6))
        return lambda g: T.tsum(T.layer_norm(x, g, b) * r), rng.standard_normal(6)
    if name == "gelu":
        r = _probe(rng, (4, 5))
        return lambda x: T.tsum(T.gelu(x) * r), 2.0 * rng.standard_normal((4, 5))
    if name == "masked_attention":
        n, d = 5, 4
        mask = rng.random((n, n)) < 0.6
        mask[np.arange(n), np.arange(n)] = True
        k = Tensor(rng.standard_normal((n, d)))
        v = Tensor(rng.standard_normal((n, d)))
        r = _probe(rng, (n, d))
        return lambda q: T.tsum(T.masked_attention(q, k, v, mask, heads=2) * r), \
            rng.standard_normal((n, d))
    if name == "encoder_block":
        m = _small_model(int(rng.integers(1 << 30)))
        n, d = 6, m.cfg.embed_dim
        mask = rng.random((n, n)) < 0.7
        mask[np.arange(n), np.arange(n)] = True
        r = _probe(rng, (n, d))
        return lambda x: T.tsum(m._block(x, "enc.0", mask, None) * r), rng.standard_normal((n, d))
    if name == "encoder_block_weights":
        m = _small_model(int(rng.integers(1 << 30)))
        n, d = 6, m.cfg.embed_dim
        mask = np.ones((n, n), dtype=bool)
        x = Tensor(rng.standard_normal((n, d)))
        r = _probe(rng, (n, d))
        f = _with_param(m, "enc.0.attn.wqkv", lambda: T.tsum(m._block(x, "enc.0", mask, None) * r))
        return f, m.params["enc.0.attn.wqkv"].data.copy()
    if name == "reconstruction_decoder":
        m = _small_model(int(rng.integers(1 << 30)))
        k, d = m.cfg.appearance_tokens, m.cfg.embed_dim
        masked = sorted(rng.choice(k, size=2, replace=False).tolist())
        r = _probe(rng, (k, m.cfg.target_width))
        return lambda x: T.tsum(m.reconstruct_appearance(x, masked)[0] * r), \
            rng.standard_normal((k, d))
    if name == "iou_perceptron":
        m = _small_model(int(rng.integers(1 << 30)))
        return lambda x: m.predict_iou(x).reshape(()) * 3.0, rng.standard_normal((1, m.cfg.embed_dim))
    if name == "siou":
        gt = _random_box(rng)
        return lambda x: siou_loss(x, gt), np.array(_random_box(rng).as_tuple())
    if name == "coordinate_ce":
        tok = TokenizedBox(tuple(int(t) for t in rng.integers(0, 7, size=4)))
        return lambda x: coordinate_ce(x, tok), rng.standard_normal((4, 7))
    if name == "reconstruction_mse":
        target = rng.standard_normal((4, 3))
        prev = rng.standard_normal((4, 3))
        vis = bool(rng.integers(2))
        return lambda x: reconstruction_mse(x, target, prev, vis), rng.standard_normal((4, 3))
    if name == "iou_l1":
        actual = float(rng.random())
        x0 = np.array([[actual + rng.choice([-1, 1]) * (0.05 + 0.4 * rng.random())]])
        return lambda x: iou_l1(x, actual), x0
    if name == "total_loss":
        w = LossWeights(*(0.5 + rng.random(3)))
        tok = TokenizedBox(tuple(int(t) for t in rng.integers(0, 7, size=4)))
        gt = _random_box(rng)
        target = rng.standard_normal((2, 3))
        actual = float(rng.random())

        def f(x):
            logits = x[0:4, :]
            ce = coordinate_ce(logits, tok)
            box = T.concat([x[4, 0:2] * 0.1, x[4, 0:2] * 0.1 + 1.0 + T.absolute(x[4, 2:4])])
            s = siou_loss(box, gt)
            mse = reconstruction_mse(x[5:7, 0:3], target, target, True)
            l1 = iou_l1(T.sigmoid(x[7, 0:1]), actual)
            return total_frame_loss(ce, s, mse, l1, w)[0]
        x0 = rng.standard_normal((8, 7))
        x0[4, 2:4] = 0.5 + rng.random(2)
        return f, x0
    raise KeyError(name)


def _random_box(rng) -> Box:
    x0, y0 = rng.uniform(-1.0, 1.0, size=2)
    w, h = rng.uniform(0.3, 2.0, size=2)
    return Box(x0, y0, x0 + w, y0 + h)


OPS = ("matmul", "softmax", "log_softmax", "layer_norm", "layer_norm_gamma", "gelu",
       "masked_attention", "encoder_block", "encoder_block_weights", "reconstruction_decoder",
       "iou_perceptron", "siou", "coordinate_ce", "reconstruction_mse", "iou_l1", "total_loss")


def run_suite(trials: int = 10, seed: int = 0, ops=OPS) -> list[OpResult]:
    rng = np.random.default_rng(seed)
    results = []
    for name in ops:
        start = time.perf_counter()
        worst = 0.0
        for _ in range(trials):
            f, x = _case(name, rng)
            worst = max(worst, grad_check(f, x))
        results.append(OpResult(name, trials, worst, time.perf_counter() - start))
    return results


def format_results(results: list[OpResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{r.name.ljust(width)}  trials={r.trials:<3d} max_rel_err={r.max_rel_err:.3e}  "
             f"{'ok' if r.ok else 'FAIL'}" for r in results]
    return "\n".join(lines) + "\n"
