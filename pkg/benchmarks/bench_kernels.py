"""Compare the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--frames N]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from autoregtrack import _kernels as K


def kernel_cases(rng):
    n, d = 137, 64
    x = rng.standard_normal((n, n))
    mask = rng.random((n, n)) < 0.7
    mask[:, 0] = True
    y = K.fallback().masked_softmax(x, mask)
    dy = rng.standard_normal((n, n))
    h = rng.standard_normal((n, d))
    g, b = rng.standard_normal(d), rng.standard_normal(d)
    _, xhat, rstd = K.fallback().layer_norm(h, g, b, 1e-6)
    big = rng.standard_normal((n, 4 * d))
    grid = np.ascontiguousarray(rng.random((8, 8, d)))
    pts = np.ascontiguousarray(rng.uniform(0, 7, size=(64, 2)))
    img = np.ascontiguousarray(rng.random((64, 64, 3)))
    pad = img.reshape(-1, 3).mean(axis=0)
    return {
        "masked_softmax": ("masked_softmax", (x, mask)),
        "masked_softmax_backward": ("masked_softmax_backward", (y, dy)),
        "layer_norm": ("layer_norm", (h, g, b, 1e-6)),
        "layer_norm_backward": ("layer_norm_backward", (h, xhat, rstd, g)),
        "gelu": ("gelu", (big,)),
        "gelu_backward": ("gelu_backward", (big, big)),
        "bilinear_sample": ("bilinear_sample", (grid, pts)),
        "crop_resize": ("crop_resize", (img, 30.5, 28.0, 41.0, 64, pad)),
    }


def bench_kernels(repeat: int) -> list[tuple[str, float, float | None]]:
    rng = np.random.default_rng(0)
    rows = []
    compiled, fallback = K.compiled(), K.fallback()
    for label, (name, args) in kernel_cases(rng).items():
        t_np = min(timeit.repeat(lambda: getattr(fallback, name)(*args), number=20,
                                 repeat=repeat)) / 20
        t_c = None
        if compiled is not None:
            t_c = min(timeit.repeat(lambda: getattr(compiled, name)(*args), number=20,
                                    repeat=repeat)) / 20
        rows.append((label, t_np, t_c))
    return rows


TRACK_SNIPPET = """
import time
from autoregtrack import BACKEND
from autoregtrack.data import SyntheticConfig, generate_sequence
from autoregtrack.model import Model, ModelConfig
from autoregtrack.track import Tracker
seq = generate_sequence(SyntheticConfig(length={frames}), 0)
tr = Tracker(Model(ModelConfig(vocab=128)))
tr.run(seq.frames[:3], seq.boxes[0])
t = time.perf_counter()
tr.run(seq.frames, seq.boxes[0])
print(BACKEND, 1000 * (time.perf_counter() - t) / (len(seq) - 1))
"""


def bench_tracking(frames: int) -> dict:
    out = {}
    for pure in ("0", "1"):
        env = dict(os.environ, AUTOREGTRACK_PURE=pure)
        res = subprocess.run([sys.executable, "-c", TRACK_SNIPPET.format(frames=frames)],
                             env=env, capture_output=True, text=True, check=True)
        backend, ms = res.stdout.split()
        out[backend] = float(ms)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--frames", type=int, default=16)
    args = ap.parse_args(argv)

    print(f"{'kernel':<26}{'numpy us':>12}{'cython us':>12}{'speedup':>10}")
    for label, t_np, t_c in bench_kernels(args.repeat):
        c = "-" if t_c is None else f"{1e6 * t_c:.1f}"
        s = "-" if t_c is None else f"{t_np / t_c:.2f}x"
        print(f"{label:<26}{1e6 * t_np:>12.1f}{c:>12}{s:>10}")
    print()
    for backend, ms in bench_tracking(args.frames).items():
        print(f"tracking ms/frame ({backend}): {ms:.2f}")


if __name__ == "__main__":
    main()
