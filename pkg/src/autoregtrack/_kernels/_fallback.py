"""Pure numpy implementations of the hot kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same signature
and semantics; the parity tests hold the two within 1e-12.
"""

import numpy as np
from scipy.special import erf

_INV_SQRT2 = 0.7071067811865476
_INV_SQRT2PI = 0.3989422804014327


def masked_softmax(logits, mask):
    """Row softmax where ``mask == False`` entries get exactly zero weight.

    Every row must have at least one allowed entry; callers check that.
    """
    z = np.where(mask, logits, -np.inf)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def masked_softmax_backward(probs, grad):
    s = (probs * grad).sum(axis=1, keepdims=True)
    return probs * (grad - s)


def layer_norm(x, gamma, beta, eps):
    mu = x.mean(axis=1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd
    return xhat * gamma + beta, xhat, rstd


def layer_norm_backward(dy, xhat, rstd, gamma):
    n = xhat.shape[1]
    dgamma = (dy * xhat).sum(axis=0)
    dbeta = dy.sum(axis=0)
    g = dy * gamma
    dx = (rstd / n) * (n * g - g.sum(axis=1, keepdims=True)
                       - xhat * (g * xhat).sum(axis=1, keepdims=True))
    return dx, dgamma, dbeta


def gelu(x):
    return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))


def gelu_backward(x, dy):
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    pdf = _INV_SQRT2PI * np.exp(-0.5 * x * x)
    return dy * (cdf + x * pdf)


def bilinear_sample(grid, points):
    """Sample ``grid[h, w, c]`` at continuous ``points[n] = (col, row)``.

    Integer coordinates hit cell centers exactly. Coordinates are clamped to
    the grid border.
    """
    gh, gw, _ = grid.shape
    u = np.clip(points[:, 0], 0.0, gw - 1.0)
    v = np.clip(points[:, 1], 0.0, gh - 1.0)
    u0 = np.minimum(np.floor(u).astype(np.intp), gw - 1)
    v0 = np.minimum(np.floor(v).astype(np.intp), gh - 1)
    u1 = np.minimum(u0 + 1, gw - 1)
    v1 = np.minimum(v0 + 1, gh - 1)
    fu = (u - u0)[:, None]
    fv = (v - v0)[:, None]
    top = grid[v0, u0] * (1.0 - fu) + grid[v0, u1] * fu
    bot = grid[v1, u0] * (1.0 - fu) + grid[v1, u1] * fu
    return top * (1.0 - fv) + bot * fv


def crop_resize(image, cx, cy, side, out_side, pad):
    """Bilinear resample of the square window (cx, cy, side) to out_side².

    Pixel ``k`` covers [k, k+1); taps falling outside the image read ``pad``.
    """
    h, w, c = image.shape
    step = side / out_side
    coords = cx - 0.5 * side + (np.arange(out_side) + 0.5) * step - 0.5
    rows = cy - 0.5 * side + (np.arange(out_side) + 0.5) * step - 0.5
    x0 = np.floor(coords).astype(np.intp)
    y0 = np.floor(rows).astype(np.intp)
    fx = coords - x0
    fy = rows - y0

    padded = np.empty((h + 2, w + 2, c))
    padded[:] = pad
    padded[1:-1, 1:-1] = image
    # out-of-range taps collapse onto the pad border
    xa = np.clip(x0 + 1, 0, w + 1)
    xb = np.clip(x0 + 2, 0, w + 1)
    ya = np.clip(y0 + 1, 0, h + 1)
    yb = np.clip(y0 + 2, 0, h + 1)
    fx = fx[None, :, None]
    fy = fy[:, None, None]
    top = padded[ya][:, xa] * (1.0 - fx) + padded[ya][:, xb] * fx
    bot = padded[yb][:, xa] * (1.0 - fx) + padded[yb][:, xb] * fx
    return top * (1.0 - fy) + bot * fy
