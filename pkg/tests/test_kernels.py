import numpy as np
import pytest

from autoregtrack import BACKEND
from autoregtrack import _kernels as K

compiled = K.compiled()
fb = K.fallback()
needs_c = pytest.mark.skipif(compiled is None, reason="compiled kernels not built")


def test_backend_name():
    assert BACKEND in ("cython", "numpy")
    assert (BACKEND == "cython") == (compiled is not None)


@needs_c
def test_masked_softmax_parity(rng):
    x = rng.standard_normal((7, 9))
    mask = rng.random((7, 9)) < 0.6
    mask[:, 0] = True
    a, b = compiled.masked_softmax(x, mask), fb.masked_softmax(x, mask)
    assert np.allclose(a, b, atol=1e-14)
    assert np.all(a[~mask] == 0.0)
    dy = rng.standard_normal((7, 9))
    assert np.allclose(compiled.masked_softmax_backward(a, dy), fb.masked_softmax_backward(b, dy),
                       atol=1e-13)


@needs_c
def test_layer_norm_parity(rng):
    x = rng.standard_normal((5, 6))
    g, beta = rng.standard_normal(6), rng.standard_normal(6)
    ya, xa, ra = compiled.layer_norm(x, g, beta, 1e-6)
    yb, xb, rb = fb.layer_norm(x, g, beta, 1e-6)
    assert np.allclose(ya, yb, atol=1e-13) and np.allclose(ra, rb)
    dy = rng.standard_normal((5, 6))
    for u, v in zip(compiled.layer_norm_backward(dy, xa, ra, g),
                    fb.layer_norm_backward(dy, xb, rb, g)):
        assert np.allclose(u, v, atol=1e-12)


@needs_c
def test_gelu_parity(rng):
    x = rng.standard_normal((4, 3, 2)) * 3
    assert np.allclose(compiled.gelu(x), fb.gelu(x), atol=1e-14)
    dy = rng.standard_normal(x.shape)
    assert np.allclose(compiled.gelu_backward(x, dy), fb.gelu_backward(x, dy), atol=1e-13)


@needs_c
def test_bilinear_and_crop_parity(rng):
    grid = np.ascontiguousarray(rng.random((5, 6, 3)))
    pts = np.ascontiguousarray(rng.uniform(-1, 7, size=(20, 2)))
    assert np.allclose(compiled.bilinear_sample(grid, pts), fb.bilinear_sample(grid, pts))
    img = np.ascontiguousarray(rng.random((20, 24, 3)))
    pad = np.array([0.1, 0.2, 0.3])
    a = compiled.crop_resize(img, 5.3, 18.2, 13.0, 8, pad)
    b = fb.crop_resize(img, 5.3, 18.2, 13.0, 8, pad)
    assert np.allclose(a, b, atol=1e-13)


def test_bilinear_sample_oracle():
    grid = np.arange(16.0).reshape(4, 4, 1)
    # (col, row) at the midpoint between four cells
    out = K.bilinear_sample(grid, np.array([[1.5, 0.5]]))
    assert out[0, 0] == pytest.approx(np.mean([1, 2, 5, 6]))


def test_crop_identity_window():
    img = np.random.default_rng(0).random((8, 8, 3))
    out = K.crop_resize(img, 4.0, 4.0, 8.0, 8, np.zeros(3))
    assert np.allclose(out, img)


def test_crop_pads_outside_image():
    img = np.ones((4, 4, 3))
    out = K.crop_resize(img, 0.0, 0.0, 8.0, 8, np.full(3, 0.5))
    assert np.allclose(out[0, 0], 0.5)
    assert np.allclose(out[-1, -1], 1.0)
