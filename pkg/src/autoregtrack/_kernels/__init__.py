"""Hot numeric kernels, compiled when available.

The Cython module ``_ckernels`` is preferred; if it was not built (or
``AUTOREGTRACK_PURE=1`` is set) the numpy implementations in ``_fallback``
are used instead. ``BACKEND`` names the active one.
"""

import os

from . import _fallback

_NAMES = (
    "masked_softmax",
    "masked_softmax_backward",
    "layer_norm",
    "layer_norm_backward",
    "gelu",
    "gelu_backward",
    "bilinear_sample",
    "crop_resize",
)

_compiled = None
if os.environ.get("AUTOREGTRACK_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _compiled
    except ImportError:
        _compiled = None

_impl = _compiled if _compiled is not None else _fallback
BACKEND = "cython" if _compiled is not None else "numpy"

masked_softmax = _impl.masked_softmax
masked_softmax_backward = _impl.masked_softmax_backward
layer_norm = _impl.layer_norm
layer_norm_backward = _impl.layer_norm_backward
gelu = _impl.gelu
gelu_backward = _impl.gelu_backward
bilinear_sample = _impl.bilinear_sample
crop_resize = _impl.crop_resize


def compiled():
    """The compiled module, or None if it is unavailable."""
    return _compiled


def fallback():
    return _fallback
