"""Joint trajectory-appearance autoregressive visual tracking at desk scale."""

from ._kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
