"""Kernel selection: compiled Cython kernels when available, pure Python otherwise.

Set ``UNORIENTED_AG_PURE=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if not os.environ.get("UNORIENTED_AG_PURE"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

lift_signs = _impl.lift_signs
march_line = _impl.march_line
REASON_BOUNDARY = _kernels_py.REASON_BOUNDARY
REASON_SINGULAR = _kernels_py.REASON_SINGULAR
REASON_MAX_LENGTH = _kernels_py.REASON_MAX_LENGTH
REASON_NAMES = {
    REASON_BOUNDARY: "boundary",
    REASON_SINGULAR: "singular-set proximity",
    REASON_MAX_LENGTH: "max length",
}
