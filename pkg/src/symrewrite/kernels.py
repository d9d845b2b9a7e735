"""Kernel backend selection.

The compiled extension is used when it was built; otherwise, or when
``SYMREWRITE_PURE_PYTHON=1`` is set, the numpy implementation is used.
Both backends agree to rounding but are not bitwise identical, so a run is
only reproducible byte-for-byte under the same backend.
"""

import os

from . import _kernels_py

if os.environ.get("SYMREWRITE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward
xent_forward = _impl.xent_forward
xent_backward = _impl.xent_backward
