"""Backend selection for the classifier's hot loops.

The compiled Cython module is used when it was built; otherwise the numpy
fallback. Set ``LEXST_BACKEND=python`` to force the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("LEXST_BACKEND", "").lower() == "python":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

forward_batch = _impl.forward_batch
loss_grad_batch = _impl.loss_grad_batch

__all__ = ["BACKEND", "forward_batch", "loss_grad_batch"]
