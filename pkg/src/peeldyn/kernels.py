"""Backend selection for the lattice prefix sums.

The compiled extension is used when it was built at install time;
otherwise the numpy implementation is used.  Setting the environment
variable ``PEELDYN_KERNELS=numpy`` forces the fallback.
"""

from __future__ import annotations

import logging
import os

from . import _kernels_py

logger = logging.getLogger(__name__)

numpy_prefix_sums = _kernels_py.prefix_sums

try:
    if os.environ.get("PEELDYN_KERNELS", "").lower() == "numpy":
        raise ImportError("numpy kernels requested")
    from ._kernels import prefix_sums as compiled_prefix_sums  # type: ignore[import-not-found]

    prefix_sums = compiled_prefix_sums
    BACKEND = "cython"
except ImportError as exc:  # pragma: no cover - depends on the build
    compiled_prefix_sums = None
    prefix_sums = numpy_prefix_sums
    BACKEND = "numpy"
    logger.debug("using numpy prefix sums (%s)", exc)

__all__ = ["prefix_sums", "numpy_prefix_sums", "compiled_prefix_sums", "BACKEND"]
