"""Backend selection for the per-node kernels.

``SHELL6P_BACKEND=numpy`` forces the vectorized numpy fallback,
``SHELL6P_BACKEND=numba`` requires the compiled kernels.  Unset, numba is
used when importable.  The chosen module is exposed as ``kernels`` and the
name as ``BACKEND``; see ``benchmarks/bench_backends.py`` for a comparison.
"""
from __future__ import annotations

import os

_env = os.environ.get("SHELL6P_BACKEND", "").strip().lower()
if _env not in ("", "numba", "numpy"):
    raise RuntimeError(
        f"SHELL6P_BACKEND must be 'numba' or 'numpy', got {_env!r}"
    )

if _env == "numpy":
    BACKEND = "numpy"
elif _env == "numba":
    from . import _kernels_numba  # noqa: F401  (raises if numba missing)

    BACKEND = "numba"
else:
    try:
        from . import _kernels_numba  # noqa: F401

        BACKEND = "numba"
    except ImportError:
        BACKEND = "numpy"

if BACKEND == "numba":
    from . import _kernels_numba as kernels
else:
    from . import _kernels_numpy as kernels

__all__ = ["BACKEND", "kernels"]
