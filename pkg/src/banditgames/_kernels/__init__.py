"""Hot loops with a compiled backend and a pure-Python fallback.

The compiled extension ``_core`` is used when it imports; otherwise, or when
the environment variable ``BANDITGAMES_PURE`` is set to a non-empty value
other than ``0``, the functions come from ``_pycore``. Both implement the
same operations in the same order, so they agree to the last bit on the
same machine.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np

from . import _pycore

COURNOT = _pycore.COURNOT
MATRIX2 = _pycore.MATRIX2

OK = _pycore.OK
PROX_FAILED = _pycore.PROX_FAILED
INFEASIBLE = _pycore.INFEASIBLE
NONFINITE = _pycore.NONFINITE


def _load_backend():
    if os.environ.get("BANDITGAMES_PURE", "") not in ("", "0"):
        return _pycore, "python"
    try:
        from . import _core
    except ImportError:
        return _pycore, "python"
    return _core, "compiled"


backend, BACKEND = _load_backend()


def get_backend(name: str | None = None):
    """Kernel module by name: ``'compiled'``, ``'python'`` or None for the default."""
    if name is None:
        return backend
    if name == "python":
        return _pycore
    if name == "compiled":
        from . import _core

        return _core
    raise ValueError(f"unknown kernel backend {name!r}")


def compiled_available() -> bool:
    try:
        from . import _core  # noqa: F401
    except ImportError:
        return False
    return True


@dataclass(frozen=True, eq=False)
class KernelModel:
    """Cost model the compiled loop can evaluate directly.

    ``params`` layout: Cournot ``[costs, intercepts, slopes]``; 2x2 matrix
    ``[A00, A01, A10, A11, weight]``. Costs are reported as
    ``(c - lo) / width``.
    """

    code: int
    params: np.ndarray
    lo: float = 0.0
    width: float = 1.0

    def rescaled(self, lo: float, hi: float) -> "KernelModel":
        # composing two affine maps: ((c - lo1)/w1 - lo2)/w2
        if self.lo != 0.0 or self.width != 1.0:
            raise ValueError("kernel model is already rescaled")
        return replace(self, lo=float(lo), width=float(hi - lo))
