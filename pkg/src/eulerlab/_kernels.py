"""Kernel dispatch: compiled extension when importable, NumPy otherwise.

Set EULERLAB_PURE=1 in the environment to force the NumPy implementations
(used by the equivalence tests and the benchmark).
"""

import os

import numpy as np

from . import _kernels_py

_impl = _kernels_py
COMPILED = False
if os.environ.get("EULERLAB_PURE", "") != "1":
    try:
        from . import _core as _core_mod

        _impl = _core_mod
        COMPILED = True
    except ImportError:
        pass


def implementation_name() -> str:
    return "compiled" if COMPILED else "numpy"


def _carray(a, dtype=float):
    # the compiled kernels take writable memoryviews; copy frozen inputs
    a = np.ascontiguousarray(a, dtype=dtype)
    if not a.flags.writeable:
        a = a.copy()
    return a


def gather_interp(f, xi, yi, order: int = 3):
    """Interpolate periodic f at fractional index coordinates (xi, yi)."""
    xi = np.asarray(xi, dtype=float)
    shape = xi.shape
    out = _impl.gather_interp(
        _carray(f),
        _carray(xi).ravel(),
        _carray(yi).ravel(),
        int(order),
    )
    return np.asarray(out).reshape(shape)


def holder_distance_matrix(stacks, h: float, gamma: float, shifts):
    """Pairwise order-(1+gamma) distances between (N, 6, n, n) stacks."""
    return np.asarray(
        _impl.holder_distance_matrix(
            _carray(stacks),
            float(h),
            float(gamma),
            _carray(shifts, dtype=np.int64),
        )
    )


def greedy_pack(D, eps: float):
    """Indices of the greedy first-index maximal eps-separated subset."""
    return np.asarray(_impl.greedy_pack(_carray(D), float(eps)))
