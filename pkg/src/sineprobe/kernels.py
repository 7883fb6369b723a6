"""Hot inner loops of the inference engine.

The strided 1D convolution dominates encoder runtime, so it ships in two
interchangeable flavors:

* ``numba`` -- an ``@njit`` triple loop (JIT-compiled, ``nogil`` so signals
  can be encoded from a thread pool),
* ``numpy`` -- an im2col view plus a BLAS ``tensordot``.

Both accumulate in float64 and agree to rounding error; results are cast back
to the caller's dtype by :mod:`sineprobe.encoder`.  Selection happens once at
import time via the ``SINEPROBE_KERNEL`` environment variable:

    SINEPROBE_KERNEL=auto   use numba when importable, else numpy (default)
    SINEPROBE_KERNEL=numba  require numba, fail fast if missing
    SINEPROBE_KERNEL=numpy  force the pure-numpy path

``benchmarks/bench_kernels.py`` times both flavors side by side.
"""

from __future__ import annotations

import os

import numpy as np

_ENV_VAR = "SINEPROBE_KERNEL"


def conv1d_numpy(x: np.ndarray, weight: np.ndarray, stride: int) -> np.ndarray:
    """im2col + BLAS: x (C_in, L), weight (C_out, C_in, K) -> (C_out, L')."""
    c_in, length = x.shape
    c_out, _, kernel = weight.shape
    out_len = (length - kernel) // stride + 1
    x = np.ascontiguousarray(x)
    cols = np.lib.stride_tricks.as_strided(
        x,
        shape=(c_in, out_len, kernel),
        strides=(x.strides[0], x.strides[1] * stride, x.strides[1]),
        writeable=False,
    )
    return np.tensordot(weight, cols, axes=([1, 2], [0, 2]))


try:
    from numba import njit

    @njit(cache=True, nogil=True)
    def _conv1d_jit(x, weight, stride, out):  # pragma: no cover - exercised via wrapper
        c_out, c_in, kernel = weight.shape
        out_len = out.shape[1]
        # explicit im2col into a contiguous buffer, then one BLAS matmul;
        # beats both the scalar loop and numpy's tensordot (which pays for
        # transpose copies of the strided column view)
        flat_w = np.ascontiguousarray(weight.reshape(c_out, c_in * kernel))
        buf = np.empty((c_in * kernel, out_len))
        for i in range(c_in):
            for k in range(kernel):
                row = i * kernel + k
                for t in range(out_len):
                    buf[row, t] = x[i, t * stride + k]
        np.dot(flat_w, buf, out)

    def conv1d_numba(x: np.ndarray, weight: np.ndarray, stride: int) -> np.ndarray:
        c_in, length = x.shape
        c_out, _, kernel = weight.shape
        out_len = (length - kernel) // stride + 1
        out = np.empty((c_out, out_len), dtype=np.float64)
        _conv1d_jit(np.ascontiguousarray(x), np.ascontiguousarray(weight), stride, out)
        return out

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    conv1d_numba = None
    HAVE_NUMBA = False


def _select_backend() -> str:
    choice = os.environ.get(_ENV_VAR, "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(f"{_ENV_VAR} must be auto, numba or numpy, got {choice!r}")
    if choice == "numpy":
        return "numpy"
    if HAVE_NUMBA:
        return "numba"
    if choice == "numba":
        raise RuntimeError(f"{_ENV_VAR}=numba but numba is not installed")
    return "numpy"


BACKEND = _select_backend()
conv1d_core = conv1d_numba if BACKEND == "numba" else conv1d_numpy
