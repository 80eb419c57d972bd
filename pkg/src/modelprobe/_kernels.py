"""Hot numeric kernels: moment accumulation and fixed-width binning.

Both kernels exist twice, as a numba ``@njit`` version and a pure-numpy
version computing the identical formula. The numba path is used when the
package can import numba and the environment variable ``MODELPROBE_NO_NUMBA``
is unset; setting ``MODELPROBE_NO_NUMBA=1`` forces the numpy path.
``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

_FORCE_NUMPY = os.environ.get("MODELPROBE_NO_NUMBA", "") in ("1", "true", "yes")

try:
    if _FORCE_NUMPY:
        raise ImportError("numba disabled via MODELPROBE_NO_NUMBA")
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


def moments_numpy(x: np.ndarray) -> tuple[float, float, float, float, float]:
    """Mean, second and third central moment, min, max of a flat f64 array."""
    mean = float(x.mean())
    d = x - mean
    m2 = float(np.mean(d * d))
    m3 = float(np.mean(d * d * d))
    return mean, m2, m3, float(x.min()), float(x.max())


def histogram_numpy(x: np.ndarray, lo: float, hi: float, bins: int) -> np.ndarray:
    """Equal-width bin counts over [lo, hi]; last bin right-inclusive."""
    in_range = (x >= lo) & (x <= hi)
    idx = ((x[in_range] - lo) * bins / (hi - lo)).astype(np.int64)
    idx[idx >= bins] = bins - 1
    return np.bincount(idx, minlength=bins).astype(np.int64)


if HAS_NUMBA:

    @njit(cache=True)
    def _moments_numba(x):  # pragma: no cover - exercised via moments()
        n = x.size
        total = 0.0
        mn = x[0]
        mx = x[0]
        for i in range(n):
            v = x[i]
            total += v
            if v < mn:
                mn = v
            if v > mx:
                mx = v
        mean = total / n
        m2 = 0.0
        m3 = 0.0
        for i in range(n):
            d = x[i] - mean
            dd = d * d
            m2 += dd
            m3 += dd * d
        return mean, m2 / n, m3 / n, mn, mx

    @njit(cache=True)
    def _histogram_numba(x, lo, hi, bins):  # pragma: no cover
        counts = np.zeros(bins, dtype=np.int64)
        width = hi - lo
        for i in range(x.size):
            v = x[i]
            if v < lo or v > hi:
                continue
            j = int((v - lo) * bins / width)
            if j >= bins:
                j = bins - 1
            counts[j] += 1
        return counts


def backend() -> str:
    """Name of the active kernel backend, ``numba`` or ``numpy``."""
    return "numba" if HAS_NUMBA else "numpy"


def moments(x: np.ndarray) -> tuple[float, float, float, float, float]:
    """Dispatch to the active backend. ``x`` must be non-empty."""
    flat = np.ascontiguousarray(x, dtype=np.float64).ravel()
    if flat.size == 0:
        raise ValueError("moments of an empty array are undefined")
    if HAS_NUMBA:
        return _moments_numba(flat)
    return moments_numpy(flat)


def histogram_counts(x: np.ndarray, lo: float, hi: float, bins: int) -> np.ndarray:
    """Dispatch to the active backend; expands a zero-width range by ±0.5."""
    flat = np.ascontiguousarray(x, dtype=np.float64).ravel()
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    if HAS_NUMBA:
        return _histogram_numba(flat, float(lo), float(hi), bins)
    return histogram_numpy(flat, float(lo), float(hi), bins)
