"""Peak finding on scan traces and maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter
from scipy.signal import find_peaks


@dataclass(frozen=True)
class Peak:
    location: float
    height: float
    fwhm: float


def half_max_width(x: np.ndarray, y: np.ndarray, i: int, periodic: bool = False) -> float:
    """Full width at half maximum of the peak at index ``i``, linearly interpolated.

    Returns ``nan`` when the trace never drops below half height on a side
    (and is not periodic).
    """
    n = len(y)
    half = 0.5 * y[i]
    step = np.diff(x).mean() if n > 1 else 0.0

    def walk(direction: int) -> float:
        for s in range(1, n):
            j = i + direction * s
            if periodic:
                j %= n
            elif not 0 <= j < n:
                return np.nan
            if y[j] < half:
                prev = i + direction * (s - 1)
                prev = prev % n if periodic else prev
                frac = (y[prev] - half) / (y[prev] - y[j])
                return (s - 1 + frac) * step
        return np.nan

    return walk(-1) + walk(+1)


def find_trace_peaks(
    x: np.ndarray,
    y: np.ndarray,
    factor: float = 3.0,
    periodic: bool = False,
) -> list[Peak]:
    """Local maxima above ``factor`` times the trace median.

    Peaks closer than half the median peak spacing are merged, keeping the taller.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) < 3:
        return []
    thr = factor * np.median(y)
    if periodic:
        ext = np.concatenate([y[-1:], y, y[:1]])
        idx, _ = find_peaks(ext, height=thr)
        idx = idx - 1
    else:
        idx, _ = find_peaks(y, height=thr)
    idx = [int(i) for i in idx if y[i] > thr]
    if len(idx) > 2:
        gap = 0.5 * np.median(np.diff(x[idx]))
        merged = [idx[0]]
        for i in idx[1:]:
            if x[i] - x[merged[-1]] < gap:
                if y[i] > y[merged[-1]]:
                    merged[-1] = i
            else:
                merged.append(i)
        idx = merged
    return [Peak(float(x[i]), float(y[i]), half_max_width(x, y, i, periodic)) for i in idx]


def find_map_peaks(
    omegas: np.ndarray,
    kps: np.ndarray,
    values: np.ndarray,
    prominence: float = 0.1,
    row_fraction: float = 0.25,
) -> np.ndarray:
    """Ridge maxima of an ``n(omega, k)`` map as an ``(n, 2)`` array of ``(omega, k)``.

    A point qualifies when it is a 3x3 local maximum (``k`` periodic), a peak
    along ``omega`` with log-prominence at least ``prominence``, and at least
    ``row_fraction`` of the strongest response at the same ``omega``. The last
    condition drops the interference side lobes of a resonance in ``k``.
    """
    L = np.log(np.maximum(values, np.finfo(float).tiny))
    local = maximum_filter(L, size=(3, 3), mode=("nearest", "wrap"))
    floor = L.max(axis=1) + np.log(row_fraction)
    out = []
    for j in range(L.shape[1]):
        col_peaks, _ = find_peaks(L[:, j], prominence=prominence)
        for i in col_peaks:
            if L[i, j] >= local[i, j] and L[i, j] >= floor[i]:
                out.append((omegas[i], kps[j]))
    out.sort()
    return np.array(out, dtype=float).reshape(-1, 2)
