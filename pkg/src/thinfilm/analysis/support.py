"""Support tracking, spreading-exponent fits and localized integrals."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import InsufficientSpread
from ..functionals import Field

EMPTY = (math.nan, math.nan)


def support_edges(h: Field, supp_tol: float) -> tuple[float, float]:
    """Outermost threshold crossings of ``h > supp_tol``.

    Crossings are located by linear interpolation between the last node below
    and the first node above the threshold.  Returns ``EMPTY`` when nothing is
    above the threshold and the domain ends when the first/last node is.
    """
    v = h.values
    above = np.flatnonzero(v > supp_tol)
    if above.size == 0:
        return EMPTY
    x = h.x
    lo = h.origin - 0.5 * h.dx
    hi = lo + h.length
    i, j = int(above[0]), int(above[-1])
    if i == 0:
        xl = lo
    else:
        frac = (supp_tol - v[i - 1]) / (v[i] - v[i - 1])
        xl = x[i - 1] + frac * h.dx
    if j == v.size - 1:
        xr = hi
    else:
        frac = (v[j] - supp_tol) / (v[j] - v[j + 1])
        xr = x[j] + frac * h.dx
    return float(xl), float(xr)


def monotone_envelope(values: Sequence[float]) -> np.ndarray:
    """Running maximum; removes one-cell jitter in tracked edges."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return arr
    return np.maximum.accumulate(np.nan_to_num(arr, nan=-np.inf))


@dataclass
class SupportTrace:
    times: np.ndarray
    left_edges: np.ndarray
    right_edges: np.ndarray
    r0: float
    center: float = 0.0
    dx: float = math.nan
    Gamma: np.ndarray = field(init=False)
    fitted_exponent: float = math.nan
    fitted_C: float = math.nan
    fit_residual: float = math.nan

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.left_edges = np.asarray(self.left_edges, dtype=float)
        self.right_edges = np.asarray(self.right_edges, dtype=float)
        radius = np.maximum(np.abs(self.left_edges - self.center), np.abs(self.right_edges - self.center))
        self.Gamma = np.maximum(monotone_envelope(radius) - self.r0, 0.0)

    @classmethod
    def from_ledger(cls, ledger, r0: float, center: float = 0.0, dx: float = math.nan) -> "SupportTrace":
        edges = np.array(ledger.support, dtype=float).reshape(-1, 2)
        return cls(ledger.times, edges[:, 0], edges[:, 1], r0, center, dx)


def fit_spreading_exponent(trace: SupportTrace, window: tuple[float, float],
                           min_samples: int = 10) -> tuple[float, float, float]:
    """Least-squares slope of ``log Gamma`` against ``log t`` on ``window``.

    Returns ``(exponent, C, rms residual)`` and stores them on ``trace``.
    """
    ta, tb = window
    floor = 2.0 * trace.dx if math.isfinite(trace.dx) else 0.0
    sel = (trace.times >= ta) & (trace.times <= tb) & (trace.times > 0) & (trace.Gamma > floor)
    if int(sel.sum()) < min_samples:
        raise InsufficientSpread(
            f"only {int(sel.sum())} samples with Gamma > 2 dx in [{ta}, {tb}]; need {min_samples}")
    lt = np.log(trace.times[sel])
    lg = np.log(trace.Gamma[sel])
    A = np.column_stack([lt, np.ones_like(lt)])
    (slope, icpt), *_ = np.linalg.lstsq(A, lg, rcond=None)
    resid = float(np.sqrt(np.mean((A @ np.array([slope, icpt]) - lg) ** 2)))
    trace.fitted_exponent, trace.fitted_C, trace.fit_residual = float(slope), float(math.exp(icpt)), resid
    return trace.fitted_exponent, trace.fitted_C, resid


def localized_integrals(snapshots: Sequence[tuple[float, np.ndarray]], x: np.ndarray, dx: float,
                        r0: float, s_grid: Sequence[float], exponents: Sequence[float],
                        center: float = 0.0) -> np.ndarray:
    """Tables ``G[i, k] = int_0^T int_{Omega(s_k)} h^xi_i dx dt``.

    ``Omega(s)`` is the domain with ``(-r0 - s, r0 + s)`` (about ``center``)
    removed.  Time integration is trapezoidal over the snapshot times.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any(np.diff(s_grid) <= 0):
        raise ValueError("s_grid must be increasing")
    times = np.array([t for t, _ in snapshots], dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("snapshots must be strictly time ordered")
    dist = np.abs(np.asarray(x, dtype=float) - center)
    out = np.zeros((len(exponents), s_grid.size))
    if times.size < 2:
        return out
    for i, xi in enumerate(exponents):
        # spatial integrals per snapshot and per s
        per_t = np.empty((times.size, s_grid.size))
        for k, (_, h) in enumerate(snapshots):
            hp = np.power(np.clip(np.asarray(h, dtype=float), 0.0, None), xi)
            outside = dist[None, :] >= (r0 + s_grid)[:, None]
            per_t[k] = (outside * hp[None, :]).sum(axis=1) * dx
        out[i] = np.sum(0.5 * (per_t[1:] + per_t[:-1]) * np.diff(times)[:, None], axis=0)
    return out
