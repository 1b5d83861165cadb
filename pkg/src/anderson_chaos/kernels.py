"""Fundamental solutions of the heat/wave equations and the chaos kernels.

Everything here is a pure function.  The convention ``G_t = 0`` for ``t < 0``
is applied throughout, and the wave Fourier factor ``sin(t|xi|)/|xi|`` is
evaluated by series near the removable singularity.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .params import EquationKind

#: below this value of t*|xi| the wave factor uses its Taylor series
_WAVE_SERIES_CUT = 1e-4

#: hard cap on the symmetrization order (k! permutations)
MAX_SYMMETRIZE_ORDER = 6


@dataclass(frozen=True)
class SpaceTimePoint:
    t: float
    x: tuple

    @staticmethod
    def of(t: float, x) -> "SpaceTimePoint":
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return SpaceTimePoint(float(t), tuple(x))


@dataclass(frozen=True)
class OrderedTimes:
    """Strictly increasing times inside (0, horizon)."""

    times: tuple
    horizon: float

    def __post_init__(self):
        ts = self.times
        if any(not 0.0 < a < self.horizon for a in ts):
            raise ValueError("times must lie strictly inside (0, horizon)")
        if any(a >= b for a, b in zip(ts, ts[1:])):
            raise ValueError("times must be strictly increasing")

    @staticmethod
    def of(times: Sequence[float], horizon: float) -> "OrderedTimes":
        return OrderedTimes(tuple(float(s) for s in times), float(horizon))


def green_fourier(eq: EquationKind, t, xi_norm):
    """Spatial Fourier transform of the fundamental solution at |xi|.

    Heat: ``exp(-t|xi|^2/2)``; wave: ``sin(t|xi|)/|xi|`` with value ``t``
    at ``xi = 0``.  Zero for ``t < 0``.  Vectorized in both arguments.
    """
    t = np.asarray(t, dtype=float)
    r = np.asarray(xi_norm, dtype=float)
    if np.any(r < 0):
        raise ValueError("xi_norm must be nonnegative")
    if eq is EquationKind.HEAT:
        out = np.exp(-np.clip(t, 0.0, None) * r * r / 2.0)
    else:
        z = t * r
        small = np.abs(z) < _WAVE_SERIES_CUT
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(small, t * (1.0 - z * z / 6.0), np.sin(z) / np.where(r == 0.0, 1.0, r))
        out = np.where(r == 0.0, t, out)
    out = np.where(t < 0.0, 0.0, out)
    if out.ndim == 0:
        return float(out)
    return out


def green_physical(eq: EquationKind, d: int, t: float, x) -> float:
    """Fundamental solution in physical space.

    Heat admits any ``d >= 1``; the wave kernel is a function only for
    ``d in {1, 2}`` (it is a measure for d = 3 and a distribution beyond).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != d:
        raise ValueError(f"point has dimension {x.size}, expected {d}")
    if t < 0.0:
        return 0.0
    if t == 0.0:
        raise ValueError("G_0 is a point mass; not a function")
    r2 = float(np.dot(x, x))
    if eq is EquationKind.HEAT:
        return (2.0 * math.pi * t) ** (-d / 2.0) * math.exp(-r2 / (2.0 * t))
    if d == 1:
        return 0.5 if r2 < t * t else 0.0
    if d == 2:
        if r2 >= t * t:
            return 0.0
        return 1.0 / (2.0 * math.pi * math.sqrt(t * t - r2))
    raise ValueError("wave kernel is not a function for d >= 3")


def chaos_kernel_fourier(eq: EquationKind, t: float, x, times: OrderedTimes,
                         xis) -> complex:
    """Spatial Fourier transform of the order-k chaos kernel.

    ``exp(-i (xi_1+...+xi_k).x) * prod_j FG_{t_{j+1}-t_j}(|xi_1+...+xi_j|)``
    with ``t_{k+1} = t``.
    """
    if abs(times.horizon - t) > 1e-12 * max(1.0, abs(t)):
        raise ValueError("times.horizon must equal t")
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    k = len(times.times)
    if xis.shape[0] != k:
        raise ValueError(f"need {k} frequency vectors, got {xis.shape[0]}")
    if xis.shape[1] != x.size:
        raise ValueError("frequency/space dimension mismatch")
    partial = np.cumsum(xis, axis=0)
    ts = list(times.times) + [t]
    val = np.exp(-1j * float(np.dot(partial[-1], x)))
    for j in range(k):
        gap = ts[j + 1] - ts[j]
        val *= green_fourier(eq, gap, float(np.linalg.norm(partial[j])))
    return complex(val)


def symmetrized_kernel_fourier(eq: EquationKind, t: float, x, times, xis) -> complex:
    """Spatial Fourier transform of the symmetrized chaos kernel.

    Averages the (time, frequency)-pair permutations; permutations whose
    time arrangement is not increasing contribute zero through the ordering
    indicator of the kernel.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    k = times.size
    if k > MAX_SYMMETRIZE_ORDER:
        raise ValueError(f"symmetrization capped at k={MAX_SYMMETRIZE_ORDER}")
    if xis.shape[0] != k:
        raise ValueError("need one frequency vector per time")
    total = 0.0 + 0.0j
    for perm in itertools.permutations(range(k)):
        ts = times[list(perm)]
        if np.any(ts[:-1] >= ts[1:]) or not (0.0 < ts[0] and ts[-1] < t):
            continue
        total += chaos_kernel_fourier(
            eq, t, x, OrderedTimes.of(ts, t), xis[list(perm)])
    return total / math.factorial(k)
