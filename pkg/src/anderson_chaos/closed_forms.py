"""Exact formulas and bounds: integral lemmas, named constants, tail bounds.

Every constant funnels through the Gamma function (scipy.special.gamma,
good to machine precision on the ranges used here).  The isotropic
d-dimensional frequency integrals are reduced to radial 1-d integrals
weighted by the sphere area ``c_d r^(d-1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn

from .params import EquationKind

#: argmin of Gamma on (0, inf); Gamma decreases before and increases after
X0_GAMMA_ARGMIN = 1.461632144968362

#: relative truncation threshold for the dominating tail series
_TAIL_RELATIVE_CUT = 1e-16


class DalangConstant(NamedTuple):
    value: float
    bound: float
    r_heat: float
    r_wave: float


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d (2 for d=1)."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    return 2.0 * math.pi ** (d / 2.0) / gamma_fn(d / 2.0)


def simplex_power_integral(t: float, betas) -> float:
    """Integral of ``prod (t_{j+1}-t_j)^beta_j`` over the ordered simplex.

    Equals ``prod Gamma(beta_j+1) * t^(|beta|+n) / Gamma(|beta|+n+1)`` with
    ``t_{n+1} = t``; each exponent must exceed -1.
    """
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    if t <= 0.0:
        raise ValueError("t must be positive")
    if np.any(betas <= -1.0):
        raise ValueError("every exponent must exceed -1")
    n = betas.size
    total = float(np.sum(betas))
    log_num = float(np.sum([math.lgamma(b + 1.0) for b in betas]))
    return math.exp(log_num - math.lgamma(total + n + 1.0)) * t ** (total + n)


def gaussian_freq_moment(t: float, a: float) -> float:
    """``int_R exp(-t xi^2) |xi|^a dxi = Gamma((1+a)/2) t^(-(1+a)/2)``."""
    if t <= 0.0:
        raise ValueError("t must be positive")
    if a <= -1.0:
        raise ValueError("exponent must exceed -1")
    return gamma_fn((1.0 + a) / 2.0) * t ** (-(1.0 + a) / 2.0)


def _c_tilde(a: float) -> float:
    """Piecewise constant in the wave frequency-moment formula."""
    if a == 0.0:
        return math.pi / 2.0
    if 0.0 < a < 1.0:
        return gamma_fn(a) * math.sin(math.pi * a / 2.0) / (1.0 - a)
    if -1.0 < a < 0.0:
        return gamma_fn(1.0 + a) * math.sin(math.pi * a / 2.0) / (a * (1.0 - a))
    raise ValueError(f"exponent a={a} not in (-1, 1)")


def wave_freq_moment(t: float, a: float) -> float:
    """``int_R sin^2(t|xi|)/|xi|^2 |xi|^a dxi = 2^(1-a) Ctilde_a t^(1-a)``."""
    if t <= 0.0:
        raise ValueError("t must be positive")
    return 2.0 ** (1.0 - a) * _c_tilde(a) * t ** (1.0 - a)


def riesz_time_constants(h0: float) -> tuple[float, float]:
    """``(alpha_{H0}, c_{H0})`` for the fractional temporal kernel."""
    if not 0.5 < h0 < 1.0:
        raise ValueError(f"h0={h0} not in (1/2, 1)")
    alpha = h0 * (2.0 * h0 - 1.0)
    c = gamma_fn(2.0 * h0 + 1.0) * math.sin(math.pi * h0) / (2.0 * math.pi)
    return alpha, c


def riesz_space_constant(h: float) -> float:
    """``c_H = Gamma(2H+1) sin(pi H) / (2 pi)`` for ``H in (0, 1)``."""
    if not 0.0 < h < 1.0:
        raise ValueError(f"h={h} not in (0, 1)")
    return gamma_fn(2.0 * h + 1.0) * math.sin(math.pi * h) / (2.0 * math.pi)


def dalang_constant(d: int, alpha: float) -> DalangConstant:
    """Numerical value and closed bound of ``int (1+|xi|^2)^{-1} |xi|^{-a}``.

    The value is computed by radial quadrature; the bound is
    ``c_d (1/(d-alpha) + 1/(2-(d-alpha)))``.  Also reports the time
    exponents ``r_alpha`` of both equations.
    """
    if not max(d - 2.0, 0.0) < alpha < d:
        raise ValueError(f"alpha={alpha} outside (max(d-2,0), d) for d={d}")
    cd = sphere_area(d)
    s = d - alpha  # integrand ~ r^(s-1) at 0, r^(s-3) at infinity

    def radial(r):
        return r ** (d - 1.0 - alpha) / (1.0 + r * r)

    head, _ = integrate.quad(radial, 0.0, 1.0, points=[0.0])
    tail, _ = integrate.quad(radial, 1.0, np.inf)
    value = cd * (head + tail)
    bound = cd * (1.0 / s + 1.0 / (2.0 - s))
    return DalangConstant(value, bound, -s / 2.0, 2.0 - s)


def heat_k_alpha(t: float, d: int, alpha: float) -> float:
    """``int_{R^d} exp(-t|xi|^2) |xi|^{-alpha} dxi`` in closed form."""
    if t <= 0.0:
        raise ValueError("t must be positive")
    if not max(d - 2.0, 0.0) < alpha < d:
        raise ValueError(f"alpha={alpha} outside (max(d-2,0), d) for d={d}")
    s = (d - alpha) / 2.0
    return sphere_area(d) / 2.0 * gamma_fn(s) * t ** (-s)


def gamma0_window(t: float, h0: float) -> float:
    """Mass ``int_{-t}^{t} gamma0(s) ds = 2 H0 t^(2H0-1)`` of the kernel."""
    if t <= 0.0:
        raise ValueError("t must be positive")
    if not 0.5 < h0 < 1.0:
        raise ValueError(f"h0={h0} not in (1/2, 1)")
    return 2.0 * h0 * t ** (2.0 * h0 - 1.0)


def tail_index_threshold(eq: EquationKind, d: int, a: float) -> int:
    """Smallest order from which the dominating series is term-decreasing.

    Chosen so that the Gamma argument in the denominator passes the argmin
    of Gamma: ``m0 * rho > x0`` with ``rho`` the per-order exponent.
    """
    rho = 1.0 - (d - a) / 2.0 if eq is EquationKind.HEAT else 3.0 - d + a
    return int(math.floor(X0_GAMMA_ARGMIN / rho)) + 1


def dominating_term(eq: EquationKind, d: int, a: float, b: float, t: float,
                    k: int, gamma0t: float) -> float:
    """k-th term of the dominating series for the chaos second moments.

    ``Gamma0^k K^k Gamma(rho_a)^k (t v 1)^(k rho_b) / Gamma(k rho_a + 1)``
    where the heat equation uses ``rho = 1-(d-.)/2`` and the wave equation
    ``rho = 3-d+.`` (the Gamma factor in the numerator is 2 for the wave).
    """
    if not max(d - 2.0, 0.0) < a < b < d:
        raise ValueError("need max(d-2,0) < a < b < d")
    cd = sphere_area(d)
    kdab = cd * (1.0 / (d - b) + 1.0 / (2.0 - (d - a)))
    tv = max(t, 1.0)
    if eq is EquationKind.HEAT:
        rho_a = 1.0 - (d - a) / 2.0
        rho_b = 1.0 - (d - b) / 2.0
        num = gamma_fn(rho_a)
    else:
        rho_a = 3.0 - d + a
        rho_b = 3.0 - d + b
        num = 2.0
    log_term = k * (math.log(gamma0t) + math.log(kdab) + math.log(num)
                    + rho_b * math.log(tv)) - math.lgamma(k * rho_a + 1.0)
    try:
        return math.exp(log_term)
    except OverflowError:
        return math.inf


def chaos_tail_bound(eq: EquationKind, d: int, a: float, b: float, t: float,
                     m: int, gamma0t: float) -> float:
    """Tail ``sum_{k>m}`` of the dominating series, from order ``m+1`` on.

    Requires ``m`` at or above the index threshold (the series is only
    provably term-decreasing from there); the error message reports the
    threshold.  Terms are accumulated until they fall below a relative
    cutoff.
    """
    m0 = tail_index_threshold(eq, d, a)
    if m < m0:
        raise ValueError(
            f"tail bound needs m >= {m0} for these parameters, got m={m}")
    total = 0.0
    k = m + 1
    while True:
        term = dominating_term(eq, d, a, b, t, k, gamma0t)
        total += term
        if not math.isfinite(total):
            return math.inf
        if term < _TAIL_RELATIVE_CUT * total or term == 0.0:
            return total
        k += 1
        if k > m + 10_000:  # the series decays superexponentially
            return total


def rough_constants(eq: EquationKind, h: float, h0: float) -> tuple[float, float]:
    """The two Gamma-max constants of the rough-regime moment bounds.

    First constant (per equation):

    * heat: ``max(Gamma(1/2), Gamma(1-H), Gamma((3-4H)/2))``
    * wave: ``max(pi, Gamma(1-2H)/H, 2 Gamma(2-4H)/(4H-1))`` - requires
      ``H > 1/4``.

    Second constant (simplex-integral bound; depends on the temporal index):

    * heat: ``max Gamma(1 - (1+alpha_j)/(4 H0))`` over
      ``alpha_j in {0, 1-2H, 2(1-2H)}``
    * wave: ``max Gamma(1 + (1-alpha_j)/(2 H0))`` over the same set.
    """
    if not 0.0 < h < 0.5:
        raise ValueError(f"h={h} not in (0, 1/2)")
    if not 0.5 < h0 < 1.0:
        raise ValueError(f"h0={h0} not in (1/2, 1)")
    if eq is EquationKind.HEAT:
        c1 = max(gamma_fn(0.5), gamma_fn(1.0 - h), gamma_fn((3.0 - 4.0 * h) / 2.0))
        args = [1.0 - 1.0 / (4.0 * h0),
                1.0 - (1.0 - h) / (2.0 * h0),
                1.0 - (3.0 - 4.0 * h) / (4.0 * h0)]
        if min(args) <= 0.0:
            raise ValueError(
                f"Gamma argument nonpositive (needs H0+H>3/4): h={h}, h0={h0}")
        c2 = max(gamma_fn(x) for x in args)
    else:
        if 4.0 * h - 1.0 <= 0.0:
            raise ValueError(f"wave branch requires H > 1/4, got h={h}")
        c1 = max(math.pi,
                 gamma_fn(1.0 - 2.0 * h) / h,
                 2.0 * gamma_fn(2.0 - 4.0 * h) / (4.0 * h - 1.0))
        c2 = max(gamma_fn(1.0 + 1.0 / (2.0 * h0)),
                 gamma_fn(1.0 + h / h0),
                 gamma_fn(1.0 + (4.0 * h - 1.0) / (2.0 * h0)))
    return c1, c2


def freq_pair_integral(eq: EquationKind, d: int, lam: float, a, b):
    """``int_{R^d} FG_a(|xi|) FG_b(|xi|) |xi|^lam dxi`` in closed form.

    The workhorse behind the order-1 chaos moments and the adaptive
    frequency-truncation bounds.  ``a`` and ``b`` are the two time gaps
    (vectorized); ``lam`` is the weight exponent.

    Heat (any d with ``d + lam > 0``):
        ``(c_d/2) Gamma((d+lam)/2) ((a+b)/2)^(-(d+lam)/2)``.
    Wave (requires ``d + lam in (0, 2)``):
        ``(c_d/2) Ctilde_mu [(a+b)^(1-mu) - |a-b|^(1-mu)]`` with
        ``mu = lam + d - 1``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    cd = sphere_area(d)
    if eq is EquationKind.HEAT:
        s = (d + lam) / 2.0
        if s <= 0.0:
            raise ValueError("need d + lam > 0")
        out = cd / 2.0 * gamma_fn(s) * ((a + b) / 2.0) ** (-s)
    else:
        mu = lam + d - 1.0
        if not -1.0 < mu < 1.0:
            raise ValueError("wave pair integral needs d + lam in (0, 2)")
        out = cd / 2.0 * _c_tilde(mu) * (
            (a + b) ** (1.0 - mu) - np.abs(a - b) ** (1.0 - mu))
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class ConstantsBundle:
    """All named constants for one parameter point, evaluated eagerly."""

    c_d: float
    alpha_h0: float
    c_h0: float
    c_h: float | None
    k_dalang: DalangConstant | None
    c_h1: float | None
    c_h2: float | None
    gamma0_window: Callable[[float], float]

    @staticmethod
    def for_params(eq: EquationKind, d: int, h0: float,
                   alpha: float | None = None,
                   h: float | None = None) -> "ConstantsBundle":
        a0, c0 = riesz_time_constants(h0)
        ch = riesz_space_constant(h) if h is not None else None
        kd = dalang_constant(d, alpha) if alpha is not None else None
        c1 = c2 = None
        if h is not None:
            c1, c2 = rough_constants(eq, h, h0)
        return ConstantsBundle(
            c_d=sphere_area(d), alpha_h0=a0, c_h0=c0, c_h=ch, k_dalang=kd,
            c_h1=c1, c_h2=c2,
            gamma0_window=lambda t, _h0=h0: gamma0_window(t, _h0))
