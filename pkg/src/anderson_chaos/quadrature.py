"""Deterministic chaos-moment machinery.

Second moments of the chaos coefficients, cross-moments between two noise
parameters sharing one driving noise, and the parameter-continuity gap

    Q = E|I_k(theta_1) - I_k(theta_2)|^2 ,

all computed from the time-domain representation: a double integral over two
ordered simplices against the fractional temporal kernel, whose inner
integrand is a frequency integral of the kernel Fourier factors times the
spectral weights.  The exact (symmetrized) second moment is computed; the
permutation sum is carried by sorting the time tuples and permuting the
frequency axes accordingly.

Two backends:

* ``tensor``: per-pair rotated coordinates aligned with the temporal-kernel
  singularity (Gauss-Jacobi in the difference variable), tensor frequency
  panels with the power-law singularity absorbed into a Jacobi panel at the
  origin.  Deterministic; the error estimate is a two-level difference.
* ``qmc``: scrambled Sobol sampling with the temporal kernel and the
  power-law frequency singularities removed by importance sampling.  The
  error estimate is a batch standard error.

Order 1 needs no frequency quadrature at all: the frequency integral has a
closed form for every regime (see ``closed_forms.freq_pair_integral``).

Cross-moments and gaps share the quadrature nodes of their operands, so the
combination ``m1 + m2 - 2c`` is numerically a single quadrature of the
pointwise-nonnegative squared weight difference.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy.special import roots_jacobi, roots_legendre
from scipy.stats import qmc

from .closed_forms import freq_pair_integral, riesz_space_constant, riesz_time_constants
from .params import EquationKind, NoiseParam, Regime, validate_existence

MAX_TENSOR_ORDER = 3
MAX_QMC_ORDER = 6


class QuadratureError(RuntimeError):
    """Raised when a quadrature cannot meet its requested tolerance."""


class Method(enum.Enum):
    TENSOR = "TensorQuadrature"
    MC = "MCQuadrature"


@dataclass(frozen=True)
class MomentResult:
    value: float
    error_estimate: float
    method: Method
    clipped: bool = False

    def __post_init__(self):
        if self.error_estimate < 0.0:
            raise ValueError("error_estimate must be nonnegative")


@dataclass(frozen=True)
class QuadratureGrid:
    """Resolution knobs for the moment quadratures.

    ``rtol`` is the requested relative tolerance; a result whose two-level
    (or batch) error estimate exceeds ``rtol * scale`` raises
    :class:`QuadratureError`, where ``scale`` is the magnitude of the
    computed quantity (floored at ``atol``).
    """

    backend: str = "tensor"
    time_nodes: int = 10          # Gauss-Jacobi nodes in each difference axis
    time_inner: int = 8           # Gauss-Legendre nodes in each mean axis
    freq_singular: int = 8        # Jacobi nodes on the origin panel
    freq_panel: int = 7           # Legendre nodes per regular panel
    freq_radius: float = 0.0      # 0 -> per-equation default
    rtol: float = 0.08
    atol: float = 1e-12
    qmc_samples: int = 1 << 15
    qmc_batches: int = 16
    qmc_seed: int = 9001

    def __post_init__(self):
        if self.backend not in ("tensor", "qmc"):
            raise ValueError(f"unknown backend {self.backend!r}")

    def coarsened(self) -> "QuadratureGrid":
        """Companion grid for the two-level error estimate."""
        return replace(
            self,
            time_nodes=max(4, (2 * self.time_nodes) // 3),
            time_inner=max(4, (2 * self.time_inner) // 3),
            freq_singular=max(4, (2 * self.freq_singular) // 3),
            freq_panel=max(4, (2 * self.freq_panel) // 3),
        )


@dataclass(frozen=True)
class MultiIndexSet:
    k: int
    indices: tuple

    def __len__(self):
        return len(self.indices)


def multiindex_set(k: int) -> MultiIndexSet:
    """The multi-index family behind the product-to-sum frequency bound.

    Built from the binary expansion of the telescoped product: the first
    factor always contributes its own index, every later factor contributes
    either its own index or the previous one.  Cardinality ``2^(k-1)``; the
    first entry lies in {1,2}, the last in {0,1}, middles in {0,1,2}, and
    the entries sum to k.
    """
    if not 1 <= k <= 20:
        raise ValueError(f"k={k} out of range [1, 20]")
    out = []
    for bits in itertools.product((0, 1), repeat=k - 1):
        a = [0] * k
        a[0] += 1  # factor 1 always contributes eta_1
        for j, take_prev in enumerate(bits, start=2):
            if take_prev:
                a[j - 2] += 1  # factor j contributes eta_{j-1}
            else:
                a[j - 1] += 1
        out.append(tuple(a))
    indices = tuple(sorted(set(out)))
    assert len(indices) == 2 ** (k - 1)
    return MultiIndexSet(k, indices)


def product_bound_check(etas, h: float) -> tuple[float, float]:
    """Evaluate both sides of the product-to-sum bound at one point.

    ``lhs = prod |eta_j - eta_{j-1}|^(1-2H)`` (with ``eta_0 = 0``) and
    ``rhs = sum over the multi-index family of prod |eta_j|^((1-2H) a_j)``.
    The caller asserts ``lhs <= rhs``.
    """
    etas = np.atleast_1d(np.asarray(etas, dtype=float))
    if not 0.0 < h < 0.5:
        raise ValueError(f"h={h} not in (0, 1/2)")
    g = 1.0 - 2.0 * h
    k = etas.size
    diffs = np.abs(np.diff(np.concatenate([[0.0], etas])))
    with np.errstate(divide="ignore"):
        lhs = float(np.prod(diffs ** g))
    rhs = 0.0
    absr = np.abs(etas)
    for a in multiindex_set(k).indices:
        rhs += float(np.prod(absr ** (g * np.asarray(a, dtype=float))))
    return lhs, rhs


# ---------------------------------------------------------------------------
# spectral weights as (coefficient, power) pairs
# ---------------------------------------------------------------------------

def _axis_weight(p: NoiseParam) -> tuple[float, float]:
    """Per-frequency-axis spectral density ``kappa * |xi|^lam`` of ``p``."""
    if p.regime is Regime.REGULAR:
        return 1.0, -p.alpha
    return riesz_space_constant(p.hurst), 1.0 - 2.0 * p.hurst


def _check_pair(p1: NoiseParam, p2: NoiseParam) -> None:
    if p1.regime is not p2.regime or p1.dim != p2.dim:
        raise ValueError("cross-moments need the same regime family and dimension")
    if not (p1.temporal.fractional and p2.temporal.fractional):
        raise ValueError("moment quadrature needs the fractional temporal kernel")
    if p1.temporal.h0 != p2.temporal.h0:
        raise ValueError("cross-moments need a common temporal kernel")


def _require_admissible(p: NoiseParam, eq: EquationKind) -> None:
    rep = validate_existence(p, eq)
    if not rep.admissible:
        raise ValueError(
            f"parameters inadmissible ({rep.condition_checked}, margin={rep.margin})")


@dataclass(frozen=True)
class _Variant:
    """One spectral-weight combination entering a moment/gap quadrature."""
    coef: float      # overall sign * kappa^k
    lam: float       # per-axis power


def _variants_for(kind: str, p1: NoiseParam, p2: NoiseParam, k: int) -> list[_Variant]:
    k1, l1 = _axis_weight(p1)
    k2, l2 = _axis_weight(p2)
    if kind == "moment":
        return [_Variant(k1 ** k, l1)]
    if kind == "cross":
        return [_Variant((k1 * k2) ** (k / 2.0), (l1 + l2) / 2.0)]
    # gap: m(p1) + m(p2) - 2 cross -> pointwise (w1 - w2)^2
    return [_Variant(k1 ** k, l1),
            _Variant(k2 ** k, l2),
            _Variant(-2.0 * (k1 * k2) ** (k / 2.0), (l1 + l2) / 2.0)]


# ---------------------------------------------------------------------------
# temporal rules
# ---------------------------------------------------------------------------

def _jacobi01(n: int, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for ``int_0^1 x^beta f(x) dx`` with ``beta > -1``."""
    x, w = roots_jacobi(n, 0.0, beta)
    return (x + 1.0) / 2.0, w / 2.0 ** (beta + 1.0)


def _pair_rule(t: float, h0: float, n_u: int, n_c: int):
    """Quadrature for one temporal pair against the fractional kernel.

    Returns flat arrays ``(a, b, w)`` such that
    ``int_0^t int_0^t gamma0(a-b) f(a,b) da db ~= sum w f(a_i, b_i)`` for
    smooth ``f``; the difference variable carries a Gauss-Jacobi rule with
    the kernel exponent, so the diagonal singularity is integrated exactly.
    """
    alpha_h0, _ = riesz_time_constants(h0)
    beta = 2.0 * h0 - 2.0
    yu, wu = _jacobi01(n_u, beta)
    u = t * yu
    wu = alpha_h0 * t ** (beta + 1.0) * wu
    xc, wc = roots_legendre(n_c)
    xc = (xc + 1.0) / 2.0
    wc = wc / 2.0
    a_list, b_list, w_list = [], [], []
    for ui, wui in zip(u, wu):
        length = t - ui
        c = ui / 2.0 + length * xc
        wcc = wui * length * wc
        # sign of the difference: a-b = +-u
        a_list.append(c + ui / 2.0)
        b_list.append(c - ui / 2.0)
        w_list.append(wcc)
        a_list.append(c - ui / 2.0)
        b_list.append(c + ui / 2.0)
        w_list.append(wcc)
    return (np.concatenate(a_list), np.concatenate(b_list),
            np.concatenate(w_list))


# ---------------------------------------------------------------------------
# frequency rules
# ---------------------------------------------------------------------------

def _default_radius(eq: EquationKind, t: float) -> float:
    if eq is EquationKind.HEAT:
        return max(40.0, 12.0 / math.sqrt(t))
    return max(200.0, 60.0 / t)


def _freq_axis_rule(lams: Sequence[float], eq: EquationKind, t: float,
                    grid: QuadratureGrid):
    """Signed per-axis frequency nodes plus one weight vector per power.

    The origin panel is Gauss-Jacobi with the most singular power of
    ``lams`` absorbed; other powers enter through the smooth ratio.  Regular
    panels grow geometrically to the truncation radius.
    """
    lam_s = min(lams)
    if lam_s <= -1.0:
        raise ValueError("frequency power must exceed -1")
    radius = grid.freq_radius or _default_radius(eq, t)
    r0 = min(1.0, radius / 8.0)
    ys, ws = _jacobi01(grid.freq_singular, lam_s)
    nodes = [ys * r0]
    base = [ws * r0 ** (1.0 + lam_s)]   # absorbs |z|^lam_s
    edges = [r0]
    while edges[-1] < radius:
        edges.append(min(radius, edges[-1] * 2.0))
    xl, wl = roots_legendre(grid.freq_panel)
    xl = (xl + 1.0) / 2.0
    wl = wl / 2.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        nodes.append(lo + (hi - lo) * xl)
        base.append((hi - lo) * wl)
    z_half = np.concatenate(nodes)
    w_half = np.concatenate(base)
    on_sing = np.concatenate(
        [np.ones(grid.freq_singular, dtype=bool),
         np.zeros(z_half.size - grid.freq_singular, dtype=bool)])
    z = np.concatenate([-z_half[::-1], z_half])
    w_base = np.concatenate([w_half[::-1], w_half])
    sing = np.concatenate([on_sing[::-1], on_sing])
    weights = []
    for lam in lams:
        wv = np.where(sing,
                      w_base * np.abs(z) ** (lam - lam_s),
                      w_base * np.abs(z) ** lam)
        weights.append(wv)
    return z, weights


# ---------------------------------------------------------------------------
# order-1 engine (closed-form frequency integral)
# ---------------------------------------------------------------------------

def _k1_values(eq: EquationKind, d: int, t: float, h0: float,
               variants: list[_Variant], n_u: int, n_c: int) -> list[float]:
    a, b, w = _pair_rule(t, h0, n_u, n_c)
    out = []
    for v in variants:
        vals = freq_pair_integral(eq, d, v.lam, t - a, t - b)
        out.append(v.coef * float(np.dot(w, vals)))
    return out


# ---------------------------------------------------------------------------
# order >= 2 tensor engine
# ---------------------------------------------------------------------------

def _perm_rank(perm: np.ndarray, k: int) -> np.ndarray:
    """Lexicographic id of each row of an array of permutations."""
    rank = np.zeros(perm.shape[0], dtype=np.int64)
    for j in range(k):
        rank = rank * k + perm[:, j]
    return rank


def _tensor_engine(eq: EquationKind, d: int, t: float, h0: float, k: int,
                   variants: list[_Variant], grid: QuadratureGrid) -> list[float]:
    if d != 1:
        raise ValueError("tensor quadrature for k >= 2 is implemented for d = 1")
    pa, pb, pw = _pair_rule(t, h0, grid.time_nodes, grid.time_inner)
    npair = pa.size
    idx = np.stack(np.meshgrid(*([np.arange(npair)] * k), indexing="ij"),
                   axis=-1).reshape(-1, k)
    T = pa[idx]
    S = pb[idx]
    Wt = pw[idx].prod(axis=1) / math.factorial(k)

    ord_t = np.argsort(T, axis=1, kind="stable")
    V = np.take_along_axis(T, ord_t, axis=1)
    ord_s = np.argsort(S, axis=1, kind="stable")
    Sb = np.take_along_axis(S, ord_s, axis=1)
    inv_t = np.argsort(ord_t, axis=1, kind="stable")
    pi = np.take_along_axis(inv_t, ord_s, axis=1)  # pi[i] = rho_t^{-1}(rho_s(i))

    gaps_v = np.diff(np.concatenate([V, np.full((V.shape[0], 1), t)], axis=1), axis=1)
    gaps_s = np.diff(np.concatenate([Sb, np.full((Sb.shape[0], 1), t)], axis=1), axis=1)

    z, wvecs = _freq_axis_rule([v.lam for v in variants], eq, t, grid)
    m_axis = z.size
    zf = np.stack(np.meshgrid(*([z] * k), indexing="ij"), axis=-1).reshape(-1, k)
    wf = []
    for wv in wvecs:
        grids = np.meshgrid(*([wv] * k), indexing="ij")
        wf.append(np.prod(np.stack(grids, axis=-1), axis=-1).reshape(-1))
    nfreq = zf.shape[0]

    # partial-sum tables per permutation of the frequency axes
    perms = list(itertools.permutations(range(k)))
    eta_by_perm = {}
    for perm in perms:
        eta = np.cumsum(zf[:, list(perm)], axis=1)  # (nfreq, k)
        eta_by_perm[perm] = eta.T.copy()            # (k, nfreq)
    eta_id = eta_by_perm[tuple(range(k))]

    rank = _perm_rank(pi, k)
    totals = [0.0 for _ in variants]
    chunk = max(1, (1 << 23) // max(nfreq, 1))
    heat = eq is EquationKind.HEAT
    if heat:
        eta_sq = {p: (e * e) for p, e in eta_by_perm.items()}
    else:
        eta_abs = {p: np.abs(e) for p, e in eta_by_perm.items()}

    for perm in perms:
        pr = 0
        for j in range(k):
            pr = pr * k + perm[j]
        sel = np.nonzero(rank == pr)[0]
        if sel.size == 0:
            continue
        for lo in range(0, sel.size, chunk):
            rows = sel[lo:lo + chunk]
            gv = gaps_v[rows]
            gs = gaps_s[rows]
            if heat:
                expo = gv @ eta_sq[tuple(range(k))] + gs @ eta_sq[perm]
                E = np.exp(-0.5 * expo)
            else:
                E = np.ones((rows.size, nfreq))
                for j in range(k):
                    E *= _wave_factor(gv[:, j, None], eta_abs[tuple(range(k))][j][None, :])
                    E *= _wave_factor(gs[:, j, None], eta_abs[perm][j][None, :])
            wt = Wt[rows]
            for i, v in enumerate(variants):
                totals[i] += v.coef * float(wt @ (E @ wf[i]))
    return totals


def _wave_factor(gap, eta_abs):
    z = gap * eta_abs
    small = np.abs(z) < 1e-4
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(small, gap * (1.0 - z * z / 6.0),
                       np.sin(z) / np.where(eta_abs == 0.0, 1.0, eta_abs))
    return np.where(eta_abs == 0.0, gap, out)


# ---------------------------------------------------------------------------
# QMC engine
# ---------------------------------------------------------------------------

def _qmc_engine(eq: EquationKind, d: int, t: float, h0: float, k: int,
                variants: list[_Variant], grid: QuadratureGrid):
    """Importance-sampled Sobol estimate; returns per-variant (mean, se)."""
    if d != 1:
        raise ValueError("qmc quadrature for k >= 2 is implemented for d = 1")
    alpha_h0, _ = riesz_time_constants(h0)
    gamma0t = 2.0 * h0 * t ** (2.0 * h0 - 1.0)
    lam_s = min(v.lam for v in variants)
    p_tail = 2.0 if eq is EquationKind.HEAT else 1.0
    r0 = 1.0
    n = grid.qmc_samples
    sob = qmc.Sobol(3 * k, scramble=True, seed=grid.qmc_seed)
    pts = sob.random(n)
    heat = eq is EquationKind.HEAT

    # temporal pairs: difference from the kernel-matched power law,
    # mean uniform on its admissible interval
    qu = pts[:, 0:k]
    qc = pts[:, k:2 * k]
    sign = np.where(qu < 0.5, -1.0, 1.0)
    q = np.abs(2.0 * qu - 1.0)
    q = np.clip(q, 1e-300, 1.0)
    u = t * q ** (1.0 / (2.0 * h0 - 1.0)) * sign
    absu = np.abs(u)
    c = absu / 2.0 + (t - absu) * qc
    T = c + u / 2.0
    S = c - u / 2.0
    w_time = gamma0t ** k * np.prod(t - absu, axis=1) / math.factorial(k)

    # frequency axes: half/half split between a core power law and a
    # heavy tail, singular power removed by the core density
    qz = pts[:, 2 * k:3 * k]
    zsign = np.where(qz < 0.5, -1.0, 1.0)
    qq = np.clip(np.abs(2.0 * qz - 1.0), 1e-12, 1.0 - 1e-12)
    core = qq < 0.5
    q1 = np.clip(2.0 * qq, 1e-300, 1.0)          # core branch uniform
    q2 = np.clip(2.0 * qq - 1.0, 1e-300, 1.0)    # tail branch uniform
    zc = r0 * q1 ** (1.0 / (1.0 + lam_s))
    zt = r0 / np.clip((1.0 - q2), 1e-12, 1.0) ** (1.0 / p_tail)
    zabs = np.where(core, zc, zt)
    dens = 0.5 * np.where(
        core,
        (1.0 + lam_s) * zabs ** lam_s / r0 ** (1.0 + lam_s),
        p_tail * r0 ** p_tail * zabs ** (-1.0 - p_tail))
    dens = dens * 0.5  # sign bit
    z = zabs * zsign

    ord_t = np.argsort(T, axis=1, kind="stable")
    V = np.take_along_axis(T, ord_t, axis=1)
    ord_s = np.argsort(S, axis=1, kind="stable")
    Sb = np.take_along_axis(S, ord_s, axis=1)
    inv_t = np.argsort(ord_t, axis=1, kind="stable")
    pi = np.take_along_axis(inv_t, ord_s, axis=1)

    gv = np.diff(np.concatenate([V, np.full((n, 1), t)], axis=1), axis=1)
    gs = np.diff(np.concatenate([Sb, np.full((n, 1), t)], axis=1), axis=1)

    eta_v = np.cumsum(z, axis=1)
    z_pi = np.take_along_axis(z, pi, axis=1)
    eta_s = np.cumsum(z_pi, axis=1)
    if heat:
        phi = np.exp(-0.5 * (np.sum(gv * eta_v * eta_v, axis=1)
                             + np.sum(gs * eta_s * eta_s, axis=1)))
    else:
        phi = np.ones(n)
        for j in range(k):
            phi *= _wave_factor(gv[:, j], np.abs(eta_v[:, j]))
            phi *= _wave_factor(gs[:, j], np.abs(eta_s[:, j]))

    base = w_time * phi / np.prod(dens, axis=1)
    samp = np.zeros(n)
    for v in variants:
        samp += v.coef * base * np.prod(zabs ** v.lam, axis=1)
    nb = grid.qmc_batches
    means = samp.reshape(nb, -1).mean(axis=1)
    mean = float(means.mean())
    se = float(means.std(ddof=1) / math.sqrt(nb))
    return mean, se


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def _run(kind: str, p1: NoiseParam, p2: NoiseParam, eq: EquationKind,
         t: float, x, k: int, grid: QuadratureGrid) -> MomentResult:
    _check_pair(p1, p2)
    _require_admissible(p1, eq)
    _require_admissible(p2, eq)
    if t <= 0.0:
        raise ValueError("t must be positive")
    np.asarray(x, dtype=float)  # stationarity: the phase cancels in |.|^2
    variants = _variants_for(kind, p1, p2, k)
    d = p1.dim

    if k == 0:
        val = 1.0 if kind != "gap" else 0.0
        return MomentResult(val, 0.0, Method.TENSOR)

    if grid.backend == "qmc" and k >= 2:
        if k > MAX_QMC_ORDER:
            raise ValueError(f"qmc backend supports k <= {MAX_QMC_ORDER}")
        value, err = _qmc_engine(eq, d, t, p1.temporal.h0, k, variants, grid)
        return _finish(kind, value, err, Method.MC, grid)

    if k > MAX_TENSOR_ORDER:
        raise ValueError(
            f"tensor backend supports k <= {MAX_TENSOR_ORDER}; use backend='qmc'")

    if k == 1:
        fine = _k1_values(eq, d, t, p1.temporal.h0, variants,
                          grid.time_nodes, grid.time_inner)
        cg = grid.coarsened()
        coarse = _k1_values(eq, d, t, p1.temporal.h0, variants,
                            cg.time_nodes, cg.time_inner)
    else:
        radius = grid.freq_radius or _default_radius(eq, t)
        fine = _tensor_engine(eq, d, t, p1.temporal.h0, k, variants,
                              replace(grid, freq_radius=radius))
        coarse = _tensor_engine(eq, d, t, p1.temporal.h0, k, variants,
                                replace(grid.coarsened(), freq_radius=0.6 * radius))
    value = sum(fine)
    err = 1.5 * abs(value - sum(coarse))  # safety factor on the two-level gap
    return _finish(kind, value, err, Method.TENSOR, grid)


def _finish(kind: str, value: float, err: float, method: Method,
            grid: QuadratureGrid) -> MomentResult:
    clipped = False
    if kind in ("moment", "gap") and value < 0.0:
        if value < -max(2.0 * err, grid.atol):
            raise QuadratureError(
                f"nonnegative quantity evaluated to {value} with error {err}")
        value, clipped = 0.0, True
    scale = max(abs(value), grid.atol)
    if err > grid.rtol * scale and err > grid.atol:
        raise QuadratureError(
            f"error estimate {err:.3e} above tolerance {grid.rtol * scale:.3e}")
    return MomentResult(value, err, method, clipped)


def chaos_moment(p: NoiseParam, eq: EquationKind, t: float, x, k: int,
                 grid: QuadratureGrid | None = None) -> MomentResult:
    """Second moment ``E|I_k|^2`` of the order-k chaos coefficient at (t, x).

    Stationary in space: ``x`` is accepted and ignored after the phase
    factors cancel inside the squared modulus.  ``k = 0`` returns 1 (the
    constant term).
    """
    grid = grid or QuadratureGrid()
    return _run("moment", p, p, eq, t, x, k, grid)


def chaos_cross_moment(p1: NoiseParam, p2: NoiseParam, eq: EquationKind,
                       t: float, x, k: int,
                       grid: QuadratureGrid | None = None) -> MomentResult:
    """``E[I_k(p1) I_k(p2)]`` under the shared driving noise.

    Realized by the mixed spectral weight, the pointwise geometric mean of
    the two weights.
    """
    grid = grid or QuadratureGrid()
    return _run("cross", p1, p2, eq, t, x, k, grid)


def continuity_gap(p_n: NoiseParam, p_star: NoiseParam, eq: EquationKind,
                   t: float, x, k: int,
                   grid: QuadratureGrid | None = None) -> MomentResult:
    """``Q = E|I_k(p_n) - I_k(p_star)|^2 = m(p_n) + m(p_star) - 2 cross``.

    The three terms share one set of quadrature nodes, so the combination
    integrates the pointwise-nonnegative squared weight difference; small
    negative round-off is clipped to zero and flagged.
    """
    grid = grid or QuadratureGrid()
    return _run("gap", p_n, p_star, eq, t, x, k, grid)


# ---------------------------------------------------------------------------
# empirical Littlewood-Hardy ratio
# ---------------------------------------------------------------------------

def lh_ratio(h0: float, k: int,
             test_functions: Sequence[tuple[Callable[[np.ndarray], np.ndarray], float]],
             n_u: int = 24, n_c: int = 20) -> float:
    """Empirical lower bound for the k-th power of the temporal-pairing constant.

    For each nonnegative test function ``phi`` (callable on (N, k) arrays)
    with support box ``[0, L]^k``, evaluates

        ``alpha_{H0}^k  iint prod |t_j-s_j|^(2H0-2) phi(t) phi(s) dt ds``
        divided by ``(int phi^(1/H0))^(2H0)``

    and returns the maximum over the sample set.
    """
    if k not in (1, 2):
        raise ValueError("lh_ratio supports k in {1, 2}")
    if not 0.5 < h0 < 1.0:
        raise ValueError(f"h0={h0} not in (1/2, 1)")
    best = -math.inf
    for phi, box in test_functions:
        a, b, w = _pair_rule(box, h0, n_u, n_c)
        if k == 1:
            fa = np.asarray(phi(a[:, None]), dtype=float)
            fb = np.asarray(phi(b[:, None]), dtype=float)
            if np.any(fa < -1e-12):
                raise ValueError("test functions must be nonnegative")
            num = float(np.dot(w, fa * fb))
        else:
            npair = a.size
            ii, jj = np.meshgrid(np.arange(npair), np.arange(npair), indexing="ij")
            tpts = np.stack([a[ii].ravel(), a[jj].ravel()], axis=1)
            spts = np.stack([b[ii].ravel(), b[jj].ravel()], axis=1)
            ww = (w[ii] * w[jj]).ravel()
            fa = np.asarray(phi(tpts), dtype=float)
            fb = np.asarray(phi(spts), dtype=float)
            if np.any(fa < -1e-12):
                raise ValueError("test functions must be nonnegative")
            num = float(np.dot(ww, fa * fb))
        xg, wg = roots_legendre(64)
        xg = box * (xg + 1.0) / 2.0
        wg = box * wg / 2.0
        if k == 1:
            vals = np.asarray(phi(xg[:, None]), dtype=float)
            den = float(np.dot(wg, vals ** (1.0 / h0)))
        else:
            ii, jj = np.meshgrid(np.arange(64), np.arange(64), indexing="ij")
            pts = np.stack([xg[ii].ravel(), xg[jj].ravel()], axis=1)
            vals = np.asarray(phi(pts), dtype=float)
            den = float(np.dot((wg[ii] * wg[jj]).ravel(), vals ** (1.0 / h0)))
        if not np.isfinite(den) or den <= 0.0:
            raise ValueError("test function is not integrable to power 1/H0")
        best = max(best, num / den ** (2.0 * h0))
    return best
