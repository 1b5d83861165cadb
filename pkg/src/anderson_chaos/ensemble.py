"""Sampling of truncated chaos solutions from a shared noise draw.

The order-k discrete chaos is the off-diagonal (Wick) lattice sum

    I_k = sum' F_k(c_1,..,c_k) prod_j w(c_j) V(c_j),

where ``F_k`` is the time-space Fourier transform of the order-k kernel,
``w`` the spectral weight of the parameter, ``V`` the shared draw, and the
primed sum excludes tuples in which two cells belong to the same mirror
pair (a cell and its conjugate mirror carry one degree of freedom).

The kernel's time transform is computed by composite quadrature on an
equispaced grid over [0, t].  Equispaced nodes let the lattice sums
collapse: contracting the draw against ``exp(-i tau v_n)`` over the
(equispaced) tau axis is a chirp-z transform, and contracting against the
last kernel factor (a function of the frequency partial sum) is an FFT
correlation.  Per draw, the order-2 chaos then costs
O(time_nodes^2 * cells_per_axis) instead of O(cells^2).

Order 3 tabulates the full kernel on cells^3 tuples and is therefore
restricted to small lattices (see ``max_cells_for_order``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.fft as sfft
from scipy.signal import czt

from .kernels import green_fourier
from .noise import Lattice, NoiseDraw, draw_noise, weight_grid
from .params import EquationKind, NoiseParam, validate_existence
from .util import parallel_map

MAX_DISCRETE_ORDER = 3

#: batch-axis parallelism for the FFT stages; per-transform arithmetic (and
#: hence every result) is independent of this value
_FFT_WORKERS = 2

#: lattice budget (cells per axis, d=1) per chaos order; cost ~ cells^k
#: (order 3 stores the kernel on cells^3 tuples)
_ORDER_BUDGET = {1: 1025, 2: 1025, 3: 13}


def max_cells_for_order(k: int) -> int:
    return _ORDER_BUDGET[k]


def composite_weights(n: int, h: float) -> np.ndarray:
    """Composite quadrature weights on ``n+1`` equispaced points, step h.

    Gregory weights of order four (trapezoid plus standard end
    corrections); exact Newton-Cotes for very short grids.
    """
    if n < 0:
        raise ValueError("need a nonnegative interval count")
    if n == 0:
        return np.zeros(1)
    if n == 1:
        return h * np.array([0.5, 0.5])
    if n == 2:
        return h * np.array([1.0, 4.0, 1.0]) / 3.0
    if n == 3:
        return h * np.array([3.0, 9.0, 9.0, 3.0]) / 8.0
    if n == 4:
        return h * np.array([14.0, 64.0, 24.0, 64.0, 14.0]) / 45.0
    if n == 5:
        return h * np.array([95.0, 375.0, 250.0, 250.0, 375.0, 95.0]) / 288.0
    w = np.full(n + 1, h)
    ends = h * np.array([3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0])
    w[:3] = ends
    w[-3:] = ends[::-1]
    return w


def _extended_xi(lattice: Lattice) -> np.ndarray:
    """Grid of all pairwise sums of lattice xi values (step d_xi).

    Cell i carries ``xi_i = (i - c) d_xi`` with ``c = n_half``; the sum of
    cells (i, j) sits at extended index ``i + j``.
    """
    n = lattice.cells_per_axis
    return lattice.d_xi * np.arange(-(n - 1), n)


@dataclass
class DiscreteKernelTables:
    """Precomputed kernel tabulations for one (eq, t, lattice, k)."""

    eq: EquationKind
    t: float
    lattice: Lattice
    k: int
    n_intervals: int
    v_grid: np.ndarray                  # (n+1,) equispaced time nodes
    outer_w: np.ndarray                 # composite weights on v_grid
    inner_w: list                       # inner_w[m] = weights on v_grid[:m+1]
    fg_last: np.ndarray | None = None   # (n+1, 2N-1) FG_{t-v}(Xi) on xi sums
    fg_gap: np.ndarray | None = None    # (n+1, N) FG_{(m-n)h}(xi)
    f1: np.ndarray | None = None        # (N_tau, N) order-1 kernel
    excl_same: np.ndarray | None = None   # F_2(c, c)
    excl_mirror: np.ndarray | None = None  # F_2(c, -c)
    f3: np.ndarray | None = None        # (M, M, M) order-3 kernel, M cells


def build_kernel_tables(eq: EquationKind, t: float, lattice: Lattice, k: int,
                        n_intervals: int = 128) -> DiscreteKernelTables:
    """Tabulate the time-quadrature pieces of the order-k kernel."""
    if lattice.dim != 1 and k >= 2:
        raise ValueError("discrete chaos of order >= 2 is implemented for d = 1")
    if not 1 <= k <= MAX_DISCRETE_ORDER:
        raise ValueError(f"discrete chaos is capped at k = {MAX_DISCRETE_ORDER}")
    if lattice.cells_per_axis > max_cells_for_order(k):
        raise ValueError(
            f"lattice exceeds the order-{k} budget "
            f"({max_cells_for_order(k)} cells per axis); cost grows as cells^k")
    if t <= 0.0:
        raise ValueError("t must be positive")
    if k == 3:
        n_intervals = min(n_intervals, 64)
    n = n_intervals
    h = t / n
    v = h * np.arange(n + 1)
    tb = DiscreteKernelTables(
        eq=eq, t=t, lattice=lattice, k=k, n_intervals=n, v_grid=v,
        outer_w=composite_weights(n, h),
        inner_w=[composite_weights(m, h) for m in range(n + 1)])

    tau = lattice.tau_axis()
    xi = lattice.xi_axis()
    if k == 1:
        # F_1(tau, xi) = int_0^t e^{-i tau v} FG_{t-v}(xi) dv
        phase = np.exp(-1j * np.outer(tau, v))          # (N_tau, n+1)
        fg = green_fourier(eq, (t - v)[:, None], np.abs(xi)[None, :])
        tb.f1 = (phase * tb.outer_w[None, :]) @ fg
        return tb

    xi_ext = _extended_xi(lattice)
    tb.fg_last = green_fourier(eq, (t - v)[:, None], np.abs(xi_ext)[None, :])
    tb.fg_gap = green_fourier(eq, v[:, None], np.abs(xi)[None, :])
    if k == 2:
        _exclusion_tables_k2(tb, tau, xi)
    else:
        tb.f3 = _tabulate_f3(tb, tau, xi)
    return tb


def _triangular_inner(At: np.ndarray, fg_gap_t: np.ndarray, inner_w: list,
                      h: float) -> np.ndarray:
    """``inner[s,x,m] = sum_{n<=m} w^(m)_n At[s,x,n] fg_gap_t[x,m-n]``.

    The bulk is a convolution along the (last) grid axis with trapezoid
    weights; Gregory end corrections and exact short-grid rules complete
    the composite quadrature.  Broadcasts over a middle axis of size 1.
    """
    n = fg_gap_t.shape[-1] - 1
    nfft = 1
    while nfft < 2 * (n + 1):
        nfft *= 2
    Af = sfft.fft(At, n=nfft, axis=-1, workers=_FFT_WORKERS)
    Gf = sfft.fft(fg_gap_t, n=nfft, axis=-1)
    inner = sfft.ifft(Af * Gf[None], axis=-1, workers=_FFT_WORKERS)[..., : n + 1] * h
    ends = composite_weights(max(6, n), h)[:3] / h       # [3/8, 7/6, 23/24]
    for j, cw in enumerate(ends):
        adj = (cw - 1.0) * h
        inner[..., j:] += adj * At[..., j: j + 1] * fg_gap_t[None, :, : n + 1 - j]
        inner[..., j:] += adj * At[..., : n + 1 - j] * fg_gap_t[None, :, j: j + 1]
    for m in range(min(6, n + 1)):
        wm = inner_w[m]
        inner[..., m] = (wm[None, None, :] * At[..., : m + 1]
                         * fg_gap_t[None, :, : m + 1][..., ::-1]).sum(axis=-1)
    return inner


def _inner_sum_rows(tb: DiscreteKernelTables, tau_row: float,
                    phase_row: np.ndarray) -> np.ndarray:
    """``InnerSum(tau, xi, m) = sum_{n<=m} w^(m)_n e^{-i tau v_n} FG_{(m-n)h}(xi)``
    for one tau, all (m, xi)."""
    n = tb.n_intervals
    h = tb.t / n
    At = phase_row[None, None, :].astype(complex)
    out = _triangular_inner(At, tb.fg_gap.T.copy(), tb.inner_w, h)
    return out[0].T  # (m, xi)


def _exclusion_tables_k2(tb: DiscreteKernelTables, tau: np.ndarray,
                         xi: np.ndarray) -> None:
    """F_2 on the diagonals c_2 = c_1 and c_2 = iota(c_1) (Wick exclusion)."""
    n = tb.n_intervals
    v = tb.v_grid
    nxi = xi.size
    same = np.zeros((tau.size, nxi), dtype=complex)
    mirror = np.zeros_like(same)
    # extended-grid indices: sum of cells (i, i) -> 2i; Xi = 0 -> N-1
    fg_last_2x = tb.fg_last[:, 2 * np.arange(nxi)]       # (n+1, N)
    fg_last_0 = tb.fg_last[:, nxi - 1][:, None]          # (n+1, 1)
    ow = tb.outer_w
    for it in range(tau.size):
        phase_row = np.exp(-1j * tau[it] * v)
        corr = _inner_sum_rows(tb, tau[it], phase_row)   # (m, N)
        same[it] = ((ow * phase_row)[:, None] * corr * fg_last_2x).sum(axis=0)
        mirror[it] = ((ow * np.conj(phase_row))[:, None] * corr * fg_last_0).sum(axis=0)
    tb.excl_same = same
    tb.excl_mirror = mirror


def _tabulate_f3(tb: DiscreteKernelTables, tau: np.ndarray,
                 xi: np.ndarray) -> np.ndarray:
    """Full order-3 kernel ``F_3(c1, c2, c3)`` on flattened cells."""
    n = tb.n_intervals
    v = tb.v_grid
    t = tb.t
    ntau, nxi = tau.size, xi.size
    m_cells = ntau * nxi
    # InnerSum for every (tau, m, xi)
    inner = np.empty((ntau, n + 1, nxi), dtype=complex)
    for it in range(ntau):
        inner[it] = _inner_sum_rows(tb, tau[it], np.exp(-1j * tau[it] * v))
    inner = inner.transpose(1, 0, 2).reshape(n + 1, m_cells)  # (m2, c1)

    phases = np.exp(-1j * np.outer(v, tau))              # (m, N_tau)
    cell_phase = np.repeat(phases, nxi, axis=1)           # (m, M) per cell
    # frequency-sum index tables (cell i carries xi index i % nxi)
    ix = np.arange(m_cells) % nxi
    idx12 = ix[:, None] + ix[None, :]                     # ext-grid index
    # triple sums: index i1+i2+i3 in [0, 3(nxi-1)]
    xi_ext3 = tb.lattice.d_xi * (np.arange(3 * nxi - 2) - 3 * (nxi - 1) / 2.0)
    fg_last3 = green_fourier(tb.eq, (t - v)[:, None], np.abs(xi_ext3)[None, :])
    fg_gap_ext = green_fourier(tb.eq, v[:, None],
                               np.abs(_extended_xi(tb.lattice))[None, :])
    f3 = np.zeros((m_cells, m_cells, m_cells), dtype=complex)
    idx3 = (ix[:, None, None] + ix[None, :, None] + ix[None, None, :]).astype(np.int32)
    for m3 in range(n + 1):
        w3 = tb.outer_w[m3]
        iw = tb.inner_w[m3]
        # S2(c1, c2) = sum_{m2<=m3} iw[m2] e^{-i tau2 v_m2} FG_{(m3-m2)h}(xi1+xi2) Inner(c1, m2)
        s2 = np.zeros((m_cells, m_cells), dtype=complex)
        for m2 in range(m3 + 1):
            gap = fg_gap_ext[m3 - m2][idx12]
            s2 += iw[m2] * inner[m2][:, None] * cell_phase[m2][None, :] * gap
        last = fg_last3[m3][idx3] * cell_phase[m3][None, None, :]
        f3 += (w3 * s2)[:, :, None] * last
    return f3


def _czt_collapse(U: np.ndarray, lattice: Lattice, v_grid: np.ndarray) -> np.ndarray:
    """``P[s, xi, m] = sum_tau U[s, tau, xi] exp(-i tau v_m)`` via chirp-z."""
    dt = lattice.d_tau
    hv = v_grid[1] - v_grid[0]
    w = np.exp(-1j * dt * hv)
    Ut = np.ascontiguousarray(np.moveaxis(U, 1, -1))   # (s, xi, tau)
    out = czt(Ut, m=v_grid.size, w=w, a=1.0 + 0.0j, axis=-1)
    phase = np.exp(1j * lattice.n_half * dt * v_grid)
    return out * phase                                  # (s, xi, m)


def _nonself_mask(lattice: Lattice) -> np.ndarray:
    mask = np.ones(lattice.shape, dtype=bool)
    mask[(lattice.cells_per_axis // 2,) * len(lattice.shape)] = False
    return mask


def _order1(U: np.ndarray, tb: DiscreteKernelTables) -> np.ndarray:
    return np.tensordot(U, tb.f1, axes=([1, 2], [0, 1]))


def _order2(U: np.ndarray, tb: DiscreteKernelTables) -> np.ndarray:
    """Off-diagonal order-2 chaos for a batch of weighted draws U (s, tau, xi)."""
    lat = tb.lattice
    n = tb.n_intervals
    nxi = lat.cells_per_axis
    P = _czt_collapse(U, lat, tb.v_grid)        # (s, xi, m)
    # H[s, m, i1] = sum_{i2} FG_{t-v_m}(Xi at i1+i2) P[s, i2, m]
    nfft = 1
    while nfft < 3 * nxi:
        nfft *= 2
    Pmx = np.ascontiguousarray(np.swapaxes(P, 1, 2))      # (s, m, xi)
    Gf = sfft.fft(tb.fg_last, n=nfft, axis=1)
    Pf = sfft.fft(Pmx[:, :, ::-1], n=nfft, axis=2, workers=_FFT_WORKERS)
    conv = sfft.ifft(Pf * Gf[None, :, :], axis=2, workers=_FFT_WORKERS)
    H = conv[:, :, nxi - 1: 2 * nxi - 1]                   # i1 = 0..N-1
    inner = _triangular_inner(P, tb.fg_gap.T.copy(), tb.inner_w, tb.t / n)
    total = np.einsum("m,sxm,smx->s", tb.outer_w, inner, H)
    # Wick exclusion: c2 = c1 always, c2 = iota(c1) only where distinct
    nonself = _nonself_mask(lat)
    same = (tb.excl_same[None, :, :] * U * U).sum(axis=(1, 2))
    mirr = ((tb.excl_mirror * nonself)[None, :, :] * U * np.conj(U)).sum(axis=(1, 2))
    return total - same - mirr


def _order3(U: np.ndarray, tb: DiscreteKernelTables) -> np.ndarray:
    """Order-3 off-diagonal chaos via the tabulated kernel (small lattices)."""
    lat = tb.lattice
    m_cells = lat.n_cells
    ns = U.shape[0]
    u = U.reshape(ns, m_cells)
    f3 = tb.f3
    mirror = (np.arange(m_cells).reshape(lat.shape)[::-1, ::-1]).reshape(-1)
    ar = np.arange(m_cells)
    nonself = (mirror != ar).astype(float)
    # diagonal slices of the kernel along each coincidence pattern
    g12s = np.einsum("aac->ac", f3)            # [a, c] = f3[a, a, c]
    g12m = f3[ar, mirror]                      # [a, c] = f3[a, iota(a), c]
    g13s = np.einsum("aba->ab", f3)            # [a, b] = f3[a, b, a]
    g13m = f3[ar[:, None], np.arange(m_cells)[None, :], mirror[:, None]]
    g23s = np.einsum("abb->ab", f3)            # [a, b] = f3[a, b, b]
    g23m = f3[:, ar, mirror]                   # [a, b] = f3[a, b, iota(b)]
    t_ss = f3[ar, ar, ar]
    t_sm = f3[ar, ar, mirror] * nonself
    t_ms = f3[ar, mirror, ar] * nonself
    t_mm = f3[ar, mirror, mirror] * nonself
    out = np.empty(ns, dtype=complex)
    for s in range(ns):
        us = u[s]
        um = us[mirror]
        s_all = np.dot(np.tensordot(f3, us, axes=([2], [0])) @ us, us)
        d12 = np.dot((us * us) @ g12s, us) + np.dot((us * um * nonself) @ g12m, us)
        d13 = np.dot((us * us)[:, None] * g13s, us).sum() + \
            np.dot((us * um * nonself)[:, None] * g13m, us).sum()
        d23 = np.dot(us @ g23s, us * us) + np.dot(us @ g23m, us * um * nonself)
        s_trip = (np.dot(t_ss, us ** 3) + np.dot(t_sm, us * us * um)
                  + np.dot(t_ms, us * um * us) + np.dot(t_mm, us * um * um))
        out[s] = s_all - (d12 + d13 + d23) + 2.0 * s_trip
    return out


@dataclass(frozen=True)
class EnsembleTable:
    """Coupled samples of truncated solutions indexed (seed, theta, point)."""

    thetas: tuple
    points: tuple
    m: int
    seeds: tuple
    samples: np.ndarray  # (n_seeds, n_thetas, n_points) real

    def column(self, theta_idx: int, point_idx: int) -> np.ndarray:
        return self.samples[:, theta_idx, point_idx]


def _weighted_draw(values: np.ndarray, w: np.ndarray, lattice: Lattice,
                   x: float) -> np.ndarray:
    phase = np.exp(-1j * lattice.xi_axis() * x)
    return values * w * phase[None, :]


def discrete_multiple_integral(draw: NoiseDraw, p: NoiseParam,
                               eq: EquationKind, t: float, x: float, k: int,
                               n_intervals: int = 128,
                               tables: DiscreteKernelTables | None = None) -> float:
    """Off-diagonal order-k discrete chaos of the shared draw.

    Order 3 needs the cells^3 kernel tabulation and is limited to small
    lattices; see ``max_cells_for_order``.
    """
    rep = validate_existence(p, eq)
    if not rep.admissible:
        raise ValueError(f"inadmissible parameters: {rep.condition_checked}")
    if k == 0:
        return 0.0
    tb = tables or build_kernel_tables(eq, t, draw.lattice, k, n_intervals)
    w = weight_grid(p, draw.lattice)
    U = _weighted_draw(draw.values, w, draw.lattice, x)[None, :, :]
    vals = {1: _order1, 2: _order2, 3: _order3}[k](U, tb)
    return complex(vals[0]).real


def truncated_solution(draw: NoiseDraw, p: NoiseParam, eq: EquationKind,
                       t: float, x: float, m: int,
                       n_intervals: int = 128) -> float:
    """``u_m = 1 + sum_{k<=m} I_k`` from one draw."""
    if not 0 <= m <= MAX_DISCRETE_ORDER:
        raise ValueError(f"truncation order capped at {MAX_DISCRETE_ORDER}")
    total = 1.0
    for k in range(1, m + 1):
        total += discrete_multiple_integral(draw, p, eq, t, x, k, n_intervals)
    return total


def coupled_ensemble(seeds: Sequence[int], thetas: Sequence[NoiseParam],
                     eq: EquationKind, points: Sequence[tuple], m: int,
                     lattice: Lattice, n_intervals: int = 128,
                     chunk: int = 64, threads: int = 1) -> EnsembleTable:
    """Sample ``u_m`` for every (seed, theta, point) with shared draws.

    One noise draw per seed is reused across every theta and point, which
    realizes the common-probability-space coupling: for equal parameters the
    coupled samples agree bitwise.  Chunk boundaries (hence the floating
    reduction order) are fixed by the configuration, not the worker count,
    so results are independent of ``threads``.
    """
    thetas = list(thetas)
    points = [(float(t), float(x)) for (t, x) in points]
    seeds = [int(s) for s in seeds]
    for p in thetas:
        rep = validate_existence(p, eq)
        if not rep.admissible:
            raise ValueError(f"inadmissible parameters: {rep.condition_checked}")
        if p.dim != lattice.dim:
            raise ValueError("parameter/lattice dimension mismatch")
    if not 0 <= m <= MAX_DISCRETE_ORDER:
        raise ValueError(f"truncation order capped at {MAX_DISCRETE_ORDER}")

    tables = {}
    for k in range(1, m + 1):
        for (t, _x) in points:
            key = (k, t)
            if key not in tables:
                tables[key] = build_kernel_tables(eq, t, lattice, k, n_intervals)
    weights = [weight_grid(p, lattice) for p in thetas]
    order_fn = {1: _order1, 2: _order2, 3: _order3}

    out = np.empty((len(seeds), len(thetas), len(points)))

    def run_chunk(lo: int) -> np.ndarray:
        hi = min(lo + chunk, len(seeds))
        draws = np.stack([draw_noise(lattice, s).values for s in seeds[lo:hi]])
        block = np.ones((hi - lo, len(thetas), len(points)))
        for it, w in enumerate(weights):
            base = draws * w[None, :, :]
            for ip, (t, x) in enumerate(points):
                phase = np.exp(-1j * lattice.xi_axis() * x)
                U = base * phase[None, None, :]
                acc = np.ones(hi - lo)
                for k in range(1, m + 1):
                    vals = order_fn[k](U, tables[(k, t)])
                    imax = float(np.max(np.abs(vals.imag))) if vals.size else 0.0
                    scale = float(np.max(np.abs(vals))) or 1.0
                    if imax > 1e-6 * scale:
                        raise RuntimeError(
                            f"imaginary residual {imax:.2e} in order-{k} chaos")
                    acc = acc + vals.real
                block[:, it, ip] = acc
        return block

    starts = list(range(0, len(seeds), chunk))
    for lo, block in zip(starts, parallel_map(run_chunk, starts, threads)):
        out[lo:lo + block.shape[0]] = block
    return EnsembleTable(thetas=tuple(thetas), points=tuple(points), m=m,
                         seeds=tuple(seeds), samples=out)


@dataclass(frozen=True)
class IncrementStat:
    lag: float
    p: float
    estimate: float
    std_error: float

    def __post_init__(self):
        if self.estimate < 0.0:
            raise ValueError("estimate must be nonnegative")


def increment_moments(table: EnsembleTable, direction: str, p: float = 2.0,
                      theta_idx: int = 0) -> list[IncrementStat]:
    """Empirical p-th absolute increment moments along a regular transect.

    Overlapping pairs at each lag are averaged; the standard error is a
    leave-one-seed-out jackknife.
    """
    if p < 2.0:
        raise ValueError("moment order must be >= 2")
    if direction not in ("time", "space"):
        raise ValueError("direction must be 'time' or 'space'")
    pts = np.asarray(table.points, dtype=float)
    axis = 0 if direction == "time" else 1
    other = 1 - axis
    if pts.shape[0] < 2:
        raise ValueError("need at least 2 points in the transect direction")
    if np.ptp(pts[:, other]) > 1e-12:
        raise ValueError(f"points do not form a {direction} transect")
    coords = pts[:, axis]
    order = np.argsort(coords)
    coords = coords[order]
    steps = np.diff(coords)
    if np.ptp(steps) > 1e-9 * steps[0]:
        raise ValueError("transect must be regularly spaced")
    step = float(steps[0])
    samples = table.samples[:, theta_idx, :][:, order]  # (seeds, points)
    nseeds = samples.shape[0]
    out = []
    for nu in range(1, coords.size):
        diffs = np.abs(samples[:, nu:] - samples[:, :-nu]) ** p
        per_seed = diffs.mean(axis=1)
        est = float(per_seed.mean())
        if nseeds > 1:
            jack = (per_seed.sum() - per_seed) / (nseeds - 1)
            se = float(np.sqrt((nseeds - 1) / nseeds * np.sum((jack - jack.mean()) ** 2)))
        else:
            se = 0.0
        out.append(IncrementStat(lag=nu * step, p=p, estimate=est, std_error=se))
    return out
