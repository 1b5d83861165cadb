"""Lattice discretization of the complex driving noise.

One Hermitian-symmetric complex Gaussian draw on a frequency lattice serves
every noise parameter: the spectral weight of a parameter multiplies the
same draw, which realizes the common-probability-space coupling.  The
continuum noise has no symmetry constraint and produces real integrals only
through the symmetric integrand combination; enforcing the symmetry on the
lattice yields identical covariances for real test functions and makes
every sample path real (an equivalent-in-law construction).

Cell values are reproducible functions of (seed, cell index): a
counter-based Philox stream keyed by the seed fills the cells in
lexicographic order, independently of traversal or worker count.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .params import NoiseParam, Regime
from .closed_forms import riesz_space_constant, riesz_time_constants

_MAGIC = b"ANDC"
_FORMAT_VERSION = 1

#: Philox stream constant separating noise draws from any other use
_STREAM = 0x414E4443


@dataclass(frozen=True)
class Lattice:
    """Symmetric frequency lattice with an origin-centered cell.

    Cells sit at ``(i*d_tau, j*d_xi)`` for integer vectors with
    ``|i| <= n_tau``, ``|j| <= n_xi`` componentwise; the involution
    ``iota`` maps a cell to its mirror image.  An odd number of points per
    axis keeps the involution total (the origin cell is its own mirror), so
    requested even counts are rounded up by one.
    """

    tau_max: float
    xi_max: float
    dim: int = 1
    cells_per_axis: int = 257

    def __post_init__(self):
        if self.tau_max <= 0 or self.xi_max <= 0:
            raise ValueError("frequency extents must be positive")
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")
        if self.cells_per_axis < 3:
            raise ValueError("need at least 3 cells per axis")
        if self.cells_per_axis % 2 == 0:
            object.__setattr__(self, "cells_per_axis", self.cells_per_axis + 1)

    @property
    def n_half(self) -> int:
        return (self.cells_per_axis - 1) // 2

    @property
    def d_tau(self) -> float:
        return self.tau_max / self.n_half

    @property
    def d_xi(self) -> float:
        return self.xi_max / self.n_half

    @property
    def shape(self) -> tuple:
        return (self.cells_per_axis,) * (1 + self.dim)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return self.d_tau * self.d_xi ** self.dim

    def tau_axis(self) -> np.ndarray:
        return self.d_tau * np.arange(-self.n_half, self.n_half + 1)

    def xi_axis(self) -> np.ndarray:
        return self.d_xi * np.arange(-self.n_half, self.n_half + 1)

    def mirror_index(self, idx: tuple) -> tuple:
        """The involution on multi-indices (component sign flip)."""
        n = self.cells_per_axis - 1
        return tuple(n - i for i in idx)


def _hermitian_values(lattice: Lattice, rng: np.random.Generator) -> np.ndarray:
    """Fill the lattice with a Hermitian complex Gaussian field.

    Per mirror pair {c, -c}: independent real and imaginary parts of
    variance vol/2 at the canonical cell, conjugate at the mirror; the
    origin cell is real with variance vol.  The full normal array is always
    generated in one call, so values are a pure function of the seed.
    """
    shape = lattice.shape
    n = lattice.n_cells
    normals = rng.standard_normal(2 * n).reshape(2, *shape)
    vol = lattice.cell_volume
    re = normals[0] * np.sqrt(vol / 2.0)
    im = normals[1] * np.sqrt(vol / 2.0)
    values = re + 1j * im
    flipped = values[(slice(None, None, -1),) * len(shape)]
    # canonical = lexicographically-first member of each mirror pair
    lin = np.arange(n).reshape(shape)
    lin_mirror = lin[(slice(None, None, -1),) * len(shape)]
    canonical = lin < lin_mirror
    values = np.where(canonical, values, np.conj(flipped))
    center = (lattice.cells_per_axis // 2,) * len(shape)
    values[center] = normals[0][center] * np.sqrt(vol)
    return values


def draw_noise(lattice: Lattice, seed: int) -> "NoiseDraw":
    """One realization of the complex driving noise on the lattice."""
    rng = np.random.Generator(np.random.Philox(key=[np.uint64(seed), np.uint64(_STREAM)]))
    return NoiseDraw(seed=int(seed), lattice=lattice,
                     values=_hermitian_values(lattice, rng))


@dataclass(frozen=True)
class NoiseDraw:
    seed: int
    lattice: Lattice
    values: np.ndarray  # complex, shape lattice.shape; immutable by contract

    def __post_init__(self):
        self.values.setflags(write=False)


def _axis_cell_weight(centers: np.ndarray, h: float, lam: float,
                      all_cells: bool) -> np.ndarray:
    """Mean of ``|y|^lam`` over cells of width h around the given centers.

    The origin cell always integrates across the singularity (its center
    value may diverge).  With ``all_cells`` every cell uses its exact
    average, which makes each cell's contribution to the lattice isometry
    exact for power-law weights; the center-value rule converges only like
    ``h^(1-|lam|)`` near the origin.
    """
    if lam <= -1.0:
        raise ValueError("cell average diverges for power <= -1")
    c = np.abs(np.asarray(centers, dtype=float))
    lo = np.abs(c - h / 2.0)
    hi = c + h / 2.0
    origin = c < h / 2.0
    q = lam + 1.0
    if all_cells:
        out = (hi ** q - lo ** q) / (h * q)
    else:
        with np.errstate(divide="ignore"):
            out = c ** lam
    if np.any(origin):
        out = np.where(origin, (hi ** q + lo ** q) / (h * q), out)
    return out


@dataclass(frozen=True)
class SpectralWeight:
    """Evaluator of the spectral weight ``w_theta(tau, xi)`` of a parameter.

    Regular family: ``w^2 = g0(tau) |xi|^(-alpha)``; rough family:
    ``w^2 = c_{H0} c_H |tau|^(1-2H0) |xi|^(1-2H)``.  Cells touching the
    singular hyperplanes always carry the exact cell average of ``w^2``
    (root-mean-square weight); ``all_cells`` extends the averaging to every
    cell, which the sampling lane uses for its faster isometry convergence.
    """

    param: NoiseParam

    def _tau_sq_weight(self, tau: np.ndarray, h: float | None,
                       all_cells: bool = False) -> np.ndarray:
        p = self.param
        if p.temporal.fractional:
            _, c_h0 = riesz_time_constants(p.temporal.h0)
            lam = 1.0 - 2.0 * p.temporal.h0
            if h is None:
                with np.errstate(divide="ignore"):
                    return c_h0 * np.abs(tau) ** lam
            return c_h0 * _axis_cell_weight(tau, h, lam, all_cells)
        g0 = np.vectorize(p.temporal.g0)
        return np.asarray(g0(tau), dtype=float)

    def _xi_sq_weight(self, xi: np.ndarray, h: float | None,
                      all_cells: bool = False) -> np.ndarray:
        p = self.param
        if p.regime is Regime.REGULAR:
            coef, lam = 1.0, -p.alpha
        else:
            coef, lam = riesz_space_constant(p.hurst), 1.0 - 2.0 * p.hurst
        xi = np.atleast_2d(xi)
        if p.dim == 1:
            if h is None:
                with np.errstate(divide="ignore"):
                    return coef * np.abs(xi[..., 0]) ** lam
            return coef * _axis_cell_weight(xi[..., 0], h, lam, all_cells)
        r = np.linalg.norm(xi, axis=-1)
        with np.errstate(divide="ignore"):
            out = coef * r ** lam
        if h is not None:
            origin = np.isclose(r, 0.0)
            if np.any(origin):
                # average over the ball of the cell's volume (radial exact)
                from .closed_forms import sphere_area
                d = p.dim
                req = (h ** d * d / sphere_area(d)) ** (1.0 / d)
                out = np.where(origin,
                               coef * sphere_area(d) / h ** d
                               * req ** (d + lam) / (d + lam), out)
        return out

    def squared(self, tau, xi, cell: bool = False,
                lattice: Lattice | None = None,
                all_cells: bool = False) -> np.ndarray:
        """``w^2`` at cell centers; with ``cell=True`` apply the cell
        averaging rule of the given lattice."""
        tau = np.asarray(tau, dtype=float)
        xi = np.asarray(xi, dtype=float)
        ht = lattice.d_tau if cell else None
        hx = lattice.d_xi if cell else None
        return (self._tau_sq_weight(tau, ht, all_cells)
                * self._xi_sq_weight(xi, hx, all_cells))


def spectral_weight(p: NoiseParam, tau, xi, lattice: Lattice | None = None):
    """Pointwise weight ``w_theta``; cell-RMS on singular-touching cells.

    Pass the lattice to enable the cell rule (its spacings set the cell
    extents); without it the raw pointwise weight is returned.
    """
    sw = SpectralWeight(p)
    tau = np.asarray(tau, dtype=float)
    xi2 = np.atleast_2d(np.asarray(xi, dtype=float))
    out = np.sqrt(sw.squared(tau, xi2, cell=lattice is not None, lattice=lattice))
    if out.ndim == 0 or out.size == 1:
        return float(np.ravel(out)[0])
    return out


def weight_grid(p: NoiseParam, lattice: Lattice) -> np.ndarray:
    """``w_theta`` on the whole lattice, shape = lattice.shape.

    Every cell carries the exact average of ``w^2`` (not the center value):
    power-law weights then contribute their exact mass to the isometry,
    which removes the dominant resolution bias of the sampled chaos
    moments.
    """
    if p.dim != lattice.dim:
        raise ValueError("parameter/lattice dimension mismatch")
    sw = SpectralWeight(p)
    tau = lattice.tau_axis()
    tw = sw._tau_sq_weight(tau, lattice.d_tau, all_cells=True)
    xi = lattice.xi_axis()
    if lattice.dim == 1:
        xw = sw._xi_sq_weight(xi[:, None], lattice.d_xi, all_cells=True)
        grid = tw[:, None] * xw[None, :]
    else:
        axes = np.meshgrid(*([xi] * lattice.dim), indexing="ij")
        pts = np.stack([a.ravel() for a in axes], axis=-1)
        xw = sw._xi_sq_weight(pts, lattice.d_xi).reshape(axes[0].shape)
        grid = tw.reshape((-1,) + (1,) * lattice.dim) * xw[None, ...]
    return np.sqrt(grid)


def _fhat_grid(lattice: Lattice, fhat: Callable) -> np.ndarray:
    tau = lattice.tau_axis()
    xi = lattice.xi_axis()
    if lattice.dim == 1:
        tg, xg = np.meshgrid(tau, xi, indexing="ij")
        return np.asarray(fhat(tg, xg), dtype=complex)
    grids = np.meshgrid(tau, *([xi] * lattice.dim), indexing="ij")
    return np.asarray(fhat(grids[0], *grids[1:]), dtype=complex)


def isometry_variance(p: NoiseParam, lattice: Lattice, fhat: Callable) -> float:
    """Deterministic lattice variance ``sum |Fphi|^2 w^2 vol`` of the functional."""
    fh = _fhat_grid(lattice, fhat)
    w = weight_grid(p, lattice)
    return float(np.sum(np.abs(fh) ** 2 * w * w) * lattice.cell_volume)


def coupling_covariance(p1: NoiseParam, p2: NoiseParam, lattice: Lattice,
                        fhat: Callable) -> float:
    """Cross-covariance of the two weighted functionals under one draw."""
    fh = _fhat_grid(lattice, fhat)
    w1 = weight_grid(p1, lattice)
    w2 = weight_grid(p2, lattice)
    return float(np.sum(np.abs(fh) ** 2 * w1 * w2) * lattice.cell_volume)


def linear_functional(draw: NoiseDraw, p: NoiseParam, fhat: Callable,
                      rtol: float = 1e-9) -> float:
    """Riemann sum ``sum Fphi(c) w_theta(c) value(c)`` over the lattice.

    ``fhat`` must be the Fourier transform of a real test function, i.e.
    Hermitian-symmetric; violations beyond ``rtol`` (relative to the overall
    scale) are rejected, as is an imaginary residual in the result.
    """
    fh = _fhat_grid(draw.lattice, fhat)
    flipped = np.conj(fh[(slice(None, None, -1),) * fh.ndim])
    scale = float(np.max(np.abs(fh))) or 1.0
    if float(np.max(np.abs(fh - flipped))) > rtol * scale * 1e3:
        raise ValueError("fhat is not Hermitian-symmetric (phi not real)")
    w = weight_grid(p, draw.lattice)
    total = complex(np.sum(fh * w * draw.values))
    norm = float(np.sqrt(np.sum(np.abs(fh * w) ** 2 * np.abs(draw.values) ** 2)))
    if abs(total.imag) > rtol * max(norm, 1e-300):
        raise ValueError(f"imaginary residual {total.imag:.3e} above tolerance")
    return total.real


def indicator_fhat(t: float, x: float) -> Callable:
    """Fourier transform of ``1_{[0,t] x [0,x]}`` (dimension one)."""
    def fhat(tau, xi):
        with np.errstate(divide="ignore", invalid="ignore"):
            ft = np.where(tau == 0.0, t, (1.0 - np.exp(-1j * tau * t)) / (1j * tau + (tau == 0.0)))
            fx = np.where(xi == 0.0, x, (1.0 - np.exp(-1j * xi * x)) / (1j * xi + (xi == 0.0)))
        return ft * fx
    return fhat


def save_draw(draw: NoiseDraw, path: str) -> None:
    """Binary dump: magic, version u32, seed u64, lattice f64s, then cell
    values as interleaved (re, im) f64 in lexicographic cell order."""
    lat = draw.lattice
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _FORMAT_VERSION))
        fh.write(struct.pack("<Q", draw.seed))
        fh.write(struct.pack("<5d", lat.tau_max, lat.d_tau, lat.xi_max,
                             lat.d_xi, float(lat.dim)))
        inter = np.empty(2 * lat.n_cells)
        flat = draw.values.reshape(-1)
        inter[0::2] = flat.real
        inter[1::2] = flat.imag
        fh.write(inter.astype("<f8").tobytes())


def load_draw(path: str) -> NoiseDraw:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("not a noise-draw file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != _FORMAT_VERSION:
            raise ValueError(f"unsupported format version {version}")
        (seed,) = struct.unpack("<Q", fh.read(8))
        tau_max, d_tau, xi_max, d_xi, dim = struct.unpack("<5d", fh.read(40))
        dim = int(dim)
        cells = int(round(2.0 * tau_max / d_tau)) + 1
        lat = Lattice(tau_max=tau_max, xi_max=xi_max, dim=dim,
                      cells_per_axis=cells)
        inter = np.frombuffer(fh.read(16 * lat.n_cells), dtype="<f8")
        values = (inter[0::2] + 1j * inter[1::2]).reshape(lat.shape)
    return NoiseDraw(seed=int(seed), lattice=lat, values=values)
