"""Noise/equation parameter space and admissibility checks.

Two equations (heat and wave, both with multiplicative noise and flat unit
initial data) are driven by a Gaussian noise that is homogeneous in space and
time.  The spatial spectral measure comes in two families:

* ``regular``:  ``|xi|^(-alpha) dxi`` with ``0 < alpha < d``, any dimension;
* ``rough``:    ``c_H |xi|^(1-2H) dxi`` with ``0 < H < 1/2``, dimension one.

The temporal covariance is a fractional kernel ``alpha_{H0} |t|^(2H0-2)``
with ``H0 in (1/2, 1)``, or (regular family only) a tabulated spectral
density ``g0 >= 0``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional


class EquationKind(enum.Enum):
    HEAT = "heat"
    WAVE = "wave"


class Regime(enum.Enum):
    REGULAR = "regular"
    ROUGH = "rough"


@dataclass(frozen=True)
class TemporalKernel:
    """Temporal covariance of the noise.

    ``h0`` is the Hurst index of the fractional kernel
    ``gamma0(t) = h0*(2*h0-1)*|t|^(2*h0-2)`` whose spectral density is
    ``g0(tau) = c_{h0} |tau|^(1-2*h0)``.  A tabulated density ``g0`` may be
    supplied instead (regular spatial family only); it must be nonnegative.
    """

    h0: float = 0.75
    g0: Optional[Callable[[float], float]] = field(default=None, compare=False)

    def __post_init__(self):
        if not 0.5 < self.h0 < 1.0:
            raise ValueError(f"temporal Hurst index h0={self.h0} not in (1/2, 1)")

    @property
    def fractional(self) -> bool:
        return self.g0 is None


@dataclass(frozen=True)
class NoiseParam:
    """One point of the noise parameter space.

    ``regime`` selects the spatial spectral family.  For the regular family
    supply ``alpha`` (and ``dim``); for the rough family supply ``hurst``
    (``dim`` is forced to 1).
    """

    regime: Regime
    alpha: Optional[float] = None
    hurst: Optional[float] = None
    dim: int = 1
    temporal: TemporalKernel = field(default_factory=TemporalKernel)

    def __post_init__(self):
        if self.regime is Regime.REGULAR:
            if self.alpha is None:
                raise ValueError("regular regime requires alpha")
            if self.dim < 1:
                raise ValueError("dimension must be >= 1")
            if not 0.0 < self.alpha < self.dim:
                raise ValueError(
                    f"alpha={self.alpha} not in (0, d) for d={self.dim}"
                )
        else:
            if self.hurst is None:
                raise ValueError("rough regime requires hurst")
            if self.dim != 1:
                raise ValueError("rough regime is defined for dim=1 only")
            if not 0.0 < self.hurst < 0.5:
                raise ValueError(f"hurst={self.hurst} not in (0, 1/2)")
            if not self.temporal.fractional:
                raise ValueError(
                    "rough regime requires the fractional temporal kernel"
                )

    @property
    def theta(self) -> float:
        """The scalar noise parameter (alpha or H)."""
        return self.alpha if self.regime is Regime.REGULAR else self.hurst

    def label(self) -> str:
        """Stable text form used in CSV output."""
        if self.regime is Regime.REGULAR:
            return f"regular:alpha={self.alpha!r},d={self.dim}"
        return f"rough:H={self.hurst!r}"


@dataclass(frozen=True)
class ExistenceReport:
    admissible: bool
    condition_checked: str
    margin: float

    def __post_init__(self):
        if self.admissible != (self.margin > 0.0):
            raise ValueError("admissible must be equivalent to margin > 0")


def lower_endpoint_ell(eq: EquationKind, h0: float) -> float:
    """Lower endpoint of the admissible Hurst interval in the rough regime.

    ``max(3/4 - h0, 0)`` for the heat equation, ``1/4`` for the wave
    equation.
    """
    if not 0.5 < h0 < 1.0:
        raise ValueError(f"h0={h0} not in (1/2, 1)")
    if eq is EquationKind.HEAT:
        return max(0.75 - h0, 0.0)
    return 0.25


def validate_existence(p: NoiseParam, eq: EquationKind) -> ExistenceReport:
    """Check the existence condition for the chaos-series solution.

    Boundary points (margin exactly 0) are reported inadmissible: every
    result we verify numerically holds on open parameter intervals.  The
    rough-regime conditions are sufficient conditions from the literature;
    the report's text says so.
    """
    if p.regime is Regime.REGULAR:
        d, alpha = p.dim, p.alpha
        if eq is EquationKind.HEAT or not p.temporal.fractional:
            # Dalang: d - alpha < 2.  Necessary and sufficient for heat with
            # the fractional kernel, otherwise a sufficient condition.
            lower = max(d - 2.0, 0.0)
            name = "Dalang: d-alpha<2"
            if not (eq is EquationKind.HEAT and p.temporal.fractional):
                name += " (sufficient condition)"
        else:
            lower = max(d - 2.0 * p.temporal.h0 - 1.0, 0.0)
            name = "wave fractional-time: d-alpha<2*H0+1"
        margin = min(alpha - lower, d - alpha)
        return ExistenceReport(margin > 0.0, name, margin)

    ell = lower_endpoint_ell(eq, p.temporal.h0)
    if eq is EquationKind.HEAT:
        name = "heat rough: H0+H>3/4 (sufficient condition)"
    else:
        name = "wave rough: H>1/4 (sufficient condition)"
    margin = min(p.hurst - ell, 0.5 - p.hurst)
    return ExistenceReport(margin > 0.0, name, margin)


def regular(alpha: float, dim: int = 1, h0: float = 0.75,
            g0: Optional[Callable[[float], float]] = None) -> NoiseParam:
    """Convenience constructor for a regular-regime parameter."""
    return NoiseParam(Regime.REGULAR, alpha=alpha, dim=dim,
                      temporal=TemporalKernel(h0=h0, g0=g0))


def rough(hurst: float, h0: float = 0.75) -> NoiseParam:
    """Convenience constructor for a rough-regime parameter."""
    return NoiseParam(Regime.ROUGH, hurst=hurst,
                      temporal=TemporalKernel(h0=h0))
