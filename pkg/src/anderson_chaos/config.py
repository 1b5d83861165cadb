"""Run configuration: strict line-based ``key = value`` files with sections.

Unknown sections or keys are hard errors: silent typos corrupt studies.
All values are validated against the model before any computation starts.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from typing import Optional

from .params import EquationKind, NoiseParam, Regime, regular, rough, validate_existence
from .quadrature import QuadratureGrid
from .noise import Lattice


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration (CLI exit code 2)."""


_COMMANDS = ("bounds", "gap", "converge", "holder", "simulate")

_SCHEMA = {
    "run": {"command": str, "seed": int, "seeds": int, "threads": int,
            "chunk": int},
    "model": {"equation": str, "regime": str, "dim": int, "h0": float,
              "theta": float},
    "sequence": {"kind": str, "direction": str, "scale": float,
                 "length": int, "values": str},
    "points": {"t": float, "x": float, "transect": str, "start": float,
               "step": float, "count": int},
    "chaos": {"orders": str, "m": int},
    "quadrature": {"backend": str, "rtol": float, "qmc_samples": int,
                   "time_nodes": int, "time_inner": int,
                   "freq_singular": int, "freq_panel": int,
                   "freq_radius": float},
    "lattice": {"tau_max": float, "xi_max": float, "cells": int,
                "time_intervals": int},
    "holder": {"p": float, "beta": float, "delta": float, "thetas": str,
               "tolerance": float},
    "bounds": {"thetas": str, "window_halfwidth": float, "m_count": int,
               "t": float},
    "tolerances": {"gap_tol": float},
}


@dataclass
class RunConfig:
    command: str
    equation: EquationKind
    regime: Regime
    dim: int
    h0: float
    theta_star: float
    seed: int = 1234
    n_seeds: int = 1000
    threads: Optional[int] = None
    chunk: int = 64
    # sequence
    seq_kind: str = "dyadic"
    seq_direction: str = "above"
    seq_scale: float = 1.0
    seq_length: int = 6
    seq_values: tuple = ()
    # points
    t: float = 1.0
    x: float = 0.0
    transect: str = "time"
    transect_start: float = 0.4
    transect_step: float = 0.1
    transect_count: int = 8
    # chaos
    orders: tuple = (1, 2)
    m: int = 2
    # quadrature
    grid: QuadratureGrid = field(default_factory=QuadratureGrid)
    # lattice
    lattice: Lattice = field(default_factory=lambda: Lattice(64.0, 64.0, 1, 257))
    time_intervals: int = 96
    # holder
    holder_p: float = 2.0
    holder_beta: float = 0.8
    holder_delta: float = 0.3
    holder_thetas: tuple = (0.35, 0.40, 0.45)
    holder_tolerance: float = 0.1
    # bounds
    bounds_thetas: tuple = ()
    bounds_window: float = 0.1
    bounds_m_count: int = 5
    bounds_t: float = 1.0
    # tolerances
    gap_tol: float = 1e-3
    # provenance
    config_text: str = ""

    def param(self, theta: float) -> NoiseParam:
        if self.regime is Regime.REGULAR:
            return regular(theta, self.dim, self.h0)
        return rough(theta, self.h0)

    def sequence(self) -> list[float]:
        """The parameter sequence theta_n (excluding the target)."""
        if self.seq_kind == "explicit":
            return list(self.seq_values)
        sign = 1.0 if self.seq_direction == "above" else -1.0
        return [self.theta_star + sign * self.seq_scale * 2.0 ** (-j)
                for j in range(1, self.seq_length + 1)]

    def config_hash(self) -> str:
        return hashlib.sha256(self.config_text.encode()).hexdigest()[:12]


def _parse_floats(text: str) -> tuple:
    items = [s.strip() for s in text.split(",") if s.strip()]
    return tuple(float(s) for s in items)


def _parse_ints(text: str) -> tuple:
    items = [s.strip() for s in text.split(",") if s.strip()]
    return tuple(int(s) for s in items)


def parse_config(text: str, command: str | None = None) -> RunConfig:
    """Parse and validate a config; raises :class:`ConfigError` on any issue."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc

    values: dict = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            typ = _SCHEMA[section][key]
            try:
                values[(section, key)] = typ(raw) if typ is not str else raw.strip()
            except ValueError as exc:
                raise ConfigError(
                    f"bad value for {section}.{key}: {raw!r}") from exc

    def get(section, key, default=None):
        return values.get((section, key), default)

    cfg_command = get("run", "command")
    if command is not None and cfg_command is not None and cfg_command != command:
        raise ConfigError(
            f"config requests command {cfg_command!r} but {command!r} was invoked")
    cmd = command or cfg_command
    if cmd not in _COMMANDS:
        raise ConfigError(f"unknown or missing command {cmd!r}")

    eq_name = get("model", "equation")
    if eq_name not in ("heat", "wave"):
        raise ConfigError("model.equation must be 'heat' or 'wave'")
    regime_name = get("model", "regime")
    if regime_name not in ("regular", "rough"):
        raise ConfigError("model.regime must be 'regular' or 'rough'")
    theta = get("model", "theta")
    if theta is None:
        raise ConfigError("model.theta is required")

    cfg = RunConfig(
        command=cmd,
        equation=EquationKind(eq_name),
        regime=Regime(regime_name),
        dim=get("model", "dim", 1),
        h0=get("model", "h0", 0.75),
        theta_star=theta,
        seed=get("run", "seed", 1234),
        n_seeds=get("run", "seeds", 1000),
        threads=get("run", "threads"),
        chunk=get("run", "chunk", 64),
        seq_kind=get("sequence", "kind", "dyadic"),
        seq_direction=get("sequence", "direction", "above"),
        seq_scale=get("sequence", "scale", 1.0),
        seq_length=get("sequence", "length", 6),
        seq_values=_parse_floats(get("sequence", "values", "")),
        t=get("points", "t", 1.0),
        x=get("points", "x", 0.0),
        transect=get("points", "transect", "time"),
        transect_start=get("points", "start", 0.4),
        transect_step=get("points", "step", 0.1),
        transect_count=get("points", "count", 8),
        orders=_parse_ints(get("chaos", "orders", "1,2")),
        m=get("chaos", "m", 2),
        time_intervals=get("lattice", "time_intervals", 96),
        holder_p=get("holder", "p", 2.0),
        holder_beta=get("holder", "beta", 0.8),
        holder_delta=get("holder", "delta", 0.3),
        holder_thetas=_parse_floats(get("holder", "thetas", "0.35,0.4,0.45")),
        holder_tolerance=get("holder", "tolerance", 0.1),
        bounds_thetas=_parse_floats(get("bounds", "thetas", "")),
        bounds_window=get("bounds", "window_halfwidth", 0.1),
        bounds_m_count=get("bounds", "m_count", 5),
        bounds_t=get("bounds", "t", 1.0),
        gap_tol=get("tolerances", "gap_tol", 1e-3),
        config_text=text,
    )
    try:
        cfg.grid = QuadratureGrid(
            backend=get("quadrature", "backend", "tensor"),
            rtol=get("quadrature", "rtol", 0.08),
            qmc_samples=get("quadrature", "qmc_samples", 1 << 15),
            time_nodes=get("quadrature", "time_nodes", 10),
            time_inner=get("quadrature", "time_inner", 8),
            freq_singular=get("quadrature", "freq_singular", 8),
            freq_panel=get("quadrature", "freq_panel", 7),
            freq_radius=get("quadrature", "freq_radius", 0.0),
        )
        cfg.lattice = Lattice(
            tau_max=get("lattice", "tau_max", 64.0 / cfg.t),
            xi_max=get("lattice", "xi_max", 64.0),
            dim=cfg.dim,
            cells_per_axis=get("lattice", "cells", 257),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    _validate_model(cfg)
    return cfg


def _validate_model(cfg: RunConfig) -> None:
    thetas = [cfg.theta_star]
    if cfg.command in ("gap", "converge"):
        thetas += cfg.sequence()
    if cfg.command == "holder":
        thetas += list(cfg.holder_thetas)
    if cfg.command == "bounds":
        # inadmissible grid points are reported, not rejected
        if not cfg.bounds_thetas:
            raise ConfigError("bounds.thetas is required for the bounds command")
        thetas = [cfg.theta_star]
    for th in thetas:
        try:
            p = cfg.param(th)
        except ValueError as exc:
            raise ConfigError(f"invalid parameter theta={th}: {exc}") from exc
        rep = validate_existence(p, cfg.equation)
        if not rep.admissible:
            raise ConfigError(
                f"theta={th} inadmissible: {rep.condition_checked} "
                f"(margin={rep.margin:g})")
    if cfg.command == "holder":
        if cfg.transect not in ("time", "space"):
            raise ConfigError("points.transect must be 'time' or 'space'")
        if cfg.transect_count < 3:
            raise ConfigError("holder needs at least 3 transect points")
        if cfg.regime is Regime.REGULAR:
            lo = (cfg.dim - min(cfg.holder_thetas)) / 2.0
            if not lo < cfg.holder_beta < 1.0:
                raise ConfigError(
                    f"holder.beta must lie in ({lo:g}, 1) for these thetas")
        else:
            if not 0.0 < cfg.holder_delta < min(cfg.holder_thetas):
                raise ConfigError(
                    "holder.delta must lie in (0, min(thetas)) in the rough regime")
    if cfg.command in ("gap", "converge") and cfg.seq_kind == "explicit" \
            and not cfg.seq_values:
        raise ConfigError("sequence.values required when sequence.kind=explicit")
    if any(k < 0 or k > 6 for k in cfg.orders):
        raise ConfigError("chaos.orders entries must be in 0..6")
    if cfg.seq_kind not in ("dyadic", "explicit"):
        raise ConfigError("sequence.kind must be 'dyadic' or 'explicit'")
    if cfg.seq_direction not in ("above", "below"):
        raise ConfigError("sequence.direction must be 'above' or 'below'")
