"""Batch front end: run desk-scale experiments and emit CSV/JSON reports.

``anderson-chaos <bounds|gap|converge|holder|simulate> --config <path>
[--out <dir>] [--threads N] [--seed-offset K]``

Every CSV starts with a comment line carrying the package version and a
hash of the config text; a JSON run-manifest echoes the config and records
versions and wall time.  Exit codes: 0 success, 2 config error, 3 numerical
failure (partial CSV still written).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .closed_forms import (chaos_tail_bound, dalang_constant, dominating_term,
                           gamma0_window, heat_k_alpha, rough_constants,
                           tail_index_threshold)
from .config import ConfigError, RunConfig, parse_config
from .ensemble import coupled_ensemble, increment_moments
from .params import (EquationKind, Regime, lower_endpoint_ell,
                     validate_existence)
from .quadrature import QuadratureError, chaos_moment, continuity_gap
from .util import fmt_float, resolve_threads

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def ks_two_sample(a, b) -> float:
    """Sup-distance between the empirical CDFs of two samples."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("ks_two_sample needs nonempty samples")
    grid = np.concatenate([a, b])
    ca = np.searchsorted(a, grid, side="right") / a.size
    cb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(ca - cb)))


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return fmt_float(x)
    return str(x)


class Report:
    """Collects CSV rows and the run manifest for one command."""

    def __init__(self, cfg: RunConfig, out_dir: Path, name: str):
        self.cfg = cfg
        self.out_dir = out_dir
        self.name = name
        self.tables: dict[str, tuple[list, list]] = {}
        self.summary: dict = {}
        self.t0 = time.time()

    def table(self, suffix: str, header: list) -> list:
        key = f"{self.name}_{suffix}" if suffix else self.name
        if key not in self.tables:
            self.tables[key] = (header, [])
        return self.tables[key][1]

    def write(self, status: str = "ok") -> list[Path]:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        stamp = f"# anderson-chaos v{__version__} config-hash={self.cfg.config_hash()}"
        for key, (header, rows) in self.tables.items():
            path = self.out_dir / f"{key}.csv"
            buf = io.StringIO()
            buf.write(stamp + "\r\n")
            writer = csv.writer(buf, lineterminator="\r\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
            path.write_bytes(buf.getvalue().encode())
            paths.append(path)
        manifest = {
            "command": self.cfg.command,
            "version": __version__,
            "config_hash": self.cfg.config_hash(),
            "config": self.cfg.config_text,
            "status": status,
            "summary": self.summary,
            "versions": {"numpy": np.__version__, "scipy": scipy.__version__,
                         "python": sys.version.split()[0]},
            "wall_time_s": time.time() - self.t0,
            "outputs": [p.name for p in paths],
        }
        mpath = self.out_dir / f"{self.name}_manifest.json"
        mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True))
        return paths


def cmd_bounds(cfg: RunConfig, out_dir: Path, threads: int,
               seed_offset: int) -> int:
    rep = Report(cfg, out_dir, "bounds")
    eq = cfg.equation
    m_cols = [f"tail_{i}" for i in range(cfg.bounds_m_count)]
    rows = rep.table("", ["theta", "admissible", "margin", "condition", "ell",
                          "K_value", "K_bound", "r_alpha", "k_alpha_t",
                          "C_H1", "C_H2", "m0", *m_cols])
    for th in cfg.bounds_thetas:
        try:
            p = cfg.param(th)
        except ValueError:
            rows.append([th, False, "", "structurally invalid",
                         lower_endpoint_ell(eq, cfg.h0)] + [""] * (7 + cfg.bounds_m_count))
            continue
        exist = validate_existence(p, eq)
        ell = lower_endpoint_ell(eq, cfg.h0)
        row = [th, exist.admissible, exist.margin, exist.condition_checked, ell]
        tails: list = [""] * (1 + cfg.bounds_m_count)
        if cfg.regime is Regime.REGULAR:
            lo = max(cfg.dim - 2.0, 0.0)
            if lo < th < cfg.dim:
                kd = dalang_constant(cfg.dim, th)
                r_alpha = kd.r_heat if eq is EquationKind.HEAT else kd.r_wave
                ka = (heat_k_alpha(cfg.bounds_t, cfg.dim, th)
                      if eq is EquationKind.HEAT else "")
                row += [kd.value, kd.bound, r_alpha, ka, "", ""]
                # uniform-bound window around theta, kept clear of the
                # admissible boundary where the constants blow up
                a = th - min(cfg.bounds_window, (th - lo) / 2.0)
                b = th + min(cfg.bounds_window, (cfg.dim - th) / 2.0)
                if a < b:
                    g0t = gamma0_window(cfg.bounds_t, cfg.h0)
                    m0 = tail_index_threshold(eq, cfg.dim, a)
                    base = chaos_tail_bound(eq, cfg.dim, a, b, cfg.bounds_t,
                                            m0 + cfg.bounds_m_count - 1, g0t)
                    # suffix accumulation keeps the column exactly monotone
                    vals = [base]
                    for i in range(cfg.bounds_m_count - 1, 0, -1):
                        vals.append(vals[-1] + dominating_term(
                            eq, cfg.dim, a, b, cfg.bounds_t, m0 + i, g0t))
                    tails = [m0] + vals[::-1]
            else:
                row += [""] * 6
        else:
            try:
                c1, c2 = rough_constants(eq, th, cfg.h0)
            except ValueError:
                c1 = c2 = ""
            row += ["", "", "", "", c1, c2]
        rows.append(row + tails)
    rep.write()
    return EXIT_OK


def cmd_gap(cfg: RunConfig, out_dir: Path, threads: int, seed_offset: int) -> int:
    rep = Report(cfg, out_dir, "gap")
    rows = rep.table("", ["n", "k", "theta_n", "q_value", "q_error", "method"])
    p_star = cfg.param(cfg.theta_star)
    seq = cfg.sequence()
    status = "ok"
    code = EXIT_OK
    by_k: dict[int, list[float]] = {k: [] for k in cfg.orders}
    try:
        for n, th in enumerate(seq, start=1):
            p_n = cfg.param(th)
            for k in cfg.orders:
                res = continuity_gap(p_n, p_star, cfg.equation, cfg.t, cfg.x,
                                     k, cfg.grid)
                rows.append([n, k, th, res.value, res.error_estimate,
                             res.method.value])
                by_k[k].append(res.value)
    except QuadratureError as exc:
        status = f"quadrature failure: {exc}"
        code = EXIT_NUMERICAL
    for k, vals in by_k.items():
        tail = vals[-3:]
        ok = (len(tail) == 3 and tail[0] > tail[1] > tail[2]
              and tail[2] < cfg.gap_tol)
        rep.summary[f"k={k}"] = "CONVERGENT" if ok else "NOT_CONVERGENT"
    rep.write(status)
    return code


def cmd_converge(cfg: RunConfig, out_dir: Path, threads: int,
                 seed_offset: int) -> int:
    rep = Report(cfg, out_dir, "converge")
    rows = rep.table("", ["n", "theta_n", "l2_gap", "l2_gap_se", "q_sum",
                          "q_sum_err", "ks", "sample_size"])
    seq = cfg.sequence()
    thetas = [cfg.param(th) for th in seq] + [cfg.param(cfg.theta_star)]
    seeds = [cfg.seed + seed_offset + i for i in range(cfg.n_seeds)]
    status, code = "ok", EXIT_OK
    table = coupled_ensemble(seeds, thetas, cfg.equation, [(cfg.t, cfg.x)],
                             cfg.m, cfg.lattice, cfg.time_intervals,
                             chunk=cfg.chunk, threads=threads)
    u_star = table.column(len(seq), 0)
    try:
        for n, th in enumerate(seq, start=1):
            u_n = table.column(n - 1, 0)
            d2 = (u_n - u_star) ** 2
            gap = float(d2.mean())
            se = float(d2.std(ddof=1) / math.sqrt(d2.size))
            qs, qerr = 0.0, 0.0
            for k in range(1, cfg.m + 1):
                res = continuity_gap(cfg.param(th), cfg.param(cfg.theta_star),
                                     cfg.equation, cfg.t, cfg.x, k, cfg.grid)
                qs += res.value
                qerr += res.error_estimate
            rows.append([n, th, gap, se, qs, qerr,
                         ks_two_sample(u_n, u_star), d2.size])
    except QuadratureError as exc:
        status = f"quadrature failure: {exc}"
        code = EXIT_NUMERICAL
    rep.write(status)
    return code


def _theory_slope(cfg: RunConfig, direction: str) -> float:
    p = cfg.holder_p
    if cfg.regime is Regime.REGULAR:
        beta = cfg.holder_beta
        if cfg.equation is EquationKind.HEAT:
            gamma = (1.0 - beta) / 2.0 if direction == "time" else (1.0 - beta)
        else:
            gamma = 1.0 - beta
        return p * gamma
    delta = cfg.holder_delta
    if cfg.equation is EquationKind.HEAT and direction == "time":
        return p * delta / 2.0
    return p * delta


def cmd_holder(cfg: RunConfig, out_dir: Path, threads: int,
               seed_offset: int) -> int:
    rep = Report(cfg, out_dir, "holder")
    inc_rows = rep.table("increments", ["theta", "direction", "p", "lag",
                                        "estimate", "std_error"])
    slope_rows = rep.table("slopes", ["theta", "direction", "p", "slope",
                                      "theory", "passed"])
    if cfg.transect == "time":
        points = [(cfg.transect_start + i * cfg.transect_step, cfg.x)
                  for i in range(cfg.transect_count)]
    else:
        points = [(cfg.t, cfg.transect_start + i * cfg.transect_step)
                  for i in range(cfg.transect_count)]
    thetas = [cfg.param(th) for th in cfg.holder_thetas]
    seeds = [cfg.seed + seed_offset + i for i in range(cfg.n_seeds)]
    table = coupled_ensemble(seeds, thetas, cfg.equation, points, cfg.m,
                             cfg.lattice, cfg.time_intervals,
                             chunk=cfg.chunk, threads=threads)
    theory = _theory_slope(cfg, cfg.transect)
    min_slope = math.inf
    for it, th in enumerate(cfg.holder_thetas):
        stats = increment_moments(table, cfg.transect, cfg.holder_p, it)
        lags = np.array([s.lag for s in stats])
        ests = np.array([s.estimate for s in stats])
        for s in stats:
            inc_rows.append([th, cfg.transect, cfg.holder_p, s.lag,
                             s.estimate, s.std_error])
        good = ests > 0.0
        if cfg.m == 0 or np.count_nonzero(good) < 2:
            slope_rows.append([th, cfg.transect, cfg.holder_p, "", theory, ""])
            continue
        slope = float(np.polyfit(np.log(lags[good]), np.log(ests[good]), 1)[0])
        passed = slope >= theory - cfg.holder_tolerance
        slope_rows.append([th, cfg.transect, cfg.holder_p, slope, theory, passed])
        min_slope = min(min_slope, slope)
    rep.summary["min_slope"] = None if min_slope is math.inf else min_slope
    rep.summary["theory_slope"] = theory
    rep.write()
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, out_dir: Path, threads: int,
                 seed_offset: int) -> int:
    rep = Report(cfg, out_dir, "simulate")
    rows = rep.table("", ["seed", "theta", "t", "x", "value"])
    thetas_vals = (list(cfg.seq_values)
                   if cfg.seq_kind == "explicit" and cfg.seq_values else [])
    thetas_vals.append(cfg.theta_star)
    thetas = [cfg.param(th) for th in thetas_vals]
    seeds = [cfg.seed + seed_offset + i for i in range(cfg.n_seeds)]
    table = coupled_ensemble(seeds, thetas, cfg.equation, [(cfg.t, cfg.x)],
                             cfg.m, cfg.lattice, cfg.time_intervals,
                             chunk=cfg.chunk, threads=threads)
    for i_s, seed in enumerate(table.seeds):
        for i_t, p in enumerate(table.thetas):
            for i_p, (t, x) in enumerate(table.points):
                rows.append([seed, p.label(), t, x,
                             float(table.samples[i_s, i_t, i_p])])
    rep.write()
    return EXIT_OK


_DISPATCH = {"bounds": cmd_bounds, "gap": cmd_gap, "converge": cmd_converge,
             "holder": cmd_holder, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="anderson-chaos",
        description="Chaos-expansion diagnostics for the parabolic/hyperbolic "
                    "Anderson models with coupled noise parameters.")
    parser.add_argument("command", choices=sorted(_DISPATCH))
    parser.add_argument("--config", required=True, help="path to the run config")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--seed-offset", type=int, default=0)
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text, args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    threads = resolve_threads(args.threads if args.threads is not None
                              else cfg.threads)
    try:
        return _DISPATCH[args.command](cfg, Path(args.out), threads,
                                       args.seed_offset)
    except QuadratureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
