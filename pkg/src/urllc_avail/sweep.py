"""Parameter sweeps written as CSV.

Range sweeps report, per mode, the maximal available range, the chosen phase
split, the range at the equal split and the number of availability
evaluations. An ``r`` sweep reports availability and the packet loss at median
shadowing instead. Values are printed with 9 significant digits; rows that
cannot meet the availability target at any range carry ``infeasible`` and
unbounded ranges carry ``inf``.
"""

from __future__ import annotations

import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import modes
from .availability import AvailabilityScenario, availability
from .channel import large_scale_gain
from .config import ScenarioConfig
from .mc import THREADS_ENV
from .modes import ModeId
from .optimizer import InfeasibleRangeError, available_range_fixed_split, maximize_range

INFEASIBLE = "infeasible"
RANGE_FIELDS = ("r", "T1", "T2", "r_equal", "iterations")


def fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    value = float(value)
    if math.isnan(value):
        return INFEASIBLE
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.9g}"


def apply_value(cfg: ScenarioConfig, name: str, value: float) -> ScenarioConfig:
    if name == "Nt":
        return cfg.replace(Nt=int(round(value)))
    if name == "rho":
        # cellular modes read rho_c, multi-connectivity modes read rho_d
        return cfg.replace(rho_c=float(value), rho_d=float(value))
    return cfg.replace(**{name: float(value)})


def _is_multi(mode: ModeId) -> bool:
    return mode in (ModeId.DF_MULTI, ModeId.AF_MULTI)


def scenario(cfg: ScenarioConfig, mode: ModeId, cache: dict | None = None) -> AvailabilityScenario:
    budget = cfg.budget()
    if mode.is_af:
        # AF relays without decoding, so there is no processing delay
        budget = modes.DelayBudget(budget.D_max, 0.0, budget.D_b)
    elif budget.T1 is None:
        n = budget.frames(cfg.T_f)
        budget = budget.with_split((n // 2) * cfg.T_f, (n - n // 2) * cfg.T_f)
    return AvailabilityScenario(mode, cfg.system(), budget, cfg.qos(), cfg.channel(),
                                R_cell=cfg.R_cell, rho_c=cfg.rho_c, rho_d=cfg.rho_d,
                                _curves={} if cache is None else cache)


def mode_range(cfg: ScenarioConfig, mode: ModeId, cache: dict | None = None) -> dict:
    sc = scenario(cfg, mode, cache)
    try:
        if cfg.fixed_split or mode.is_af:
            T1, T2 = sc.phases
            res = available_range_fixed_split(T1, T2, sc)
            r_equal = res.r_star
        else:
            res = maximize_range(sc)
            half = sc.budget.T1
            r_equal = next((r for T1, _, r in res.candidates if abs(T1 - half) < 1e-12), None)
            r_equal = math.nan if r_equal is None else r_equal
    except InfeasibleRangeError:
        return dict.fromkeys(RANGE_FIELDS, INFEASIBLE)
    return dict(r=res.r_star, T1=res.T1_star, T2=res.T2_star, r_equal=r_equal,
                iterations=int(res.iterations))


def _median_loss(cfg: ScenarioConfig, sc: AvailabilityScenario) -> tuple[float, float | None]:
    ch, sys = sc.channel, sc.sys
    T1, T2 = sc.phases
    mu_r = float(large_scale_gain(cfg.r, 0.0, ch))
    mu_c = float(large_scale_gain(cfg.R_cell, 0.0, ch))
    mode = sc.mode
    if mode is ModeId.D2D:
        return float(modes.packet_loss_d2d(mu_r, T1, T2, sys)), None
    if mode is ModeId.DF_CELLULAR:
        return float(modes.packet_loss_df_cellular(mu_r, mu_r, T1, T2, sys)), None
    if mode is ModeId.DF_MULTI:
        return float(modes.packet_loss_df_multi(mu_c, mu_c, mu_r, T1, T2, sys)), None
    D_t = sc.budget.D_t
    if mode is ModeId.AF_CELLULAR:
        est = modes.packet_loss_af_cellular(mu_r, mu_r, D_t, sys, cfg.mc_budget, cfg.seed,
                                            target_rel_error=None)
    else:
        est = modes.packet_loss_af_multi(mu_c, mu_c, mu_r, D_t, sys, cfg.mc_budget, cfg.seed,
                                         target_rel_error=None)
    return est.mean, est.std_error


def mode_availability(cfg: ScenarioConfig, mode: ModeId, cache: dict | None = None) -> dict:
    sc = scenario(cfg, mode, cache)
    loss, se = _median_loss(cfg, sc)
    out = dict(availability=availability(cfg.r, sc), loss=loss)
    if mode.is_af:
        out["loss_se"] = se
    return out


def columns(cfg: ScenarioConfig) -> list[str]:
    cols = [cfg.series] if cfg.series else []
    cols.append(cfg.sweep)
    for m in cfg.modes:
        if cfg.sweep == "r":
            names = ["availability", "loss"] + (["loss_se"] if ModeId(m).is_af else [])
        else:
            names = list(RANGE_FIELDS)
        cols += [f"{m}_{n}" for n in names]
    return cols


def _row(cfg: ScenarioConfig, series_value, value, cache: dict) -> list[str]:
    point = cfg
    if cfg.series:
        point = apply_value(point, cfg.series, series_value)
    point = apply_value(point, cfg.sweep, value)
    cells = [fmt(series_value)] if cfg.series else []
    cells.append(fmt(value))
    for m in cfg.modes:
        mode = ModeId(m)
        res = mode_availability(point, mode, cache) if cfg.sweep == "r" else mode_range(point, mode,
                                                                                       cache)
        cells += [fmt(v) for v in res.values()]
    return cells


def _workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(THREADS_ENV, "1") or 1)
    return max(1, workers)


def run_sweep(cfg: ScenarioConfig, out: str | Path | None = None,
              workers: int | None = None) -> str:
    """Evaluate every (series, grid) point and return the CSV text.

    Points are evaluated concurrently when ``workers > 1``; rows are always
    written in grid order. The text is also written to ``out`` (or
    ``cfg.output``) when a path is given.
    """
    series_values = cfg.series_grid if cfg.series else (None,)
    points = [(s, v) for s in series_values for v in cfg.grid]
    cache: dict = {}
    n = _workers(workers)
    if n == 1:
        rows = [_row(cfg, s, v, cache) for s, v in points]
    else:
        # one cache per series block keeps threads off each other's curves
        caches = {s: {} for s in series_values}
        with ThreadPoolExecutor(n) as pool:
            rows = list(pool.map(lambda p: _row(cfg, p[0], p[1], caches[p[0]]), points))
    buf = io.StringIO(newline="")
    buf.write(",".join(columns(cfg)) + "\n")
    for row in rows:
        buf.write(",".join(row) + "\n")
    text = buf.getvalue()
    path = out if out is not None else (cfg.output or None)
    if path:
        Path(path).write_bytes(text.encode("utf-8"))
    return text
