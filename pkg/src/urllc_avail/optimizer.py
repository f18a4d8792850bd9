"""Available-range search and phase-split optimization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from typing import Callable

import numpy as np
from scipy import stats

from . import modes
from .availability import AvailabilityScenario, unavailability
from .channel import ChannelParams, large_scale_gain
from .modes import ModeId, SystemParams

R0 = 1.0
RANGE_TOL = 0.01
R_MIN = 1e-3
R_MAX = 1e5


class InfeasibleRangeError(ValueError):
    """Availability target missed even as the range shrinks to zero."""


@dataclass(frozen=True)
class RangeResult:
    r_star: float
    T1_star: float
    T2_star: float
    candidates: tuple[tuple[float, float, float | None], ...] = field(default=())
    residual: float = 0.0
    iterations: int = 0

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.r_star)


def largest_feasible(ok: Callable[[float], bool], r0: float = R0,
                     tol: float = RANGE_TOL) -> tuple[float, int]:
    """Largest r with ``ok(r)`` for a predicate that holds below some range.

    Exponential bracketing from ``r0`` (doubling or halving) followed by
    bisection to ``tol``; the feasible end of the final bracket is returned
    with the number of predicate calls. Returns ``inf`` when ``ok`` still
    holds past ``R_MAX``.
    """
    calls = 0

    def check(r: float) -> bool:
        nonlocal calls
        calls += 1
        return ok(r)

    if check(r0):
        lo, hi = r0, 2.0 * r0
        while check(hi):
            lo, hi = hi, 2.0 * hi
            if hi > R_MAX:
                return math.inf, calls
    else:
        lo, hi = 0.5 * r0, r0
        while not check(lo):
            lo, hi = 0.5 * lo, lo
            if lo < R_MIN:
                raise InfeasibleRangeError("availability target not met even at zero range")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if check(mid):
            lo = mid
        else:
            hi = mid
    return lo, calls


def available_range_fixed_split(T1: float, T2: float, scenario: AvailabilityScenario,
                                r0: float = R0, tol: float = RANGE_TOL) -> RangeResult:
    """Largest range whose availability still meets P_A for a given phase split.

    When the target still holds at ``R_MAX`` (multi-connectivity with a
    strong cellular path) the range is reported as unbounded, ``inf``.
    """
    sc = scenario if scenario.mode.is_af else scenario.with_split(T1, T2)
    target = 1.0 - sc.qos.P_A
    r, calls = largest_feasible(lambda r: unavailability(r, sc) <= target, r0, tol)
    T1e, T2e = sc.phases
    residual = 0.0 if math.isinf(r) else (1.0 - unavailability(r, sc)) - sc.qos.P_A
    return RangeResult(r, T1e, T2e, ((T1e, T2e, r),), residual, calls)


def range_at_fixed_shadowing(loss_of_gain: Callable[[float], float], delta_db: float,
                             eps_max: float, channel: ChannelParams = ChannelParams(),
                             r0: float = R0, tol: float = RANGE_TOL) -> float:
    """Largest r with ``loss_of_gain(mu(r, delta_db)) <= eps_max``.

    Every link sees the same shadowing value; ``loss_of_gain`` may be an
    analytic loss or a common-random-number Monte Carlo estimate.
    """
    def ok(r: float) -> bool:
        mu = float(large_scale_gain(r, delta_db, channel))
        return float(loss_of_gain(mu)) <= eps_max

    return largest_feasible(ok, r0, tol)[0]


def availability_threshold_db(P_A: float, sigma_db: float) -> float:
    """Shadowing value exceeded with probability ``P_A``."""
    return float(stats.norm.ppf(1.0 - P_A) * sigma_db)


def split_candidates(D_t: float, T_f: float) -> list[tuple[float, float]]:
    n = int(math.floor(D_t / T_f + 1e-9))
    return [(k * T_f, (n - k) * T_f) for k in range(1, n)]


def maximize_range(scenario: AvailabilityScenario, D_t: float | None = None,
                   mode: ModeId | None = None) -> RangeResult:
    """Exhaustive scan over frame-aligned splits T1 + T2 = D_t.

    AF modes use the fixed even split. Ties go to the smallest T1.
    """
    if mode is not None and ModeId(mode) is not scenario.mode:
        from .availability import scenario_for
        scenario = scenario_for(scenario, ModeId(mode))
    D_t = scenario.budget.D_t if D_t is None else D_t
    if scenario.mode.is_af:
        from .availability import scenario_for
        sc = scenario_for(scenario, scenario.mode,
                          budget=modes.DelayBudget(D_max=D_t, D_p=0.0, D_b=0.0))
        return available_range_fixed_split(0.5 * D_t, 0.5 * D_t, sc)
    T_f = scenario.sys.T_f
    if D_t < 2 * T_f * (1 - 1e-9):
        raise ValueError("D_t must hold at least two frames")
    rows = []
    best = None
    iters = 0
    for T1, T2 in split_candidates(D_t, T_f):
        try:
            res = available_range_fixed_split(T1, T2, scenario)
        except InfeasibleRangeError:
            rows.append((T1, T2, None))
            continue
        iters += res.iterations
        rows.append((T1, T2, res.r_star))
        if best is None or res.r_star > best.r_star * (1 + 1e-12):
            best = res
    if best is None:
        raise InfeasibleRangeError("no phase split meets the availability target")
    return RangeResult(best.r_star, best.T1_star, best.T2_star, tuple(rows), best.residual, iters)


# ---------------------------------------------------------------------------
# mode comparison

@dataclass(frozen=True)
class ComparisonRow:
    mu_sb: float
    mu_br: float
    mu_sr: float
    T: float
    losses: dict
    af_std_errors: dict
    violations: tuple[str, ...]


def compare_modes(points, sys: SystemParams, mc_budget: int = 10**5, seed: int = 0,
                  k_sigma: float = 3.0) -> list[ComparisonRow]:
    """Packet loss of all five modes on a grid of (mu_sb, mu_br, mu_sr, T) with equal phases.

    Flags any violation of the expected orderings: DF multi below D2D and DF
    cellular, and AF multi below AF cellular within ``k_sigma`` standard errors.
    """
    out = []
    for i, (mu_sb, mu_br, mu_sr, T) in enumerate(points):
        losses = {
            ModeId.D2D.value: float(modes.packet_loss_d2d(mu_sr, T, T, sys)),
            ModeId.DF_CELLULAR.value: float(modes.packet_loss_df_cellular(mu_sb, mu_br, T, T, sys)),
            ModeId.DF_MULTI.value: float(modes.packet_loss_df_multi(mu_sb, mu_br, mu_sr, T, T, sys)),
        }
        af_c = modes.packet_loss_af_cellular(mu_sb, mu_br, 2 * T, sys, mc_budget, seed + i,
                                             target_rel_error=None)
        af_m = modes.packet_loss_af_multi(mu_sb, mu_br, mu_sr, 2 * T, sys, mc_budget, seed + i,
                                          target_rel_error=None)
        losses[ModeId.AF_CELLULAR.value] = af_c.mean
        losses[ModeId.AF_MULTI.value] = af_m.mean
        se = {ModeId.AF_CELLULAR.value: af_c.std_error, ModeId.AF_MULTI.value: af_m.std_error}
        bad = []
        if losses["df_multi"] > losses["d2d"] * (1 + 1e-9):
            bad.append("df_multi>d2d")
        if losses["df_multi"] > losses["df_cellular"] * (1 + 1e-9):
            bad.append("df_multi>df_cellular")
        if af_m.mean - af_c.mean > k_sigma * math.hypot(af_m.std_error, af_c.std_error):
            bad.append("af_multi>af_cellular")
        out.append(ComparisonRow(mu_sb, mu_br, mu_sr, T, losses, se, tuple(bad)))
    return out


def violation_count(rows) -> int:
    return int(np.sum([len(r.violations) for r in rows]))
