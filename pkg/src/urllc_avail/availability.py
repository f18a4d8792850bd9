"""Network availability over lognormal shadowing.

Availability is the shadowing probability mass on which the conditional
packet loss meets ``eps_max``. Losses depend on distance and shadowing only
through ``delta - 10 alpha log10(r)``, so every threshold curve is a function
of one reduced variable. Curves are tabulated lazily on a uniform dB grid and
reused across ranges and correlation values of one scenario.

Internally everything is computed as unavailability to avoid ``1 - x``
rounding near the availability targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from . import modes
from .channel import RHO_MERGE, ChannelParams, shadowing_correlation
from .fbl import QuadratureError
from .modes import DelayBudget, ModeId, SystemParams

TRUNCATION_SIGMAS = 8.0
BRACKET_SIGMAS = 20.0
THRESHOLD_TOL_DB = 1e-6
# AF losses need a 2-D integral per evaluation, so their curves are coarser
AF_STEP_DB = 0.25
AF_LOG_STEP = 0.1
AF_TOL_DB = 1e-3
# reduced variables are shifted by path loss, so their bracket is widened to
# cover distances from a few centimetres to a few thousand kilometres
_REDUCED_EXTRA_DB = 250.0

_GL_ORDER = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)


@dataclass(frozen=True)
class QoSRequirement:
    eps_max: float = 1e-7
    P_A: float = 0.99999

    def __post_init__(self) -> None:
        if not 0.0 < self.eps_max < 1.0:
            raise ValueError("eps_max must lie in (0, 1)")
        if not 0.0 < self.P_A < 1.0:
            raise ValueError("P_A must lie in (0, 1)")


# ---------------------------------------------------------------------------
# thresholds

def shadow_threshold_batch(loss: Callable[[np.ndarray], np.ndarray], eps_max: float, n: int,
                           lo: float, hi: float, tol: float = THRESHOLD_TOL_DB) -> np.ndarray:
    """Row-wise root of ``loss(x) = eps_max`` for ``n`` decreasing loss curves.

    ``loss`` maps an (n,) array of x values (one per curve) to losses. Rows
    infeasible even at ``hi`` get +inf; rows already met at ``lo`` get -inf.
    Bisection stops at ``tol`` and finishes with one log-linear interpolation.
    """
    a = np.full(n, float(lo))
    b = np.full(n, float(hi))
    la = np.asarray(loss(a), dtype=float)
    lb = np.asarray(loss(b), dtype=float)
    never = lb > eps_max
    always = la < eps_max
    active = ~(never | always)
    width = hi - lo
    while width > tol and np.any(active):
        mid = 0.5 * (a + b)
        lm = np.asarray(loss(mid), dtype=float)
        ok = lm <= eps_max
        b = np.where(ok, mid, b)
        lb = np.where(ok, lm, lb)
        a = np.where(ok, a, mid)
        la = np.where(ok, la, lm)
        width *= 0.5
    with np.errstate(divide="ignore", invalid="ignore"):
        ga, gb, ge = np.log(la), np.log(lb), math.log(eps_max)
        frac = (ga - ge) / (ga - gb)
    frac = np.where(np.isfinite(frac) & (frac >= 0) & (frac <= 1), frac, 0.5)
    out = a + frac * (b - a)
    out = np.where(never, np.inf, out)
    return np.where(always, -np.inf, out)


def shadow_threshold(loss_fn: Callable, eps_max: float, sigma: float,
                     tol: float = THRESHOLD_TOL_DB) -> float:
    """Shadowing value (dB) at which a decreasing loss curve crosses ``eps_max``.

    Searched on [-20 sigma, 20 sigma]; +inf means infeasible at any shadowing
    in range, -inf means feasible throughout.
    """
    out = shadow_threshold_batch(lambda x: np.asarray(loss_fn(x), dtype=float).reshape(1),
                                 eps_max, 1, -BRACKET_SIGMAS * sigma, BRACKET_SIGMAS * sigma, tol)
    return float(out[0])


class ThresholdCurve:
    """Lazily tabulated ``s -> x*(s)`` with ``loss(x*(s), s) = eps_max``.

    Grid values are cached by index; queries use 4-point cubic interpolation,
    falling back to linear where a stencil touches a sentinel.

    Curves may have a logarithmic asymptote at ``singular``: on the side
    ``side`` (+1 right, -1 left) the curve is finite, on the other it equals
    ``beyond``. Within ``near`` dB of the asymptote values are tabulated
    against log10 of the distance to it, where the curve is nearly linear.
    """

    near = 1.0
    log_step = 0.05
    log_floor = -12.0

    def __init__(self, loss: Callable[[np.ndarray, np.ndarray], np.ndarray], eps_max: float,
                 lo: float, hi: float, step: float = 0.05, tol: float = THRESHOLD_TOL_DB,
                 singular: float | None = None, side: int = 1, beyond: float = np.inf,
                 log_step: float | None = None):
        self.loss = loss
        self.eps_max = eps_max
        self.lo, self.hi = lo, hi
        self.step = step
        self.tol = tol
        self.singular = singular if singular is not None and np.isfinite(singular) else None
        self.side = side
        self.beyond = beyond
        if log_step is not None:
            self.log_step = log_step
        self._cache: dict[int, float] = {}
        self._log_cache: dict[int, float] = {}
        self.evaluations = 0

    def _solve(self, s: np.ndarray) -> np.ndarray:
        self.evaluations += s.size
        return shadow_threshold_batch(lambda x: self.loss(x, s), self.eps_max, s.size,
                                      self.lo, self.hi, self.tol)

    def _lookup(self, cache: dict, idx: np.ndarray, to_s) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        uniq = np.unique(idx)
        missing = np.array([i for i in uniq.tolist() if i not in cache], dtype=np.int64)
        if missing.size:
            cache.update(zip(missing.tolist(), self._solve(to_s(missing)).tolist()))
        vals = np.array([cache[i] for i in uniq.tolist()])
        return vals[np.searchsorted(uniq, idx)]

    def grid_values(self, idx: np.ndarray) -> np.ndarray:
        return self._lookup(self._cache, idx, lambda i: i * self.step)

    def _interp(self, u: np.ndarray, values) -> np.ndarray:
        i0 = np.floor(u).astype(np.int64)
        t = u - i0
        stencil = i0[..., None] + np.arange(-1, 3)
        v = values(stencil.ravel()).reshape(stencil.shape)
        big = 4.0 * max(abs(self.lo), abs(self.hi))
        v = np.clip(v, -big, big)
        w = np.stack([-t * (t - 1) * (t - 2) / 6, (t + 1) * (t - 1) * (t - 2) / 2,
                      -(t + 1) * t * (t - 2) / 2, (t + 1) * t * (t - 1) / 6], axis=-1)
        cubic = np.sum(w * v, axis=-1)
        linear = (1 - t) * v[..., 1] + t * v[..., 2]
        edge = np.any((v <= self.lo) | (v >= self.hi), axis=-1)
        return np.where(edge, linear, cubic)

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        out = np.empty(s.shape)
        if self.singular is None:
            out[...] = self._interp(s / self.step, self.grid_values)
            return out
        dist = self.side * (s - self.singular)
        far = dist >= self.near
        close = (dist > 0) & ~far
        out[dist <= 0] = self.beyond
        if np.any(far):
            out[far] = self._interp(s[far] / self.step, self.grid_values)
        if np.any(close):
            u = np.maximum(np.log10(dist[close]), self.log_floor) / self.log_step

            def values(idx):
                def to_s(i):
                    return self.singular + self.side * 10.0 ** (i * self.log_step)
                return self._lookup(self._log_cache, idx, to_s)

            out[close] = self._interp(u, values)
        return out


# ---------------------------------------------------------------------------
# Gaussian integrals

def _graded_edges(a: float, b: float, grade_left: bool, grade_right: bool,
                  n: int, levels: int = 40) -> np.ndarray:
    edges = np.linspace(a, b, n + 1)
    h = edges[1] - edges[0]
    geo = h * 0.5 ** np.arange(1, levels + 1)
    parts = [edges]
    if grade_left:
        parts.append(a + geo)
    if grade_right:
        parts.append(b - geo)
    return np.unique(np.concatenate(parts))


def gauss_legendre_panels(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                          rtol: float = 1e-6, atol: float = 1e-15, start: int = 8,
                          max_panels: int = 4096, grade_left: bool = False,
                          grade_right: bool = False) -> float:
    """Composite Gauss-Legendre with panel doubling until two levels agree.

    ``grade_left``/``grade_right`` add geometrically shrinking panels at an
    endpoint where the integrand has a logarithmic-type singularity.
    """
    if not b > a:
        return 0.0
    prev = None
    n = start
    while n <= max_panels:
        edges = _graded_edges(a, b, grade_left, grade_right, n)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        nodes = mid[:, None] + half[:, None] * _GL_X
        val = float(np.sum(half[:, None] * _GL_W * f(nodes)))
        if prev is not None and abs(val - prev) <= max(rtol * abs(val), atol):
            return val
        prev = val
        n *= 2
    raise QuadratureError(f"panel quadrature on [{a}, {b}] did not converge",
                          estimate=prev, intervals=n // 2, worst_error=float("nan"))


def _norm_pdf(x, sigma):
    return np.exp(-0.5 * (x / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))


def conditional_unavailability(threshold: Callable[[np.ndarray], np.ndarray], rho: float,
                               sigma: float, lower: float = -np.inf, breaks=(),
                               rtol: float = 1e-6) -> float:
    """Pr{delta_b < lower} + Pr{delta_b >= lower, delta_a < threshold(delta_b)}.

    (delta_a, delta_b) are zero-mean Gaussians with deviation ``sigma`` and
    correlation ``rho``; the inner probability is the conditional Gaussian CDF.
    ``breaks`` are points where ``threshold`` is singular; the integration is
    split and graded there, as it is at a finite ``lower``.
    """
    if abs(rho) >= 1.0:
        raise ValueError("conditional form needs |rho| < 1")
    cond_sd = sigma * math.sqrt(1.0 - rho * rho)
    top = TRUNCATION_SIGMAS * sigma
    start = max(lower, -top)
    base = float(special.ndtr(lower / sigma)) if np.isfinite(lower) else 0.0
    if start >= top:
        return min(1.0, base)

    def integrand(d):
        with np.errstate(invalid="ignore"):
            z = (threshold(d) - rho * d) / cond_sd
        return _norm_pdf(d, sigma) * special.ndtr(z)

    cuts = sorted(c for c in breaks if np.isfinite(c) and start < c < top)
    pts = [start, *cuts, top]
    graded = {c for c in cuts}
    if np.isfinite(lower) and lower > -top:
        graded.add(start)
    total = base
    for a, b in zip(pts[:-1], pts[1:]):
        total += gauss_legendre_panels(integrand, a, b, rtol=rtol, atol=1e-15 / len(pts),
                                       grade_left=a in graded, grade_right=b in graded)
    return float(np.clip(total, 0.0, 1.0))


def availability_from_threshold(threshold_db: float, sigma: float) -> float:
    """Pr{delta >= threshold} for delta ~ N(0, sigma^2)."""
    return float(special.ndtr(-threshold_db / sigma))


# ---------------------------------------------------------------------------
# scenarios

def _path_loss_db(r, channel: ChannelParams):
    return 10.0 * channel.alpha * np.log10(r)


def _gain(reduced_db, channel: ChannelParams):
    # linear gain for shadowing-minus-path-loss in dB
    return 10.0 ** ((np.asarray(reduced_db) + channel.mu0_db) / 10.0)


@dataclass
class AvailabilityScenario:
    """Mode, radio and delay settings plus the per-scenario threshold cache.

    ``rho_c`` correlates UL and DL shadowing (DF/AF cellular); ``rho_d``
    correlates merged cellular and D2D shadowing (multi-connectivity) and
    defaults to the geometric value at ``R_cell``.
    """

    mode: ModeId
    sys: SystemParams = field(default_factory=SystemParams)
    budget: DelayBudget = field(default_factory=lambda: DelayBudget(T1=4e-4, T2=4e-4))
    qos: QoSRequirement = field(default_factory=QoSRequirement)
    channel: ChannelParams = field(default_factory=ChannelParams)
    R_cell: float = 250.0
    rho_c: float = 0.0
    rho_d: float | None = None
    step_db: float = 0.05
    _curves: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.mode = ModeId(self.mode)
        if self.R_cell <= 0:
            raise ValueError("R_cell must be positive")

    @property
    def rho_d_value(self) -> float:
        if self.rho_d is not None:
            return self.rho_d
        return float(shadowing_correlation(self.R_cell, self.channel.r0))

    @property
    def phases(self) -> tuple[float, float]:
        if self.mode.is_af:
            T = modes.af_phase_duration(self.budget.D_t)
            return T, T
        if self.budget.T1 is None or self.budget.T2 is None:
            raise ValueError("phase durations T1 and T2 are not set")
        return self.budget.T1, self.budget.T2

    def with_split(self, T1: float, T2: float) -> AvailabilityScenario:
        # shares the cache; keys include the phase durations
        return AvailabilityScenario(self.mode, self.sys, self.budget.with_split(T1, T2), self.qos,
                                    self.channel, self.R_cell, self.rho_c, self.rho_d,
                                    self.step_db, self._curves)

    def _key(self, tag: str):
        return (tag, self.mode, self.phases, self.qos.eps_max, self.R_cell, self.sys, self.channel,
                self.step_db)

    def _reduced_bracket(self) -> tuple[float, float]:
        sig = self.channel.sigma_db
        return -BRACKET_SIGMAS * sig - _REDUCED_EXTRA_DB, BRACKET_SIGMAS * sig + 50.0

    def _abs_bracket(self) -> tuple[float, float]:
        sig = self.channel.sigma_db
        return -BRACKET_SIGMAS * sig, BRACKET_SIGMAS * sig

    # -- two-link loss functions in reduced/absolute dB variables ---------
    def _cellular_loss(self, x_sb, s_br):
        T1, T2 = self.phases
        ch = self.channel
        if self.mode is ModeId.DF_CELLULAR:
            return modes.packet_loss_df_cellular(_gain(x_sb, ch), _gain(s_br, ch), T1, T2, self.sys)
        return modes.packet_loss_af_cellular_numeric(_gain(x_sb, ch), _gain(s_br, ch),
                                                     2 * T1, self.sys)

    def _multi_loss(self, delta_c, s_sr):
        T1, T2 = self.phases
        ch = self.channel
        mu_c = _gain(np.asarray(delta_c) - _path_loss_db(self.R_cell, ch), ch)
        mu_sr = _gain(s_sr, ch)
        if self.mode is ModeId.DF_MULTI:
            return modes.packet_loss_df_multi(mu_c, mu_c, mu_sr, T1, T2, self.sys)
        return modes.packet_loss_af_multi_numeric(mu_c, mu_c, mu_sr, 2 * T1, self.sys)

    def _d2d_loss(self, s_sr):
        T1, T2 = self.phases
        return modes.packet_loss_d2d(_gain(s_sr, self.channel), T1, T2, self.sys)

    # -- cached pieces ------------------------------------------------------
    def _cached(self, tag: str, build):
        key = self._key(tag)
        if key not in self._curves:
            self._curves[key] = build()
        return self._curves[key]

    def _grid_settings(self) -> dict:
        if self.mode.is_af:
            return dict(step=max(self.step_db, AF_STEP_DB), tol=AF_TOL_DB, log_step=AF_LOG_STEP)
        return dict(step=self.step_db)

    def threshold_curve(self) -> ThresholdCurve:
        """Conditional threshold curve for the two-link modes."""
        if self.mode in (ModeId.DF_CELLULAR, ModeId.AF_CELLULAR):
            lo, hi = self._reduced_bracket()
            # below the DL-only threshold no UL shadowing suffices
            return self._cached("curve", lambda: ThresholdCurve(
                self._cellular_loss, self.qos.eps_max, lo, hi,
                singular=self.downlink_reduced_threshold(), side=1, beyond=np.inf,
                **self._grid_settings()))
        if self.mode in (ModeId.DF_MULTI, ModeId.AF_MULTI):
            lo, hi = self._abs_bracket()
            # above the D2D-only threshold any cellular shadowing suffices
            return self._cached("curve", lambda: ThresholdCurve(
                self._multi_loss, self.qos.eps_max, lo, hi,
                singular=self.d2d_reduced_threshold(), side=-1, beyond=-np.inf,
                **self._grid_settings()))
        raise ValueError(f"{self.mode.value} has a single shadowing variable")

    def _scalar_threshold(self, tag: str, loss: Callable[[np.ndarray], np.ndarray],
                          bracket: tuple[float, float]) -> float:
        def build():
            # these also locate curve asymptotes, hence the tight tolerance
            out = shadow_threshold_batch(loss, self.qos.eps_max, 1, *bracket, tol=1e-10)
            return float(out[0])
        return self._cached(tag, build)

    def d2d_reduced_threshold(self) -> float:
        return self._scalar_threshold("d2d", self._d2d_loss, self._reduced_bracket())

    def downlink_reduced_threshold(self) -> float:
        """Shadowing-minus-path-loss at which the DL alone meets eps_max (UL perfect)."""
        T1, T2 = self.phases
        ch = self.channel
        if self.mode is ModeId.DF_CELLULAR:
            loss = lambda s: modes.downlink_error(_gain(s, ch), T2, self.sys)
        else:
            loss = lambda s: modes.packet_loss_af_cellular_numeric(
                np.full(np.shape(s), 1e30), _gain(s, ch), 2 * T1, self.sys)
        return self._scalar_threshold("dl", loss, self._reduced_bracket())

    def merged_cellular_reduced_threshold(self) -> float:
        return self._scalar_threshold("merged_c", lambda s: self._cellular_loss(s, s),
                                      self._reduced_bracket())


# ---------------------------------------------------------------------------
# public availability operations

def availability_single_link(r: float, loss_fn: Callable, channel: ChannelParams,
                             qos: QoSRequirement) -> float:
    """Availability of one link whose loss depends on its large-scale gain.

    ``loss_fn`` maps a linear large-scale gain to a packet-loss probability.
    """
    return 1.0 - unavailability_single_link(r, loss_fn, channel, qos)


def unavailability_single_link(r: float, loss_fn: Callable, channel: ChannelParams,
                               qos: QoSRequirement) -> float:
    if r <= 0:
        raise ValueError("range must be positive")
    pl = float(_path_loss_db(r, channel))
    F = shadow_threshold(lambda d: loss_fn(_gain(np.asarray(d) - pl, channel)), qos.eps_max,
                         channel.sigma_db)
    return float(special.ndtr(F / channel.sigma_db))


def unavailability_d2d(r: float, scenario: AvailabilityScenario) -> float:
    if r <= 0:
        raise ValueError("range must be positive")
    F = _path_loss_db(r, scenario.channel) + scenario.d2d_reduced_threshold()
    return float(special.ndtr(F / scenario.channel.sigma_db))


def unavailability_cellular(r: float, rho_c: float, scenario: AvailabilityScenario) -> float:
    """UL and DL both at distance ``r`` with shadowing correlation ``rho_c``."""
    if r <= 0:
        raise ValueError("range must be positive")
    sigma = scenario.channel.sigma_db
    pl = float(_path_loss_db(r, scenario.channel))
    if rho_c >= RHO_MERGE:
        F = pl + scenario.merged_cellular_reduced_threshold()
        return float(special.ndtr(F / sigma))
    curve = scenario.threshold_curve()
    lower = pl + scenario.downlink_reduced_threshold()
    return conditional_unavailability(lambda d: pl + curve(d - pl), rho_c, sigma, lower)


def unavailability_multi(r_d: float, rho_d: float, scenario: AvailabilityScenario) -> float:
    """Merged cellular shadowing at ``R_cell`` in parallel with a D2D link of length ``r_d``."""
    if r_d <= 0:
        raise ValueError("range must be positive")
    sigma = scenario.channel.sigma_db
    pl = float(_path_loss_db(r_d, scenario.channel))
    if rho_d >= RHO_MERGE:
        def loss(d):
            return scenario._multi_loss(d, np.asarray(d) - pl)
        F = shadow_threshold_batch(loss, scenario.qos.eps_max, 1, *scenario._abs_bracket())[0]
        return float(special.ndtr(F / sigma))
    curve = scenario.threshold_curve()
    sing = pl + scenario.d2d_reduced_threshold()
    return conditional_unavailability(lambda d: curve(d - pl), rho_d, sigma, breaks=(sing,))


def availability_df_cellular(r: float, rho_c: float, scenario: AvailabilityScenario) -> float:
    if scenario.mode is not ModeId.DF_CELLULAR:
        scenario = scenario_for(scenario, ModeId.DF_CELLULAR)
    return 1.0 - unavailability_cellular(r, rho_c, scenario)


def availability_df_multi(r_d: float, R_cell: float, rho_d: float,
                          scenario: AvailabilityScenario) -> float:
    if scenario.mode is not ModeId.DF_MULTI or scenario.R_cell != R_cell:
        scenario = scenario_for(scenario, ModeId.DF_MULTI, R_cell=R_cell)
    return 1.0 - unavailability_multi(r_d, rho_d, scenario)


def scenario_for(base: AvailabilityScenario, mode: ModeId, **changes) -> AvailabilityScenario:
    """Copy of ``base`` with another mode; the curve cache is shared (keys are complete)."""
    kw = dict(mode=mode, sys=base.sys, budget=base.budget, qos=base.qos, channel=base.channel,
              R_cell=base.R_cell, rho_c=base.rho_c, rho_d=base.rho_d, step_db=base.step_db,
              _curves=base._curves)
    kw.update(changes)
    return AvailabilityScenario(**kw)


def unavailability(r: float, scenario: AvailabilityScenario) -> float:
    """Mode-dispatched unavailability at range ``r``.

    For multi-connectivity modes ``r`` is the D2D range; the cellular links sit
    at ``scenario.R_cell``.
    """
    mode = scenario.mode
    if mode is ModeId.D2D:
        return unavailability_d2d(r, scenario)
    if mode in (ModeId.DF_CELLULAR, ModeId.AF_CELLULAR):
        return unavailability_cellular(r, scenario.rho_c, scenario)
    return unavailability_multi(r, scenario.rho_d_value, scenario)


def availability(r: float, scenario: AvailabilityScenario) -> float:
    return 1.0 - unavailability(r, scenario)
