"""Per-mode SNRs and packet-loss probabilities given large-scale gains.

Five modes share one delay budget: D2D, AF/DF cellular and AF/DF
multi-connectivity. Analytic losses use the linearized-Q closed forms from
:mod:`urllc_avail.fbl`; AF modes additionally have Monte Carlo estimators with
the exact Q expression.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from . import fbl
from .mc import McEstimate, antithetic_exponential, mc_mean

_FRAME_TOL = 1e-9


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(w: float) -> float:
    return 10.0 * math.log10(w) + 30.0


class ModeId(str, enum.Enum):
    D2D = "d2d"
    AF_CELLULAR = "af_cellular"
    DF_CELLULAR = "df_cellular"
    AF_MULTI = "af_multi"
    DF_MULTI = "df_multi"

    @property
    def is_af(self) -> bool:
        return self in (ModeId.AF_CELLULAR, ModeId.AF_MULTI)


@dataclass(frozen=True)
class SystemParams:
    """Radio parameters. Powers in W, noise density in W/Hz, times in s.

    ``P_b_t`` is the BS total power; ``P_s_t`` is each sender's power.
    """

    P_s_t: float = dbm_to_watt(23.0)
    P_b_t: float = dbm_to_watt(46.0)
    N0: float = dbm_to_watt(-173.0)
    W_total: float = 20e6
    K: int = 10
    Nt: int = 8
    T_f: float = 1e-4
    b: float = 160.0

    def __post_init__(self) -> None:
        for name in ("P_s_t", "P_b_t", "N0", "W_total", "T_f", "b"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError("K must be a positive integer")
        if int(self.Nt) != self.Nt or self.Nt < 1:
            raise ValueError("Nt must be a positive integer")

    @property
    def W(self) -> float:
        return self.W_total / self.K

    @property
    def P_b(self) -> float:
        """BS power on one sender's subchannel; the total is shared by the K subchannels."""
        return self.P_b_t / self.K

    @property
    def noise_power(self) -> float:
        return self.N0 * self.W

    def code(self, T: float) -> fbl.CodeSpec:
        return fbl.CodeSpec(b=self.b, W=self.W, T=T)

    def with_(self, **changes) -> SystemParams:
        return replace(self, **changes)


def is_frame_multiple(T: float, T_f: float) -> bool:
    k = T / T_f
    return k >= 1.0 - _FRAME_TOL and abs(k - round(k)) <= _FRAME_TOL * max(1.0, k)


@dataclass(frozen=True)
class DelayBudget:
    D_max: float = 1e-3
    D_p: float = 0.0
    D_b: float = 0.0
    T1: float | None = None
    T2: float | None = None

    def __post_init__(self) -> None:
        if min(self.D_max, self.D_p, self.D_b) < 0:
            raise ValueError("delays must be non-negative")
        if self.D_t <= _FRAME_TOL * self.D_max:
            raise ValueError("processing and backhaul delays leave no transmission time")

    @property
    def D_t(self) -> float:
        return self.D_max - self.D_p - self.D_b

    def frames(self, T_f: float) -> int:
        """Whole frames available for transmission."""
        return int(math.floor(self.D_t / T_f + _FRAME_TOL))

    def with_split(self, T1: float, T2: float) -> DelayBudget:
        return replace(self, T1=T1, T2=T2)


@dataclass(frozen=True)
class ProcessingModel:
    Omega_p: float
    Omega_b: float
    K_L: float = 0.0
    Delta: float = 0.0

    def __post_init__(self) -> None:
        if min(self.Omega_p, self.K_L, self.Delta) < 0:
            raise ValueError("processing parameters must be non-negative")
        if self.Omega_b <= 0:
            raise ValueError("Omega_b must be positive")


@dataclass(frozen=True)
class LargeScaleTriple:
    mu_sb: float
    mu_br: float
    mu_sr: float

    def __post_init__(self) -> None:
        if min(self.mu_sb, self.mu_br, self.mu_sr) <= 0:
            raise ValueError("large-scale gains must be positive")


def processing_delay_bound(pm: ProcessingModel, K: int, T_f: float) -> float:
    """Upper bound on the BS decode delay under a processor-sharing server."""
    return (K + pm.K_L) * (pm.Omega_p + pm.Delta) / pm.Omega_b * T_f


def delay_feasible(budget: DelayBudget, T_f: float = 1e-4, mode: ModeId | None = None) -> bool:
    """Delay components fit in D_max with both phases a positive number of frames.

    AF modes forward without decoding, so any processing delay makes them infeasible.
    """
    if budget.T1 is None or budget.T2 is None:
        return False
    if mode is not None and ModeId(mode).is_af and budget.D_p > 0:
        return False
    if not (is_frame_multiple(budget.T1, T_f) and is_frame_multiple(budget.T2, T_f)):
        return False
    total = budget.D_p + budget.D_b + budget.T1 + budget.T2
    return total <= budget.D_max * (1.0 + _FRAME_TOL)


# ---------------------------------------------------------------------------
# instantaneous SNRs

def uplink_snr_beta(mu_sb, g_sb, sys: SystemParams):
    return np.asarray(mu_sb) * np.asarray(g_sb) * sys.P_s_t / sys.noise_power


def snr_af_cellular(beta, mu_br, g_br, sys: SystemParams):
    beta = np.asarray(beta, dtype=float)
    dl = np.asarray(mu_br) * np.asarray(g_br) * sys.P_b
    return beta * dl / (dl + (beta + 1.0) * sys.Nt * sys.noise_power)


def snr_af_multi(beta, mu_br, g_br, mu_sr, g_sr, sys: SystemParams):
    beta = np.asarray(beta, dtype=float)
    dl = np.asarray(mu_br) * np.asarray(g_br) * sys.P_b
    d2d = np.asarray(mu_sr) * np.asarray(g_sr) * sys.P_s_t
    return (beta * dl + (beta + 1.0) * sys.Nt * d2d) / (dl + (beta + 1.0) * sys.Nt * sys.noise_power)


def snr_df_multi(mu_br, g_br, mu_sr, g_sr, sys: SystemParams):
    dl = np.asarray(mu_br) * np.asarray(g_br) * sys.P_b / sys.Nt
    return (dl + np.asarray(mu_sr) * np.asarray(g_sr) * sys.P_s_t) / sys.noise_power


# ---------------------------------------------------------------------------
# per-link linearized-Q errors

def _check_duration(T: float) -> None:
    if not T > 0:
        raise ValueError("phase durations must be positive")


def d2d_phase_error(mu_sr, T: float, sys: SystemParams):
    _check_duration(T)
    return fbl.simo_error_closed_form(mu_sr, sys.code(T), 1, sys.P_s_t, sys.noise_power)


def uplink_error(mu_sb, T: float, sys: SystemParams):
    _check_duration(T)
    return fbl.simo_error_closed_form(mu_sb, sys.code(T), sys.Nt, sys.P_s_t, sys.noise_power)


def downlink_error(mu_br, T: float, sys: SystemParams):
    """DL without CSI: power split over Nt antennas, Gamma(Nt) aggregate gain."""
    _check_duration(T)
    return fbl.simo_error_closed_form(mu_br, sys.code(T), sys.Nt, sys.P_b / sys.Nt,
                                      sys.noise_power)


def packet_loss_d2d(mu_sr, T1: float, T2: float, sys: SystemParams):
    return d2d_phase_error(mu_sr, T1, sys) * d2d_phase_error(mu_sr, T2, sys)


def packet_loss_df_cellular(mu_sb, mu_br, T1: float, T2: float, sys: SystemParams):
    e_sb = uplink_error(mu_sb, T1, sys)
    e_br = downlink_error(mu_br, T2, sys)
    return np.clip(e_sb + e_br - e_sb * e_br, 0.0, 1.0)


def df_multi_second_phase_error(mu_br, mu_sr, T2: float, sys: SystemParams):
    """Phase-2 error when the BS and the sender both transmit the packet."""
    _check_duration(T2)
    c_sr = np.asarray(mu_sr, dtype=float) * sys.P_s_t / sys.noise_power
    c_br = np.asarray(mu_br, dtype=float) * sys.P_b / (sys.Nt * sys.noise_power)
    c_sr, c_br = np.broadcast_arrays(c_sr, c_br)
    out = np.reshape(fbl.df_multi_phase_error(c_sr.ravel(), c_br.ravel(), sys.code(T2), sys.Nt),
                     c_sr.shape)
    return out if out.ndim else float(out)


def packet_loss_df_multi(mu_sb, mu_br, mu_sr, T1: float, T2: float, sys: SystemParams):
    e1 = d2d_phase_error(mu_sr, T1, sys)
    e_sb = uplink_error(mu_sb, T1, sys)
    e2_multi = df_multi_second_phase_error(mu_br, mu_sr, T2, sys)
    e2_d2d = d2d_phase_error(mu_sr, T2, sys)
    return np.clip(e1 * ((1.0 - e_sb) * e2_multi + e_sb * e2_d2d), 0.0, 1.0)


# ---------------------------------------------------------------------------
# amplify-and-forward

def af_phase_duration(D_t: float) -> float:
    """AF modes split the transmission time evenly between the two phases."""
    if not D_t > 0:
        raise ValueError("D_t must be positive")
    return 0.5 * D_t


def _gamma_draws(rng: np.random.Generator, nt: int, size: int) -> np.ndarray:
    return rng.standard_exponential(size) if nt == 1 else rng.standard_gamma(nt, size)


def _af_sampler(mu_sb, mu_br, mu_sr, spec: fbl.CodeSpec, sys: SystemParams):
    nt = sys.Nt
    multi = mu_sr is not None

    def snr(g_sb, g_br, g_sr):
        beta = uplink_snr_beta(mu_sb, g_sb, sys)
        if multi:
            return snr_af_multi(beta, mu_br, g_br, mu_sr, g_sr, sys)
        return snr_af_cellular(beta, mu_br, g_br, sys)

    def sample(rng: np.random.Generator, size: int) -> np.ndarray:
        if nt == 1:
            # one sample = mean over an antithetic pair of channel realizations
            a_sb, b_sb = antithetic_exponential(rng, size)
            a_br, b_br = antithetic_exponential(rng, size)
            a_sr, b_sr = antithetic_exponential(rng, size) if multi else (None, None)
            first = fbl.exact_error(snr(a_sb, a_br, a_sr), spec)
            second = fbl.exact_error(snr(b_sb, b_br, b_sr), spec)
            return 0.5 * (first + second)
        g_sb = _gamma_draws(rng, nt, size)
        g_br = _gamma_draws(rng, nt, size)
        g_sr = rng.standard_exponential(size) if multi else None
        return fbl.exact_error(snr(g_sb, g_br, g_sr), spec)

    return sample


def _af_draws(mc_budget: int, sys: SystemParams) -> int:
    # antithetic samples consume two channel realizations each
    return max(1, mc_budget // 2) if sys.Nt == 1 else mc_budget


def packet_loss_af_cellular(mu_sb: float, mu_br: float, D_t: float, sys: SystemParams,
                            mc_budget: int = 10**7, seed: int = 0, workers: int | None = None,
                            target_rel_error: float | None = 0.1) -> McEstimate:
    """Monte Carlo AF-cellular loss with the exact Q expression; T1 = T2 = D_t / 2."""
    spec = sys.code(af_phase_duration(D_t))
    return mc_mean(_af_sampler(mu_sb, mu_br, None, spec, sys), _af_draws(mc_budget, sys), seed,
                   workers=workers, target_rel_error=target_rel_error)


def packet_loss_af_multi(mu_sb: float, mu_br: float, mu_sr: float, D_t: float, sys: SystemParams,
                         mc_budget: int = 10**7, seed: int = 0, workers: int | None = None,
                         target_rel_error: float | None = 0.1) -> McEstimate:
    """AF multi-connectivity loss: analytic D2D phase-1 error times a Monte Carlo phase-2 error."""
    T = af_phase_duration(D_t)
    spec = sys.code(T)
    e1 = float(d2d_phase_error(mu_sr, T, sys))
    e2 = mc_mean(_af_sampler(mu_sb, mu_br, mu_sr, spec, sys), _af_draws(mc_budget, sys), seed,
                 workers=workers, target_rel_error=target_rel_error)
    return e2.scaled(e1)


AF_ORDER = 12
_AF_CHUNK = 16


def _af_second_phase_rows(a, c, s_sr, lq: fbl.LinearizedQ, nt: int, order: int) -> np.ndarray:
    # nested Gauss-Legendre panels over g_sb then g_br; the D2D gain (if any)
    # is averaged in closed form. a, c, s_sr are per-row SNR scales.
    m = a.size
    zeta = max(lq.zeta, 0.0)
    beta_marks = [zeta, lq.xi] + [lq.xi * f for f in (1.001, 1.01, 1.1, 1.5, 3.0, 10.0, 100.0)]
    cellular = not np.any(s_sr > 0)

    def inner(g_sb: np.ndarray) -> np.ndarray:
        p_out = g_sb.shape[1]
        beta = (a[:, None] * g_sb).ravel()
        c_row = np.repeat(c, p_out)
        s_row = np.repeat(s_sr, p_out)
        marks = []
        for t in (zeta, lq.xi):
            with np.errstate(divide="ignore", invalid="ignore"):
                g_t = np.where(beta > t, t * (beta + 1.0) / (c_row * (beta - t)), np.inf)
            marks += [g_t, 0.5 * g_t, 2.0 * g_t]
        upper = marks[3] if cellular else np.full(beta.shape, np.inf)

        def fn(g_br):
            b = beta[:, None]
            denom = c_row[:, None] * g_br + b + 1.0
            gamma0 = b * c_row[:, None] * g_br / denom
            scale = (b + 1.0) * s_row[:, None] / denom
            return fbl.smoothed_linearized_q(gamma0, scale, lq)

        out = fbl.gamma_panel_expectation(fn, nt, upper, marks, order=order)
        return out.reshape(m, p_out)

    outer_marks = [mark / a for mark in beta_marks]
    value = fbl.gamma_panel_expectation(inner, nt, np.full(m, np.inf), outer_marks, order=order)
    return np.clip(value, 0.0, 1.0)


def af_second_phase_error(mu_sb, mu_br, mu_sr, T: float, sys: SystemParams,
                          order: int = AF_ORDER):
    """Linearized-Q phase-2 error of the AF modes; ``mu_sr=None`` gives AF cellular."""
    _check_duration(T)
    lq = fbl.LinearizedQ.from_code(sys.code(T))
    mu_sr = 0.0 if mu_sr is None else mu_sr
    mu_sb, mu_br, mu_sr = np.broadcast_arrays(np.asarray(mu_sb, float), np.asarray(mu_br, float),
                                              np.asarray(mu_sr, float))
    shape = mu_sb.shape
    a = mu_sb.ravel() * sys.P_s_t / sys.noise_power
    c = mu_br.ravel() * sys.P_b / (sys.Nt * sys.noise_power)
    s_sr = mu_sr.ravel() * sys.P_s_t / sys.noise_power
    out = np.empty(a.size)
    for lo in range(0, a.size, _AF_CHUNK):
        sl = slice(lo, lo + _AF_CHUNK)
        out[sl] = _af_second_phase_rows(a[sl], c[sl], s_sr[sl], lq, sys.Nt, order)
    return out.reshape(shape)


def packet_loss_af_cellular_numeric(mu_sb, mu_br, D_t: float, sys: SystemParams):
    """Deterministic linearized-Q counterpart of :func:`packet_loss_af_cellular`."""
    out = af_second_phase_error(mu_sb, mu_br, None, af_phase_duration(D_t), sys)
    return out if out.ndim else float(out)


def packet_loss_af_multi_numeric(mu_sb, mu_br, mu_sr, D_t: float, sys: SystemParams):
    """Deterministic linearized-Q counterpart of :func:`packet_loss_af_multi`."""
    T = af_phase_duration(D_t)
    out = af_second_phase_error(mu_sb, mu_br, mu_sr, T, sys) * d2d_phase_error(mu_sr, T, sys)
    return out if out.ndim else float(out)
