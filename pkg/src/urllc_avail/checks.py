"""Oracle suite: every analytic quantity against an independent computation.

Each check yields one :class:`CheckResult`. Sampling checks pass when the
analytic value lies within ``k`` standard errors of the Monte Carlo mean
(``k = 3 * tolerance_scale``); deterministic checks compare against a
tolerance scaled the same way.
"""

from __future__ import annotations

import decimal
import json
import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy import integrate, special

from . import channel, fbl, modes, oracle
from .availability import (AvailabilityScenario, QoSRequirement, shadow_threshold,
                           unavailability_multi, unavailability_single_link)
from .channel import ChannelParams, large_scale_gain
from .modes import ModeId, SystemParams

K_SIGMA = 3.0
KS_SAMPLES = 10**6
MC_SAMPLES = 10**6


@dataclass(frozen=True)
class CheckResult:
    check_id: str
    analytic: float
    oracle: float
    std_error: float
    passed: bool

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "FAIL"


@dataclass(frozen=True)
class SuiteOptions:
    tolerance_scale: float = 1.0
    seed: int = 0
    mc_samples: int = MC_SAMPLES
    ks_samples: int = KS_SAMPLES
    # negative control: perturbs the C_br constant inside the DF-multi CDF
    corrupt_df_multi_cdf: bool = False


def _mc_check(check_id: str, analytic: float, est, opts: SuiteOptions) -> CheckResult:
    k = K_SIGMA * opts.tolerance_scale
    ok = abs(analytic - est.mean) <= k * est.std_error
    return CheckResult(check_id, float(analytic), est.mean, est.std_error, bool(ok))


def _close_check(check_id: str, analytic: float, reference: float, rtol: float,
                 opts: SuiteOptions, atol: float = 0.0) -> CheckResult:
    tol = opts.tolerance_scale * max(rtol * abs(reference), atol)
    return CheckResult(check_id, float(analytic), float(reference), 0.0,
                       bool(abs(analytic - reference) <= tol))


def df_multi_cdf(opts: SuiteOptions) -> Callable:
    if not opts.corrupt_df_multi_cdf:
        return fbl.cdf_snr_df_multi
    return lambda x, c_sr, c_br, nt: fbl.cdf_snr_df_multi(x, c_sr, 1.05 * c_br, nt)


def df_multi_snr_samples(c_sr: float, c_br: float, nt: int, n: int, seed: int) -> np.ndarray:
    rng = channel.substream(seed, 7)
    g_br = rng.standard_gamma(nt, n) if nt > 1 else rng.standard_exponential(n)
    return c_br * g_br + c_sr * rng.standard_exponential(n)


# ---------------------------------------------------------------------------
# individual checks

_SYS = SystemParams()
_T = 4e-4


def check_simo_exact(opts: SuiteOptions):
    # exact-Q oracle at a point where the linearization is accurate
    spec = fbl.CodeSpec(b=160, W=2e6, T=4e-4)
    analytic = float(fbl.simo_error_closed_form(10.0, spec, 2, 1.0, 1.0))
    est = oracle.mc_decoding_error(lambda rng, n: 10.0 * rng.standard_gamma(2, n), spec,
                                   10**7, opts.seed)
    yield _mc_check("simo_exact_q_nt2", analytic, est, opts)


def check_simo_linearized(opts: SuiteOptions):
    for nt, k, T in ((1, 40.0, 3e-4), (4, 1.0, 4e-4), (8, 0.07, 5e-4)):
        spec = fbl.CodeSpec(b=160, W=2e6, T=T)
        analytic = float(fbl.simo_error_closed_form(k, spec, nt, 1.0, 1.0))
        est = oracle.mc_decoding_error(lambda rng, n, nt=nt, k=k: k * rng.standard_gamma(nt, n),
                                       spec, opts.mc_samples, opts.seed, exact=False)
        yield _mc_check(f"simo_linearized_nt{nt}", analytic, est, opts)


def check_df_multi_cdf(opts: SuiteOptions):
    cdf = df_multi_cdf(opts)
    n = opts.ks_samples
    # c_br below and above c_sr exercise both branches of the closed form
    for suffix, c_sr, c_br in (("", 1.0, 0.5), ("_strong_dl", 0.5, 2.0)):
        for nt in (1, 4, 8):
            samples = df_multi_snr_samples(c_sr, c_br, nt, n, opts.seed)
            ecdf = oracle.empirical_cdf(samples)
            dist = ecdf.ks_distance(lambda x, nt=nt, a=c_sr, b=c_br: cdf(x, a, b, nt))
            bound = oracle.ks_critical_99(n) * opts.tolerance_scale
            yield CheckResult(f"df_multi_cdf_ks_nt{nt}{suffix}", dist, bound, 0.0,
                              bool(dist <= bound))


def _gains(sys: SystemParams, k_sb: float, k_br: float, k_sr: float) -> tuple[float, ...]:
    # large-scale gains giving the requested mean per-branch SNRs
    nw = sys.noise_power
    return k_sb * nw / sys.P_s_t, k_br * sys.Nt * nw / sys.P_b, k_sr * nw / sys.P_s_t


# (Nt, T1, T2, SNR scale) with losses in the 1e-4..1e-2 range
_LOSS_POINTS = {
    "d2d": ((1, 4e-4, 4e-4, 3.0), (4, 3e-4, 5e-4, 5.0), (8, 5e-4, 3e-4, 8.0)),
    "df_cellular": ((1, 4e-4, 4e-4, 200.0), (4, 3e-4, 5e-4, 0.5), (8, 5e-4, 3e-4, 0.15)),
    "df_multi": ((1, 4e-4, 4e-4, 1.0), (4, 3e-4, 5e-4, 0.3), (8, 5e-4, 3e-4, 0.12)),
}


def check_losses(opts: SuiteOptions):
    n, seed = opts.mc_samples, opts.seed
    for name, points in _LOSS_POINTS.items():
        for i, (nt, T1, T2, k) in enumerate(points):
            sys = _SYS.with_(Nt=nt)
            mu_sb, mu_br, mu_sr = _gains(sys, k, k, k)
            if name == "d2d":
                analytic = modes.packet_loss_d2d(mu_sr, T1, T2, sys)
                est = oracle.mc_loss_d2d(mu_sr, T1, T2, sys, n, seed, exact=False)
            elif name == "df_cellular":
                analytic = modes.packet_loss_df_cellular(mu_sb, mu_br, T1, T2, sys)
                est = oracle.mc_loss_df_cellular(mu_sb, mu_br, T1, T2, sys, n, seed, exact=False)
            else:
                analytic = modes.packet_loss_df_multi(mu_sb, mu_br, mu_sr, T1, T2, sys)
                est = oracle.mc_loss_df_multi(mu_sb, mu_br, mu_sr, T1, T2, sys, n, seed,
                                              exact=False)
            yield _mc_check(f"{name}_loss_nt{nt}", float(analytic), est, opts)


def check_af(opts: SuiteOptions):
    n, seed = opts.mc_samples, opts.seed
    for nt, k_c, k_m in ((1, 60.0, 2.0), (2, 2.0, 0.6), (4, 0.3, 0.2)):
        sys = _SYS.with_(Nt=nt)
        mu_sb, mu_br, _ = _gains(sys, k_c, k_c, k_c)
        yield _mc_check(f"af_cellular_loss_nt{nt}",
                        float(modes.packet_loss_af_cellular_numeric(mu_sb, mu_br, 1e-3, sys)),
                        oracle.mc_loss_af_cellular(mu_sb, mu_br, 1e-3, sys, n, seed, exact=False),
                        opts)
        mu_sb, mu_br, mu_sr = _gains(sys, k_m, k_m, k_m)
        yield _mc_check(f"af_multi_loss_nt{nt}",
                        float(modes.packet_loss_af_multi_numeric(mu_sb, mu_br, mu_sr, 1e-3, sys)),
                        oracle.mc_loss_af_multi(mu_sb, mu_br, mu_sr, 1e-3, sys, n, seed,
                                                exact=False), opts)


def check_availability(opts: SuiteOptions):
    ch, qos = ChannelParams(), QoSRequirement(eps_max=1e-3)
    sys = _SYS

    def d2d_loss(mu):
        return modes.packet_loss_d2d(mu, _T, _T, sys)

    r = 30.0
    analytic = 1.0 - unavailability_single_link(r, d2d_loss, ch, qos)
    pl = 10 * ch.alpha * math.log10(r)
    est = oracle.mc_availability(
        lambda da, db: d2d_loss(large_scale_gain(1.0, db - pl, ch)), 0.0, ch.sigma_db,
        qos.eps_max, opts.mc_samples, opts.seed)
    yield _mc_check("availability_single_link", analytic, est, opts)

    sc = AvailabilityScenario(ModeId.DF_MULTI, sys=sys.with_(Nt=4), qos=qos, R_cell=400.0)
    sc = sc.with_split(_T, _T)
    for rho in (0.0, 0.5):
        r_d = 120.0
        analytic = 1.0 - unavailability_multi(r_d, rho, sc)
        pl = 10 * ch.alpha * math.log10(r_d)
        est = oracle.mc_availability(lambda dc, dsr: sc._multi_loss(dc, dsr - pl), rho,
                                     ch.sigma_db, qos.eps_max, opts.mc_samples // 10, opts.seed)
        yield _mc_check(f"availability_df_multi_rho{rho:g}", analytic, est, opts)


def check_threshold_grid(opts: SuiteOptions):
    ch = ChannelParams()
    pl = 10 * ch.alpha * math.log10(20.0)

    def loss(d):
        return modes.packet_loss_d2d(large_scale_gain(1.0, np.asarray(d) - pl, ch), _T, _T, _SYS)

    F = shadow_threshold(loss, 1e-7, ch.sigma_db)
    grid = np.arange(-40.0, 40.0, 1e-4)
    scan = grid[np.argmax(loss(grid) <= 1e-7)]
    yield _close_check("shadow_threshold_grid_scan", F, float(scan), 0.0, opts, atol=1e-4)


def check_scalars(opts: SuiteOptions):
    # regularized incomplete gamma against direct quadrature of the density
    val, _ = integrate.quad(lambda x: x**4 * math.exp(-x) / 24.0, 0.0, 7.0, epsabs=1e-14,
                            epsrel=1e-14)
    yield _close_check("incomplete_gamma_k5_y7", float(fbl.incomplete_gamma_cdf(5, 7.0)), val,
                       1e-12, opts)

    # inverse Q against bisection on the libm complementary error function
    lo, hi = 0.0, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 0.5 * math.erfc(mid / math.sqrt(2.0)) > 1e-7:
            lo = mid
        else:
            hi = mid
    yield _close_check("q_inverse_1e-7", float(fbl.q_inverse(1e-7)), lo, 1e-12, opts)

    # bivariate normal density in 40-digit decimal arithmetic
    with decimal.localcontext() as ctx:
        ctx.prec = 40
        D = decimal.Decimal
        rho, s, da, db = D("0.5"), D(8), D(1), D(-1)
        pi = D("3.141592653589793238462643383279502884197")
        quad = (da * da - 2 * rho * da * db + db * db) / (s * s * (1 - rho * rho))
        ref = (-quad / 2).exp() / (2 * pi * s * s * (1 - rho * rho).sqrt())
    yield _close_check("joint_pdf_point", float(channel.joint_shadowing_pdf(1.0, -1.0, 0.5, 8.0)),
                       float(ref), 1e-12, opts)

    pm = modes.ProcessingModel(Omega_p=1e5, Omega_b=2e6, K_L=2, Delta=1e3)
    yield _close_check("processing_delay_bound",
                       modes.processing_delay_bound(pm, 10, 1e-4), 6.06e-5, 1e-12, opts)

    spec = fbl.CodeSpec(b=160, W=2e6, T=4e-4)
    rate = float(fbl.achievable_rate(10.0, spec, 1e-7))
    bits = rate * spec.T
    # the same eps must come back from the rate expression
    x = (math.log(11.0) - bits * math.log(2) / spec.m_b) / math.sqrt(
        float(fbl.dispersion(10.0)) / spec.m_b)
    yield _close_check("achievable_rate_round_trip", float(special.ndtr(-x)), 1e-7, 1e-9, opts)


REGISTRY: tuple[Callable, ...] = (
    check_scalars, check_simo_exact, check_simo_linearized, check_df_multi_cdf, check_losses,
    check_af, check_availability, check_threshold_grid,
)


def run_oracle_suite(opts: SuiteOptions | None = None) -> list[CheckResult]:
    opts = opts or SuiteOptions()
    results = []
    for check in REGISTRY:
        results.extend(check(opts))
    return results


def format_report(results: list[CheckResult], as_json: bool = False) -> str:
    if as_json:
        return json.dumps([dict(asdict(r), verdict=r.verdict) for r in results], indent=1)
    lines = ["check_id,analytic,oracle,std_error,verdict"]
    for r in results:
        lines.append(f"{r.check_id},{r.analytic:.9g},{r.oracle:.9g},{r.std_error:.3g},{r.verdict}")
    return "\n".join(lines) + "\n"
