"""Acceptance criteria 1-7, one PASS/FAIL line each in the terminal summary.

Criterion 6 is split into its seven property suites; each prints its own line
and the last one checks the combined runtime.
"""

import csv
import io
import math
import time

import numpy as np
import pytest
from scipy import special

from urllc_avail import config, fbl, modes, oracle, sweep
from urllc_avail.availability import (AvailabilityScenario, QoSRequirement,
                                      conditional_unavailability, unavailability_multi)
from urllc_avail.channel import ChannelParams, joint_shadowing_pdf
from urllc_avail.modes import DelayBudget, ModeId, SystemParams
from urllc_avail.optimizer import (availability_threshold_db, maximize_range,
                                   range_at_fixed_shadowing)

T_F = 1e-4
SIGMA = ChannelParams().sigma_db
PROPERTY_SECONDS: dict[str, float] = {}


def parse_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def within(value, target, rel):
    return abs(value - target) <= rel * target


@pytest.fixture(scope="module")
def fig5_text():
    return timed(sweep.run_sweep, config.preset("fig5").replace(seed=0))


# ---------------------------------------------------------------------------
# criterion 1: ranges at fixed reliability targets

def test_criterion_1_ranges_vs_reliability(verdicts):
    text, secs = timed(sweep.run_sweep, config.preset("fig3"))
    rows = {float(r["eps_max"]): r for r in parse_csv(text)}
    got = {eps: (float(rows[eps]["d2d_r"]), float(rows[eps]["df_cellular_r"])) for eps in (1e-7, 1e-3)}
    targets = {1e-7: (10.0, 35.0), 1e-3: (35.0, 70.0)}
    ok = all(within(got[e][i], targets[e][i], 0.2) for e in targets for i in (0, 1)) and secs < 60
    detail = (f"eps 1e-7: d2d {got[1e-7][0]:.2f} m (10), df_cellular {got[1e-7][1]:.2f} m (35); "
              f"eps 1e-3: d2d {got[1e-3][0]:.2f} m (35), df_cellular {got[1e-3][1]:.2f} m (70); "
              f"+-20%, {secs:.1f} s (< 60 s)")
    assert verdicts.record("criterion 1", ok, detail)


# ---------------------------------------------------------------------------
# criterion 2: analytic vs Monte Carlo range at fixed shadowing

MC_SAMPLES = 10**7


def _ranges(loss, mc_loss, delta, eps):
    analytic = range_at_fixed_shadowing(loss, delta, eps)
    sampled = range_at_fixed_shadowing(lambda mu: mc_loss(mu).mean, delta, eps)
    return analytic, sampled


def test_criterion_2_analytic_vs_sampled_range(verdicts):
    t0 = time.perf_counter()
    delta = availability_threshold_db(0.99999, SIGMA)
    T = 4 * T_F
    gaps = {}
    lines = []
    for eps in (1e-2, 1e-3, 1e-4):
        s1 = SystemParams(Nt=1)
        ra, rm = _ranges(lambda mu: modes.packet_loss_d2d(mu, T, T, s1),
                         lambda mu: oracle.mc_loss_d2d(mu, T, T, s1, MC_SAMPLES, 0), delta, eps)
        gaps[("d2d", eps)] = (ra, rm)
        for nt in (1, 2):
            s = SystemParams(Nt=nt)
            ra, rm = _ranges(lambda mu: modes.packet_loss_df_cellular(mu, mu, T, T, s),
                             lambda mu: oracle.mc_loss_df_cellular(mu, mu, T, T, s, MC_SAMPLES, 0),
                             delta, eps)
            gaps[(f"df_cellular_nt{nt}", eps)] = (ra, rm)
    secs = time.perf_counter() - t0
    for (name, eps), (ra, rm) in gaps.items():
        lines.append(f"{name}@{eps:g}: {ra:.2f}/{rm:.2f} m")
    abs_gap = {k: abs(ra - rm) for k, (ra, rm) in gaps.items()}
    rel_gap = {k: abs(ra - rm) / rm for k, (ra, rm) in gaps.items()}
    bounded = max(abs_gap.values()) <= 3.0
    mean_gap = {nt: np.mean([abs_gap[(f"df_cellular_nt{nt}", e)] for e in (1e-2, 1e-3, 1e-4)])
                for nt in (1, 2)}
    mean_rel = {nt: np.mean([rel_gap[(f"df_cellular_nt{nt}", e)] for e in (1e-2, 1e-3, 1e-4)])
                for nt in (1, 2)}
    shrinks = mean_gap[2] < mean_gap[1]
    ok = bounded and shrinks and secs < 600
    detail = (f"max gap {max(abs_gap.values()):.2f} m (<= 3 m); mean df_cellular gap "
              f"Nt=1 {mean_gap[1]:.3f} m -> Nt=2 {mean_gap[2]:.3f} m (must shrink); relative "
              f"{100 * mean_rel[1]:.2f}% -> {100 * mean_rel[2]:.2f}%; {secs:.0f} s (< 600 s); "
              + "; ".join(lines))
    assert verdicts.record("criterion 2", ok, detail)


# ---------------------------------------------------------------------------
# criterion 3: optimal phase splits and correlation sensitivity, DF multi

def _multi_range(nt, rho):
    cfg = config.preset("fig5").replace(Nt=nt, rho_c=rho, rho_d=rho)
    res = maximize_range(sweep.scenario(cfg, ModeId.DF_MULTI))
    equal = next(r for T1, _, r in res.candidates if abs(T1 - 4 * T_F) < 1e-12)
    return res, equal


def test_criterion_3_phase_splits(verdicts):
    rho_geo = float(np.exp(-250.0 / 100.0))
    expected = {8: (5, 3), 32: (4, 4), 128: (2, 6)}
    splits, drops = {}, {}
    for nt in expected:
        res0, _ = _multi_range(nt, 0.0)
        res, equal = _multi_range(nt, rho_geo)
        splits[nt] = (round(res.T1_star / T_F), round(res.T2_star / T_F))
        drops[nt] = 1 - res.r_star / res0.r_star
        if nt == 128:
            gain = res.r_star / equal - 1
    split_ok = splits == expected
    gain_ok = abs(gain - 0.20) <= 0.05
    drop_ok = all(abs(d - 0.20) <= 0.05 for d in drops.values())
    detail = (f"splits {splits} (expected {expected}); gain at Nt=128 {100 * gain:.1f}% (20 +- 5); "
              f"drop rho 0 -> {rho_geo:.3f}: "
              + ", ".join(f"Nt={nt} {100 * d:.1f}%" for nt, d in drops.items()) + " (20 +- 5)")
    assert verdicts.record("criterion 3", split_ok and gain_ok and drop_ok, detail)


# ---------------------------------------------------------------------------
# criterion 4: insensitivity of the DF cellular range to UL/DL correlation

def test_criterion_4_correlation_insensitivity(verdicts):
    rows = parse_csv(sweep.run_sweep(config.preset("fig4")))
    r = {(float(x["rho_c"]), int(float(x["Nt"]))): float(x["df_cellular_r"]) for x in rows}
    nts = sorted({k[1] for k in r})
    gaps = [(r[(1.0, nt)] - r[(0.0, nt)]) / r[(0.0, nt)] for nt in nts]
    mean_gap = float(np.mean(gaps))
    r_max = max(r[(rho, 128)] for rho in (0.0, 1.0))
    ok = abs(mean_gap - 0.046) <= 0.015 and r_max < 250.0
    detail = (f"mean gap {100 * mean_gap:.2f}% over Nt {nts} (4.6 +- 1.5); per Nt "
              + ", ".join(f"{nt}: {100 * g:.2f}%" for nt, g in zip(nts, gaps))
              + f"; max range at Nt=128 {r_max:.1f} m (< 250)")
    assert verdicts.record("criterion 4", ok, detail)


# ---------------------------------------------------------------------------
# criterion 5: D2D range supported by the cellular path

def test_criterion_5_cell_radius_tradeoff(verdicts):
    rows = parse_csv(sweep.run_sweep(config.preset("fig6")))
    pairs = [(float(x["R_cell"]), float(x["d2d_r"]), float(x["df_multi_r"])) for x in rows]
    at250 = next(m for R, _, m in pairs if R == 250.0)
    dominates = all(m >= d for _, d, m in pairs)
    ok = within(at250, 40.0, 0.2) and dominates
    detail = (f"df_multi range at R_cell=250 m: {at250:.2f} m (40 +- 20%); df_multi >= d2d at every "
              f"R_cell: {dominates} ("
              + ", ".join(f"{R:g}: {m:.1f}/{d:.1f}" for R, d, m in pairs) + ")")
    assert verdicts.record("criterion 5", ok, detail)


# ---------------------------------------------------------------------------
# criterion 6: property suites

def _property(label, ok, detail, secs):
    PROPERTY_SECONDS[label] = secs
    return f"{detail}; {secs:.1f} s", ok


class TestCriterion6:
    RNG_SEED = 20240601

    def test_a_simo_closed_form_vs_quadrature(self, verdicts):
        t0 = time.perf_counter()
        rng = np.random.default_rng(self.RNG_SEED)
        worst = 0.0
        for _ in range(20):
            nt = int(rng.choice([1, 2, 4, 8, 16, 32, 64, 128]))
            spec = fbl.CodeSpec(160.0, 2e6, int(rng.integers(1, 10)) * T_F)
            lq = fbl.LinearizedQ.from_code(spec)
            # put the error knee inside the Gamma bulk so the value is far from 0 and 1
            centre = max(nt + rng.uniform(-3, 2.5) * math.sqrt(nt), 0.05)
            scale = lq.theta / centre
            closed = float(fbl.simo_error_closed_form(scale, spec, nt, 1.0, 1.0))
            quad = fbl.error_from_snr_cdf(lambda x: special.gammainc(nt, x / scale), lq, rtol=1e-12)
            worst = max(worst, abs(closed - quad) / quad)
        detail, ok = _property("a", worst <= 1e-9, f"worst relative gap {worst:.2e} (<= 1e-9) over "
                               "20 tuples", time.perf_counter() - t0)
        assert verdicts.record("criterion 6a", ok, detail)

    def test_b_df_multi_cdf_ks(self, verdicts):
        t0 = time.perf_counter()
        n = 10**7
        bound = oracle.ks_critical_99(n)
        dists = {}
        for c_sr, c_br in ((1.0, 0.5), (0.5, 2.0)):
            for nt in (1, 4, 8):
                rng = np.random.default_rng([self.RNG_SEED, nt])
                x = c_br * rng.standard_gamma(nt, n) + c_sr * rng.standard_exponential(n)
                ecdf = oracle.empirical_cdf(x)
                del x
                dists[(nt, c_br)] = ecdf.ks_distance(lambda v: fbl.cdf_snr_df_multi(v, c_sr, c_br, nt))
        ok = max(dists.values()) <= bound
        detail, ok = _property("b", ok, f"max KS {max(dists.values()):.2e} vs {bound:.2e} for Nt "
                               "1, 4, 8 at two scale ratios, 1e7 samples", time.perf_counter() - t0)
        assert verdicts.record("criterion 6b", ok, detail)

    @staticmethod
    def tensor_unavailability(threshold, rho, sigma, breaks=()):
        """Pr{delta_a < threshold(delta_b)} as a tensor Gauss-Legendre rule on the joint density."""
        lo, hi = -12 * sigma, 12 * sigma
        x16, w16 = np.polynomial.legendre.leggauss(16)
        edges = set(np.linspace(-10 * sigma, 10 * sigma, 81))
        for c in breaks:
            if -10 * sigma < c < 10 * sigma:
                edges.update(c + s * sigma * 2.0 ** -k for k in range(0, 40) for s in (-1, 1))
        edges = np.array(sorted(e for e in edges if -10 * sigma <= e <= 10 * sigma))
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        b = (mid[:, None] + half[:, None] * x16).ravel()
        wb = (half[:, None] * w16).ravel()
        tx = np.linspace(0, 1, 33)
        t = (0.5 * (tx[1:] + tx[:-1])[:, None] + 0.5 * np.diff(tx)[:, None] * x16).ravel()
        wt = (0.5 * np.diff(tx)[:, None] * w16).ravel()
        F = np.clip(np.asarray(threshold(b), dtype=float), lo, hi)
        span = F - lo
        a = lo + span[:, None] * t[None, :]
        dens = joint_shadowing_pdf(a, b[:, None], rho, sigma)
        return float(np.sum(wb[:, None] * wt[None, :] * dens * span[:, None]))

    def test_c_single_integral_vs_tensor_rule(self, verdicts):
        t0 = time.perf_counter()
        rng = np.random.default_rng(self.RNG_SEED + 1)
        worst = 0.0
        # synthetic smooth threshold curves
        for _ in range(5):
            a, k, c, w = rng.uniform(-20, 5), rng.uniform(-1, 1), rng.uniform(0, 3), rng.uniform(2, 10)
            rho = rng.uniform(0, 0.95)
            F = lambda d: a + k * d + c * np.sin(d / w)
            one = conditional_unavailability(F, rho, SIGMA)
            two = self.tensor_unavailability(F, rho, SIGMA)
            worst = max(worst, abs(one - two) / two)
        # threshold curves of the DF multi mode itself
        for _ in range(5):
            nt = int(rng.choice([8, 32, 128]))
            sc = AvailabilityScenario(ModeId.DF_MULTI, sys=SystemParams(Nt=nt),
                                      R_cell=float(rng.uniform(150, 300)))
            r_d, rho = float(rng.uniform(20, 60)), float(rng.uniform(0, 0.9))
            pl = 10 * sc.channel.alpha * math.log10(r_d)
            curve = sc.threshold_curve()
            one = unavailability_multi(r_d, rho, sc)
            two = self.tensor_unavailability(lambda d: curve(d - pl), rho, SIGMA,
                                             breaks=(pl + sc.d2d_reduced_threshold(),))
            worst = max(worst, abs(one - two) / two)
        detail, ok = _property("c", worst <= 1e-5, f"worst relative gap {worst:.2e} (<= 1e-5) over "
                               "10 instances", time.perf_counter() - t0)
        assert verdicts.record("criterion 6c", ok, detail)

    def test_d_availability_strictly_decreasing(self, verdicts):
        t0 = time.perf_counter()
        grid = np.geomspace(2.0, 200.0, 50)
        violations, scenarios = 0, 0
        for nt, R_cell, rho, split in ((8, 250.0, 0.082, (5, 3)), (32, 150.0, 0.0, (4, 4)),
                                       (128, 300.0, 0.5, (2, 6)), (8, 200.0, 0.9, (4, 4))):
            budget = DelayBudget(1e-3, T_F, T_F, split[0] * T_F, split[1] * T_F)
            sc = AvailabilityScenario(ModeId.DF_MULTI, sys=SystemParams(Nt=nt), budget=budget,
                                      R_cell=R_cell)
            u = np.array([unavailability_multi(r, rho, sc) for r in grid])
            violations += int(np.sum(np.diff(u) <= 0))
            scenarios += 1
        detail, ok = _property("d", violations == 0, f"{violations} violations on 50-point grids "
                               f"in {scenarios} scenarios", time.perf_counter() - t0)
        assert verdicts.record("criterion 6d", ok, detail)

    def test_e_af_multi_snr_bounds_and_slope(self, verdicts):
        t0 = time.perf_counter()
        rng = np.random.default_rng(self.RNG_SEED + 2)
        n = 10**5
        sys = SystemParams()
        nw = sys.noise_power
        beta = 10 ** rng.uniform(-3, 4, n)
        g_br, g_sr = rng.standard_gamma(sys.Nt, n), rng.standard_exponential(n)
        mu_br = 10 ** rng.uniform(-3, 4, n) * sys.Nt * nw / sys.P_b
        mu_sr = 10 ** rng.uniform(-3, 4, n) * nw / sys.P_s_t
        snr = modes.snr_af_multi(beta, mu_br, g_br, mu_sr, g_sr, sys)
        d2d = mu_sr * g_sr * sys.P_s_t / nw
        lo, hi = np.minimum(beta, d2d), np.maximum(beta, d2d)
        bound_bad = int(np.sum((snr < lo * (1 - 1e-12)) | (snr > hi * (1 + 1e-12))))
        bumped = modes.snr_af_multi(beta, mu_br * (1 + 1e-3), g_br, mu_sr, g_sr, sys)
        expected = np.sign(beta * nw - mu_sr * g_sr * sys.P_s_t)
        slope_bad = int(np.sum(np.sign(bumped - snr) != expected))
        ok = bound_bad == 0 and slope_bad == 0
        detail, ok = _property("e", ok, f"{bound_bad} bound and {slope_bad} slope-sign violations in "
                               f"{n} tuples", time.perf_counter() - t0)
        assert verdicts.record("criterion 6e", ok, detail)

    def test_f_mode_ordering(self, verdicts):
        t0 = time.perf_counter()
        rng = np.random.default_rng(self.RNG_SEED + 3)
        n_total, order_bad = 0, 0
        for nt in (1, 2, 4, 8, 16, 32, 64, 128):
            sys = SystemParams(Nt=nt)
            nw = sys.noise_power
            n = 12_500
            T = rng.integers(1, 6) * T_F
            theta = fbl.LinearizedQ.from_code(sys.code(T)).theta
            k = theta * 10 ** rng.uniform(-2, 2, (3, n))
            mu_sb, mu_br, mu_sr = k[0] * nw / sys.P_s_t, k[1] * nt * nw / sys.P_b, k[2] * nw / sys.P_s_t
            multi = modes.packet_loss_df_multi(mu_sb, mu_br, mu_sr, T, T, sys)
            d2d = modes.packet_loss_d2d(mu_sr, T, T, sys)
            cell = modes.packet_loss_df_cellular(mu_sb, mu_br, T, T, sys)
            slack = 1 + 1e-9
            order_bad += int(np.sum((multi > d2d * slack) | (multi > cell * slack)))
            n_total += n
        sys = SystemParams()
        n = 10**5
        beta = 10 ** rng.uniform(-3, 4, n)
        g_br, g_sr = rng.standard_gamma(sys.Nt, n), rng.standard_exponential(n)
        mu_br = 10 ** rng.uniform(-3, 4, n) * sys.Nt * sys.noise_power / sys.P_b
        mu_sr = 10 ** rng.uniform(-3, 4, n) * sys.noise_power / sys.P_s_t
        af_c = modes.snr_af_cellular(beta, mu_br, g_br, sys)
        af_m = modes.snr_af_multi(beta, mu_br, g_br, mu_sr, g_sr, sys)
        df_m = modes.snr_df_multi(mu_br, g_br, mu_sr, g_sr, sys)
        snr_bad = int(np.sum(af_m < af_c * (1 - 1e-12)) + np.sum(df_m < af_m * (1 - 1e-12)))
        ok = order_bad == 0 and snr_bad == 0
        detail, ok = _property("f", ok, f"{order_bad} loss-ordering violations in {n_total} tuples, "
                               f"{snr_bad} SNR-dominance violations in {n} tuples",
                               time.perf_counter() - t0)
        assert verdicts.record("criterion 6f", ok, detail)

    def test_g_large_beta_limit(self, verdicts):
        t0 = time.perf_counter()
        rng = np.random.default_rng(self.RNG_SEED + 4)
        sys = SystemParams()
        n = 10**4
        g_br, g_sr = rng.standard_gamma(sys.Nt, n), rng.standard_exponential(n)
        mu_br = 10 ** rng.uniform(-3, 4, n) * sys.Nt * sys.noise_power / sys.P_b
        mu_sr = 10 ** rng.uniform(-3, 4, n) * sys.noise_power / sys.P_s_t
        af = modes.snr_af_multi(1e12, mu_br, g_br, mu_sr, g_sr, sys)
        limit = (mu_br * g_br * sys.P_b / sys.Nt + mu_sr * g_sr * sys.P_s_t) / sys.noise_power
        worst = float(np.max(np.abs(af - limit) / limit))
        detail, ok = _property("g", worst <= 1e-6, f"worst relative gap {worst:.2e} (<= 1e-6) at "
                               "beta = 1e12", time.perf_counter() - t0)
        assert verdicts.record("criterion 6g", ok, detail)

    def test_z_runtime(self, verdicts):
        total = sum(PROPERTY_SECONDS.values())
        ok = len(PROPERTY_SECONDS) == 7 and total < 900
        detail = f"{len(PROPERTY_SECONDS)}/7 suites ran in {total:.0f} s (< 900 s)"
        assert verdicts.record("criterion 6", ok, detail)


# ---------------------------------------------------------------------------
# criterion 7: determinism

def test_criterion_7_determinism(verdicts, fig5_text):
    first, secs = fig5_text
    second = sweep.run_sweep(config.preset("fig5").replace(seed=0))
    same = first.encode() == second.encode()
    detail = f"two seed-0 runs of the fig5 preset byte-identical: {same} ({len(first)} bytes)"
    assert verdicts.record("criterion 7", same, detail)
