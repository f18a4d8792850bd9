import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from urllc_avail import modes, oracle
from urllc_avail.modes import (DelayBudget, LargeScaleTriple, ModeId, ProcessingModel,
                               SystemParams, dbm_to_watt, watt_to_dbm)

SYS = SystemParams()
N_MC = 10**6


def gains(sys, k_sb, k_br, k_sr):
    """Large-scale gains whose mean per-branch SNRs are k_sb, k_br and k_sr."""
    nw = sys.noise_power
    return k_sb * nw / sys.P_s_t, k_br * sys.Nt * nw / sys.P_b, k_sr * nw / sys.P_s_t


class TestUnits:
    @pytest.mark.parametrize("dbm, watt", [(30.0, 1.0), (23.0, 0.19952623149688797),
                                           (46.0, 39.810717055349734), (-173.0, 10 ** -20.3)])
    def test_dbm(self, dbm, watt):
        assert dbm_to_watt(dbm) == pytest.approx(watt, rel=1e-12)
        assert watt_to_dbm(watt) == pytest.approx(dbm, rel=1e-12)

    def test_default_system(self):
        assert SYS.W == pytest.approx(2e6)
        assert watt_to_dbm(SYS.P_b) == pytest.approx(36.0)
        assert SYS.noise_power == pytest.approx(dbm_to_watt(-173.0) * 2e6)
        assert SYS.code(4e-4).m_b == pytest.approx(800.0)

    @pytest.mark.parametrize("kw", [dict(K=0), dict(Nt=1.5), dict(b=0.0), dict(N0=-1.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SystemParams(**kw)

    def test_with(self):
        assert SYS.with_(Nt=32).Nt == 32
        assert SYS.Nt == 8


class TestModeId:
    def test_af_flag(self):
        assert {m for m in ModeId if m.is_af} == {ModeId.AF_CELLULAR, ModeId.AF_MULTI}

    def test_string_values(self):
        assert ModeId("df_multi") is ModeId.DF_MULTI


class TestDelay:
    def test_processing_bound(self):
        pm = ProcessingModel(Omega_p=1e3, Omega_b=1.1e5, K_L=1.0, Delta=200.0)
        assert modes.processing_delay_bound(pm, 5, 1e-4) == pytest.approx(6.545454545e-6, rel=1e-9)

    def test_budget(self):
        b = DelayBudget(1e-3, 1e-4, 1e-4)
        assert b.D_t == pytest.approx(8e-4)
        assert b.frames(1e-4) == 8
        assert b.with_split(3e-4, 5e-4).T2 == 5e-4

    def test_no_transmission_time(self):
        with pytest.raises(ValueError):
            DelayBudget(1e-3, 6e-4, 4e-4)

    @pytest.mark.parametrize("budget, mode, ok", [
        (DelayBudget(1e-3, 0, 0, 5e-4, 5e-4), None, True),
        (DelayBudget(1e-3, 1e-4, 1e-4, 4e-4, 4e-4), ModeId.DF_MULTI, True),
        (DelayBudget(1e-3, 1e-4, 1e-4, 5e-4, 4e-4), None, False),
        (DelayBudget(1e-3, 0, 0, 4.5e-4, 5.5e-4), None, False),
        (DelayBudget(1e-3, 1e-4, 0, 4e-4, 5e-4), ModeId.AF_MULTI, False),
        (DelayBudget(1e-3), None, False),
    ])
    def test_feasible(self, budget, mode, ok):
        assert modes.delay_feasible(budget, 1e-4, mode) is ok

    @pytest.mark.parametrize("T, ok", [(3e-4, True), (1e-4, True), (0.5e-4, False), (2.5e-4, False)])
    def test_frame_multiple(self, T, ok):
        assert modes.is_frame_multiple(T, 1e-4) is ok

    def test_af_phase(self):
        assert modes.af_phase_duration(8e-4) == pytest.approx(4e-4)
        with pytest.raises(ValueError):
            modes.af_phase_duration(0.0)

    def test_triple(self):
        with pytest.raises(ValueError):
            LargeScaleTriple(1.0, 0.0, 1.0)


class TestSnr:
    def test_af_cellular_below_both_hops(self):
        beta, mu_br, g = 5.0, 1e-9, 2.0
        dl = mu_br * g * SYS.P_b / (SYS.Nt * SYS.noise_power)
        snr = modes.snr_af_cellular(beta, mu_br, g, SYS)
        assert snr < min(beta, dl)
        assert snr == pytest.approx(beta * dl / (dl + beta + 1), rel=1e-12)

    def test_af_multi_reduces_to_cellular(self):
        beta, mu_br, g = 3.0, 1e-10, 1.0
        assert modes.snr_af_multi(beta, mu_br, g, 0.0, 1.0, SYS) == pytest.approx(
            modes.snr_af_cellular(beta, mu_br, g, SYS), rel=1e-12)

    @given(st.floats(1e-3, 1e3), st.floats(1e-12, 1e-6), st.floats(0.01, 10), st.floats(1e-12, 1e-6),
           st.floats(0.01, 10))
    @settings(max_examples=200)
    def test_df_dominates_af(self, beta, mu_br, g_br, mu_sr, g_sr):
        af = modes.snr_af_multi(beta, mu_br, g_br, mu_sr, g_sr, SYS)
        df = modes.snr_df_multi(mu_br, g_br, mu_sr, g_sr, SYS)
        assert af <= df * (1 + 1e-12)


class TestLossesAgainstMc:
    @pytest.mark.parametrize("nt, T1, T2, k", [(1, 4e-4, 4e-4, 3.0), (8, 5e-4, 3e-4, 8.0)])
    def test_d2d(self, nt, T1, T2, k):
        sys = SYS.with_(Nt=nt)
        *_, mu_sr = gains(sys, k, k, k)
        est = oracle.mc_loss_d2d(mu_sr, T1, T2, sys, N_MC, seed=1, exact=False)
        assert est.agrees_with(modes.packet_loss_d2d(mu_sr, T1, T2, sys), k=4)

    @pytest.mark.parametrize("nt, T1, T2, k", [(1, 4e-4, 4e-4, 200.0), (4, 3e-4, 5e-4, 0.5)])
    def test_df_cellular(self, nt, T1, T2, k):
        sys = SYS.with_(Nt=nt)
        mu_sb, mu_br, _ = gains(sys, k, k, k)
        est = oracle.mc_loss_df_cellular(mu_sb, mu_br, T1, T2, sys, N_MC, seed=2, exact=False)
        assert est.agrees_with(modes.packet_loss_df_cellular(mu_sb, mu_br, T1, T2, sys), k=4)

    @pytest.mark.parametrize("nt, T1, T2, ks", [(1, 4e-4, 4e-4, (1.0, 1.0, 1.0)),
                                                (4, 3e-4, 5e-4, (0.3, 0.3, 0.3)),
                                                (8, 4e-4, 4e-4, (0.2, 1.5, 0.05))])
    def test_df_multi(self, nt, T1, T2, ks):
        sys = SYS.with_(Nt=nt)
        g = gains(sys, *ks)
        est = oracle.mc_loss_df_multi(*g, T1, T2, sys, N_MC, seed=3, exact=False)
        assert est.agrees_with(modes.packet_loss_df_multi(*g, T1, T2, sys), k=4)

    def test_scalar_df_multi_is_float(self):
        g = gains(SYS, 0.3, 0.3, 0.3)
        assert isinstance(modes.packet_loss_df_multi(*g, 4e-4, 4e-4, SYS), float)

    @pytest.mark.parametrize("nt, k_sb, k_br", [(2, 2.0, 0.6), (4, 0.3, 0.2)])
    def test_af_cellular_numeric(self, nt, k_sb, k_br):
        sys = SYS.with_(Nt=nt)
        mu_sb, mu_br, _ = gains(sys, k_sb, k_br, 1.0)
        est = oracle.mc_loss_af_cellular(mu_sb, mu_br, 8e-4, sys, N_MC, seed=4, exact=False)
        num = modes.packet_loss_af_cellular_numeric(mu_sb, mu_br, 8e-4, sys)
        assert est.agrees_with(num, k=4)

    def test_af_multi_numeric(self):
        sys = SYS.with_(Nt=2)
        g = gains(sys, 2.0, 0.6, 0.5)
        est = oracle.mc_loss_af_multi(*g, 8e-4, sys, N_MC, seed=5, exact=False)
        assert est.agrees_with(modes.packet_loss_af_multi_numeric(*g, 8e-4, sys), k=4)

    def test_af_sampler_reproducible(self):
        sys = SYS.with_(Nt=2)
        mu_sb, mu_br, _ = gains(sys, 2.0, 0.6, 1.0)
        a = modes.packet_loss_af_cellular(mu_sb, mu_br, 8e-4, sys, 10**5, seed=7)
        b = modes.packet_loss_af_cellular(mu_sb, mu_br, 8e-4, sys, 10**5, seed=7, workers=2)
        assert a.mean == b.mean and a.std_error == b.std_error


class TestLossStructure:
    def test_d2d_is_product(self):
        mu = gains(SYS, 1, 1, 2.0)[2]
        e1 = modes.d2d_phase_error(mu, 3e-4, SYS)
        e2 = modes.d2d_phase_error(mu, 5e-4, SYS)
        assert modes.packet_loss_d2d(mu, 3e-4, 5e-4, SYS) == pytest.approx(e1 * e2, rel=1e-14)

    def test_df_cellular_union(self):
        mu_sb, mu_br, _ = gains(SYS, 0.3, 0.2, 1)
        a = modes.uplink_error(mu_sb, 4e-4, SYS)
        b = modes.downlink_error(mu_br, 4e-4, SYS)
        assert modes.packet_loss_df_cellular(mu_sb, mu_br, 4e-4, 4e-4, SYS) == pytest.approx(
            1 - (1 - a) * (1 - b), rel=1e-13)

    def test_df_multi_without_bs_equals_d2d(self):
        # a dead uplink leaves only the sender's retransmission
        mu_sr = gains(SYS, 1, 1, 2.0)[2]
        loss = modes.packet_loss_df_multi(1e-30, 1e-9, mu_sr, 4e-4, 4e-4, SYS)
        assert loss == pytest.approx(modes.packet_loss_d2d(mu_sr, 4e-4, 4e-4, SYS), rel=1e-9)

    def test_durations_validated(self):
        with pytest.raises(ValueError):
            modes.d2d_phase_error(1e-9, 0.0, SYS)

    def test_broadcast(self):
        mu = np.array([1e-10, 1e-9, 1e-8])
        out = modes.packet_loss_df_cellular(mu, mu, 4e-4, 4e-4, SYS)
        assert out.shape == (3,)
        assert np.all(np.diff(out) < 0)


class TestExactQAtReference:
    def test_simo_exact_vs_linearized(self):
        # mean SNR 10 over two branches at 800 symbols: the linearization is close but biased
        sys = SYS.with_(Nt=2)
        spec = sys.code(4e-4)
        rng = np.random.default_rng(0)
        g = rng.standard_gamma(2, 10**6)
        exact = oracle.decoding_error(5.0 * g, spec).mean()
        lin = float(modes.fbl.simo_error_closed_form(5.0, spec, 2, 1.0, 1.0))
        assert lin == pytest.approx(exact, rel=0.15)
