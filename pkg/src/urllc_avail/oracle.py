"""Sampling estimators used to cross-check the analytic paths.

Every estimator takes an explicit seed and draws from the chunked substreams
of :mod:`urllc_avail.mc`, so results are reproducible for any worker count.
By default the decoding error is the exact Q expression with the
instantaneous dispersion. With ``exact=False`` the linearized surrogate is
averaged instead, which isolates the closed-form derivations from the
approximation itself.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import fbl, modes
from .channel import RHO_MERGE
from .mc import McEstimate, mc_mean
from .modes import SystemParams

MIN_SAMPLES = 1000


def _check_n(n: int) -> None:
    if n < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {n}")


def decoding_error(snr, spec: fbl.CodeSpec, exact: bool = True):
    if exact:
        return fbl.exact_error(snr, spec)
    return fbl.linearized_q(snr, fbl.LinearizedQ.from_code(spec))


def mc_decoding_error(snr_sampler: Callable[[np.random.Generator, int], np.ndarray],
                      spec: fbl.CodeSpec, n: int, seed: int, workers: int | None = None,
                      exact: bool = True) -> McEstimate:
    """Average decoding error over SNRs drawn by ``snr_sampler(rng, size)``."""
    _check_n(n)
    return mc_mean(lambda rng, size: decoding_error(snr_sampler(rng, size), spec, exact), n, seed,
                   workers=workers)


def mc_availability(loss_fn: Callable[[np.ndarray, np.ndarray], np.ndarray], rho: float,
                    sigma: float, eps_max: float, n: int, seed: int,
                    workers: int | None = None) -> McEstimate:
    """Fraction of correlated shadowing pairs (dB) with ``loss_fn(da, db) <= eps_max``."""
    _check_n(n)
    if abs(rho) > 1.0:
        raise ValueError("|rho| must not exceed one")
    merged = rho >= RHO_MERGE
    c = 0.0 if merged else float(np.sqrt(1.0 - rho * rho))

    def sample(rng: np.random.Generator, size: int) -> np.ndarray:
        x = rng.standard_normal(size) * sigma
        y = x if merged else rho * x + c * rng.standard_normal(size) * sigma
        loss = np.broadcast_to(np.asarray(loss_fn(x, y), dtype=float), (size,))
        return (loss <= eps_max).astype(float)

    return mc_mean(sample, n, seed, workers=workers)


@dataclass(frozen=True)
class EmpiricalCdf:
    """Right-continuous step CDF of a sample."""

    sorted_samples: np.ndarray

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.searchsorted(self.sorted_samples, x, side="right") / self.sorted_samples.size

    @property
    def n(self) -> int:
        return int(self.sorted_samples.size)

    def quantile(self, q):
        q = np.asarray(q, dtype=float)
        idx = np.clip(np.ceil(q * self.n).astype(int) - 1, 0, self.n - 1)
        return self.sorted_samples[idx]

    def ks_distance(self, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
        """Kolmogorov-Smirnov sup distance to a continuous CDF."""
        xs = self.sorted_samples
        f = np.asarray(cdf(xs), dtype=float)
        i = np.arange(1, self.n + 1)
        return float(max(np.max(i / self.n - f), np.max(f - (i - 1) / self.n)))


def empirical_cdf(samples) -> EmpiricalCdf:
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ValueError("empirical CDF needs at least one sample")
    return EmpiricalCdf(np.sort(samples))


def ks_critical_99(n: int) -> float:
    """Asymptotic 99% Kolmogorov-Smirnov acceptance bound."""
    return float(1.63 / np.sqrt(n))


# ---------------------------------------------------------------------------
# per-mode packet loss

def _fading(rng: np.random.Generator, nt: int, size: int) -> np.ndarray:
    return rng.standard_exponential(size) if nt == 1 else rng.standard_gamma(nt, size)


def _mc_loss(sample, n: int, seed: int, workers: int | None) -> McEstimate:
    _check_n(n)
    return mc_mean(sample, n, seed, workers=workers)


def mc_loss_d2d(mu_sr: float, T1: float, T2: float, sys: SystemParams, n: int, seed: int,
                workers: int | None = None, exact: bool = True) -> McEstimate:
    s1, s2 = sys.code(T1), sys.code(T2)
    err = functools.partial(decoding_error, exact=exact)
    k = mu_sr * sys.P_s_t / sys.noise_power

    def sample(rng, size):
        g1 = rng.standard_exponential(size)
        g2 = rng.standard_exponential(size)
        return err(k * g1, s1) * err(k * g2, s2)

    return _mc_loss(sample, n, seed, workers)


def mc_loss_df_cellular(mu_sb: float, mu_br: float, T1: float, T2: float, sys: SystemParams,
                        n: int, seed: int, workers: int | None = None,
                        exact: bool = True) -> McEstimate:
    s1, s2 = sys.code(T1), sys.code(T2)
    err = functools.partial(decoding_error, exact=exact)
    k_sb = mu_sb * sys.P_s_t / sys.noise_power
    k_br = mu_br * sys.P_b / (sys.Nt * sys.noise_power)

    def sample(rng, size):
        e_sb = err(k_sb * _fading(rng, sys.Nt, size), s1)
        e_br = err(k_br * _fading(rng, sys.Nt, size), s2)
        return e_sb + e_br - e_sb * e_br

    return _mc_loss(sample, n, seed, workers)


def mc_loss_df_multi(mu_sb: float, mu_br: float, mu_sr: float, T1: float, T2: float,
                     sys: SystemParams, n: int, seed: int, workers: int | None = None,
                     exact: bool = True) -> McEstimate:
    """DF multi-connectivity loss; the BS decode outcome is averaged, not sampled."""
    s1, s2 = sys.code(T1), sys.code(T2)
    err = functools.partial(decoding_error, exact=exact)
    k_sr = mu_sr * sys.P_s_t / sys.noise_power
    k_sb = mu_sb * sys.P_s_t / sys.noise_power

    def sample(rng, size):
        e1 = err(k_sr * rng.standard_exponential(size), s1)
        e_sb = err(k_sb * _fading(rng, sys.Nt, size), s1)
        g_br = _fading(rng, sys.Nt, size)
        g_sr = rng.standard_exponential(size)
        e2m = err(modes.snr_df_multi(mu_br, g_br, mu_sr, g_sr, sys), s2)
        e2d = err(k_sr * g_sr, s2)
        return e1 * ((1.0 - e_sb) * e2m + e_sb * e2d)

    return _mc_loss(sample, n, seed, workers)


def _mc_af_linearized(mu_sb: float, mu_br: float, mu_sr: float | None, D_t: float,
                      sys: SystemParams, n: int, seed: int, workers: int | None) -> McEstimate:
    # plain sampling of the AF phase-2 SNR with the linearized error
    spec = sys.code(modes.af_phase_duration(D_t))

    def sample(rng, size):
        beta = modes.uplink_snr_beta(mu_sb, _fading(rng, sys.Nt, size), sys)
        g_br = _fading(rng, sys.Nt, size)
        if mu_sr is None:
            snr = modes.snr_af_cellular(beta, mu_br, g_br, sys)
        else:
            snr = modes.snr_af_multi(beta, mu_br, g_br, mu_sr, rng.standard_exponential(size), sys)
        return decoding_error(snr, spec, exact=False)

    return _mc_loss(sample, n, seed, workers)


def mc_loss_af_cellular(mu_sb: float, mu_br: float, D_t: float, sys: SystemParams, n: int,
                        seed: int, workers: int | None = None, exact: bool = True) -> McEstimate:
    _check_n(n)
    if not exact:
        return _mc_af_linearized(mu_sb, mu_br, None, D_t, sys, n, seed, workers)
    return modes.packet_loss_af_cellular(mu_sb, mu_br, D_t, sys, n, seed, workers,
                                         target_rel_error=None)


def mc_loss_af_multi(mu_sb: float, mu_br: float, mu_sr: float, D_t: float, sys: SystemParams,
                     n: int, seed: int, workers: int | None = None, exact: bool = True) -> McEstimate:
    """AF multi loss; with ``exact=False`` only phase 2 is sampled (phase 1 is a factor)."""
    _check_n(n)
    if not exact:
        e1 = modes.d2d_phase_error(mu_sr, modes.af_phase_duration(D_t), sys)
        return _mc_af_linearized(mu_sb, mu_br, mu_sr, D_t, sys, n, seed, workers).scaled(float(e1))
    return modes.packet_loss_af_multi(mu_sb, mu_br, mu_sr, D_t, sys, n, seed, workers,
                                      target_rel_error=None)
