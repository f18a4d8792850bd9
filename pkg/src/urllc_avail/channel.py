"""Large-scale gains, shadowing correlation and seeded channel sampling.

Shadowing is handled in dB throughout; conversion to linear gain happens only
at :func:`large_scale_gain`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# correlations this close to one are treated as merged (identical) shadowing
RHO_MERGE = 1.0 - 1e-12


@dataclass(frozen=True)
class ChannelParams:
    alpha: float = 3.76
    mu0_db: float = -35.3
    sigma_db: float = 8.0
    r0: float = 100.0

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ValueError("path-loss exponent must be positive")
        if self.sigma_db <= 0:
            raise ValueError("shadowing deviation must be positive")
        if self.r0 <= 0:
            raise ValueError("decorrelation distance must be positive")


@dataclass(frozen=True)
class LinkGeometry:
    r_sb: float
    r_br: float
    r_sr: float

    def __post_init__(self) -> None:
        if min(self.r_sb, self.r_br, self.r_sr) < 0:
            raise ValueError("distances must be non-negative")


@dataclass(frozen=True)
class ShadowingDraw:
    delta_sb: float = 0.0
    delta_br: float = 0.0
    delta_sr: float = 0.0


def large_scale_gain_db(d, delta, p: ChannelParams):
    """-10 alpha log10(d) + delta + mu0, in dB."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("gain formula needs a positive distance")
    return -10.0 * p.alpha * np.log10(d) + delta + p.mu0_db


def large_scale_gain(d, delta, p: ChannelParams):
    return 10.0 ** (large_scale_gain_db(d, delta, p) / 10.0)


def shadowing_correlation(d, r0: float):
    """Absolute-distance correlation model exp(-d / r0)."""
    return np.exp(-np.asarray(d, dtype=float) / r0)


def joint_shadowing_pdf(da, db, rho: float, sigma: float):
    """Zero-mean bivariate normal density with common deviation and correlation rho."""
    if abs(rho) >= 1.0:
        raise ValueError("degenerate shadowing density at |rho| >= 1; use the merged-shadowing path")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    da = np.asarray(da, dtype=float)
    db = np.asarray(db, dtype=float)
    one_m = 1.0 - rho * rho
    quad = (da * da - 2.0 * rho * da * db + db * db) / (2.0 * one_m * sigma * sigma)
    return np.exp(-quad) / (2.0 * math.pi * sigma * sigma * math.sqrt(one_m))


def substream(seed: int, stream: int) -> np.random.Generator:
    """Independent PCG64 generator for (seed, stream); stable across runs and worker counts."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))


def sample_correlated_shadowing(rho: float, sigma: float, n: int, seed: int, stream: int = 0):
    """``n`` correlated dB pairs as an (n, 2) array; rho == 1 yields identical columns."""
    if abs(rho) > 1.0:
        raise ValueError("|rho| must not exceed one")
    rng = substream(seed, stream)
    x = rng.standard_normal(n) * sigma
    if rho >= RHO_MERGE:
        return np.column_stack([x, x])
    y = rng.standard_normal(n) * sigma
    return np.column_stack([x, rho * x + math.sqrt(1.0 - rho * rho) * y])


def sample_fading(n: int, seed: int, nt: int = 1, stream: int = 0):
    """Rayleigh power gains: unit-mean exponentials (nt=1) or sums of nt of them."""
    if nt < 1:
        raise ValueError("antenna count must be at least one")
    rng = substream(seed, stream)
    if nt == 1:
        return rng.standard_exponential(n)
    return rng.standard_gamma(nt, n)
