"""Finite-blocklength error machinery.

Normal-approximation rate, the exact and piecewise-linear Q expressions, and
closed forms for the decoding error over Rayleigh (Gamma-aggregate) channels.

All probability-valued functions accept numpy arrays and broadcast.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

LOG2E = 1.0 / math.log(2.0)

# log-domain thresholds for Poisson-type terms y**n e**-y / n!
_LOG_DOMAIN_N = 20
_LOG_DOMAIN_Y = 30.0

_SERIES_MAX_TERMS = 4000


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, *, estimate: float, intervals: int, worst_error: float):
        super().__init__(message)
        self.estimate = estimate
        self.intervals = intervals
        self.worst_error = worst_error


@dataclass(frozen=True)
class CodeSpec:
    """Payload ``b`` bits sent over bandwidth ``W`` Hz for ``T`` seconds."""

    b: float
    W: float
    T: float

    def __post_init__(self) -> None:
        if self.b <= 0 or self.W <= 0 or self.T <= 0:
            raise ValueError(f"CodeSpec needs positive b, W, T; got {self}")
        if self.m_b < 1:
            raise ValueError(f"blocklength T*W = {self.m_b} is below one symbol")

    @property
    def m_b(self) -> float:
        return self.T * self.W

    @property
    def r_c(self) -> float:
        return self.b / self.m_b


@dataclass(frozen=True)
class LinearizedQ:
    """Knees and slope of the piecewise-linear surrogate for the error curve.

    ``omega * sqrt(m_b) * (xi - zeta) == 1`` by construction.
    """

    omega: float
    theta: float
    zeta: float
    xi: float
    m_b: float

    @classmethod
    def from_code(cls, spec: CodeSpec) -> LinearizedQ:
        r_c = spec.r_c
        omega = 1.0 / (2.0 * math.pi * math.sqrt(2.0 ** (2.0 * r_c) - 1.0))
        theta = 2.0**r_c - 1.0
        half = 1.0 / (2.0 * omega * math.sqrt(spec.m_b))
        return cls(omega=omega, theta=theta, zeta=theta - half, xi=theta + half, m_b=spec.m_b)

    @property
    def slope(self) -> float:
        """omega * sqrt(m_b), i.e. 1 / (xi - zeta)."""
        return self.omega * math.sqrt(self.m_b)


def dispersion(snr):
    """Channel dispersion V(snr) = 1 - (1 + snr)^-2 in nats^2."""
    snr = np.asarray(snr, dtype=float)
    return -np.expm1(-2.0 * np.log1p(snr))


def q_function(x):
    """Gaussian tail probability Pr{N(0,1) > x}."""
    return special.ndtr(-np.asarray(x, dtype=float))


def q_inverse(p):
    """Inverse of :func:`q_function` on (0, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0)) or np.any(np.isnan(p)):
        raise ValueError("q_inverse is defined on the open interval (0, 1)")
    return -special.ndtri(p)


def achievable_rate(snr, spec: CodeSpec, eps):
    """Normal-approximation achievable rate in bits/s.

    Can go negative when the dispersion penalty exceeds the capacity term;
    callers treat that as infeasible.
    """
    snr = np.asarray(snr, dtype=float)
    penalty = np.sqrt(dispersion(snr) / spec.m_b) * q_inverse(eps)
    return spec.W * LOG2E * (np.log1p(snr) - penalty)


def exact_error(snr, spec: CodeSpec):
    """Decoding error at a fixed SNR with the exact Q form and V(snr)."""
    snr = np.asarray(snr, dtype=float)
    v = dispersion(snr)
    gap = np.log1p(snr) - spec.r_c * math.log(2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = np.sqrt(spec.m_b / v) * gap
    # snr -> 0 drives V -> 0 with a negative gap: certain failure
    arg = np.where(v > 0, arg, -np.inf)
    return q_function(arg)


def linearized_q(gamma, lq: LinearizedQ, m_b: float | None = None):
    """Piecewise-linear error surrogate: 1 below zeta, 0 above xi."""
    m_b = lq.m_b if m_b is None else m_b
    gamma = np.asarray(gamma, dtype=float)
    mid = 0.5 - lq.omega * math.sqrt(m_b) * (gamma - lq.theta)
    return np.where(gamma <= lq.zeta, 1.0, np.where(gamma >= lq.xi, 0.0, mid))


# ---------------------------------------------------------------------------
# regularized lower incomplete gamma at integer shape

def _as_shape(k) -> int:
    k_int = int(k)
    if k_int != k or k_int < 1:
        raise ValueError(f"integer shape >= 1 required, got {k!r}")
    return k_int


def _log_p_series(k: int, y: np.ndarray) -> np.ndarray:
    # log P(k, y) = -y + k log y - lgamma(k+1) + log sum_j y^j / ((k+1)...(k+j))
    total = np.ones_like(y)
    term = np.ones_like(y)
    for j in range(1, _SERIES_MAX_TERMS):
        term = term * y / (k + j)
        total += term
        if np.all(term <= 1e-17 * total):
            break
    return -y + k * np.log(y) - math.lgamma(k + 1) + np.log(total)


def _log_q_finite(k: int, y: np.ndarray) -> np.ndarray:
    # log Q(k, y) = log[e^-y sum_{n<k} y^n/n!], summed from the top term down
    total = np.ones_like(y)
    term = np.ones_like(y)
    for j in range(1, k):
        term = term * (k - j) / y
        total += term
    return -y + (k - 1) * np.log(y) - math.lgamma(k) + np.log(total)


def _log_pq(k: int, y):
    y = np.asarray(y, dtype=float)
    if np.any(y < 0) or np.any(np.isnan(y)):
        raise ValueError("incomplete gamma argument must be >= 0")
    log_p = np.full(y.shape, -np.inf)
    log_q = np.zeros(y.shape)
    inf = np.isinf(y)
    log_p[inf] = 0.0
    log_q[inf] = -np.inf
    small = (y > 0) & (y < k + 1) & ~inf
    large = (y >= k + 1) & ~inf
    if np.any(small):
        lp = _log_p_series(k, y[small])
        log_p[small] = lp
        log_q[small] = np.log(-np.expm1(lp)) if lp.size else lp
    if np.any(large):
        lq = _log_q_finite(k, y[large])
        log_q[large] = lq
        log_p[large] = np.log1p(-np.exp(lq))
    return log_p, log_q


def log_incomplete_gamma_cdf(k, y):
    """log of the regularized lower incomplete gamma P(k, y), integer k."""
    with np.errstate(divide="ignore"):
        return _log_pq(_as_shape(k), y)[0]


def incomplete_gamma_cdf(k, y):
    """1 - e^-y sum_{n<k} y^n/n!, the Gamma(k, 1) CDF at y.

    Evaluated through log-domain sums, so shapes in the hundreds and tiny
    arguments neither overflow nor flush to zero prematurely.
    """
    return np.exp(log_incomplete_gamma_cdf(k, y))


def incomplete_gamma_sf(k, y):
    """Complement 1 - P(k, y) without cancellation."""
    with np.errstate(divide="ignore"):
        return np.exp(_log_pq(_as_shape(k), y)[1])


def poisson_term(n: int, y):
    """y**n e**-y / n!, switching to logs for large n or y."""
    y = np.asarray(y, dtype=float)
    if n <= _LOG_DOMAIN_N and np.all(y <= _LOG_DOMAIN_Y):
        return y**n * np.exp(-y) / math.factorial(n)
    with np.errstate(divide="ignore"):
        out = np.exp(n * np.log(y) - y - math.lgamma(n + 1))
    if n == 0:
        out = np.exp(-y)
    return out


def integrated_gamma_cdf(k, g):
    """I_k(g) = integral of P(k, y) over y in [0, g].

    Equals g - k + e^-g sum_{n<k} (k-n) g^n/n!; for g <= k+1 the same quantity
    is summed as e^-g sum_{j>=1} j g^(k+j)/(k+j)! so no terms cancel.
    """
    k = _as_shape(k)
    g = np.asarray(g, dtype=float)
    out = np.zeros(g.shape)
    small = (g > 0) & (g <= k + 1)
    large = g > k + 1
    if np.any(small):
        y = g[small]
        total = np.ones_like(y)
        term = np.ones_like(y)
        for j in range(1, _SERIES_MAX_TERMS):
            term = term * (j + 1) / j * y / (k + j + 1)
            total += term
            if np.all(term <= 1e-17 * total):
                break
        out[small] = np.exp(-y + (k + 1) * np.log(y) - math.lgamma(k + 2) + np.log(total))
    if np.any(large):
        y = g[large]
        out[large] = (y - k) + _weighted_poisson_tail(k, y)
    return out


def _weighted_poisson_tail(k: int, y: np.ndarray) -> np.ndarray:
    # e^-y sum_{n=0}^{k-1} (k-n) y^n/n!, built from n = k-1 downwards
    total = np.ones_like(y)  # n = k-1 contributes weight 1
    term = np.ones_like(y)
    for j in range(1, k):
        term = term * (k - j) / y  # ratio y^(k-1-j)/(k-1-j)! over y^(k-1)/(k-1)!
        total += (j + 1) * term
    return np.exp(-y + (k - 1) * np.log(y) - math.lgamma(k) + np.log(total))


# ---------------------------------------------------------------------------
# error over a CDF (linearized Q)

def adaptive_simpson(f: Callable[[float], float], a: float, b: float, rtol: float = 1e-9,
                     max_intervals: int = 1_000_000, atol: float = 1e-300) -> float:
    """Adaptive Simpson with Richardson correction on a work stack."""
    if b <= a:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    # seed tolerance from a coarse composite estimate so tiny integrals keep relative accuracy
    xs = np.linspace(a, b, 33)
    coarse = abs(np.trapezoid([f(x) for x in xs], xs))
    tol = max(rtol * max(coarse, abs(whole)), atol)
    stack = [(a, b, fa, fm, fb, whole, tol)]
    total = 0.0
    intervals = 0
    worst = 0.0
    while stack:
        lo, hi, flo, fmid, fhi, est, eps = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        delta = left + right - est
        intervals += 1
        if abs(delta) <= 15.0 * eps or hi - lo < 1e-15 * max(1.0, abs(hi)):
            total += left + right + delta / 15.0
            continue
        if intervals > max_intervals:
            worst = max(worst, abs(delta))
            raise QuadratureError(
                f"adaptive Simpson exceeded {max_intervals} intervals on [{a}, {b}]",
                estimate=total + est, intervals=intervals, worst_error=worst,
            )
        stack.append((lo, mid, flo, flm, fmid, left, 0.5 * eps))
        stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * eps))
    return total


def error_from_snr_cdf(cdf: Callable[[float], float], lq: LinearizedQ, m_b: float | None = None,
                       rtol: float = 1e-9, max_intervals: int = 1_000_000) -> float:
    """Decoding error omega*sqrt(m_b) * integral of F over [zeta, xi], clamped to [0, 1]."""
    m_b = lq.m_b if m_b is None else m_b
    slope = lq.omega * math.sqrt(m_b)
    lo = max(lq.zeta, 0.0)  # an SNR CDF vanishes below zero
    integral = adaptive_simpson(lambda x: float(cdf(x)), lo, lq.xi, rtol=rtol,
                                max_intervals=max_intervals)
    return min(max(slope * integral, 0.0), 1.0)


def simo_error_closed_form(mu, spec: CodeSpec, nt: int, power: float, noise_power: float):
    """Decoding error over an Nt-branch Rayleigh SIMO channel (MRC gain ~ Gamma(Nt)).

    ``mu`` is the linear large-scale gain (array ok), ``power`` the transmit
    power and ``noise_power`` N0*W, both in watts.
    """
    lq = LinearizedQ.from_code(spec)
    mu = np.asarray(mu, dtype=float)
    scale = mu * power / noise_power
    with np.errstate(divide="ignore"):
        g_u = lq.xi / scale
        g_l = max(lq.zeta, 0.0) / scale
    inner = integrated_gamma_cdf(nt, np.where(np.isfinite(g_u), g_u, 0.0)) \
        - integrated_gamma_cdf(nt, np.where(np.isfinite(g_l), g_l, 0.0))
    with np.errstate(invalid="ignore"):
        err = lq.slope * scale * inner
    err = np.where(scale > 0, err, 1.0)
    return np.clip(err, 0.0, 1.0)


def simo_error_term_sum(mu: float, spec: CodeSpec, nt: int, power: float, noise_power: float) -> float:
    """Direct finite sum over the Poisson terms; a cross-check for moderate g_U only."""
    lq = LinearizedQ.from_code(spec)
    s = mu * power / noise_power
    g_u = noise_power * lq.xi / (mu * power)
    g_l = noise_power * lq.zeta / (mu * power)
    acc = g_u - g_l
    for n in range(nt):
        a_n = g_l**n / math.factorial(n) * math.exp(-g_l) - g_u**n / math.factorial(n) * math.exp(-g_u)
        acc -= (nt - n) * a_n
    return min(max(lq.slope * s * acc, 0.0), 1.0)


def cdf_snr_df_multi(x, c_sr: float, c_br: float, nt: int):
    """CDF of c_br*G + c_sr*E with G ~ Gamma(nt, 1) and E ~ Exp(1).

    With c = c_br/c_sr and Y = x/c_br the closed form reads
    F = P(nt, Y) - exp(-c Y) (1-c)^-nt P(nt, (1-c) Y) for c < 1, and the
    confluent hypergeometric form of the same term for c > 1, evaluated in
    logs. Near c == 1 the limit P(nt+1, x/c_sr) is used.
    """
    nt = _as_shape(nt)
    x = np.asarray(x, dtype=float)
    if c_sr <= 0 or c_br <= 0:
        raise ValueError("scale factors must be positive")
    x = np.maximum(x, 0.0)
    if abs(c_sr - c_br) / c_sr < 1e-9:
        return incomplete_gamma_cdf(nt + 1, x / c_sr)
    c = c_br / c_sr
    y = x / c_br
    with np.errstate(divide="ignore"):
        if c < 1.0:
            b = 1.0 - c
            log_second = -c * y - nt * math.log(b) + log_incomplete_gamma_cdf(nt, b * y)
        else:
            # e^-y y^n/n! 1F1(1; n+1; -(c-1) y) keeps every factor positive
            log_second = (-y + nt * np.log(y) - math.lgamma(nt + 1)
                          + np.log(special.hyp1f1(1.0, nt + 1.0, -(c - 1.0) * y)))
    out = incomplete_gamma_cdf(nt, y) - np.exp(log_second)
    return np.clip(out, 0.0, 1.0)


def cdf_snr_df_multi_term_sum(x: float, c_sr: float, c_br: float, nt: int) -> float:
    """Direct finite-sum form of the summed-SNR CDF; a cross-check away from c_sr = c_br."""
    t = x * (c_sr - c_br) / (c_sr * c_br)
    b1 = (1.0 - math.exp(-t) * sum(t**n / math.factorial(n) for n in range(nt))) \
        * (c_sr / (c_sr - c_br)) ** nt
    b2 = 1.0 - math.exp(-x / c_br) * sum((x / c_br) ** n / math.factorial(n) for n in range(nt))
    return -math.exp(-x / c_sr) * b1 + b2


# ---------------------------------------------------------------------------
# expectations of the linearized error over Gamma-distributed gains

_PHI_SERIES = np.array([(-1.0) ** n / math.factorial(n) for n in range(2, 24)])


def ramp_phi(v):
    """phi(v) = v - 1 + e^-v >= 0, with a series below v = 1 to keep relative accuracy."""
    shape = np.shape(v)
    v = np.atleast_1d(np.asarray(v, dtype=float))
    out = v + np.expm1(-v)
    small = v < 1.0
    if np.any(small):
        vs = v[small]
        acc = np.zeros_like(vs)
        for c in _PHI_SERIES[::-1]:
            acc = acc * vs + c
        out[small] = acc * vs * vs
    return out.reshape(shape)


def smoothed_linearized_q(base, scale, lq: LinearizedQ):
    """E[linearized_q(base + scale * E)] for E ~ Exp(1), in closed form.

    ``scale == 0`` reduces to the plain piecewise-linear value.
    """
    base = np.asarray(base, dtype=float)
    scale = np.asarray(scale, dtype=float)
    up = np.maximum(lq.xi - base, 0.0)
    lo = np.maximum(lq.zeta - base, 0.0)
    pos = scale > 0
    safe = np.where(pos, scale, 1.0)
    with np.errstate(over="ignore", invalid="ignore"):
        smooth = safe * (ramp_phi(up / safe) - ramp_phi(lo / safe))
    area = np.where(pos, smooth, up - lo)
    return np.clip(area * lq.slope, 0.0, 1.0)


def _gamma_grid(nt: int) -> np.ndarray:
    centre = max(nt - 1.0, 0.0)
    s = math.sqrt(nt)
    pts = [centre + m * s for m in (-20, -10, -5, -2.5, 0, 2.5, 5, 10, 20, 40)]
    pts.append(nt + 60.0 + 60.0 * s)
    return np.maximum(np.array(pts), 0.0)


@functools.lru_cache(maxsize=8)
def _leggauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


def gamma_panel_expectation(fn: Callable[[np.ndarray], np.ndarray], nt: int, upper, extra_points=(),
                            order: int = 24):
    """E[fn(G) 1{G < upper}] for G ~ Gamma(nt, 1), row-wise over ``upper``.

    ``fn`` maps an (M, P) array of gains to values; ``upper`` has shape (M,).
    Gauss-Legendre panels are cut at the Gamma bulk and at ``extra_points``
    (each shape (M,)) where the integrand has kinks or layers.
    """
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    m = upper.size
    cols = [np.zeros(m), upper]
    cols += [np.broadcast_to(p, (m,)) for p in _gamma_grid(nt)]
    cols += [np.broadcast_to(np.asarray(p, dtype=float), (m,)) for p in extra_points]
    bp = np.column_stack(cols)
    bp = np.where(np.isfinite(bp), bp, 0.0)
    bp = np.sort(np.clip(bp, 0.0, upper[:, None]), axis=1)
    gl_x, gl_w = _leggauss(order)
    left, right = bp[:, :-1], bp[:, 1:]
    half = 0.5 * (right - left)
    nodes = (0.5 * (right + left))[..., None] + half[..., None] * gl_x
    nodes = nodes.reshape(m, -1)
    with np.errstate(divide="ignore", invalid="ignore"):
        if nt == 1:
            logpdf = -nodes
        else:
            logpdf = (nt - 1) * np.log(nodes) - nodes - math.lgamma(nt)
    pdf = np.where(nodes > 0, np.exp(logpdf), 1.0 if nt == 1 else 0.0)
    weights = (half[..., None] * gl_w).reshape(m, -1)
    vals = fn(nodes)
    return np.sum(weights * pdf * vals, axis=1)


def df_multi_phase_error(c_sr, c_br, spec: CodeSpec, nt: int):
    """Linearized-Q error for SNR c_br*G + c_sr*E, G ~ Gamma(nt), E ~ Exp(1).

    Same quantity as ``error_from_snr_cdf`` over :func:`cdf_snr_df_multi`; the
    exponential part is integrated in closed form and the Gamma part by panels.
    """
    lq = LinearizedQ.from_code(spec)
    c_sr, c_br = np.broadcast_arrays(np.atleast_1d(np.asarray(c_sr, dtype=float)),
                                     np.atleast_1d(np.asarray(c_br, dtype=float)))
    shape = c_sr.shape
    c_sr = c_sr.ravel()
    c_br = np.maximum(c_br.ravel(), 1e-300)
    zeta = max(lq.zeta, 0.0)
    upper = lq.xi / c_br
    layer = c_sr / c_br
    extra = [zeta / c_br, zeta / c_br - layer, zeta / c_br - 8 * layer, zeta / c_br - 40 * layer,
             upper - layer, upper - 8 * layer]

    def fn(g):
        return smoothed_linearized_q(c_br[:, None] * g, c_sr[:, None], lq)

    out = gamma_panel_expectation(fn, nt, upper, extra)
    return np.clip(out, 0.0, 1.0).reshape(shape)
