"""Scalar special functions behind the outage closed forms.

The generalized Marcum Q-function is evaluated as a Poisson mixture of
regularized incomplete gamma functions::

    Q_m(p, q)     = sum_j w_j * Q(m + j, q^2/2)
    1 - Q_m(p, q) = sum_j w_j * P(m + j, q^2/2),   w_j = e^{-x} x^j / j!,  x = p^2/2

Both tails are summed directly (every term is positive), so tiny outage
probabilities keep full relative accuracy instead of being lost to ``1 - Q``.
All term arithmetic is carried out in log space.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy import special as sc

from .errors import ConvergenceError, DomainError

__all__ = [
    "MarcumArgs",
    "gamma_fn",
    "reg_upper_gamma",
    "reg_lower_gamma",
    "bessel_i",
    "bessel_i_scaled",
    "marcum_q",
    "marcum_p",
    "log_marcum_p",
    "marcum_q_asymptotic_small_q",
]

MARCUM_TOL = 1e-13
MAX_TERMS = 10**6
_GAMMA_ITMAX = 100_000
_EPS = np.finfo(float).eps
_LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class MarcumArgs(NamedTuple):
    """Order ``m`` and the two arguments of ``Q_m(p, q)``."""

    m: float
    p: float
    q: float


def _finite(*values: float) -> bool:
    return all(math.isfinite(v) for v in values)


def gamma_fn(x: float) -> float:
    """Gamma function for positive finite ``x``."""
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"gamma_fn requires finite x > 0, got {x!r}")
    return math.gamma(x)


# --- Loader's saddle-point pieces: log(e^-lam lam^k / Gamma(k+1)) without cancellation


def _stirlerr(n: float) -> float:
    """log Gamma(n+1) minus its Stirling approximation."""
    if n <= 15.0:
        return math.lgamma(n + 1.0) - (n + 0.5) * math.log(n) + n - _LN_SQRT_2PI
    nn = n * n
    s0, s1, s2, s3, s4 = 1 / 12, 1 / 360, 1 / 1260, 1 / 1680, 1 / 1188
    if n > 500:
        return (s0 - s1 / nn) / n
    if n > 80:
        return (s0 - (s1 - s2 / nn) / nn) / n
    if n > 35:
        return (s0 - (s1 - (s2 - s3 / nn) / nn) / nn) / n
    return (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / n


def _bd0(x: float, mu: float) -> float:
    """Deviance term x*log(x/mu) + mu - x, accurate when x is close to mu."""
    d = x - mu
    if abs(d) < 0.1 * (x + mu):
        v = d / (x + mu)
        s = d * v
        ej = 2.0 * x * v
        v *= v
        for j in range(1, 1000):
            ej *= v
            s1 = s + ej / (2 * j + 1)
            if s1 == s:
                return s1
            s = s1
        return s
    return x * math.log(x / mu) + mu - x


def _log_dpois(k: float, lam: float) -> float:
    """log(e^{-lam} lam^k / Gamma(k+1)) for real k >= 0."""
    if lam == 0.0:
        return 0.0 if k == 0.0 else -math.inf
    if k == 0.0:
        return -lam
    return -_stirlerr(k) - _bd0(k, lam) - 0.5 * math.log(2.0 * math.pi * k)


# --- regularized incomplete gamma


def _lower_series(a: float, x: float) -> float:
    """Sum 1 + x/(a+1) + x^2/((a+1)(a+2)) + ...; P(a,x) = dpois(a,x) * sum."""
    term = 1.0
    total = 1.0
    for n in range(1, _GAMMA_ITMAX):
        term *= x / (a + n)
        total += term
        if term < total * _EPS:
            return total
    raise ConvergenceError(f"incomplete gamma series did not converge (a={a}, x={x})")


def _upper_cf(a: float, x: float) -> float:
    """Modified Lentz continued fraction h with Q(a,x) = a * dpois(a,x) * h."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b if b != 0.0 else 1.0 / tiny
    h = d
    for i in range(1, _GAMMA_ITMAX):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ConvergenceError(f"incomplete gamma continued fraction did not converge (a={a}, x={x})")


def _log_reg_gamma(a: float, x: float) -> tuple[float, float]:
    """Return (log P(a, x), log Q(a, x)), each to full relative accuracy."""
    if x == 0.0:
        return -math.inf, 0.0
    log_pref = _log_dpois(a, x)
    if x < a + 1.0:
        log_p = log_pref + math.log(_lower_series(a, x))
        return log_p, math.log1p(-math.exp(log_p))
    log_q = log_pref + math.log(a) + math.log(_upper_cf(a, x))
    return math.log1p(-math.exp(log_q)), log_q


def _check_gamma_args(s: float, x: float) -> None:
    if not _finite(s, x) or s <= 0.0 or x < 0.0:
        raise DomainError(f"incomplete gamma requires s > 0, x >= 0 (got s={s!r}, x={x!r})")


def reg_upper_gamma(s: float, x: float) -> float:
    """Regularized upper incomplete gamma Gamma(s, x) / Gamma(s)."""
    s, x = float(s), float(x)
    _check_gamma_args(s, x)
    return math.exp(_log_reg_gamma(s, x)[1])


def reg_lower_gamma(s: float, x: float) -> float:
    """Regularized lower incomplete gamma gamma(s, x) / Gamma(s)."""
    s, x = float(s), float(x)
    _check_gamma_args(s, x)
    return math.exp(_log_reg_gamma(s, x)[0])


# --- modified Bessel function of the first kind


def _check_bessel_args(nu: float, x: float) -> None:
    if not _finite(nu, x) or x < 0.0 or nu < -0.5:
        raise DomainError(f"bessel_i requires nu >= -1/2 and finite x >= 0 (got nu={nu!r}, x={x!r})")


def _bessel_i_small(nu: float, x: float) -> float:
    # leading series term (x/2)^nu / Gamma(nu+1); next term is O(x^2) relative
    if x == 0.0:
        return 1.0 if nu == 0.0 else (0.0 if nu > 0.0 else math.inf)
    return math.exp(nu * (math.log(x) - math.log(2.0)) - math.lgamma(nu + 1.0))


def bessel_i(nu: float, x: float) -> float:
    """Modified Bessel function I_nu(x) for real order nu >= -1/2."""
    nu, x = float(nu), float(x)
    _check_bessel_args(nu, x)
    if x < 1e-150:
        return _bessel_i_small(nu, x)
    return float(sc.iv(nu, x))


def bessel_i_scaled(nu: float, x: float) -> float:
    """Exponentially scaled e^{-x} I_nu(x); finite for arbitrarily large x."""
    nu, x = float(nu), float(x)
    _check_bessel_args(nu, x)
    if x < 1e-150:
        return _bessel_i_small(nu, x)
    return float(sc.ive(nu, x))


# --- generalized Marcum Q


def _check_marcum_args(m: float, p: float, q: float) -> tuple[float, float, float]:
    m, p, q = float(m), float(p), float(q)
    if not _finite(m, p, q) or m < 0.5 or p < 0.0 or q < 0.0:
        raise DomainError(f"Marcum Q requires m >= 1/2, p >= 0, q >= 0, all finite (got m={m!r}, p={p!r}, q={q!r})")
    return m, p, q


def _log_run(anchor_idx: int, anchor_log: float, log_ratio: np.ndarray) -> np.ndarray:
    """Expand log v_j over a window from one anchor and log(v_{j+1}/v_j) ratios."""
    n = log_ratio.size + 1
    out = np.empty(n)
    out[anchor_idx] = anchor_log
    if anchor_idx + 1 < n:
        out[anchor_idx + 1 :] = anchor_log + np.cumsum(log_ratio[anchor_idx:])
    if anchor_idx > 0:
        out[:anchor_idx] = anchor_log - np.cumsum(log_ratio[:anchor_idx][::-1])[::-1]
    return out


def _log_ratio(num: float, den: np.ndarray) -> np.ndarray:
    # log(num / den) without losing the small difference when num ~ den
    rel = (num - den) / den
    near = np.abs(rel) < 0.5
    return np.where(near, np.log1p(np.where(near, rel, 0.0)), np.log(num) - np.log(den))


def _mixture_terms(m: float, x: float, y: float, lo: int, hi: int, upper: bool) -> np.ndarray:
    """log(w_j * G_j) for j in [lo, hi], G = Q(m+j, y) if upper else P(m+j, y)."""
    j = np.arange(lo, hi + 1, dtype=float)
    mode = min(max(int(x), lo), hi)
    log_w = _log_run(mode - lo, _log_dpois(float(mode), x), _log_ratio(x, j[1:]))
    # log t_{m+j}, t_a = e^{-y} y^a / Gamma(a+1); Q(a+1) = Q(a) + t_a, P(a) = P(a+1) + t_a
    a_anchor = min(max(y - m, float(lo)), float(hi))
    k = int(round(a_anchor)) - lo
    log_t = _log_run(k, _log_dpois(m + lo + k, y), _log_ratio(y, m + j[1:]))
    if upper:
        anchor = _log_reg_gamma(m + lo, y)[1]
        log_g = np.logaddexp.accumulate(np.concatenate(([anchor], log_t[:-1])))
    else:
        anchor = _log_reg_gamma(m + hi, y)[0]
        log_g = np.logaddexp.accumulate(np.concatenate(([anchor], log_t[:-1][::-1])))[::-1]
    return log_w + log_g


def _log_marcum(m: float, p: float, q: float, upper: bool, tol: float = MARCUM_TOL) -> float:
    x = 0.5 * p * p
    y = 0.5 * q * q
    if y == 0.0:
        return 0.0 if upper else -math.inf
    if x == 0.0:
        return _log_reg_gamma(m, y)[1 if upper else 0]

    log_tol = math.log(tol * 1e-4)
    width = 12.0 * math.sqrt(x) + 16.0
    # the upper-tail mixture peaks near j ~ pq/2 when q >> p
    centre = max(x, 0.5 * p * q - m) if upper else x
    lo = 0 if not upper else max(0, int(centre - width))
    hi = int(max(centre, x) + width) + 1

    while True:
        if hi - lo > MAX_TERMS:
            raise ConvergenceError(f"Marcum Q series exceeded {MAX_TERMS} terms (m={m}, p={p}, q={q})")
        log_terms = _mixture_terms(m, x, y, lo, hi, upper)
        log_sum = float(np.logaddexp.reduce(log_terms))
        grow_lo = grow_hi = False

        # upper truncation: sum_{j>hi} w_j <= w_{hi+1} / (1 - x/(hi+2)) bounds both tails
        r = x / (hi + 2.0)
        if r >= 1.0:
            grow_hi = True
        else:
            log_w_next = _log_dpois(float(hi + 1), x)
            if upper:
                log_err = log_w_next - math.log1p(-r)
                grow_hi = log_err > max(log_sum + log_tol, -700.0)
            else:
                # P_j decreasing, so the dropped terms are below P_hi * tail
                log_err = log_terms[-1] + math.log(r) - math.log1p(-r)
                grow_hi = log_err > log_sum + log_tol

        # lower truncation (upper tail only; the lower tail always starts at j = 0)
        if upper and lo > 0:
            r_lo = (lo - 1.0) / x
            if r_lo >= 1.0:
                grow_lo = True
            else:
                log_err = _log_dpois(float(lo - 1), x) - math.log1p(-r_lo) - math.log(0.5)
                grow_lo = log_err > log_tol

        if not (grow_lo or grow_hi):
            return log_sum
        span = hi - lo + 1
        if grow_hi:
            hi += span
        if grow_lo:
            lo = max(0, lo - span)


def marcum_q(m: float, p: float, q: float) -> float:
    """Generalized Marcum Q-function Q_m(p, q) for real order m >= 1/2.

    ``Q_m(p, q) = Pr{X > q^2}`` where X is noncentral chi-square with ``2m``
    degrees of freedom and noncentrality ``p^2``.
    """
    m, p, q = _check_marcum_args(m, p, q)
    return min(1.0, max(0.0, math.exp(_log_marcum(m, p, q, upper=True))))


def log_marcum_p(m: float, p: float, q: float) -> float:
    """log(1 - Q_m(p, q)), accurate far below the double-precision floor of 1 - Q."""
    m, p, q = _check_marcum_args(m, p, q)
    return min(0.0, _log_marcum(m, p, q, upper=False))


def marcum_p(m: float, p: float, q: float) -> float:
    """Complement 1 - Q_m(p, q): the noncentral chi-square CDF at q^2."""
    return math.exp(log_marcum_p(m, p, q))


def marcum_q_asymptotic_small_q(m: float, p: float, q: float) -> float:
    """Leading small-q behaviour ``1 - q^{2m} e^{-p^2/2} / (2^m Gamma(m) m)``."""
    m, p, q = _check_marcum_args(m, p, q)
    if q == 0.0:
        return 1.0
    log_tail = 2.0 * m * math.log(q) - 0.5 * p * p - m * math.log(2.0) - math.lgamma(m) - math.log(m)
    return 1.0 - math.exp(log_tail)
