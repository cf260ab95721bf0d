"""Closed-form outage analysis for chase-combining HARQ over the cascaded link.

The per-round SNR is ``gamma_bar * G**2`` with ``G ~ Normal(sqrt(lam), sigma2)``,
i.e. a scaled noncentral chi-square variable with one degree of freedom.
Summing ``K`` independent rounds keeps the family (degrees of freedom and
noncentrality add), so the outage after ``K`` rounds is a Marcum Q-function
of order ``K/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .channel_model import GammaBarParams, SystemConfig, avg_snr, gamma_bar_params
from .errors import DomainError
from .specfun import (
    MarcumArgs,
    bessel_i_scaled,
    gamma_fn,
    log_marcum_p,
    marcum_p,
)

__all__ = [
    "OutageQuery",
    "AsymptoticConstants",
    "db_to_linear",
    "linear_to_db",
    "outage_threshold",
    "snr_cdf",
    "snr_pdf",
    "marcum_args",
    "outage_probability",
    "log_outage_probability",
    "asymptotic_constants",
    "outage_asymptotic",
    "log_outage_asymptotic",
    "snr_gain_db",
]

_SIXTEEN_MINUS_PI2 = 16.0 - math.pi**2


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class OutageQuery:
    """Inputs of the outage closed forms: link shape, element count, rounds and rate."""

    params: GammaBarParams
    n_reflectors: int
    rounds: int
    rate: float

    def __post_init__(self) -> None:
        if self.rounds < 1:
            raise DomainError(f"rounds must be >= 1, got {self.rounds!r}")
        if not math.isfinite(self.rate) or self.rate <= 0.0:
            raise DomainError(f"rate must be finite and > 0, got {self.rate!r}")
        expected = gamma_bar_params(self.params.gamma_bar, self.n_reflectors)
        if not (
            math.isclose(expected.lam, self.params.lam, rel_tol=1e-12)
            and math.isclose(expected.sigma2, self.params.sigma2, rel_tol=1e-12)
        ):
            raise DomainError(f"params were not derived from n_reflectors={self.n_reflectors}")

    @classmethod
    def from_config(cls, cfg: SystemConfig) -> "OutageQuery":
        return cls(avg_snr(cfg), cfg.n_reflectors, cfg.max_rounds, cfg.rate)

    @classmethod
    def at(cls, gamma_bar: float, n_reflectors: int, rounds: int, rate: float) -> "OutageQuery":
        return cls(gamma_bar_params(gamma_bar, n_reflectors), n_reflectors, rounds, rate)

    def with_gamma_bar(self, gamma_bar: float) -> "OutageQuery":
        return replace(self, params=gamma_bar_params(gamma_bar, self.n_reflectors))


@dataclass(frozen=True)
class AsymptoticConstants:
    c1: float
    c2: float


def outage_threshold(rate: float) -> float:
    """SNR threshold ``2**R - 1`` below which the accumulated information falls short of ``R``."""
    if rate < 1.0:
        return math.expm1(rate * math.log(2.0))
    return 2.0**rate - 1.0


def _single_round(query: OutageQuery) -> OutageQuery:
    if query.rounds != 1:
        raise DomainError("per-round SNR distribution is defined for rounds == 1")
    return query


def snr_cdf(x: float, query: OutageQuery) -> float:
    """CDF of the per-round SNR: ``1 - Q_{1/2}(sqrt(lam)/sigma, sqrt(x/gamma_bar)/sigma)``."""
    _single_round(query)
    if x < 0.0:
        raise DomainError(f"snr_cdf requires x >= 0, got {x!r}")
    par = query.params
    sigma = math.sqrt(par.sigma2)
    return marcum_p(0.5, math.sqrt(par.lam) / sigma, math.sqrt(x / par.gamma_bar) / sigma)


def snr_pdf(x: float, query: OutageQuery) -> float:
    """Density of the per-round SNR.

    Evaluated as ``exp(-(sqrt(x) - sqrt(lam*gb))**2 / (2 gb sigma2)) * ive(-1/2, z)``
    times the algebraic prefactor, which never overflows for large arguments.
    """
    _single_round(query)
    if not x > 0.0:
        raise DomainError(f"snr_pdf requires x > 0, got {x!r}")
    gb, lam, s2 = query.params.gamma_bar, query.params.lam, query.params.sigma2
    z = math.sqrt(x * lam / gb) / s2
    log_front = -math.log(2.0 * s2 * gb) - 0.25 * math.log(x / (gb * lam))
    log_kernel = -((math.sqrt(x) - math.sqrt(lam * gb)) ** 2) / (2.0 * gb * s2)
    return math.exp(log_front + log_kernel) * bessel_i_scaled(-0.5, z)


def marcum_args(query: OutageQuery) -> MarcumArgs:
    """Order and arguments of the K-round outage Marcum function."""
    n, k = query.n_reflectors, query.rounds
    theta = outage_threshold(query.rate)
    p = math.sqrt(n * k) * math.pi / math.sqrt(_SIXTEEN_MINUS_PI2)
    q = math.sqrt(16.0 * theta / (n * _SIXTEEN_MINUS_PI2 * query.params.gamma_bar))
    return MarcumArgs(0.5 * k, p, q)


def outage_probability(query: OutageQuery) -> float:
    """Outage after ``K`` chase-combined rounds, ``1 - Q_{K/2}(p, q)``."""
    return marcum_p(*marcum_args(query))


def log_outage_probability(query: OutageQuery) -> float:
    """Natural log of :func:`outage_probability`; stays finite below 1e-308."""
    return log_marcum_p(*marcum_args(query))


def asymptotic_constants(rounds: int, theta: float) -> AsymptoticConstants:
    if rounds < 1 or not theta > 0.0:
        raise DomainError(f"need rounds >= 1 and theta > 0 (got {rounds!r}, {theta!r})")
    half = 0.5 * rounds
    c1 = rounds * math.pi**2 / (2.0 * _SIXTEEN_MINUS_PI2)
    c2 = (16.0 * theta / _SIXTEEN_MINUS_PI2) ** half / (2.0 ** (half - 1.0) * gamma_fn(half) * rounds)
    return AsymptoticConstants(c1, c2)


def log_outage_asymptotic(query: OutageQuery) -> float:
    c = asymptotic_constants(query.rounds, outage_threshold(query.rate))
    n, half = query.n_reflectors, 0.5 * query.rounds
    return -c.c1 * n + math.log(c.c2) - half * math.log(n * query.params.gamma_bar)


def outage_asymptotic(query: OutageQuery) -> float:
    """Large-N / high-SNR outage ``exp(-c1 N) c2 / (N gamma_bar)^{K/2}``."""
    return math.exp(log_outage_asymptotic(query))


def snr_gain_db(query: OutageQuery, target_pout: float, tol_db: float = 1e-4) -> float:
    """Average SNR in dB at which the K-round outage equals ``target_pout``.

    The outage falls strictly with ``gamma_bar``; the root is bracketed by
    stepping outward in 20 dB increments and refined by bisection to ``tol_db``.
    The ``gamma_bar`` carried by ``query`` is ignored.
    """
    if not 0.0 < target_pout < 1.0:
        raise DomainError(f"target_pout must lie in (0, 1), got {target_pout!r}")
    log_target = math.log(target_pout)

    def excess(db: float) -> float:
        return log_outage_probability(query.with_gamma_bar(db_to_linear(db))) - log_target

    lo, hi = -20.0, 20.0
    for _ in range(40):
        if excess(lo) > 0.0:
            break
        lo -= 20.0
    else:
        raise DomainError(f"could not bracket target outage {target_pout!r} from below")
    for _ in range(40):
        if excess(hi) < 0.0:
            break
        hi += 20.0
    else:
        raise DomainError(f"could not bracket target outage {target_pout!r} from above")

    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
