"""Cascaded source -> surface -> destination link with ideal phase alignment.

Every element contributes ``alpha_l * beta_l`` (two independent Rayleigh
amplitudes with unit mean power), the phases are cancelled by the surface,
and the received SNR of one transmission round is ``gamma_bar * S**2`` with
``S = sum_l alpha_l beta_l``.

Random streams
--------------
``make_stream(seed, block)`` returns ``numpy.random.Generator(Philox(...))``
keyed by ``SeedSequence(seed, spawn_key=(block,))``.  The Monte Carlo driver
assigns one such stream to every fixed-size block of trials, so a given
``(seed, block)`` pair always yields the same draws no matter how blocks are
grouped into shards or which thread runs them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DomainError

__all__ = [
    "SystemConfig",
    "GammaBarParams",
    "Mode",
    "MODES",
    "avg_snr",
    "gamma_bar_params",
    "make_stream",
    "sample_rayleigh",
    "sample_cascade_sum",
    "sample_round_snr",
]

Mode = Literal["exact", "clt"]
MODES = ("exact", "clt")

# per-element moments of alpha*beta, alpha, beta ~ Rayleigh(1/sqrt(2))
PRODUCT_MEAN = math.pi / 4.0
PRODUCT_VAR = 1.0 - math.pi**2 / 16.0


@dataclass(frozen=True)
class SystemConfig:
    """Physical and protocol parameters of one surface-assisted HARQ link."""

    n_reflectors: int
    tx_power: float = 1.0
    noise_power: float = 1.0
    dist_sr: float = 1.0
    dist_rd: float = 1.0
    pathloss_exp: float = 2.0
    rate: float = 1.0
    max_rounds: int = 1

    def __post_init__(self) -> None:
        for name in ("n_reflectors", "max_rounds"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise DomainError(f"{name} must be an integer >= 1, got {value!r}")
        for name in ("tx_power", "noise_power", "dist_sr", "dist_rd", "rate"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0.0:
                raise DomainError(f"{name} must be finite and > 0, got {value!r}")
        if not math.isfinite(self.pathloss_exp) or self.pathloss_exp < 1.0:
            raise DomainError(f"pathloss_exp must be finite and >= 1, got {self.pathloss_exp!r}")


@dataclass(frozen=True)
class GammaBarParams:
    """Per-round average SNR and the noncentral chi-square shape of the round SNR."""

    gamma_bar: float
    lam: float
    sigma2: float


def gamma_bar_params(gamma_bar: float, n_reflectors: int) -> GammaBarParams:
    """Shape parameters for ``n_reflectors`` elements at a given average SNR."""
    if not math.isfinite(gamma_bar) or gamma_bar <= 0.0:
        raise DomainError(f"gamma_bar must be finite and > 0, got {gamma_bar!r}")
    if n_reflectors < 1:
        raise DomainError(f"n_reflectors must be >= 1, got {n_reflectors!r}")
    return GammaBarParams(
        gamma_bar=float(gamma_bar),
        lam=(n_reflectors * PRODUCT_MEAN) ** 2,
        sigma2=n_reflectors * PRODUCT_VAR,
    )


def avg_snr(cfg: SystemConfig) -> GammaBarParams:
    """Link budget ``Ps / (N0 d1^n d2^n)`` plus the shape parameters for ``cfg``."""
    n = cfg.pathloss_exp
    gamma_bar = cfg.tx_power / (cfg.noise_power * cfg.dist_sr**n * cfg.dist_rd**n)
    return gamma_bar_params(gamma_bar, cfg.n_reflectors)


def make_stream(seed: int, block: int = 0) -> np.random.Generator:
    """Counter-based stream for trial block ``block`` under master ``seed``."""
    if seed < 0 or seed >= 2**64:
        raise DomainError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(block),))
    return np.random.Generator(np.random.Philox(ss))


def sample_rayleigh(rng, size=None):
    """Rayleigh(1/sqrt(2)) amplitudes by inversion: ``sqrt(-ln U)``, U on (0, 1]."""
    u = 1.0 - np.asarray(rng.random(size))
    out = np.sqrt(-np.log(u))
    return float(out) if size is None else out


def sample_cascade_sum(n_reflectors: int, rng, size=None):
    """Draw ``sum_l alpha_l beta_l`` over ``n_reflectors`` elements.

    With ``size`` given, returns an array of that many independent sums.
    """
    if n_reflectors < 1:
        raise DomainError(f"n_reflectors must be >= 1, got {n_reflectors!r}")
    shape = (n_reflectors,) if size is None else (int(size), n_reflectors)
    u = 1.0 - rng.random(shape)
    v = 1.0 - rng.random(shape)
    # sqrt(-ln u) * sqrt(-ln v) in one root
    s = np.sqrt(np.log(u) * np.log(v)).sum(axis=-1)
    return float(s) if size is None else s


def sample_round_snr(params: GammaBarParams, n_reflectors: int, mode: str, rng, size=None):
    """Per-round receive SNR ``gamma_bar * S**2``.

    ``exact`` draws the element-wise double-Rayleigh sum; ``clt`` replaces it
    with a Gaussian of mean ``sqrt(lam)`` and variance ``sigma2``.  The
    Gaussian is squared as-is (not truncated at zero), so ``clt`` samples
    follow the noncentral chi-square law of the closed forms exactly.
    """
    if mode == "exact":
        s = sample_cascade_sum(n_reflectors, rng, size)
    elif mode == "clt":
        s = rng.normal(math.sqrt(params.lam), math.sqrt(params.sigma2), size)
    else:
        raise DomainError(f"unknown sampling mode {mode!r}; expected one of {MODES}")
    out = params.gamma_bar * np.square(s)
    return float(out) if size is None else out
