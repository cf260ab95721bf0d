"""Monte Carlo estimate of HARQ chase-combining outage over the sampled channel.

Trials are grouped into blocks of :data:`TRIALS_PER_BLOCK`.  Block ``b`` always
draws from ``make_stream(seed, b)``, and shards are nothing more than
contiguous runs of blocks, so the outage count is identical for any shard
count and any execution order.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analysis import outage_threshold
from .channel_model import (
    MODES,
    GammaBarParams,
    SystemConfig,
    avg_snr,
    gamma_bar_params,
    make_stream,
    sample_round_snr,
)
from .errors import DomainError

__all__ = [
    "TRIALS_PER_BLOCK",
    "McRunSpec",
    "McEstimate",
    "run_session",
    "run_outage_mc",
    "shard_blocks",
]

log = logging.getLogger(__name__)

TRIALS_PER_BLOCK = 8192
# cap on uniforms drawn per array in exact mode (rows * reflectors)
_MAX_DRAWS = 1 << 21
_Z95 = 1.959963984540054


@dataclass(frozen=True)
class McRunSpec:
    cfg: SystemConfig
    mode: str = "clt"
    trials: int = 10**6
    seed: int = 0
    shards: int = 1
    # optional per-round average SNRs; defaults to the cfg link budget every round
    round_gamma_bars: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise DomainError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.trials < 1000:
            raise DomainError(f"trials must be >= 1000, got {self.trials!r}")
        if self.shards < 1:
            raise DomainError(f"shards must be >= 1, got {self.shards!r}")
        if not 0 <= self.seed < 2**64:
            raise DomainError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.round_gamma_bars is not None and len(self.round_gamma_bars) != self.cfg.max_rounds:
            raise DomainError("round_gamma_bars must hold one value per round")

    def round_params(self) -> list[GammaBarParams]:
        if self.round_gamma_bars is None:
            return [avg_snr(self.cfg)] * self.cfg.max_rounds
        return [gamma_bar_params(g, self.cfg.n_reflectors) for g in self.round_gamma_bars]


@dataclass(frozen=True)
class McEstimate:
    p_hat: float
    trials: int
    outages: int
    std_err: float
    ci_low: float
    ci_high: float
    rounds_used_mean: float
    seed: int

    @classmethod
    def from_counts(cls, outages: int, trials: int, rounds_total: int, seed: int) -> "McEstimate":
        p = outages / trials
        se = math.sqrt(p * (1.0 - p) / trials)
        if outages == 0:
            lo, hi = 0.0, 3.0 / trials
        elif outages == trials:
            lo, hi = 1.0 - 3.0 / trials, 1.0
        else:
            lo, hi = max(0.0, p - _Z95 * se), min(1.0, p + _Z95 * se)
        return cls(p, trials, outages, se, lo, hi, rounds_total / trials, seed)


def run_session(cfg: SystemConfig, mode: str, rng, round_gamma_bars=None) -> tuple[bool, int]:
    """Play one HARQ session; returns ``(outage, rounds_used)``.

    Rounds stop as soon as the combined SNR clears ``2**R - 1``.
    """
    theta = outage_threshold(cfg.rate)
    if round_gamma_bars is None:
        params = [avg_snr(cfg)] * cfg.max_rounds
    else:
        params = [gamma_bar_params(g, cfg.n_reflectors) for g in round_gamma_bars]
    acc = 0.0
    for k, par in enumerate(params, start=1):
        acc += sample_round_snr(par, cfg.n_reflectors, mode, rng)
        if acc >= theta:
            return False, k
    return True, cfg.max_rounds


def _round_snrs(par: GammaBarParams, n_reflectors: int, mode: str, rng, size: int) -> np.ndarray:
    if mode == "clt":
        return sample_round_snr(par, n_reflectors, mode, rng, size)
    rows = max(1, _MAX_DRAWS // n_reflectors)
    return np.concatenate(
        [sample_round_snr(par, n_reflectors, mode, rng, min(rows, size - i)) for i in range(0, size, rows)]
    )


def _simulate_block(spec: McRunSpec, params: list[GammaBarParams], theta: float, block: int) -> tuple[int, int]:
    """Outage count and summed rounds for one block of trials."""
    n = min(TRIALS_PER_BLOCK, spec.trials - block * TRIALS_PER_BLOCK)
    rng = make_stream(spec.seed, block)
    acc = np.zeros(n)
    done = np.zeros(n, dtype=bool)
    rounds_total = 0
    # every round is drawn for every trial so stream consumption is fixed
    for k, par in enumerate(params, start=1):
        acc += _round_snrs(par, spec.cfg.n_reflectors, spec.mode, rng, n)
        newly = ~done & (acc >= theta)
        rounds_total += k * int(np.count_nonzero(newly))
        done |= newly
    outages = n - int(np.count_nonzero(done))
    rounds_total += len(params) * outages
    return outages, rounds_total


def shard_blocks(n_blocks: int, shards: int) -> list[range]:
    """Split block indices into ``shards`` contiguous runs; the last takes the remainder."""
    per = n_blocks // shards
    bounds = [i * per for i in range(shards)] + [n_blocks]
    return [range(bounds[i], bounds[i + 1]) for i in range(shards)]


def run_outage_mc(spec: McRunSpec, workers: int | None = None) -> McEstimate:
    """Relative-frequency outage estimate with a 95% normal-approximation interval."""
    params = spec.round_params()
    theta = outage_threshold(spec.cfg.rate)
    n_blocks = -(-spec.trials // TRIALS_PER_BLOCK)

    def run_shard(blocks: range) -> tuple[int, int]:
        out = rounds = 0
        for b in blocks:
            o, r = _simulate_block(spec, params, theta, b)
            out += o
            rounds += r
        return out, rounds

    runs = shard_blocks(n_blocks, spec.shards)
    if workers is None:
        workers = min(spec.shards, os.cpu_count() or 1)
    if workers <= 1 or len(runs) == 1:
        results = [run_shard(r) for r in runs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_shard, runs))

    outages = sum(o for o, _ in results)
    rounds_total = sum(r for _, r in results)
    est = McEstimate.from_counts(outages, spec.trials, rounds_total, spec.seed)
    log.debug("mc %s: %d/%d outages, p=%.4g", spec.mode, outages, spec.trials, est.p_hat)
    return est
