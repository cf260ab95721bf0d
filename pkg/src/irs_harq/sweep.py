"""Sweep, validation and SNR-gain tables behind the command-line interface."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass

from .analysis import OutageQuery, outage_asymptotic, outage_probability, snr_gain_db
from .config import MC_ENGINES, ConfigError, SweepSpec
from .errors import ConvergenceError, DomainError
from .mc_simulator import McRunSpec, run_outage_mc

__all__ = [
    "SWEEP_COLUMNS",
    "VALIDATE_COLUMNS",
    "GAIN_COLUMNS",
    "Z_LIMIT",
    "PASS_FRACTION",
    "run_sweep",
    "validate",
    "gain_table",
    "format_csv",
]

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ("axis_name", "axis_value", "engine", "p_out", "std_err", "trials", "seed", "ratio_to_analytic", "error")
VALIDATE_COLUMNS = SWEEP_COLUMNS[:-1] + ("analytic", "bias", "z_score", "pass", "error")
GAIN_COLUMNS = ("axis_name", "axis_value", "target_pout", "snr_db", "gain_db", "error")

Z_LIMIT = 3.0
# fraction of rows that must sit within Z_LIMIT standard errors
PASS_FRACTION = 0.95
_ENGINE_ORDER = ("analytic", "asymptotic", "mc_exact", "mc_clt")
_NUMERIC_ERRORS = (DomainError, ConvergenceError, ArithmeticError)


@dataclass
class Row:
    axis_name: str
    axis_value: float
    engine: str
    p_out: float | None = None
    std_err: float | None = None
    trials: int | None = None
    seed: int | None = None
    ratio_to_analytic: float | None = None
    error: str = ""


def _engines(spec: SweepSpec) -> list[str]:
    return sorted(spec.engines, key=_ENGINE_ORDER.index)


def _evaluate(spec: SweepSpec, value, engine: str, workers: int | None) -> Row:
    row = Row(spec.axis, value, engine)
    try:
        cfg = spec.config_at(value)
        query = OutageQuery.from_config(cfg)
        if engine == "analytic":
            row.p_out = outage_probability(query)
        elif engine == "asymptotic":
            row.p_out = outage_asymptotic(query)
            exact = outage_probability(query)
            row.ratio_to_analytic = row.p_out / exact if exact > 0.0 else math.inf
        else:
            mode = "exact" if engine == "mc_exact" else "clt"
            mc = spec.mc
            est = run_outage_mc(McRunSpec(cfg, mode, mc.trials, mc.seed, mc.shards), workers=workers)
            row.p_out, row.std_err, row.trials, row.seed = est.p_hat, est.std_err, est.trials, est.seed
            if est.p_hat == 0.0 or est.std_err / est.p_hat > 0.1:
                log.warning(
                    "%s=%s %s: relative standard error above 10%% (%d outages in %d trials)",
                    spec.axis, value, engine, est.outages, est.trials,
                )
    except _NUMERIC_ERRORS as exc:
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def run_sweep(spec: SweepSpec, workers: int | None = None) -> list[Row]:
    """One row per (axis value, engine), ordered by axis value then engine."""
    return [_evaluate(spec, v, e, workers) for v in spec.grid for e in _engines(spec)]


@dataclass
class ValidationRow(Row):
    analytic: float | None = None
    bias: float | None = None
    z_score: float | None = None
    passed: bool | None = None


def validate(spec: SweepSpec, workers: int | None = None) -> tuple[list[ValidationRow], bool]:
    """Compare every Monte Carlo engine against the closed form.

    A row passes when ``|p_hat - analytic| <= 3 * std_err``; where the estimate
    has zero or full outage count, the binomial standard error at the analytic
    value is used instead.  The run passes when at least 95% of rows pass.
    """
    mc_engines = [e for e in _engines(spec) if e in MC_ENGINES]
    if "analytic" not in spec.engines or not mc_engines:
        raise ConfigError("engines: validation needs 'analytic' and at least one of mc_exact/mc_clt")
    rows: list[ValidationRow] = []
    for value in spec.grid:
        ref = _evaluate(spec, value, "analytic", workers)
        for engine in mc_engines:
            r = _evaluate(spec, value, engine, workers)
            vr = ValidationRow(**vars(r))
            vr.error = vr.error or ref.error
            if not vr.error:
                vr.analytic = ref.p_out
                vr.bias = r.p_out - ref.p_out
                se = r.std_err
                if se == 0.0:
                    se = math.sqrt(ref.p_out * (1.0 - ref.p_out) / r.trials)
                vr.z_score = vr.bias / se if se > 0.0 else (0.0 if vr.bias == 0.0 else math.inf)
                vr.passed = abs(vr.z_score) <= Z_LIMIT
            else:
                vr.passed = False
            rows.append(vr)
    n_pass = sum(bool(r.passed) for r in rows)
    return rows, n_pass >= PASS_FRACTION * len(rows)


@dataclass
class GainRow:
    axis_name: str
    axis_value: float
    target_pout: float
    snr_db: float | None = None
    gain_db: float | None = None
    error: str = ""


def gain_table(spec: SweepSpec) -> list[GainRow]:
    """Average SNR (dB) needed to hit ``target_pout`` at each axis value.

    ``gain_db`` is the SNR saved relative to the previous grid value.
    """
    if spec.axis == "snr_db":
        raise ConfigError("axis: gain needs a non-SNR axis (n_reflectors, rounds or pathloss_exp)")
    rows = []
    prev = None
    for value in spec.grid:
        row = GainRow(spec.axis, value, spec.target_pout)
        try:
            row.snr_db = snr_gain_db(OutageQuery.from_config(spec.config_at(value)), spec.target_pout)
        except _NUMERIC_ERRORS as exc:
            row.error = f"{type(exc).__name__}: {exc}"
        if row.snr_db is not None and prev is not None:
            row.gain_db = prev - row.snr_db
        prev = row.snr_db
        rows.append(row)
    return rows


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_csv(rows, columns) -> str:
    """Comma-separated text with one header row and ``\\n`` line endings."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        fields = vars(row)
        writer.writerow(_cell(fields["passed" if c == "pass" else c]) for c in columns)
    return buf.getvalue()
