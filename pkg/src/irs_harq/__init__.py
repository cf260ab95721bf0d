"""Outage analysis of chase-combining HARQ over intelligent-reflecting-surface links.

Closed forms (:mod:`irs_harq.analysis`) rest on the special functions in
:mod:`irs_harq.specfun` and are checked against the Monte Carlo link
simulator in :mod:`irs_harq.mc_simulator`.
"""

from .analysis import (
    OutageQuery,
    outage_asymptotic,
    outage_probability,
    outage_threshold,
    snr_cdf,
    snr_gain_db,
    snr_pdf,
)
from .channel_model import GammaBarParams, SystemConfig, avg_snr
from .errors import ConvergenceError, DomainError
from .mc_simulator import McEstimate, McRunSpec, run_outage_mc
from .specfun import marcum_p, marcum_q

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DomainError",
    "GammaBarParams",
    "McEstimate",
    "McRunSpec",
    "OutageQuery",
    "SystemConfig",
    "avg_snr",
    "marcum_p",
    "marcum_q",
    "outage_asymptotic",
    "outage_probability",
    "outage_threshold",
    "run_outage_mc",
    "snr_cdf",
    "snr_gain_db",
    "snr_pdf",
]
