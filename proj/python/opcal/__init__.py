"""Conformal operating-point calibration: grid selection, audits, sweeps and studies."""

import json

from ._opcal import (
    OpcalError,
    beta_cdf,
    betabinom_cdf,
    betabinom_pmf,
    betabinom_quantile,
    calibrate,
    coherent_action,
    coupling_check,
    coupling_closed_form,
    coverage_study,
    envelope_two_sample,
    feasibility_floor,
    pareto_filter,
    predictive_interval,
    rejection_band_nonempty,
    select_index,
    tabulate,
    violation_probability,
    window_success_threshold,
)
from ._opcal import sweep as _sweep

__all__ = [
    "OpcalError",
    "beta_cdf",
    "betabinom_cdf",
    "betabinom_pmf",
    "betabinom_quantile",
    "calibrate",
    "coherent_action",
    "coupling_check",
    "coupling_closed_form",
    "coverage_study",
    "envelope_two_sample",
    "feasibility_floor",
    "pareto_filter",
    "predictive_interval",
    "rejection_band_nonempty",
    "select_index",
    "sweep",
    "tabulate",
    "violation_probability",
    "window_success_threshold",
]


def sweep(cal, audit=None, **spec):
    """Run a request sweep.

    ``cal`` and ``audit`` are ``(p1, y)`` pairs; ``audit=None`` evaluates by leave-one-out.
    Keyword arguments are sweep spec fields (alpha0, delta0, alpha1, delta1, regime, ...).
    """
    doc = {"id": "py", "calibration": "cal", **spec}
    if audit is not None:
        doc["audit"] = "audit"
    aud_p1, aud_y = (list(audit[0]), list(audit[1])) if audit is not None else (None, None)
    return _sweep(list(cal[0]), list(cal[1]), aud_p1, aud_y, json.dumps(doc))
