"""Capitation payment engine: synthetic data, metrics, calibration and payments."""

from _capita import (
    Bundle,
    CapitaError,
    Params,
    antibiotic_top_share,
    bhattacharyya_distance,
    calibrate,
    capitation_amount,
    compute_metrics,
    iqr_flagged,
    load_bundle,
    quarterly_schedule,
    segment,
    synth,
)

__all__ = [
    "Bundle",
    "CapitaError",
    "Params",
    "antibiotic_top_share",
    "bhattacharyya_distance",
    "calibrate",
    "capitation_amount",
    "compute_metrics",
    "iqr_flagged",
    "load_bundle",
    "quarterly_schedule",
    "segment",
    "synth",
]
