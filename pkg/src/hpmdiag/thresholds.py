"""Detector thresholds.

Every cutoff used by the detectors lives here. A thresholds file is a flat
JSON object mapping names to numbers; unspecified names keep their defaults.
``permissive`` and ``restrictive`` are the sweep bounds: the former lets a
detector's own clause fire as easily as possible, the latter never.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .errors import ParseError, ValidationError


@dataclass(frozen=True)
class Threshold:
    default: float
    permissive: float
    restrictive: float
    doc: str


THRESHOLDS: dict[str, Threshold] = {
    # scaling shape
    "epsilon": Threshold(0.05, 0.05, 0.05, "speedup drop that counts as degrading"),
    "sat_slope": Threshold(0.1, 0.1, 0.1, "final speedup gain per added thread below which a curve saturates"),
    "lin_frac": Threshold(0.8, 0.8, 0.8, "fraction of ideal speedup that counts as linear"),
    # load imbalance
    "imb_threshold": Threshold(0.15, 0.0, 1.01, "imbalance index 1-min/max at or above which load imbalance fires"),
    # bandwidth saturation
    "sat_threshold": Threshold(0.75, 0.0, 100.0, "bandwidth utilization at or above which saturation fires"),
    # strided / erratic access
    "ldst_threshold": Threshold(0.4, 0.0, 1.01, "load+store share of instructions that counts as LD/ST dominated"),
    "low_bw_threshold": Threshold(0.3, 100.0, -1.0, "bandwidth utilization at or below which bandwidth use is low"),
    "hit_threshold": Threshold(0.9, 1.01, -1.0, "cache hit ratio at or below which hits are low"),
    "strided_bw_weight": Threshold(0.7, 0.7, 0.7, "severity weight of the bandwidth/hit-ratio deficit"),
    "strided_ldst_weight": Threshold(0.3, 0.3, 0.3, "severity weight of the load/store share"),
    # instruction mix
    "mix_threshold": Threshold(2.0, 0.0, 1e300, "instructions per flop at or above which the mix is bad"),
    "simd_threshold": Threshold(0.5, 1.01, -1.0, "packed share of FP instructions at or below which scalar code dominates"),
    "mix_severity_span": Threshold(8.0, 8.0, 8.0, "ratio to threshold at which mix severity reaches 1"),
    # instruction throughput
    "cpi_limit_factor": Threshold(1.3, 1e300, 0.0, "CPI cutoff as a multiple of 1/issue_width"),
    "static_agreement": Threshold(0.15, 0.15, 0.15, "relative gap for measured vs static cycles to agree"),
    # synchronization
    "nonfp_threshold": Threshold(0.8, 0.0, 1.01, "non-FP instruction share at or above which overhead is suspected"),
    "growth_exponent": Threshold(1.1, -1e300, 1e300, "log-log growth exponent of total instructions over threads"),
    "sync_weak_severity": Threshold(0.3, 0.3, 0.3, "severity cap when scaling sessions are absent"),
    # false sharing
    "fs_speedup": Threshold(1.05, 1e300, -1.0, "speedup at 2 threads at or below which sharing is suspected"),
    "fs_slowdown": Threshold(1.0, 1e300, -1.0, "speedup below which a run at <= 4 threads is a slowdown"),
    "evict_threshold": Threshold(0.01, 0.0, 1e300, "evictions per instruction at or above which evicts are frequent"),
    # ccNUMA
    "numa_imb_threshold": Threshold(0.5, 0.0, 1.01, "imbalance index of per-domain memory bandwidth"),
    "remote_threshold": Threshold(0.3, 0.0, 1.01, "remote share of memory traffic"),
    # residual
    "anomaly_fraction": Threshold(0.5, 1e300, 0.0, "measured/model MFlop/s at or below which a discrepancy is large"),
}

DEFAULTS: dict[str, float] = {name: t.default for name, t in THRESHOLDS.items()}


def resolve(overrides: Mapping[str, float] | None = None) -> dict[str, float]:
    """Defaults updated with ``overrides``; unknown names are rejected."""
    out = dict(DEFAULTS)
    if overrides:
        unknown = sorted(set(overrides) - set(THRESHOLDS))
        if unknown:
            raise ValidationError(f"unknown threshold(s): {', '.join(unknown)}")
        for name, value in overrides.items():
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValidationError(f"threshold {name} must be a number")
            out[name] = float(value)
    return out


def bound(kind: str) -> dict[str, float]:
    """Every threshold at its ``permissive`` or ``restrictive`` bound."""
    return {name: getattr(t, kind) for name, t in THRESHOLDS.items()}


def load_thresholds(path) -> dict[str, float]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: expected a JSON object")
    return resolve(doc)
