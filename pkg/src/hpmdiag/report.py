"""Text and JSON rendering of a diagnosis."""

from __future__ import annotations

import datetime as _dt
import json
from typing import Mapping, Sequence

from .analysis import DerivedMetrics
from .markers import as_json_value, is_number
from .patterns import DiagnosisInput, Evidence, Finding

METRIC_LABELS = (
    ("cpi", "CPI", ""),
    ("mflops", "FP performance", "MFlop/s"),
    ("mem_bw_MBs", "Memory bandwidth", "MB/s"),
    ("mem_bw_util", "Memory bandwidth utilization", ""),
    ("olc_bw_MBs", "OLC bandwidth", "MB/s"),
    ("olc_bw_util", "OLC bandwidth utilization", ""),
    ("simd_fraction", "Packed FP share", ""),
    ("instr_per_flop", "Instructions per flop", ""),
    ("ldst_fraction", "Load/store share", ""),
    ("nonfp_fraction", "Non-FP instruction share", ""),
    ("cache_hit_ratio", "Cache hit ratio", ""),
    ("evict_rate", "Evictions per instruction", ""),
    ("remote_fraction", "Remote memory share", ""),
)


def _fmt(value) -> str:
    if is_number(value):
        return f"{value:.6g}"
    return str(value)


def _evidence_line(ev: Evidence) -> str:
    ref = "" if ev.reference is None else f" {ev.relation} {_fmt(ev.reference)}"
    if ev.relation == "mismatch" and ev.reference is not None:
        ref = f" vs {_fmt(ev.reference)} (mismatch)"
    return f"    - {ev.description}: {ev.metric_name} = {_fmt(ev.observed)}{ref} [{ev.source}]"


def _timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()


def text_report(inp: DiagnosisInput, findings: Sequence[Finding], metrics: DerivedMetrics,
                no_timestamp: bool = False) -> str:
    s = inp.session
    region = inp.target_region
    lines = ["Session summary",
             f"  session: {s.session_id}",
             f"  machine: {inp.machine.name} (ref {s.machine_ref})",
             f"  threads: {s.thread_count}, cores {', '.join(str(c) for c in s.core_set)}",
             f"  region: {region.region_name}, wall time {_fmt(region.wall_time_s)} s"]
    if s.notes:
        lines.append(f"  notes: {s.notes}")
    if not no_timestamp:
        lines.append(f"  Generated: {_timestamp()}")
    lines += ["", "Derived metrics"]
    values = metrics.as_dict()
    width = max(len(label) for _, label, _ in METRIC_LABELS)
    for key, label, unit in METRIC_LABELS:
        v = values.get(key)
        if v is None:
            continue
        suffix = f" {unit}" if unit and is_number(v) else ""
        lines.append(f"  {label:<{width}}  {_fmt(v)}{suffix}")
    if metrics.mem_baseline:
        lines.append(f"  {'Memory baseline':<{width}}  {metrics.mem_baseline}")
    lines += ["", "Findings"]
    fired = [f for f in findings if f.fired]
    if not fired:
        lines.append("  no patterns detected")
    for rank, f in enumerate(fired, 1):
        lines.append(f"  {rank}. {f.pattern.title} (severity {f.severity:.3f})")
        lines += [_evidence_line(ev) for ev in f.evidence]
    lines += ["", "Caveats"]
    caveats = [(f, c) for f in findings for c in f.caveats]
    if not caveats:
        lines.append("  none")
    for f, c in caveats:
        lines.append(f"  - {f.pattern.title}: {c}")
    return "\n".join(lines) + "\n"


def evidence_to_dict(ev: Evidence) -> dict:
    return {
        "description": ev.description,
        "metric_name": ev.metric_name,
        "observed": ev.observed,
        "reference": ev.reference,
        "relation": ev.relation,
        "source": ev.source,
    }


def finding_to_dict(f: Finding) -> dict:
    return {
        "pattern": f.pattern.value,
        "fired": f.fired,
        "severity": f.severity,
        "evidence": [evidence_to_dict(ev) for ev in f.evidence],
        "caveats": list(f.caveats),
    }


def json_report(inp: DiagnosisInput, findings: Sequence[Finding], metrics: DerivedMetrics,
                thresholds: Mapping[str, float], no_timestamp: bool = False) -> str:
    doc = {
        "session_id": inp.session.session_id,
        "findings": [finding_to_dict(f) for f in findings],
        "metrics": {k: as_json_value(v) for k, v in metrics.as_dict().items()},
        "thresholds_used": dict(sorted(thresholds.items())),
    }
    if not no_timestamp:
        doc["generated_at"] = _timestamp()
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
