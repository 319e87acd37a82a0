"""Derived quantities consumed by the pattern detectors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .errors import TooFewPoints, UnknownEvent, ValidationError
from .machine import MachineModel, memory_baseline, olc_baseline
from .markers import UNDEFINED, NotComputableValue, is_number
from .perfgroup import MetricResult, PerformanceGroup, builtin_groups, evaluate_group
from .session import RegionMeasurement, ScalingSeries
from .thresholds import resolve

PACKED_EVENTS = ("FP_PACKED_DP", "FP_PACKED_SP")
SCALAR_EVENTS = ("FP_SCALAR_DP", "FP_SCALAR_SP")
INSTRUCTIONS = "INSTR_RETIRED"
CYCLES = "CPU_CLK_UNHALTED"

FIELDS = (
    "cpi", "mem_bw_MBs", "olc_bw_MBs", "mflops", "simd_fraction", "instr_per_flop",
    "ldst_fraction", "nonfp_fraction", "cache_hit_ratio", "evict_rate", "remote_fraction",
)


def _combine(op, a, b):
    if isinstance(a, NotComputableValue) or isinstance(b, NotComputableValue):
        missing = set()
        for v in (a, b):
            if isinstance(v, NotComputableValue):
                missing.update(v.missing)
        return NotComputableValue(tuple(sorted(missing)))
    if a is UNDEFINED or b is UNDEFINED:
        return UNDEFINED
    return op(a, b)


def _add(a, b):
    return _combine(lambda x, y: x + y, a, b)


def _sub(a, b):
    return _combine(lambda x, y: x - y, a, b)


def _div(a, b):
    return _combine(lambda x, y: UNDEFINED if y == 0 else x / y, a, b)


def _sum_available(values):
    """Sum the computable values; NotComputable only if none is."""
    usable = [v for v in values if not isinstance(v, NotComputableValue)]
    if not usable:
        out = values[0]
        for v in values[1:]:
            out = _add(out, v)
        return out
    total = usable[0]
    for v in usable[1:]:
        total = _add(total, v)
    return total


@dataclass
class DerivedMetrics:
    cpi: object = None
    mem_bw_MBs: object = None
    olc_bw_MBs: object = None
    mflops: object = None
    simd_fraction: object = None
    instr_per_flop: object = None
    ldst_fraction: object = None
    nonfp_fraction: object = None
    cache_hit_ratio: object = None
    evict_rate: object = None
    remote_fraction: object = None
    mem_bw_util: object = None
    olc_bw_util: object = None
    mem_baseline: str = ""
    per_core: dict[str, dict[int, object]] = field(default_factory=dict)
    group_results: dict[str, list[MetricResult]] = field(default_factory=dict)

    def as_dict(self) -> dict[str, object]:
        names = FIELDS + ("mem_bw_util", "olc_bw_util")
        return {n: getattr(self, n) for n in names}


def _fields_from(get: Callable[[str, str], object]) -> dict[str, object]:
    packed = _sum_available([get("FLOPS_DP", "PACKED_MUOPS"), get("FLOPS_SP", "PACKED_MUOPS")])
    scalar = _sum_available([get("FLOPS_DP", "SCALAR_MUOPS"), get("FLOPS_SP", "SCALAR_MUOPS")])
    mflops = _sum_available([get("FLOPS_DP", "DP_MFLOPS"), get("FLOPS_SP", "SP_MFLOPS")])
    fp_instr = _add(packed, scalar)
    mips = get("CPI", "MIPS")
    return {
        "cpi": get("CPI", "CPI"),
        "mem_bw_MBs": get("MEM", "MEM_BW"),
        "olc_bw_MBs": get("L3", "L3_BW"),
        "mflops": mflops,
        "simd_fraction": _div(packed, fp_instr),
        "instr_per_flop": _div(mips, mflops),
        "ldst_fraction": get("DATA", "LDST_FRACTION"),
        "nonfp_fraction": _sub(1.0, _div(fp_instr, mips)),
        "cache_hit_ratio": get("CACHE", "CACHE_HIT_RATIO"),
        "evict_rate": get("CACHE", "EVICT_RATE"),
        "remote_fraction": get("MEM", "REMOTE_FRACTION"),
    }


def derive_metrics(region: RegionMeasurement, machine: MachineModel | None = None,
                   groups: Mapping[str, PerformanceGroup] | None = None,
                   baseline: str | None = None) -> DerivedMetrics:
    """Evaluate the metric groups on ``region`` and combine them.

    Fields whose inputs are missing carry a NotComputableValue naming the
    absent events; 0/0 style results carry UNDEFINED. With a ``machine``,
    bandwidth utilizations against its baselines are filled in too.
    """
    if groups is None:
        groups = builtin_groups()
    results: dict[str, dict[str, MetricResult]] = {}
    group_results = {}
    for name in ("CPI", "FLOPS_DP", "FLOPS_SP", "MEM", "L3", "CACHE", "DATA"):
        if name in groups:
            rs = evaluate_group(groups[name], region)
            group_results[name] = rs
            results[name] = {r.metric_name: r for r in rs}

    def lookup(group, metric):
        r = results.get(group, {}).get(metric)
        if r is None:
            return NotComputableValue((f"{group}.{metric}",))
        return r

    dm = DerivedMetrics(**_fields_from(lambda g, m: getattr(lookup(g, m), "aggregate", lookup(g, m))))
    dm.group_results = group_results
    for cid in region.core_ids:
        def core_get(g, m, cid=cid):
            r = lookup(g, m)
            return r.per_core[cid] if isinstance(r, MetricResult) else r
        for name, value in _fields_from(core_get).items():
            dm.per_core.setdefault(name, {})[cid] = value
    if machine is not None:
        mem_ref, dm.mem_baseline = memory_baseline(machine, region.core_ids, baseline)
        olc_ref, _ = olc_baseline(machine, region.core_ids)
        dm.mem_bw_util = _div(dm.mem_bw_MBs, mem_ref)
        dm.olc_bw_util = _div(dm.olc_bw_MBs, olc_ref)
    return dm


# ---------------------------------------------------------------------------
# imbalance


@dataclass(frozen=True)
class ImbalanceReport:
    event_name: str
    per_core: tuple[float, ...]
    index: float
    max_over_mean: float


def imbalance_of(values: Sequence[float], event_name: str = "") -> ImbalanceReport:
    """Imbalance index 1 - min/max of non-negative per-core values.

    All-zero input is balanced by definition (index 0, max/mean 1).
    """
    if not values:
        raise ValueError("no values")
    hi, lo = max(values), min(values)
    if hi == 0:
        return ImbalanceReport(event_name, tuple(values), 0.0, 1.0)
    mean = sum(values) / len(values)
    return ImbalanceReport(event_name, tuple(values), 1.0 - lo / hi, hi / mean)


def imbalance_index(region: RegionMeasurement, event_name: str) -> ImbalanceReport:
    return imbalance_of(region.per_core(event_name), event_name)


def balance_work_conservation(before: RegionMeasurement, after: RegionMeasurement, event: str) -> float:
    """|total(before) - total(after)| / total(before)."""
    a, b = before.total(event), after.total(event)
    if a == 0:
        raise UnknownEvent(f"event {event} has zero total in the reference region")
    return abs(a - b) / a


# ---------------------------------------------------------------------------
# scaling


@dataclass(frozen=True)
class ScalingClassification:
    thread_counts: tuple[int, ...]
    speedups: tuple[float, ...]
    shape: str
    saturation_point: int | None = None


def speedups_of(series: ScalingSeries) -> list[float]:
    pts = series.points
    if all(p.runtime_s is not None for p in pts):
        if any(not p.runtime_s > 0 for p in pts):
            raise ValidationError("ScalingSeries: runtimes must be > 0")
        return [pts[0].runtime_s / p.runtime_s for p in pts]
    if all(p.performance is not None for p in pts):
        if not pts[0].performance > 0:
            raise ValidationError("ScalingSeries: first performance value must be > 0")
        return [p.performance / pts[0].performance for p in pts]
    raise ValidationError("ScalingSeries: every point needs a runtime, or every point a performance value")


def speedup_curve(series: ScalingSeries, thresholds: Mapping[str, float] | None = None) -> ScalingClassification:
    """Speedups relative to the smallest thread count, and the curve shape.

    Shapes are tested in order: degrading (some step drops by more than
    epsilon), saturating (final gain per added thread below sat_slope),
    linear (final speedup at least lin_frac of the thread ratio), irregular.
    """
    th = resolve(thresholds)
    if len(series.points) < 2:
        raise TooFewPoints(f"scaling series {series.label!r} needs at least 2 points")
    counts = series.thread_counts
    if counts[0] < 1 or any(b <= a for a, b in zip(counts, counts[1:])):
        raise ValidationError("ScalingSeries: thread counts must be >= 1 and strictly increasing")
    s = speedups_of(series)
    eps, slope, lin = th["epsilon"], th["sat_slope"], th["lin_frac"]
    gains = [(s[i + 1] - s[i]) / (counts[i + 1] - counts[i]) for i in range(len(s) - 1)]
    saturation_point = None
    if any(s[i + 1] < s[i] - eps for i in range(len(s) - 1)):
        shape = "degrading"
    elif gains[-1] < slope:
        shape = "saturating"
        k = len(gains) - 1
        while k > 0 and gains[k - 1] < slope:
            k -= 1
        saturation_point = counts[k]
    elif s[-1] >= lin * counts[-1] / counts[0]:
        shape = "linear"
    else:
        shape = "irregular"
    return ScalingClassification(tuple(counts), tuple(s), shape, saturation_point)


def compare_runs(series: ScalingSeries) -> list[float]:
    """Speedup of each run relative to the first, ignoring thread counts."""
    if len(series.points) < 2:
        raise TooFewPoints(f"series {series.label!r} needs at least 2 runs")
    return speedups_of(series)


def growth_exponent(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log(ys) over log(xs)."""
    if len(xs) < 2 or len(set(xs)) < 2:
        raise TooFewPoints("growth exponent needs at least 2 distinct x values")
    if any(not x > 0 for x in xs) or any(not y > 0 for y in ys):
        raise ValueError("growth exponent needs positive values")
    lx = [math.log(x) for x in xs]
    ly = [math.log(y) for y in ys]
    mx, my = sum(lx) / len(lx), sum(ly) / len(ly)
    sxx = sum((x - mx) ** 2 for x in lx)
    sxy = sum((x - mx) * (y - my) for x, y in zip(lx, ly))
    return sxy / sxx


def packed_fp_counts(region: RegionMeasurement) -> list[int] | None:
    present = [e for e in PACKED_EVENTS if region.has_event(e)]
    if not present:
        return None
    return [sum(c.counts[e] for e in present) for c in region.cores]


def fp_instruction_counts(region: RegionMeasurement) -> list[int] | None:
    present = [e for e in PACKED_EVENTS + SCALAR_EVENTS if region.has_event(e)]
    if not present:
        return None
    return [sum(c.counts[e] for e in present) for c in region.cores]


__all__ = [
    "DerivedMetrics", "ImbalanceReport", "ScalingClassification", "balance_work_conservation",
    "compare_runs", "derive_metrics", "fp_instruction_counts", "growth_exponent", "imbalance_index",
    "imbalance_of", "is_number", "packed_fp_counts", "speedup_curve", "speedups_of",
]
