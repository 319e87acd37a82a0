"""One detector per performance pattern, and the ranking that combines them.

Each detector returns a Finding or raises NotComputable when the measurement
lacks the inputs its signature needs. ``diagnose`` turns NotComputable into an
unfired finding that explains what is missing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping

from .analysis import (
    CYCLES,
    INSTRUCTIONS,
    DerivedMetrics,
    ScalingClassification,
    derive_metrics,
    fp_instruction_counts,
    growth_exponent,
    imbalance_of,
    packed_fp_counts,
    speedup_curve,
)
from .errors import NotComputable, ValidationError
from .machine import MachineModel, memory_baseline, olc_baseline
from .markers import is_number
from .perfgroup import PerformanceGroup, builtin_groups, evaluate_group
from .session import MeasurementSession, RegionMeasurement, ScalingSeries, combine_regions, subregion
from .thresholds import resolve


class PatternKind(Enum):
    LoadImbalance = "LoadImbalance"
    OlcBandwidthSaturation = "OlcBandwidthSaturation"
    MemoryBandwidthSaturation = "MemoryBandwidthSaturation"
    StridedErraticAccess = "StridedErraticAccess"
    BadInstructionMix = "BadInstructionMix"
    LimitedInstructionThroughput = "LimitedInstructionThroughput"
    MicroarchAnomaly = "MicroarchAnomaly"
    SynchronizationOverhead = "SynchronizationOverhead"
    FalseCachelineSharing = "FalseCachelineSharing"
    BadNumaPlacement = "BadNumaPlacement"

    @property
    def title(self) -> str:
        return TITLES[self]

    @property
    def order(self) -> int:
        return list(PatternKind).index(self)


TITLES = {
    PatternKind.LoadImbalance: "Load imbalance",
    PatternKind.OlcBandwidthSaturation: "OLC bandwidth saturation",
    PatternKind.MemoryBandwidthSaturation: "Memory bandwidth saturation",
    PatternKind.StridedErraticAccess: "Strided or erratic data access",
    PatternKind.BadInstructionMix: "Bad instruction mix",
    PatternKind.LimitedInstructionThroughput: "Limited instruction throughput",
    PatternKind.MicroarchAnomaly: "Microarchitectural anomalies",
    PatternKind.SynchronizationOverhead: "Synchronization overhead",
    PatternKind.FalseCachelineSharing: "False cache line sharing",
    PatternKind.BadNumaPlacement: "Bad ccNUMA page placement",
}

GE, LE, APPROX, MISMATCH = "≥", "≤", "≈", "mismatch"
HPM, SCALING, STATIC, BASELINE = "HPM", "scaling behavior", "static analysis input", "baseline"

CODE_REVIEW = "code review required, with architectural features in mind"


@dataclass(frozen=True)
class Evidence:
    description: str
    metric_name: str
    observed: float
    reference: float | None
    relation: str
    source: str

    def __post_init__(self):
        if not math.isfinite(self.observed):
            raise ValueError(f"evidence {self.metric_name}: observed value must be finite")


@dataclass(frozen=True)
class Finding:
    pattern: PatternKind
    severity: float = 0.0
    fired: bool = False
    evidence: tuple[Evidence, ...] = ()
    caveats: tuple[str, ...] = ()

    def __post_init__(self):
        if self.fired and not self.evidence:
            raise ValueError(f"{self.pattern.value}: a fired finding needs evidence")
        if not self.fired and self.severity != 0:
            object.__setattr__(self, "severity", 0.0)


@dataclass
class DiagnosisInput:
    """Everything the detectors look at.

    ``region`` selects one region by name; by default a single region is used
    as is and several are summed. ``baseline`` overrides the memory bandwidth
    reference (a Baselines field name or alias). ``iterations`` is the total
    loop iteration count that makes ``static_cycles_per_iter`` comparable.
    """

    session: MeasurementSession
    machine: MachineModel
    scaling: ScalingSeries | None = None
    static_cycles_per_iter: float | None = None
    iterations: float | None = None
    model_mflops: float | None = None
    useful_work_fp: bool = False
    data_parallel: bool = False
    region: str | None = None
    baseline: str | None = None
    groups: Mapping[str, PerformanceGroup] | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        unknown = set(self.session.core_set) - set(self.machine.topology.core_ids)
        if unknown:
            raise ValidationError(
                f"DiagnosisInput: cores {sorted(unknown)} of session {self.session.session_id}"
                f" are not in machine {self.machine.name}"
            )

    @property
    def group_registry(self) -> Mapping[str, PerformanceGroup]:
        if "groups" not in self._cache:
            self._cache["groups"] = self.groups if self.groups is not None else builtin_groups()
        return self._cache["groups"]

    @property
    def target_region(self) -> RegionMeasurement:
        if "region" not in self._cache:
            if self.region is not None:
                r = self.session.region(self.region)
            else:
                r = combine_regions(self.session.regions, self.session.regions[0].region_name
                                    if len(self.session.regions) == 1 else "all")
            self._cache["region"] = r
        return self._cache["region"]

    @property
    def metrics(self) -> DerivedMetrics:
        if "metrics" not in self._cache:
            self._cache["metrics"] = derive_metrics(self.target_region, self.machine,
                                                    self.group_registry, self.baseline)
        return self._cache["metrics"]

    def scaling_shape(self, th) -> ScalingClassification | None:
        if self.scaling is None or len(self.scaling.points) < 2:
            return None
        return speedup_curve(self.scaling, th)


def _clip(x: float, lo: float = 0.0, hi: float = 1.0) -> float:
    return max(lo, min(hi, x))


def _need(value, what: str):
    if not is_number(value):
        raise NotComputable(f"{what} is {value}")
    return value


# ---------------------------------------------------------------------------


def detect_load_imbalance(inp: DiagnosisInput, thresholds=None) -> Finding:
    th = resolve(thresholds)
    region = inp.target_region
    caveats = []
    values, event = None, None
    packed = packed_fp_counts(region)
    fp = fp_instruction_counts(region)
    if packed is not None and sum(packed) > 0:
        values, event = packed, "packed FP instructions"
    elif fp is not None and sum(fp) > 0:
        values, event = fp, "FP instructions"
    elif region.has_event(INSTRUCTIONS):
        values, event = region.per_core(INSTRUCTIONS), INSTRUCTIONS
        caveats.append("imbalance judged from instructions retired; spin-waiting can mask or mimic imbalance")
    if values is None:
        raise NotComputable("no per-core FP or instructions-retired event")
    if len(values) < 2:
        caveats.append("single core measured; imbalance needs several cores")
    rep = imbalance_of(values, event)
    fired = rep.index >= th["imb_threshold"]
    lo, hi = min(values), max(values)
    evidence = [
        Evidence(f"imbalance index 1-min/max of {event} over {len(values)} cores (min {lo:.4g}, max {hi:.4g})",
                 "imbalance_index", rep.index, th["imb_threshold"], GE if fired else LE, HPM),
        Evidence(f"busiest core does {rep.max_over_mean:.3f}x the mean work", "max_over_mean",
                 rep.max_over_mean, None, GE, HPM),
    ]
    nonfp = inp.metrics.nonfp_fraction
    if is_number(nonfp) and nonfp >= th["nonfp_threshold"]:
        caveats.append("non-FP instruction share is high: idle cores may be spin-waiting in synchronization")
    shape = inp.scaling_shape(th)
    if shape is not None and shape.shape == "saturating":
        evidence.append(Evidence("speedup saturates", "speedup", shape.speedups[-1], None, APPROX, SCALING))
    return Finding(PatternKind.LoadImbalance, rep.index if fired else 0.0, fired, tuple(evidence), tuple(caveats))


def detect_bw_saturation(inp: DiagnosisInput, level: str = "memory", thresholds=None) -> Finding:
    th = resolve(thresholds)
    m = inp.metrics
    cores = inp.target_region.core_ids
    if level == "memory":
        kind, metric = PatternKind.MemoryBandwidthSaturation, "mem_bw_MBs"
        measured = _need(m.mem_bw_MBs, "memory bandwidth")
        ref, ref_desc = memory_baseline(inp.machine, cores, inp.baseline)
    elif level == "olc":
        kind, metric = PatternKind.OlcBandwidthSaturation, "olc_bw_MBs"
        measured = _need(m.olc_bw_MBs, "OLC bandwidth")
        ref, ref_desc = olc_baseline(inp.machine, cores)
    else:
        raise ValueError(f"level must be 'memory' or 'olc', got {level!r}")
    util = measured / ref
    close = util >= th["sat_threshold"]
    evidence = [
        Evidence(f"measured {measured:.1f} MB/s against {ref:.1f} MB/s ({ref_desc})",
                 metric, measured, ref, APPROX if close else LE, BASELINE),
        Evidence("bandwidth utilization", "bandwidth_utilization", util, th["sat_threshold"],
                 GE if close else LE, HPM),
    ]
    caveats = []
    fired = close
    shape = inp.scaling_shape(th)
    if shape is not None:
        evidence.append(Evidence(f"speedup curve is {shape.shape}", "speedup", shape.speedups[-1], None,
                                 APPROX if shape.shape == "saturating" else MISMATCH, SCALING))
        if close and shape.shape != "saturating":
            fired = False
            caveats.append(f"bandwidth is near the baseline but speedup is {shape.shape}, not saturating")
    return Finding(kind, min(1.0, util) if fired else 0.0, fired, tuple(evidence), tuple(caveats))


def detect_strided_access(inp: DiagnosisInput, thresholds=None) -> Finding:
    th = resolve(thresholds)
    m = inp.metrics
    ldst = _need(m.ldst_fraction, "load/store share")
    util = m.mem_bw_util if is_number(m.mem_bw_util) else None
    hit = m.cache_hit_ratio if is_number(m.cache_hit_ratio) else None
    if util is None and hit is None:
        raise NotComputable("neither memory bandwidth nor cache hit ratio is available")
    ld_heavy = ldst >= th["ldst_threshold"]
    evidence = [Evidence("load/store share of instructions", "ldst_fraction", ldst, th["ldst_threshold"],
                         GE if ld_heavy else LE, HPM)]
    deficits = []
    low = False
    if util is not None:
        low_bw = util <= th["low_bw_threshold"]
        low = low or low_bw
        evidence.append(Evidence(f"memory bandwidth utilization against {m.mem_baseline}", "mem_bw_util",
                                 util, th["low_bw_threshold"], LE if low_bw else GE, HPM))
        if th["low_bw_threshold"] > 0:
            deficits.append(_clip(1.0 - util / th["low_bw_threshold"]))
    if hit is not None:
        low_hit = hit <= th["hit_threshold"]
        low = low or low_hit
        evidence.append(Evidence("cache hit ratio", "cache_hit_ratio", hit, th["hit_threshold"],
                                 LE if low_hit else GE, HPM))
        if th["hit_threshold"] > 0:
            deficits.append(_clip((th["hit_threshold"] - hit) / th["hit_threshold"]))
    fired = ld_heavy and low
    if is_number(m.mflops) and inp.model_mflops and m.mflops < inp.model_mflops:
        evidence.append(Evidence("measured MFlop/s below the bandwidth-based model", "mflops", m.mflops,
                                 inp.model_mflops, MISMATCH, STATIC))
    severity = 0.0
    if fired:
        severity = _clip(th["strided_bw_weight"] * max(deficits, default=0.0) + th["strided_ldst_weight"] * ldst)
    return Finding(PatternKind.StridedErraticAccess, severity, fired, tuple(evidence))


def _log_severity(ratio: float, span: float) -> float:
    """0.315 at ratio 1 for span 8, 1 once ``ratio`` reaches ``span``."""
    return _clip(math.log1p(ratio) / math.log1p(span))


def detect_bad_instruction_mix(inp: DiagnosisInput, thresholds=None) -> Finding:
    th = resolve(thresholds)
    m = inp.metrics
    if not (inp.useful_work_fp or inp.data_parallel):
        return Finding(PatternKind.BadInstructionMix, caveats=(
            "instruction mix not judged: declare the useful work as FP or the loop as data-parallel",))
    evidence, parts = [], []
    fired = False
    span = th["mix_severity_span"]
    if inp.useful_work_fp:
        ipf = _need(m.instr_per_flop, "instructions per flop")
        hit = ipf >= th["mix_threshold"]
        fired |= hit
        evidence.append(Evidence("instructions retired per floating-point operation", "instr_per_flop",
                                 ipf, th["mix_threshold"], GE if hit else LE, HPM))
        if hit:
            parts.append(_log_severity(ipf / th["mix_threshold"] if th["mix_threshold"] > 0 else math.inf, span))
    if inp.data_parallel:
        simd = _need(m.simd_fraction, "packed share of FP instructions")
        hit = simd <= th["simd_threshold"]
        fired |= hit
        evidence.append(Evidence("packed (SIMD) share of FP instructions", "simd_fraction", simd,
                                 th["simd_threshold"], LE if hit else GE, HPM))
        if hit:
            parts.append(_log_severity(th["simd_threshold"] / simd if simd > 0 else math.inf, span))
    if is_number(m.cpi):
        evidence.append(Evidence("cycles per instruction", "cpi", m.cpi, None, APPROX, HPM))
    return Finding(PatternKind.BadInstructionMix, max(parts, default=0.0), fired, tuple(evidence))


def detect_limited_throughput(inp: DiagnosisInput, thresholds=None, bandwidth_findings=None) -> Finding:
    """``bandwidth_findings`` are the saturation findings to defer to; computed
    here when not given."""
    th = resolve(thresholds)
    cpi = _need(inp.metrics.cpi, "CPI")
    limit = 1.0 / inp.machine.baselines.issue_width
    cutoff = th["cpi_limit_factor"] * limit
    near = cpi <= cutoff
    evidence = [Evidence(f"CPI against the issue limit 1/{inp.machine.baselines.issue_width:g} = {limit:.3f}",
                         "cpi", cpi, cutoff, LE if near else GE, HPM)]
    caveats = []
    if bandwidth_findings is None:
        bandwidth_findings = []
        for level in ("memory", "olc"):
            try:
                bandwidth_findings.append(detect_bw_saturation(inp, level, thresholds))
            except NotComputable:
                pass
    saturated = [f for f in bandwidth_findings if f.fired]
    fired = near and not saturated
    if near and saturated:
        caveats.append("CPI is low but " + ", ".join(f.pattern.title.lower() for f in saturated)
                       + " already limits the code")
    if inp.static_cycles_per_iter is not None:
        if inp.iterations and inp.target_region.has_event(CYCLES):
            measured = inp.target_region.total(CYCLES) / inp.iterations
            gap = abs(measured - inp.static_cycles_per_iter) / inp.static_cycles_per_iter
            agree = gap <= th["static_agreement"]
            evidence.append(Evidence("measured cycles per iteration against static code analysis",
                                     "cycles_per_iter", measured, inp.static_cycles_per_iter,
                                     APPROX if agree else MISMATCH, STATIC))
        else:
            caveats.append("static prediction given without iteration count or cycle event; not compared")
    severity = _clip(limit / cpi) if fired else 0.0
    return Finding(PatternKind.LimitedInstructionThroughput, severity, fired, tuple(evidence), tuple(caveats))


def _session_instructions(session: MeasurementSession) -> int | None:
    total = 0
    for r in session.regions:
        if not r.has_event(INSTRUCTIONS):
            return None
        total += r.total(INSTRUCTIONS)
    return total


def detect_sync_overhead(inp: DiagnosisInput, thresholds=None) -> Finding:
    th = resolve(thresholds)
    m = inp.metrics
    nonfp = _need(m.nonfp_fraction, "non-FP instruction share")
    kind = PatternKind.SynchronizationOverhead
    if not inp.useful_work_fp:
        return Finding(kind, caveats=("non-FP share not judged: the useful work is not declared as FP",))
    high = nonfp >= th["nonfp_threshold"]
    evidence = [Evidence("non-FP share of instructions retired", "nonfp_fraction", nonfp,
                         th["nonfp_threshold"], GE if high else LE, HPM)]
    if is_number(m.cpi):
        evidence.append(Evidence("cycles per instruction", "cpi", m.cpi, None, APPROX, HPM))
    caveats = []
    shape = inp.scaling_shape(th)
    if shape is not None and shape.shape == "degrading":
        evidence.append(Evidence("speedup goes down as cores are added", "speedup", min(shape.speedups[1:]),
                                 shape.speedups[0], LE, SCALING))
    points = [p for p in (inp.scaling.points if inp.scaling else ()) if p.session is not None]
    totals = [(p.thread_count, _session_instructions(p.session)) for p in points]
    totals = [(n, t) for n, t in totals if t]
    share_term = _clip((nonfp - th["nonfp_threshold"]) / max(1e-12, 1.0 - th["nonfp_threshold"]))
    if len({n for n, _ in totals}) >= 2:
        exponent = growth_exponent([n for n, _ in totals], [t for _, t in totals])
        grows = exponent > th["growth_exponent"]
        evidence.append(Evidence(f"total instructions grow as threads^{exponent:.2f}", "instr_growth_exponent",
                                 exponent, th["growth_exponent"], GE if grows else LE, SCALING))
        fired = high and grows
        growth_term = _clip((exponent - 1.0) / 1.0)
        severity = _clip(0.4 + 0.3 * share_term + 0.3 * growth_term) if fired else 0.0
        return Finding(kind, severity, fired, tuple(evidence), tuple(caveats))
    caveats.append("scaling data absent")
    if inp.session.thread_count < 2:
        return Finding(kind, 0.0, False, tuple(evidence), tuple(caveats))
    severity = min(th["sync_weak_severity"], 0.1 + 0.2 * share_term) if high else 0.0
    return Finding(kind, severity, high, tuple(evidence), tuple(caveats))


def detect_false_sharing(inp: DiagnosisInput, thresholds=None) -> Finding:
    th = resolve(thresholds)
    shape = inp.scaling_shape(th)
    if shape is None:
        raise NotComputable("no scaling series")
    pts = list(zip(shape.thread_counts, shape.speedups))[1:]
    evidence = []
    at2 = [s for n, s in pts if n == 2]
    low2 = bool(at2) and at2[0] <= th["fs_speedup"]
    slow = [(n, s) for n, s in pts if n <= 4 and s < th["fs_slowdown"]]
    if at2:
        evidence.append(Evidence("speedup at 2 threads", "speedup_2", at2[0], th["fs_speedup"],
                                 LE if low2 else GE, SCALING))
    for n, s in slow:
        evidence.append(Evidence(f"slowdown at {n} threads", f"speedup_{n}", s, 1.0, LE, SCALING))
    behaves = low2 or bool(slow)
    caveats = []
    evict = inp.metrics.evict_rate
    small = [s for n, s in pts if n <= 4]
    s_min = min(small) if small else shape.speedups[-1]
    base = _clip(0.5 + 0.5 * (th["fs_speedup"] - s_min) / th["fs_speedup"]) if th["fs_speedup"] > 0 else 0.5
    if is_number(evict):
        frequent = evict >= th["evict_threshold"]
        evidence.append(Evidence("cache line evictions per instruction", "evict_rate", evict,
                                 th["evict_threshold"], GE if frequent else LE, HPM))
        fired = behaves and frequent
        if behaves and not frequent:
            caveats.append("speedup is poor but evictions are rare")
        severity = base if fired else 0.0
    else:
        fired = behaves
        if behaves:
            caveats.append("HPM evidence missing: no eviction counts")
        severity = 0.5 * base if fired else 0.0
    return Finding(PatternKind.FalseCachelineSharing, severity, fired, tuple(evidence), tuple(caveats))


def detect_numa_placement(inp: DiagnosisInput, thresholds=None) -> Finding:
    th = resolve(thresholds)
    domains = inp.machine.topology.numa_domains
    if len(domains) < 2:
        raise NotComputable("machine has a single NUMA domain; placement cannot be judged")
    region = inp.target_region
    used = [d for d in domains if set(d) & set(region.core_ids)]
    if len(used) < 2:
        raise NotComputable("run uses cores of a single NUMA domain; placement cannot be judged")
    evidence = []
    fired = False
    index = 0.0
    mem = inp.group_registry.get("MEM")
    bws = []
    if mem is not None:
        # per active core, so an uneven thread count per domain is not mistaken for bad placement
        for d in used:
            sub = subregion(region, d)
            res = {r.metric_name: r for r in evaluate_group(mem, sub)}
            bw = res.get("MEM_BW")
            bws.append(bw.aggregate / len(sub.cores) if bw is not None and is_number(bw.aggregate) else None)
    if bws and all(is_number(b) for b in bws):
        rep = imbalance_of(bws, "MEM_BW")
        index = rep.index
        hit = index >= th["numa_imb_threshold"]
        fired |= hit
        evidence.append(Evidence("imbalance of memory bandwidth per active core across locality domains ("
                                 + ", ".join(f"{b:.0f}" for b in bws) + " MB/s)",
                                 "domain_bw_imbalance", index, th["numa_imb_threshold"], GE if hit else LE, HPM))
    remote = inp.metrics.remote_fraction
    if is_number(remote):
        hit = remote >= th["remote_threshold"]
        fired |= hit
        evidence.append(Evidence("remote share of memory traffic", "remote_fraction", remote,
                                 th["remote_threshold"], GE if hit else LE, HPM))
    else:
        remote = 0.0
    if not evidence:
        raise NotComputable("no per-domain memory bandwidth or remote traffic events")
    shape = inp.scaling_shape(th)
    if shape is not None and shape.shape in ("saturating", "degrading"):
        evidence.append(Evidence(f"speedup is {shape.shape}", "speedup", shape.speedups[-1], None,
                                 MISMATCH, SCALING))
    severity = _clip(max(index, remote)) if fired else 0.0
    return Finding(PatternKind.BadNumaPlacement, severity, fired, tuple(evidence))


def detect_microarch_anomaly(inp: DiagnosisInput, thresholds=None, others=None) -> Finding:
    """Residual pattern: large gap to the performance model that no other
    pattern explains. ``others`` are the remaining findings; computed here
    when not given."""
    th = resolve(thresholds)
    if inp.model_mflops is None:
        raise NotComputable("no performance model prediction supplied")
    measured = _need(inp.metrics.mflops, "MFlop/s")
    ratio = measured / inp.model_mflops
    low = ratio <= th["anomaly_fraction"]
    evidence = [Evidence(f"measured {measured:.1f} MFlop/s against model {inp.model_mflops:.1f} MFlop/s",
                         "mflops", measured, inp.model_mflops, MISMATCH if low else APPROX, HPM),
                Evidence("residual share of the model not reached", "model_residual", 1.0 - ratio,
                         1.0 - th["anomaly_fraction"], GE if low else LE, HPM)]
    caveats = [CODE_REVIEW]
    if inp.session.notes.strip():
        caveats.append("session notes: " + inp.session.notes.strip())
    if others is None:
        others = _run_others(inp, thresholds)
    explained = [f for f in others if f.fired and f.pattern is not PatternKind.MicroarchAnomaly]
    fired = low and not explained
    if low and explained:
        caveats.append("gap to the model is explained by " + ", ".join(f.pattern.title.lower() for f in explained))
    return Finding(PatternKind.MicroarchAnomaly, _clip(1.0 - ratio) if fired else 0.0, fired,
                   tuple(evidence), tuple(caveats))


# ---------------------------------------------------------------------------


def _unfired(kind: PatternKind, reason: str) -> Finding:
    return Finding(kind, caveats=(f"not computable: {reason}",))


def _guard(kind, fn, *args, **kwargs) -> Finding:
    try:
        return fn(*args, **kwargs)
    except NotComputable as exc:
        return _unfired(kind, str(exc))


def _run_others(inp: DiagnosisInput, thresholds=None) -> list[Finding]:
    mem = _guard(PatternKind.MemoryBandwidthSaturation, detect_bw_saturation, inp, "memory", thresholds)
    olc = _guard(PatternKind.OlcBandwidthSaturation, detect_bw_saturation, inp, "olc", thresholds)
    return [
        _guard(PatternKind.LoadImbalance, detect_load_imbalance, inp, thresholds),
        olc,
        mem,
        _guard(PatternKind.StridedErraticAccess, detect_strided_access, inp, thresholds),
        _guard(PatternKind.BadInstructionMix, detect_bad_instruction_mix, inp, thresholds),
        _guard(PatternKind.LimitedInstructionThroughput, detect_limited_throughput, inp, thresholds,
               [f for f in (mem, olc) if f.fired]),
        _guard(PatternKind.SynchronizationOverhead, detect_sync_overhead, inp, thresholds),
        _guard(PatternKind.FalseCachelineSharing, detect_false_sharing, inp, thresholds),
        _guard(PatternKind.BadNumaPlacement, detect_numa_placement, inp, thresholds),
    ]


def _rank_key(f: Finding):
    return (not f.fired, -f.severity, f.pattern.order)


def diagnose(inp: DiagnosisInput, thresholds: Mapping[str, float] | None = None) -> list[Finding]:
    """Run all ten detectors and rank the findings: fired first, then by
    severity, then in PatternKind order."""
    others = _run_others(inp, thresholds)
    micro = _guard(PatternKind.MicroarchAnomaly, detect_microarch_anomaly, inp, thresholds, others)
    findings = others + [micro]
    by_kind = {f.pattern: f for f in findings}
    li, so = by_kind[PatternKind.LoadImbalance], by_kind[PatternKind.SynchronizationOverhead]
    if li.fired and so.fired:
        note = "load imbalance and frequent synchronization often go together (spin-waiting loops)"
        by_kind[PatternKind.LoadImbalance] = replace(li, caveats=li.caveats + (note + "; see synchronization overhead",))
        by_kind[PatternKind.SynchronizationOverhead] = replace(so, caveats=so.caveats + (note + "; see load imbalance",))
    return sorted(by_kind.values(), key=_rank_key)


def fired_patterns(findings) -> list[PatternKind]:
    return [f.pattern for f in findings if f.fired]
