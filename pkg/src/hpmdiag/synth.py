"""Synthetic sessions with one injected, labeled pattern.

Used as ground truth for detector calibration. Every case starts from the
same clean workload; a pattern changes a few workload parameters by an
amount that grows with the intensity, and intensity 0 leaves them untouched,
so the session is byte-identical to the clean one for the same seed.
Construction rules per pattern are listed in docs/synthetic.md.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import UnsupportedPattern, ValidationError
from .machine import MachineModel, machine_to_dict, memory_baseline, olc_baseline, simple_machine
from .patterns import DiagnosisInput, Finding, PatternKind, diagnose
from .session import (
    MeasurementSession,
    ScalingPoint,
    ScalingSeries,
    dumps_session,
    loads_session,
    session_to_dict,
)

CLOCK_HZ = 2.5e9
BASE_TIME_S = 2.0
SAMPLE_S = 0.1
JITTER = 0.02
RUNTIME_JITTER = 0.005
LINE = 64


def default_machine() -> MachineModel:
    return simple_machine(
        "synthetic-2x6", 2, 6,
        stream_bw_core_MBs=11814.0, update_bw_socket_MBs=20300.0, olc_bw_MBs=60000.0,
        peak_mflops_core=11720.0, issue_width=4, cacheline_bytes=64,
    )


@dataclass(frozen=True)
class SyntheticSpec:
    pattern: PatternKind | None = None
    cores: int = 6
    intensity: float = 0.0
    seed: int = 0
    machine: MachineModel = field(default_factory=default_machine)

    def __post_init__(self):
        if not 0.0 <= self.intensity <= 1.0:
            raise ValidationError(f"SyntheticSpec.intensity: must be in [0, 1], got {self.intensity}")
        if not 1 <= self.cores <= len(self.machine.topology.core_ids):
            raise ValidationError(f"SyntheticSpec.cores: machine {self.machine.name} has "
                                  f"{len(self.machine.topology.core_ids)} cores, asked for {self.cores}")


@dataclass(frozen=True)
class SyntheticCase:
    session: MeasurementSession
    label: dict
    scaling: ScalingSeries | None
    model_mflops: float

    def diagnosis_input(self, machine: MachineModel | None = None) -> DiagnosisInput:
        return DiagnosisInput(
            session=self.session,
            machine=machine or self.label_machine,
            scaling=self.scaling,
            model_mflops=self.model_mflops,
            useful_work_fp=True,
            data_parallel=True,
        )

    @property
    def label_machine(self) -> MachineModel:
        from .machine import machine_from_dict
        return machine_from_dict(self.label["machine"])

    @property
    def pattern(self) -> PatternKind | None:
        p = self.label["pattern"]
        return None if p is None else PatternKind(p)


def placement(machine: MachineModel, cores: int) -> list[int]:
    """Scatter ``cores`` threads round-robin over the sockets."""
    groups = machine.topology.socket_groups
    order = [g[i] for i in range(max(len(g) for g in groups)) for g in groups if i < len(g)]
    return sorted(order[:cores])


def _lin(n: int) -> float:
    return n * 0.95 ** math.log2(n)


def _thread_counts(cores: int) -> list[int]:
    counts = {cores}
    n = 1
    while n < cores:
        counts.add(n)
        n *= 2
    return sorted(counts)


def _params(spec: SyntheticSpec, core_set: list[int]) -> dict:
    """Workload parameters: clean defaults, then the pattern's changes."""
    p = {
        "cpi": 0.7, "fp_share": 0.4, "packed_share": 0.8, "ldst": 0.3, "miss_ratio": 0.03,
        "evict_rate": 0.002, "u_mem": 0.35, "u_olc": 0.3, "remote": 0.05,
        "instr_mult": 1.0, "vol_factor": 1.0, "numa_skew": 0.0, "model_factor": 1.0,
        "work": {c: 1.0 for c in core_set},
        "speedup": _lin, "growth": 0.0,
    }
    i = spec.intensity
    r = min(1.0, 2.0 * i)
    n = len(core_set)
    pat = spec.pattern
    if pat is None:
        return p
    if pat is PatternKind.LoadImbalance:
        if n < 2:
            raise UnsupportedPattern("load imbalance needs at least 2 cores")
        outer = {core_set[0], core_set[-1]} if n >= 3 else {core_set[0]}
        p["work"] = {c: (1.0 - i if c in outer else 1.0) for c in core_set}
    elif pat in (PatternKind.MemoryBandwidthSaturation, PatternKind.OlcBandwidthSaturation):
        key = "u_mem" if pat is PatternKind.MemoryBandwidthSaturation else "u_olc"
        p[key] = p[key] + (0.98 - p[key]) * r
        # speedup stops growing once half the cores are busy
        cap = _lin(n) * (1.0 - r) + _lin(max(1, n // 2)) * r
        p["speedup"] = lambda k, cap=cap: min(_lin(k), cap)
    elif pat is PatternKind.StridedErraticAccess:
        p["ldst"] = 0.3 + 0.4 * r
        p["miss_ratio"] = 0.03 + 0.4 * r
        p["evict_rate"] = 0.002 + 0.02 * r
        p["u_mem"] = 0.35 * (1.0 - 0.9 * r)
    elif pat is PatternKind.BadInstructionMix:
        p["instr_mult"] = 1.0 + 2.5 * r
        p["packed_share"] = 0.8 - 0.7 * r
    elif pat is PatternKind.LimitedInstructionThroughput:
        p["cpi"] = 0.7 - 0.44 * r
        p["vol_factor"] = p["cpi"] / 0.7
    elif pat is PatternKind.MicroarchAnomaly:
        p["model_factor"] = 1.0 + 3.0 * r
    elif pat is PatternKind.SynchronizationOverhead:
        if n < 2:
            raise UnsupportedPattern("synchronization overhead needs at least 2 cores")
        p["growth"] = 1.6 * r
        p["instr_mult"] = n ** p["growth"]
        p["cpi"] = 0.7 - 0.3 * r
        p["speedup"] = lambda k, r=r: _lin(k) / (1.0 + 0.25 * r * (k - 1) ** 2)
    elif pat is PatternKind.FalseCachelineSharing:
        if n < 2:
            raise UnsupportedPattern("false sharing needs at least 2 cores")
        p["evict_rate"] = 0.002 + 0.05 * r
        p["speedup"] = lambda k, r=r: 1.0 if k == 1 else _lin(k) * (1.0 - r) + 0.8 * r
    elif pat is PatternKind.BadNumaPlacement:
        domains = [d for d in spec.machine.topology.numa_domains if set(d) & set(core_set)]
        if len(domains) < 2:
            raise UnsupportedPattern("ccNUMA placement needs cores in at least 2 locality domains")
        p["numa_skew"] = 0.95 * r
        p["remote"] = 0.05 + 0.45 * r
    else:
        raise UnsupportedPattern(str(pat))
    return p


def _jitter(rng: random.Random, value: float, width: float = JITTER) -> int:
    return int(round(value * (1.0 + rng.uniform(-width, width))))


def _timeline(cores: list[dict], core_set: list[int], wall: float) -> list[dict]:
    n = max(1, int(round(wall / SAMPLE_S)))
    dt = wall / n
    samples = []
    for k in range(n):
        per_core = []
        for cid, counts in zip(core_set, cores):
            per_core.append({"core_id": cid, "counts": {
                ev: v // n + (1 if k < v % n else 0) for ev, v in counts.items()}})
        samples.append({"t_s": dt * (k + 1), "dt_s": dt, "per_core_counts": per_core})
    return samples


def generate_session(spec: SyntheticSpec) -> SyntheticCase:
    """Deterministic synthetic case for ``spec`` (session, label, scaling runs)."""
    machine = spec.machine
    core_set = placement(machine, spec.cores)
    n = len(core_set)
    p = _params(spec, core_set)
    rng = random.Random(spec.seed)

    work_instr = CLOCK_HZ * BASE_TIME_S / 0.7
    instr = work_instr * p["instr_mult"]
    wall = instr * p["cpi"] / CLOCK_HZ
    mem_ref, _ = memory_baseline(machine, core_set)
    olc_ref, _ = olc_baseline(machine, core_set)
    mem_lines = p["u_mem"] * mem_ref * 1e6 * BASE_TIME_S * p["vol_factor"] / LINE / n
    olc_lines = p["u_olc"] * olc_ref * 1e6 * BASE_TIME_S * p["vol_factor"] / LINE / n
    first_domain = set(next(d for d in machine.topology.numa_domains if set(d) & set(core_set)))

    ideal = []
    for cid in core_set:
        w = p["work"][cid]
        fp = p["fp_share"] * work_instr * w
        ldst = p["ldst"] * work_instr * w
        skew = 1.0 + p["numa_skew"] if cid in first_domain else 1.0 - p["numa_skew"]
        lines = mem_lines * w * skew
        ideal.append({
            "CPU_CLK_UNHALTED": CLOCK_HZ * wall,
            "INSTR_RETIRED": instr - (1.0 - w) * work_instr,
            "FP_PACKED_DP": p["packed_share"] * fp,
            "FP_SCALAR_DP": (1.0 - p["packed_share"]) * fp,
            "LOADS_RETIRED": ldst * 2.0 / 3.0,
            "STORES_RETIRED": ldst / 3.0,
            "CACHE_REFERENCES": ldst,
            "CACHE_MISSES": p["miss_ratio"] * ldst,
            "CACHE_EVICTS": p["evict_rate"] * work_instr * w,
            "MEM_READ_LINES": lines * 2.0 / 3.0,
            "MEM_WRITE_LINES": lines / 3.0,
            "MEM_REMOTE_LINES": p["remote"] * lines,
            "L2_LINES_IN": olc_lines * w * 2.0 / 3.0,
            "L2_LINES_OUT": olc_lines * w / 3.0,
        })
    counts = [{ev: _jitter(rng, v) for ev, v in sorted(core.items())} for core in ideal]

    session_id = f"synth-{spec.seed}"
    doc = {
        "session_id": session_id,
        "machine_ref": machine.name,
        "thread_count": n,
        "core_set": core_set,
        "aliases": {},
        "notes": "synthetic",
        "regions": [{
            "region_name": "main",
            "wall_time_s": wall,
            "cores": [{"core_id": c, "counts": k} for c, k in zip(core_set, counts)],
            "timeline": _timeline(counts, core_set, wall),
        }],
    }
    session = loads_session(json.dumps(doc), source=session_id)

    # scaling runs at 1, 2, 4, ... threads; the last one matches the main run
    threads = _thread_counts(n)
    speedup = p["speedup"]
    serial = wall * speedup(n)
    points = []
    total_work = work_instr * n
    fp_total = p["fp_share"] * work_instr * n
    for k in threads:
        runtime = serial / speedup(k)
        cores_k = placement(machine, k)
        per_core_instr = total_work * k ** p["growth"] / k
        run_cores = []
        for c in cores_k:
            run_cores.append({"core_id": c, "counts": {
                "CPU_CLK_UNHALTED": _jitter(rng, CLOCK_HZ * runtime),
                "FP_PACKED_DP": _jitter(rng, p["packed_share"] * fp_total / k),
                "FP_SCALAR_DP": _jitter(rng, (1.0 - p["packed_share"]) * fp_total / k),
                "INSTR_RETIRED": _jitter(rng, per_core_instr),
            }})
        run_doc = {
            "session_id": f"{session_id}-t{k}", "machine_ref": machine.name, "thread_count": k,
            "core_set": cores_k, "regions": [{"region_name": "main", "wall_time_s": runtime, "cores": run_cores}],
        }
        run = loads_session(json.dumps(run_doc), source=run_doc["session_id"])
        runtime_obs = runtime * (1.0 + rng.uniform(-RUNTIME_JITTER, RUNTIME_JITTER))
        points.append(ScalingPoint(k, runtime_s=runtime_obs, session=run))
    scaling = ScalingSeries(f"{session_id}-scaling", tuple(points)) if len(points) >= 2 else None

    clean_mflops = n * p["fp_share"] * work_instr * (2.0 * 0.8 + 0.2) / BASE_TIME_S / 1e6
    model = clean_mflops * p["model_factor"]
    label = {
        "pattern": spec.pattern.value if spec.pattern else None,
        "intensity": spec.intensity,
        "seed": spec.seed,
        "cores": n,
        "model_mflops": model,
        "machine": machine_to_dict(machine),
    }
    return SyntheticCase(session, label, scaling, model)


def write_case(case: SyntheticCase, directory, name: str) -> dict[str, Path]:
    """Write ``<name>.json``, ``<name>.label.json`` and, when present,
    ``<name>.scaling.json`` plus one session file per scaling run."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {"session": directory / f"{name}.json", "label": directory / f"{name}.label.json"}
    paths["session"].write_text(dumps_session(case.session), encoding="utf-8")
    label = dict(case.label)
    if case.scaling is not None:
        pts = []
        for pt in case.scaling.points:
            run_name = f"{name}.t{pt.thread_count}.json"
            (directory / run_name).write_text(dumps_session(pt.session), encoding="utf-8")
            pts.append({"thread_count": pt.thread_count, "runtime_s": pt.runtime_s, "session": run_name})
        paths["scaling"] = directory / f"{name}.scaling.json"
        paths["scaling"].write_text(json.dumps({"label": case.scaling.label, "points": pts}, indent=1) + "\n",
                                    encoding="utf-8")
        label["scaling"] = paths["scaling"].name
    paths["label"].write_text(json.dumps(label, indent=1) + "\n", encoding="utf-8")
    machine_path = directory / f"{name}.machine.json"
    machine_path.write_text(json.dumps(case.label["machine"], indent=1) + "\n", encoding="utf-8")
    paths["machine"] = machine_path
    return paths


@dataclass
class PatternStats:
    cases: int = 0
    hits: int = 0
    top2_hits: int = 0
    false_positives: int = 0
    negatives: int = 0

    @property
    def hit_rate(self) -> float:
        return self.hits / self.cases if self.cases else 0.0

    @property
    def top2_rate(self) -> float:
        return self.top2_hits / self.cases if self.cases else 0.0

    @property
    def false_positive_rate(self) -> float:
        return self.false_positives / self.negatives if self.negatives else 0.0


@dataclass
class SweepSummary:
    per_pattern: dict[PatternKind, PatternStats]
    clean_cases: int = 0
    clean_with_findings: int = 0
    findings: list[list[Finding]] = field(default_factory=list, repr=False)

    @property
    def clean_false_positive_rate(self) -> float:
        return self.clean_with_findings / self.clean_cases if self.clean_cases else 0.0


def sweep(specs: Sequence[SyntheticSpec], thresholds=None) -> SweepSummary:
    """Diagnose every generated case and tally hits and false positives.

    A hit means the injected pattern fired; a false positive for pattern P is
    a case not injected with P where P fired.
    """
    if not specs:
        raise ValueError("sweep needs at least one spec")
    stats = {k: PatternStats() for k in PatternKind}
    summary = SweepSummary(stats)
    for spec in specs:
        case = generate_session(spec)
        findings = diagnose(case.diagnosis_input(spec.machine), thresholds)
        summary.findings.append(findings)
        fired = [f.pattern for f in findings if f.fired]
        if spec.pattern is None:
            summary.clean_cases += 1
            summary.clean_with_findings += bool(fired)
        else:
            st = stats[spec.pattern]
            st.cases += 1
            st.hits += spec.pattern in fired
            st.top2_hits += spec.pattern in fired[:2]
        for kind in PatternKind:
            if kind is not spec.pattern:
                stats[kind].negatives += 1
                stats[kind].false_positives += kind in fired
    return summary


__all__ = [
    "PatternStats", "SweepSummary", "SyntheticCase", "SyntheticSpec", "default_machine",
    "generate_session", "placement", "session_to_dict", "sweep", "write_case",
]
