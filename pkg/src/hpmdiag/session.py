"""Measurement sessions: per-core event counts per code region.

Sessions are immutable once loaded. See docs/formats.md for the JSON layout.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

from .errors import EmptySlice, NoTimeline, ParseError, UnknownEvent, ValidationError

EVENT_NAME = re.compile(r"[A-Z][A-Z0-9_]*\Z")


@dataclass(frozen=True)
class CoreMeasurement:
    core_id: int
    counts: Mapping[str, int]


@dataclass(frozen=True)
class TimelineSample:
    t_s: float
    dt_s: float
    per_core_counts: tuple[CoreMeasurement, ...]


@dataclass(frozen=True)
class RegionMeasurement:
    region_name: str
    wall_time_s: float
    cores: tuple[CoreMeasurement, ...]
    timeline: tuple[TimelineSample, ...] | None = None
    # relative tolerance between summed timeline deltas and region totals
    timeline_tolerance: float = 0.0

    @property
    def core_ids(self) -> list[int]:
        return [c.core_id for c in self.cores]

    @property
    def event_names(self) -> set[str]:
        if not self.cores:
            return set()
        names = set(self.cores[0].counts)
        for c in self.cores[1:]:
            names &= set(c.counts)
        return names

    def has_event(self, event: str) -> bool:
        return bool(self.cores) and all(event in c.counts for c in self.cores)

    def per_core(self, event: str) -> list[int]:
        if not self.has_event(event):
            raise UnknownEvent(f"event {event} not present on all cores of region {self.region_name}")
        return [c.counts[event] for c in self.cores]

    def total(self, event: str) -> int:
        return sum(self.per_core(event))


@dataclass(frozen=True)
class MeasurementSession:
    session_id: str
    machine_ref: str
    thread_count: int
    core_set: tuple[int, ...]
    regions: tuple[RegionMeasurement, ...]
    notes: str = ""
    aliases: Mapping[str, str] = field(default_factory=dict)

    def region(self, name: str) -> RegionMeasurement:
        for r in self.regions:
            if r.region_name == name:
                return r
        raise KeyError(f"no region named {name!r} in session {self.session_id}")


@dataclass(frozen=True)
class ScalingPoint:
    thread_count: int
    runtime_s: float | None = None
    performance: float | None = None
    unit: str = ""
    session: MeasurementSession | None = None
    label: str = ""


@dataclass(frozen=True)
class ScalingSeries:
    label: str
    points: tuple[ScalingPoint, ...]

    @property
    def thread_counts(self) -> list[int]:
        return [p.thread_count for p in self.points]

    @property
    def sessions(self) -> list[MeasurementSession]:
        return [p.session for p in self.points if p.session is not None]


class CountSummary(NamedTuple):
    sum: int
    min: int
    max: int
    mean: float
    per_core: list[int]


# ---------------------------------------------------------------------------
# validation


def _validate_counts(where: str, counts: Mapping[str, int], out: list[str]) -> None:
    for name, value in counts.items():
        if not name or not EVENT_NAME.match(name):
            out.append(f"EventCount.event_name at {where}: {name!r} does not match [A-Z][A-Z0-9_]*")
        if value < 0:
            out.append(f"EventCount.value at {where}.{name}: must be >= 0, got {value}")


def _validate_region(ri: int, region: RegionMeasurement, core_set, out: list[str]) -> None:
    where = f"regions[{ri}] ({region.region_name})"
    if not (region.wall_time_s > 0) or not math.isfinite(region.wall_time_s):
        out.append(f"RegionMeasurement.wall_time_s at {where}: must be > 0, got {region.wall_time_s}")
    if not region.cores:
        out.append(f"RegionMeasurement.cores at {where}: region has no cores")
        return
    seen = set()
    for c in region.cores:
        if c.core_id < 0:
            out.append(f"CoreMeasurement.core_id at {where}: must be >= 0, got {c.core_id}")
        if c.core_id in seen:
            out.append(f"CoreMeasurement.core_id at {where}: duplicate core {c.core_id}")
        seen.add(c.core_id)
        if core_set is not None and c.core_id not in core_set:
            out.append(f"MeasurementSession.core_set at {where}: core {c.core_id} not in core_set")
        _validate_counts(f"{where}.core{c.core_id}", c.counts, out)
    ref = set(region.cores[0].counts)
    if any(set(c.counts) != ref for c in region.cores[1:]):
        out.append(f"RegionMeasurement.cores at {where}: ragged event set across cores")
    if region.timeline is None:
        return
    if not region.timeline:
        out.append(f"RegionMeasurement.timeline at {where}: timeline is empty")
        return
    prev = None
    ids = region.core_ids
    for si, s in enumerate(region.timeline):
        if not (s.dt_s > 0):
            out.append(f"TimelineSample.dt_s at {where}.timeline[{si}]: must be > 0, got {s.dt_s}")
        if not (s.t_s >= 0):
            out.append(f"TimelineSample.t_s at {where}.timeline[{si}]: must be >= 0, got {s.t_s}")
        if prev is not None and not (s.t_s > prev):
            out.append(f"TimelineSample ordering at {where}.timeline[{si}]: t_s must be strictly increasing")
        prev = s.t_s
        if [c.core_id for c in s.per_core_counts] != ids:
            out.append(f"TimelineSample.per_core_counts at {where}.timeline[{si}]: core list differs from region")
            return
        for c in s.per_core_counts:
            if set(c.counts) != ref:
                out.append(f"TimelineSample.per_core_counts at {where}.timeline[{si}]: event set differs from region")
                return
            _validate_counts(f"{where}.timeline[{si}].core{c.core_id}", c.counts, out)
    tol = region.timeline_tolerance
    for ci, core in enumerate(region.cores):
        for ev, total in core.counts.items():
            summed = sum(s.per_core_counts[ci].counts[ev] for s in region.timeline)
            if abs(summed - total) > tol * abs(total):
                out.append(
                    f"TimelineSample totals at {where}.core{core.core_id}.{ev}: "
                    f"timeline sums to {summed}, region reports {total}"
                )


def validate_session(session: MeasurementSession) -> list[str]:
    """List every invariant violation; empty when the session is valid."""
    out: list[str] = []
    if session.thread_count < 1:
        out.append(f"MeasurementSession.thread_count: must be >= 1, got {session.thread_count}")
    if session.thread_count != len(session.core_set):
        out.append(
            f"MeasurementSession.thread_count: {session.thread_count} != len(core_set) {len(session.core_set)}"
        )
    if len(set(session.core_set)) != len(session.core_set):
        out.append("MeasurementSession.core_set: duplicate core ids")
    core_set = set(session.core_set)
    names = [r.region_name for r in session.regions]
    if len(set(names)) != len(names):
        out.append("MeasurementSession.regions: duplicate region names")
    for ri, region in enumerate(session.regions):
        _validate_region(ri, region, core_set, out)
    return out


# ---------------------------------------------------------------------------
# JSON I/O

_TOP_KEYS = {"session_id", "machine_ref", "thread_count", "core_set", "aliases", "regions", "notes"}
_TOP_REQUIRED = {"session_id", "machine_ref", "thread_count", "core_set", "regions"}
_REGION_KEYS = {"region_name", "wall_time_s", "cores", "timeline", "timeline_tolerance"}
_REGION_REQUIRED = {"region_name", "wall_time_s", "cores"}
_CORE_KEYS = {"core_id", "counts"}
_SAMPLE_KEYS = {"t_s", "dt_s", "per_core_counts"}


def _check_keys(obj, allowed, required, where, lenient):
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object, got {type(obj).__name__}")
    missing = sorted(required - obj.keys())
    if missing:
        raise ParseError(f"{where}: missing key(s) {', '.join(missing)}")
    unknown = sorted(obj.keys() - allowed)
    if unknown and not lenient:
        raise ParseError(f"{where}: unknown key(s) {', '.join(unknown)}")


def _num(value, where) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _int(value, where) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"{where}: expected an integer, got {value!r}")
    return value


def _counts(obj, aliases, where) -> dict[str, int]:
    if not isinstance(obj, dict):
        raise ParseError(f"{where}.counts: expected an object")
    out: dict[str, int] = {}
    for name, value in obj.items():
        canonical = aliases.get(name, name)
        if canonical in out:
            raise ValidationError(
                f"EventCount.event_name at {where}: {canonical} reported twice after aliasing"
            )
        out[canonical] = _int(value, f"{where}.counts.{name}")
    return out


def _core(obj, aliases, where, lenient) -> CoreMeasurement:
    _check_keys(obj, _CORE_KEYS, _CORE_KEYS, where, lenient)
    return CoreMeasurement(_int(obj["core_id"], f"{where}.core_id"), _counts(obj["counts"], aliases, where))


def _cores(seq, aliases, where, lenient) -> tuple[CoreMeasurement, ...]:
    if not isinstance(seq, list):
        raise ParseError(f"{where}: expected a list")
    return tuple(_core(c, aliases, f"{where}[{i}]", lenient) for i, c in enumerate(seq))


def session_from_dict(doc, lenient: bool = False) -> MeasurementSession:
    """Build and validate a session from decoded JSON."""
    _check_keys(doc, _TOP_KEYS, _TOP_REQUIRED, "session", lenient)
    aliases = doc.get("aliases", {}) or {}
    if not isinstance(aliases, dict) or not all(isinstance(v, str) for v in aliases.values()):
        raise ParseError("session.aliases: expected an object of strings")
    if not isinstance(doc["core_set"], list):
        raise ParseError("session.core_set: expected a list")
    if not isinstance(doc["regions"], list):
        raise ParseError("session.regions: expected a list")
    regions = []
    for ri, r in enumerate(doc["regions"]):
        where = f"regions[{ri}]"
        _check_keys(r, _REGION_KEYS, _REGION_REQUIRED, where, lenient)
        timeline = None
        if r.get("timeline") is not None:
            if not isinstance(r["timeline"], list):
                raise ParseError(f"{where}.timeline: expected a list")
            samples = []
            for si, s in enumerate(r["timeline"]):
                sw = f"{where}.timeline[{si}]"
                _check_keys(s, _SAMPLE_KEYS, _SAMPLE_KEYS, sw, lenient)
                samples.append(TimelineSample(
                    _num(s["t_s"], f"{sw}.t_s"),
                    _num(s["dt_s"], f"{sw}.dt_s"),
                    _cores(s["per_core_counts"], aliases, f"{sw}.per_core_counts", lenient),
                ))
            timeline = tuple(samples)
        if not isinstance(r["region_name"], str):
            raise ParseError(f"{where}.region_name: expected a string")
        regions.append(RegionMeasurement(
            r["region_name"],
            _num(r["wall_time_s"], f"{where}.wall_time_s"),
            _cores(r["cores"], aliases, f"{where}.cores", lenient),
            timeline,
            _num(r.get("timeline_tolerance", 0.0), f"{where}.timeline_tolerance"),
        ))
    session = MeasurementSession(
        session_id=str(doc["session_id"]),
        machine_ref=str(doc["machine_ref"]),
        thread_count=_int(doc["thread_count"], "session.thread_count"),
        core_set=tuple(_int(c, "session.core_set[]") for c in doc["core_set"]),
        regions=tuple(regions),
        notes=str(doc.get("notes", "")),
        aliases=dict(aliases),
    )
    violations = validate_session(session)
    if violations:
        raise ValidationError(violations)
    return session


def loads_session(text: str, lenient: bool = False, source: str = "<string>") -> MeasurementSession:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        return session_from_dict(doc, lenient)
    except ParseError as exc:
        raise ParseError(f"{source}: {exc}") from None


def load_session(path, lenient: bool = False) -> MeasurementSession:
    """Read and validate a session file.

    Raises ParseError for malformed JSON or schema mismatches and
    ValidationError when an invariant does not hold.
    """
    path = Path(path)
    return loads_session(path.read_text(encoding="utf-8"), lenient, str(path))


def _cores_to_list(cores):
    return [{"core_id": c.core_id, "counts": dict(c.counts)} for c in cores]


def session_to_dict(session: MeasurementSession) -> dict:
    regions = []
    for r in session.regions:
        d = {"region_name": r.region_name, "wall_time_s": r.wall_time_s, "cores": _cores_to_list(r.cores)}
        if r.timeline is not None:
            d["timeline"] = [
                {"t_s": s.t_s, "dt_s": s.dt_s, "per_core_counts": _cores_to_list(s.per_core_counts)}
                for s in r.timeline
            ]
        if r.timeline_tolerance:
            d["timeline_tolerance"] = r.timeline_tolerance
        regions.append(d)
    return {
        "session_id": session.session_id,
        "machine_ref": session.machine_ref,
        "thread_count": session.thread_count,
        "core_set": list(session.core_set),
        "aliases": dict(session.aliases),
        "notes": session.notes,
        "regions": regions,
    }


def dumps_session(session: MeasurementSession) -> str:
    return json.dumps(session_to_dict(session), indent=1) + "\n"


def write_session(session: MeasurementSession, path) -> None:
    Path(path).write_text(dumps_session(session), encoding="utf-8")


def import_csv(path, session_id: str | None = None, machine_ref: str = "",
               aliases: Mapping[str, str] | None = None) -> MeasurementSession:
    """Read the simplified ``region,core_id,event,value`` layout.

    A comment line ``#wall_time_s=<float>`` sets the wall time of every region.
    A header row naming the columns is optional.
    """
    path = Path(path)
    aliases = dict(aliases or {})
    wall = None
    data: dict[str, dict[int, dict[str, int]]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            first = row[0].strip()
            if first.startswith("#"):
                key, _, value = ",".join(row).lstrip("#").partition("=")
                if key.strip() == "wall_time_s":
                    try:
                        wall = float(value)
                    except ValueError:
                        raise ParseError(f"{path}:{lineno}: bad wall_time_s value {value!r}") from None
                continue
            if [x.strip() for x in row] == ["region", "core_id", "event", "value"]:
                continue
            if len(row) != 4:
                raise ParseError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            region, core, event, value = (x.strip() for x in row)
            try:
                core_id, count = int(core), int(value)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: core_id and value must be integers") from None
            event = aliases.get(event, event)
            counts = data.setdefault(region, {}).setdefault(core_id, {})
            if event in counts:
                raise ValidationError(f"EventCount.event_name at {path}:{lineno}: {event} repeated for core {core_id}")
            counts[event] = count
    if wall is None:
        raise ParseError(f"{path}: missing '#wall_time_s=<float>' line")
    core_set = sorted({c for cores in data.values() for c in cores})
    doc = {
        "session_id": session_id or path.stem,
        "machine_ref": machine_ref,
        "thread_count": len(core_set),
        "core_set": core_set,
        "regions": [
            {"region_name": name, "wall_time_s": wall,
             "cores": [{"core_id": c, "counts": cores[c]} for c in sorted(cores)]}
            for name, cores in data.items()
        ],
    }
    return session_from_dict(doc)


def load_series(path, lenient: bool = False) -> ScalingSeries:
    """Read a scaling series file.

    ``{"label": str, "points": [{"thread_count", "runtime_s" | "performance",
    "unit", "label", "session"}]}``; ``session`` is a path relative to the
    series file.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("points"), list):
        raise ParseError(f"{path}: expected an object with a 'points' list")
    points = []
    for i, pt in enumerate(doc["points"]):
        where = f"{path}: points[{i}]"
        if not isinstance(pt, dict):
            raise ParseError(f"{where}: expected an object")
        _check_keys(pt, {"thread_count", "runtime_s", "performance", "unit", "label", "session"},
                    {"thread_count"}, where, lenient)
        session = None
        if pt.get("session") is not None:
            session = load_session(path.parent / str(pt["session"]), lenient)
        points.append(ScalingPoint(
            thread_count=_int(pt["thread_count"], f"{where}.thread_count"),
            runtime_s=None if pt.get("runtime_s") is None else _num(pt["runtime_s"], f"{where}.runtime_s"),
            performance=None if pt.get("performance") is None else _num(pt["performance"], f"{where}.performance"),
            unit=str(pt.get("unit", "")),
            session=session,
            label=str(pt.get("label", "")),
        ))
    return ScalingSeries(str(doc.get("label", path.stem)), tuple(points))


def series_from_sessions(sessions: Sequence[MeasurementSession], label: str = "runs") -> ScalingSeries:
    """One point per session: its thread count and summed region wall time."""
    points = [ScalingPoint(s.thread_count, runtime_s=sum(r.wall_time_s for r in s.regions),
                           session=s, label=s.session_id) for s in sessions]
    return ScalingSeries(label, tuple(points))


# ---------------------------------------------------------------------------
# queries


def aggregate_counts(region: RegionMeasurement, event: str) -> CountSummary:
    values = region.per_core(event)
    total = sum(values)
    return CountSummary(total, min(values), max(values), total / len(values), values)


def slice_timeline(region: RegionMeasurement, t0: float, t1: float) -> RegionMeasurement:
    """Region restricted to timeline samples with ``t0 < t_s <= t1``."""
    if not (0 <= t0 < t1):
        raise ValueError(f"need 0 <= t0 < t1, got t0={t0}, t1={t1}")
    if not region.timeline:
        raise NoTimeline(f"region {region.region_name} has no timeline")
    samples = tuple(s for s in region.timeline if t0 < s.t_s <= t1)
    if not samples:
        raise EmptySlice(f"no timeline samples in ({t0}, {t1}]")
    cores = []
    for ci, core in enumerate(region.cores):
        counts = {ev: sum(s.per_core_counts[ci].counts[ev] for s in samples) for ev in core.counts}
        cores.append(CoreMeasurement(core.core_id, counts))
    return RegionMeasurement(
        region_name=f"{region.region_name}[{t0},{t1}]",
        wall_time_s=sum(s.dt_s for s in samples),
        cores=tuple(cores),
        timeline=samples,
    )


def subregion(region: RegionMeasurement, core_ids) -> RegionMeasurement:
    """Region restricted to the listed cores (timeline included)."""
    keep = set(core_ids)
    idx = [i for i, c in enumerate(region.cores) if c.core_id in keep]
    timeline = None
    if region.timeline is not None:
        timeline = tuple(
            replace(s, per_core_counts=tuple(s.per_core_counts[i] for i in idx)) for s in region.timeline
        )
    return replace(region, cores=tuple(region.cores[i] for i in idx), timeline=timeline)


def combine_regions(regions: Sequence[RegionMeasurement], name: str = "all") -> RegionMeasurement:
    """Sum counts and wall times of several regions.

    Only events present on every core of every region survive. Timelines are
    dropped.
    """
    if not regions:
        raise ValueError("nothing to combine")
    if len(regions) == 1 and regions[0].region_name == name:
        return regions[0]
    events = set.intersection(*(r.event_names for r in regions))
    totals: dict[int, dict[str, int]] = {}
    for r in regions:
        for c in r.cores:
            acc = totals.setdefault(c.core_id, dict.fromkeys(sorted(events), 0))
            for ev in events:
                acc[ev] += c.counts[ev]
    cores = tuple(CoreMeasurement(cid, totals[cid]) for cid in sorted(totals))
    return RegionMeasurement(name, sum(r.wall_time_s for r in regions), cores)
