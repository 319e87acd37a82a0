"""Performance group files: an event set plus derived-metric formulas.

A group file looks like::

    SHORT  Cycles per instruction

    EVENTSET
    FIXC0  INSTR_RETIRED
    FIXC1  CPU_CLK_UNHALTED

    METRICS
    CPI  FIXC1/FIXC0
    MIPS [MInstr/s]  1.0E-06*FIXC0/time

``#`` starts a comment. A metric line is ``NAME [unit] expression`` where the
bracketed unit is optional.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..errors import GroupSyntaxError, ParseError, UnknownSlotError
from .expr import Node, format_expression, parse_expression, referenced_slots

EVENT_NAME = re.compile(r"[A-Z][A-Z0-9_]*\Z")
_SLOT = re.compile(r"[A-Z][A-Z0-9_]*\Z")
_METRIC_HEAD = re.compile(r"(?P<name>[A-Za-z][A-Za-z0-9_]*)(?:\s+\[(?P<unit>[^\]]*)\])?\s+")


@dataclass(frozen=True)
class EventSetEntry:
    counter_slot: str
    event_name: str


@dataclass(frozen=True)
class MetricFormula:
    metric_name: str
    expression: Node
    unit: str = ""

    @property
    def slots(self) -> set[str]:
        return referenced_slots(self.expression)


@dataclass(frozen=True)
class PerformanceGroup:
    group_name: str
    short_description: str
    event_set: tuple[EventSetEntry, ...]
    metrics: tuple[MetricFormula, ...] = field(default=())

    def event_for_slot(self, slot: str) -> str:
        for entry in self.event_set:
            if entry.counter_slot == slot:
                return entry.event_name
        raise KeyError(slot)

    def metric(self, name: str) -> MetricFormula | None:
        for m in self.metrics:
            if m.metric_name == name:
                return m
        return None

    @property
    def events(self) -> list[str]:
        return [e.event_name for e in self.event_set]


def _strip_comment(line: str) -> str:
    i = line.find("#")
    return line if i < 0 else line[:i]


def parse_group_file(text: str, name: str = "UNNAMED") -> PerformanceGroup:
    """Parse group file ``text``. ``name`` is normally the file stem."""
    short = None
    section = None
    entries: list[EventSetEntry] = []
    metrics: list[MetricFormula] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        if section is None:
            if stripped == "SHORT" or stripped.startswith(("SHORT ", "SHORT\t")):
                if short is not None:
                    raise GroupSyntaxError("duplicate SHORT line", lineno, 1)
                short = stripped[5:].strip()
                continue
            if stripped == "EVENTSET":
                if short is None:
                    raise GroupSyntaxError("EVENTSET before SHORT", lineno, 1, "SHORT line")
                section = "events"
                continue
            raise GroupSyntaxError(f"unexpected {stripped.split()[0]!r}", lineno, 1,
                                   "SHORT or EVENTSET")
        if stripped == "EVENTSET":
            raise GroupSyntaxError("duplicate EVENTSET section", lineno, 1)
        if stripped == "METRICS":
            if section == "metrics":
                raise GroupSyntaxError("duplicate METRICS section", lineno, 1)
            section = "metrics"
            continue
        if section == "events":
            parts = stripped.split()
            if len(parts) != 2:
                raise GroupSyntaxError("event line needs exactly a slot and an event name",
                                       lineno, 1, "SLOT EVENT")
            slot, event = parts
            if not _SLOT.match(slot):
                raise GroupSyntaxError(f"bad counter slot {slot!r}", lineno, 1, "SLOT")
            if not EVENT_NAME.match(event):
                col = line.index(event) + 1
                raise GroupSyntaxError(f"bad event name {event!r}", lineno, col,
                                       "uppercase identifier")
            if any(e.counter_slot == slot for e in entries):
                raise GroupSyntaxError(f"duplicate counter slot {slot}", lineno, 1)
            entries.append(EventSetEntry(slot, event))
        else:
            indent = len(line) - len(line.lstrip())
            m = _METRIC_HEAD.match(line, indent)
            if m is None:
                raise GroupSyntaxError("metric line needs a name and an expression",
                                       lineno, indent + 1, "NAME [unit] expression")
            mname = m.group("name")
            if any(x.metric_name == mname for x in metrics):
                raise GroupSyntaxError(f"duplicate metric {mname}", lineno, indent + 1)
            node = parse_expression(line[m.end():], lineno, m.end())
            declared = {e.counter_slot for e in entries}
            unknown = sorted(referenced_slots(node) - declared)
            if unknown:
                raise UnknownSlotError(
                    f"line {lineno}: metric {mname} references undeclared slot(s) "
                    + ", ".join(unknown)
                )
            metrics.append(MetricFormula(mname, node, (m.group("unit") or "").strip()))
    if short is None:
        raise GroupSyntaxError("missing SHORT line", None, None, "SHORT")
    if section is None:
        raise GroupSyntaxError("missing EVENTSET section", None, None, "EVENTSET")
    if not metrics:
        raise GroupSyntaxError("group defines no metrics", None, None, "METRICS section")
    return PerformanceGroup(name, short, tuple(entries), tuple(metrics))


def format_group(group: PerformanceGroup) -> str:
    lines = [f"SHORT {group.short_description}", "", "EVENTSET"]
    width = max((len(e.counter_slot) for e in group.event_set), default=0)
    for e in group.event_set:
        lines.append(f"{e.counter_slot.ljust(width)}  {e.event_name}")
    lines += ["", "METRICS"]
    for m in group.metrics:
        unit = f" [{m.unit}]" if m.unit else ""
        lines.append(f"{m.metric_name}{unit}  {format_expression(m.expression)}")
    return "\n".join(lines) + "\n"


def load_group_file(path) -> PerformanceGroup:
    path = Path(path)
    return parse_group_file(path.read_text(encoding="utf-8"), path.stem)


def builtin_groups() -> dict[str, PerformanceGroup]:
    """Fresh registry of the seven shipped groups, keyed by group name."""
    registry = {}
    for item in sorted(resources.files(__package__).joinpath("groups").iterdir(),
                       key=lambda p: p.name):
        if item.name.endswith(".txt"):
            stem = item.name[:-4]
            registry[stem] = parse_group_file(item.read_text(encoding="utf-8"), stem)
    return registry


def load_group_dir(directory) -> tuple[dict[str, PerformanceGroup], list[str]]:
    """Load every ``*.txt`` in ``directory``. Returns groups and per-file diagnostics."""
    groups = {}
    diagnostics = []
    for path in sorted(Path(directory).glob("*.txt")):
        try:
            groups[path.stem] = load_group_file(path)
        except (ParseError, UnicodeDecodeError) as exc:
            diagnostics.append(f"{path.name}: {exc}")
    return groups, diagnostics


def registry_with(directory=None) -> tuple[dict[str, PerformanceGroup], list[str]]:
    """Builtin groups, overridden/extended by the files in ``directory``."""
    registry = builtin_groups()
    diagnostics: list[str] = []
    if directory is not None:
        user, diagnostics = load_group_dir(directory)
        registry.update(user)
    return registry, diagnostics
