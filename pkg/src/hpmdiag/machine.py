"""Machine topology and measured baselines.

Baselines are user-measured microbenchmark numbers; the tool never
estimates them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ParseError, ValidationError


@dataclass(frozen=True)
class Topology:
    sockets: int
    cores_per_socket: int
    core_ids: tuple[int, ...]
    olc_groups: tuple[tuple[int, ...], ...]
    numa_domains: tuple[tuple[int, ...], ...]

    @property
    def socket_groups(self) -> tuple[tuple[int, ...], ...]:
        """Cores per socket, taking ``core_ids`` in order."""
        n = self.cores_per_socket
        return tuple(tuple(self.core_ids[i:i + n]) for i in range(0, len(self.core_ids), n))

    def groups(self, kind: str) -> tuple[tuple[int, ...], ...]:
        if kind == "olc":
            return self.olc_groups
        if kind == "numa":
            return self.numa_domains
        if kind == "socket":
            return self.socket_groups
        raise ValueError(f"unknown sharing group kind {kind!r}")


@dataclass(frozen=True)
class Baselines:
    stream_bw_core_MBs: float
    update_bw_socket_MBs: float
    olc_bw_MBs: float
    peak_mflops_core: float
    issue_width: float
    cacheline_bytes: int


@dataclass(frozen=True)
class MachineModel:
    name: str
    topology: Topology
    baselines: Baselines

    @property
    def locality_domains(self) -> int:
        return len(self.topology.numa_domains)


def _partition_violations(label, groups, core_ids) -> list[str]:
    flat = [c for g in groups for c in g]
    if sorted(flat) != sorted(core_ids) or len(set(flat)) != len(flat):
        return [f"Topology.{label}: not a partition of core_ids"]
    return []


def validate_machine(machine: MachineModel) -> list[str]:
    out = []
    t, b = machine.topology, machine.baselines
    if t.sockets < 1:
        out.append("Topology.sockets: must be >= 1")
    if t.cores_per_socket < 1:
        out.append("Topology.cores_per_socket: must be >= 1")
    if len(set(t.core_ids)) != len(t.core_ids):
        out.append("Topology.core_ids: duplicate core ids")
    if t.sockets * t.cores_per_socket != len(t.core_ids):
        out.append(
            f"Topology.core_ids: sockets x cores_per_socket = {t.sockets * t.cores_per_socket}"
            f" but {len(t.core_ids)} core ids listed"
        )
    out += _partition_violations("olc_groups", t.olc_groups, t.core_ids)
    out += _partition_violations("numa_domains", t.numa_domains, t.core_ids)
    for f in fields(b):
        if not getattr(b, f.name) > 0:
            out.append(f"Baselines.{f.name}: must be > 0")
    if not 1 <= b.issue_width <= 8:
        out.append("Baselines.issue_width: must be in [1, 8]")
    return out


def machine_from_dict(doc) -> MachineModel:
    try:
        topo = doc["topology"]
        base = doc["baselines"]
        unknown_b = set(base) - {f.name for f in fields(Baselines)}
        if unknown_b:
            raise ParseError(f"machine.baselines: unknown key(s) {', '.join(sorted(unknown_b))}")
        topology = Topology(
            sockets=int(topo["sockets"]),
            cores_per_socket=int(topo["cores_per_socket"]),
            core_ids=tuple(int(c) for c in topo["core_ids"]),
            olc_groups=tuple(tuple(int(c) for c in g) for g in topo["olc_groups"]),
            numa_domains=tuple(tuple(int(c) for c in g) for g in topo["numa_domains"]),
        )
        baselines = Baselines(**{f.name: base[f.name] for f in fields(Baselines)})
        machine = MachineModel(str(doc["name"]), topology, baselines)
    except KeyError as exc:
        raise ParseError(f"machine: missing key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ParseError(f"machine: {exc}") from None
    violations = validate_machine(machine)
    if violations:
        raise ValidationError(violations)
    return machine


def machine_to_dict(machine: MachineModel) -> dict:
    t = machine.topology
    return {
        "name": machine.name,
        "topology": {
            "sockets": t.sockets,
            "cores_per_socket": t.cores_per_socket,
            "core_ids": list(t.core_ids),
            "olc_groups": [list(g) for g in t.olc_groups],
            "numa_domains": [list(g) for g in t.numa_domains],
        },
        "baselines": {f.name: getattr(machine.baselines, f.name) for f in fields(Baselines)},
    }


def load_machine(path) -> MachineModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        return machine_from_dict(doc)
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from None


def simple_machine(name: str, sockets: int, cores_per_socket: int, **baselines) -> MachineModel:
    """Machine with one OLC group and one NUMA domain per socket."""
    ids = tuple(range(sockets * cores_per_socket))
    per_socket = tuple(tuple(ids[s * cores_per_socket:(s + 1) * cores_per_socket]) for s in range(sockets))
    machine = MachineModel(name, Topology(sockets, cores_per_socket, ids, per_socket, per_socket),
                           Baselines(**baselines))
    violations = validate_machine(machine)
    if violations:
        raise ValidationError(violations)
    return machine


def roofline_limit(intensity: float, bw_MBs: float, peak_mflops: float) -> float:
    """Attainable MFlop/s: min(peak, intensity [Flop/Byte] x bandwidth [MByte/s])."""
    return min(peak_mflops, intensity * bw_MBs)


def bandwidth_utilization(measured_MBs: float, baseline_MBs: float) -> float:
    if not baseline_MBs > 0:
        raise ValueError("baseline must be > 0")
    return measured_MBs / baseline_MBs


def groups_spanned(groups, cores) -> int:
    cores = set(cores)
    return sum(1 for g in groups if cores & set(g))


BASELINE_ALIASES = {
    "stream": "stream_bw_core_MBs",
    "update": "update_bw_socket_MBs",
    "olc": "olc_bw_MBs",
}


def memory_baseline(machine: MachineModel, cores, override: str | None = None) -> tuple[float, str]:
    """Memory bandwidth reference for a run on ``cores`` and a description of it.

    Default: the all-core update bandwidth per socket times the sockets in
    use, capped by the single-thread streaming bandwidth times the core count.
    """
    b = machine.baselines
    if override:
        key = BASELINE_ALIASES.get(override, override)
        if key not in {f.name for f in fields(Baselines)} or not key.endswith("_MBs"):
            raise ValidationError(f"unknown bandwidth baseline {override!r}")
        return float(getattr(b, key)), key
    cores = list(cores)
    sockets = max(1, groups_spanned(machine.topology.socket_groups, cores))
    socket_bw = b.update_bw_socket_MBs * sockets
    core_bw = b.stream_bw_core_MBs * max(1, len(cores))
    if core_bw < socket_bw:
        return core_bw, f"stream_bw_core_MBs x {len(cores)} core(s)"
    return socket_bw, f"update_bw_socket_MBs x {sockets} socket(s)"


def olc_baseline(machine: MachineModel, cores) -> tuple[float, str]:
    n = max(1, groups_spanned(machine.topology.olc_groups, cores))
    return machine.baselines.olc_bw_MBs * n, f"olc_bw_MBs x {n} OLC group(s)"
