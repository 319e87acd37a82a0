"""Command-line front end.

Exit codes: 0 success, 1 I/O or parse failure, 2 validation or analysis failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from pathlib import Path

from . import __version__
from .analysis import compare_runs, speedup_curve
from .errors import HpmError, ParseError, UnknownMetric
from .machine import load_machine
from .markers import is_number
from .patterns import DiagnosisInput, PatternKind, diagnose
from .perfgroup import builtin_groups, evaluate_formula, format_expression, registry_with
from .report import json_report, text_report
from .session import (
    ScalingSeries,
    load_series,
    load_session,
    series_from_sessions,
    subregion,
)
from .thresholds import load_thresholds, resolve


def _fail(code: int, message: str) -> int:
    print(f"hpmdiag: error: {message}", file=sys.stderr)
    return code


def _registry(groups_dir):
    registry, diagnostics = registry_with(groups_dir)
    for d in diagnostics:
        print(f"hpmdiag: warning: {d}", file=sys.stderr)
    return registry


# ---------------------------------------------------------------------------
# analyze


def cmd_analyze(args) -> int:
    session = load_session(args.session, args.lenient)
    machine = load_machine(args.machine)
    thresholds = load_thresholds(args.thresholds) if args.thresholds else resolve()
    scaling = load_series(args.scaling, args.lenient) if args.scaling else None
    inp = DiagnosisInput(
        session=session,
        machine=machine,
        scaling=scaling,
        static_cycles_per_iter=args.static_cycles,
        iterations=args.iterations,
        model_mflops=args.model_mflops,
        useful_work_fp=args.useful_work == "fp",
        data_parallel=args.data_parallel,
        region=args.region,
        baseline=args.baseline,
        groups=_registry(args.groups) if args.groups else None,
    )
    if args.region is not None:
        try:
            session.region(args.region)
        except KeyError as exc:
            return _fail(2, str(exc.args[0]))
    findings = diagnose(inp, thresholds)
    if args.format == "json":
        out = json_report(inp, findings, inp.metrics, thresholds, args.no_timestamp)
    else:
        out = text_report(inp, findings, inp.metrics, args.no_timestamp)
    sys.stdout.write(out)
    return 0


# ---------------------------------------------------------------------------
# timeline


def _find_metric(registry, name):
    for group in registry.values():
        formula = group.metric(name)
        if formula is not None:
            return group, formula
    raise UnknownMetric(f"no performance group defines metric {name!r}")


def _cell(value) -> str:
    return repr(float(value)) if is_number(value) else ""


def timeline_csv(region, group, formula, resolution: float | None = None) -> str:
    """CSV of ``formula`` per core and aggregated, binned by sample end time."""
    from .errors import NoTimeline

    slots = sorted(formula.slots)
    events = {s: group.event_for_slot(s) for s in slots}
    missing = sorted({e for e in events.values() if e not in region.event_names})
    if missing:
        raise UnknownMetric(f"metric {formula.metric_name} needs events missing from the session: "
                            + ", ".join(missing))
    if not region.timeline:
        raise NoTimeline(f"region {region.region_name} has no timeline")
    res = resolution or region.timeline[0].dt_s
    if not res > 0:
        raise ValueError("resolution must be > 0")
    bins: dict[int, list] = {}
    for sample in region.timeline:
        b = max(1, math.ceil(sample.t_s / res - 1e-9))
        bins.setdefault(b, []).append(sample)
    core_ids = region.core_ids
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    name = formula.metric_name
    w.writerow(["t_s"] + [f"{name}_core{c}" for c in core_ids] + [f"{name}_aggregate"])
    for b in range(1, max(bins) + 1):
        t_end = round(b * res, 9)
        samples = bins.get(b)
        if not samples:
            w.writerow([repr(t_end)] + [""] * (len(core_ids) + 1))
            continue
        dt = sum(s.dt_s for s in samples)
        row = [repr(t_end)]
        summed = dict.fromkeys(slots, 0)
        for ci in range(len(core_ids)):
            bindings = {s: sum(smp.per_core_counts[ci].counts[events[s]] for smp in samples) for s in slots}
            for s in slots:
                summed[s] += bindings[s]
            row.append(_cell(evaluate_formula(formula, bindings, dt)))
        row.append(_cell(evaluate_formula(formula, summed, dt)))
        w.writerow(row)
    return buf.getvalue()


def cmd_timeline(args) -> int:
    session = load_session(args.session, args.lenient)
    registry = _registry(args.groups) if args.groups else builtin_groups()
    group, formula = _find_metric(registry, args.metric)
    region = session.region(args.region) if args.region else session.regions[0]
    text = timeline_csv(region, group, formula, args.resolution)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# scaling


def _restrict_to_group(series: ScalingSeries, machine, kind: str, index: int | None) -> tuple[ScalingSeries, str]:
    """Keep the runs whose cores all lie in one sharing group."""
    groups = machine.topology.groups(kind)
    sessions = series.sessions
    if len(sessions) != len(series.points):
        raise ParseError("--group-by needs a session for every run")
    if index is None:
        largest = max(sessions, key=lambda s: len(s.core_set))
        index = max(range(len(groups)), key=lambda i: len(set(groups[i]) & set(largest.core_set)))
    if not 0 <= index < len(groups):
        raise ParseError(f"--group {index}: machine has {len(groups)} {kind} group(s)")
    cores = set(groups[index])
    kept = [pt for pt in series.points if set(pt.session.core_set) <= cores]
    desc = f"{kind} group {index} (cores {', '.join(map(str, sorted(cores)))})"
    dropped = len(series.points) - len(kept)
    if dropped:
        desc += f"; {dropped} run(s) using cores outside it dropped"
    return ScalingSeries(series.label, tuple(kept)), desc


def cmd_scaling(args) -> int:
    if args.series:
        series = load_series(args.series, args.lenient)
    else:
        series = series_from_sessions([load_session(p, args.lenient) for p in args.sessions])
    header = []
    if args.group_by:
        if not args.machine:
            return _fail(2, "--group-by needs --machine")
        series, desc = _restrict_to_group(series, load_machine(args.machine), args.group_by, args.group)
        header.append(f"restricted to {desc}")
    thresholds = load_thresholds(args.thresholds) if args.thresholds else resolve()
    counts = series.thread_counts
    compare = args.compare or (len(counts) >= 2 and len(set(counts)) == 1)
    lines = [f"series: {series.label}"] + header
    if compare:
        speedups = compare_runs(series)
        lines.append("mode: run comparison (relative to the first run)")
        for pt, s in zip(series.points, speedups):
            label = pt.label or f"{pt.thread_count} thread(s)"
            lines.append(f"  {label}: speedup {s:.3f}")
    else:
        cls = speedup_curve(series, thresholds)
        lines.append("threads  speedup")
        for n, s in zip(cls.thread_counts, cls.speedups):
            lines.append(f"{n:>7}  {s:.3f}")
        lines.append(f"shape: {cls.shape}")
        sp = "none" if cls.saturation_point is None else str(cls.saturation_point)
        lines.append(f"saturation point: {sp}")
    print("\n".join(lines))
    return 0


# ---------------------------------------------------------------------------
# groups


def cmd_groups(args) -> int:
    registry, diagnostics = registry_with(args.groups)
    out = []
    for name in sorted(registry):
        g = registry[name]
        out.append(f"{name}: {g.short_description}")
        out.append("  events: " + ", ".join(f"{e.counter_slot}={e.event_name}" for e in g.event_set))
        for m in g.metrics:
            unit = f" [{m.unit}]" if m.unit else ""
            out.append(f"  {m.metric_name}{unit} = {format_expression(m.expression)}")
    if diagnostics:
        out.append("")
        out.append("diagnostics:")
        out += [f"  {d}" for d in diagnostics]
    print("\n".join(out))
    return 0


# ---------------------------------------------------------------------------
# synth


def cmd_synth(args) -> int:
    from .synth import SyntheticSpec, default_machine, generate_session, write_case

    machine = load_machine(args.machine) if args.machine else default_machine()
    pattern = None if args.pattern == "none" else PatternKind(args.pattern)
    spec = SyntheticSpec(pattern, args.cores, args.intensity, args.seed, machine)
    case = generate_session(spec)
    paths = write_case(case, args.out, args.name)
    for kind, path in paths.items():
        print(f"{kind}: {path}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hpmdiag", description="Diagnose performance patterns from HPM measurements.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="derive metrics and diagnose patterns for one session")
    a.add_argument("--session", required=True)
    a.add_argument("--machine", required=True)
    a.add_argument("--groups", help="directory of group files overriding or extending the builtins")
    a.add_argument("--thresholds", help="JSON thresholds file")
    a.add_argument("--baseline", help="memory bandwidth reference: stream, update, olc or a Baselines field")
    a.add_argument("--useful-work", choices=["fp"], help="declare FP operations to be the useful work")
    a.add_argument("--data-parallel", action="store_true", help="declare the code data parallel")
    a.add_argument("--static-cycles", type=float, help="static-analysis cycles per iteration")
    a.add_argument("--iterations", type=float, help="loop iterations measured (for --static-cycles)")
    a.add_argument("--model-mflops", type=float, help="performance model prediction in MFlop/s")
    a.add_argument("--scaling", help="scaling series file")
    a.add_argument("--region", help="analyze this region only (default: all regions summed)")
    a.add_argument("--format", choices=["text", "json"], default="text")
    a.add_argument("--lenient", action="store_true", help="ignore unknown keys in input files")
    a.add_argument("--no-timestamp", action="store_true")
    a.set_defaults(func=cmd_analyze)

    t = sub.add_parser("timeline", help="export a metric over time as CSV")
    t.add_argument("--session", required=True)
    t.add_argument("--metric", required=True)
    t.add_argument("--resolution", type=float, help="bin width in seconds (default: native sample width)")
    t.add_argument("--out", help="output path (default: stdout)")
    t.add_argument("--region")
    t.add_argument("--groups")
    t.add_argument("--lenient", action="store_true")
    t.set_defaults(func=cmd_timeline)

    s = sub.add_parser("scaling", help="classify a scaling series")
    s.add_argument("sessions", nargs="*", help="session files, one per run")
    s.add_argument("--series", help="scaling series file instead of session files")
    s.add_argument("--machine", help="machine file (needed for --group-by)")
    s.add_argument("--group-by", choices=["olc", "numa", "socket"])
    s.add_argument("--group", type=int, help="index of the sharing group (default: the busiest)")
    s.add_argument("--compare", action="store_true", help="compare runs regardless of thread counts")
    s.add_argument("--thresholds")
    s.add_argument("--lenient", action="store_true")
    s.set_defaults(func=cmd_scaling)

    g = sub.add_parser("groups", help="list performance groups and check user group files")
    g.add_argument("--groups", help="directory of user group files")
    g.set_defaults(func=cmd_groups)

    y = sub.add_parser("synth", help="write a synthetic session with an injected pattern")
    y.add_argument("--pattern", default="none", choices=["none"] + [k.value for k in PatternKind])
    y.add_argument("--cores", type=int, default=6)
    y.add_argument("--intensity", type=float, default=0.8)
    y.add_argument("--seed", type=int, default=0)
    y.add_argument("--machine", help="machine file (default: built-in 2x6 synthetic machine)")
    y.add_argument("--out", default=".")
    y.add_argument("--name", default="synthetic")
    y.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "scaling" and not args.series and not args.sessions:
        return _fail(2, "scaling needs session files or --series")
    try:
        return args.func(args)
    except ParseError as exc:
        return _fail(1, str(exc))
    except OSError as exc:
        name = getattr(exc, "filename", None)
        return _fail(1, f"{name}: {exc.strerror}" if name else str(exc))
    except HpmError as exc:
        return _fail(2, str(exc))
    except (KeyError, ValueError) as exc:
        return _fail(2, str(exc.args[0]) if exc.args else type(exc).__name__)


if __name__ == "__main__":
    sys.exit(main())
