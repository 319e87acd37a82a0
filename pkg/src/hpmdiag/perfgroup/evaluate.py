"""Evaluate a performance group against a measured region."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from ..markers import NotComputableValue
from .expr import evaluate
from .group import MetricFormula, PerformanceGroup


def evaluate_formula(formula: MetricFormula, bindings: Mapping[str, float], time: float | None = None):
    """Value of ``formula``; UNDEFINED on division by zero."""
    return evaluate(formula.expression, bindings, time)


@dataclass(frozen=True)
class MetricResult:
    metric_name: str
    unit: str
    per_core: Mapping[int, object]
    aggregate: object
    group_name: str = ""

    @property
    def computable(self) -> bool:
        return not isinstance(self.aggregate, NotComputableValue)


def evaluate_group(group: PerformanceGroup, region) -> list[MetricResult]:
    """Per-core results use each core's counts; the aggregate uses counts
    summed over cores (never the mean of per-core results).
    """
    present = region.event_names
    results = []
    for metric in group.metrics:
        slots = sorted(metric.slots)
        events = {s: group.event_for_slot(s) for s in slots}
        missing = tuple(sorted({ev for ev in events.values() if ev not in present}))
        if missing:
            marker = NotComputableValue(missing)
            results.append(MetricResult(metric.metric_name, metric.unit,
                                        {c.core_id: marker for c in region.cores}, marker, group.group_name))
            continue
        per_core = {}
        summed = dict.fromkeys(slots, 0)
        for core in region.cores:
            bindings = {s: core.counts[events[s]] for s in slots}
            for s in slots:
                summed[s] += bindings[s]
            per_core[core.core_id] = evaluate_formula(metric, bindings, region.wall_time_s)
        aggregate = evaluate_formula(metric, summed, region.wall_time_s)
        results.append(MetricResult(metric.metric_name, metric.unit, per_core, aggregate, group.group_name))
    return results
