from .evaluate import MetricResult, evaluate_formula, evaluate_group
from .expr import BinOp, Neg, Number, Slot, Time, format_expression, parse_expression
from .group import (
    EventSetEntry,
    MetricFormula,
    PerformanceGroup,
    builtin_groups,
    format_group,
    load_group_dir,
    load_group_file,
    parse_group_file,
    registry_with,
)

__all__ = [
    "BinOp", "EventSetEntry", "MetricFormula", "MetricResult", "Neg", "Number",
    "PerformanceGroup", "Slot", "Time", "builtin_groups", "evaluate_formula",
    "evaluate_group", "format_expression", "format_group", "load_group_dir",
    "load_group_file", "parse_expression", "parse_group_file", "registry_with",
]
