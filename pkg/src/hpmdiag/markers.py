"""Markers used in place of numbers when a metric has no value."""

from __future__ import annotations

import math
from dataclasses import dataclass


class _Undefined:
    """Result of x/0 and anything computed from it."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNDEFINED"

    def __str__(self):
        return "undefined"

    def __bool__(self):
        return False

    def __reduce__(self):
        return (_Undefined, ())


UNDEFINED = _Undefined()


@dataclass(frozen=True)
class NotComputableValue:
    """Metric whose input events are absent from the measurement."""

    missing: tuple[str, ...]

    def __str__(self):
        return "not computable: missing " + ", ".join(self.missing)

    def __bool__(self):
        return False


def is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def as_json_value(value):
    if is_number(value):
        return value
    return str(value)
