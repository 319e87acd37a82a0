"""Performance-pattern diagnosis from hardware performance monitoring data."""

__version__ = "0.1.0"

from .errors import HpmError, NotComputable, ParseError, ValidationError  # noqa: E402
from .machine import MachineModel, load_machine  # noqa: E402
from .patterns import DiagnosisInput, Finding, PatternKind, diagnose  # noqa: E402
from .session import MeasurementSession, load_session  # noqa: E402

__all__ = [
    "DiagnosisInput", "Finding", "HpmError", "MachineModel", "MeasurementSession",
    "NotComputable", "ParseError", "PatternKind", "ValidationError", "diagnose",
    "load_machine", "load_session",
]
