"""Exception hierarchy.

The CLI maps ``ParseError`` (and plain I/O failures) to exit code 1 and every
other ``HpmError`` to exit code 2.
"""


class HpmError(Exception):
    """Base class for all errors raised by hpmdiag."""


class ParseError(HpmError):
    """Malformed input file. The message carries line or element context."""


class ValidationError(HpmError):
    """Input parsed but violates a data-model invariant."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class UnknownEvent(HpmError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class NoTimeline(HpmError):
    pass


class EmptySlice(HpmError):
    pass


class GroupSyntaxError(ParseError):
    """Group file does not follow the grammar."""

    def __init__(self, message, line=None, column=None, expected=None):
        self.line = line
        self.column = column
        self.expected = expected
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        text = where + message
        if expected:
            text += f" (expected {expected})"
        super().__init__(text)


class UnknownSlotError(ParseError):
    pass


class UnknownMetric(HpmError):
    pass


class TooFewPoints(HpmError):
    pass


class NotComputable(HpmError):
    """A detector or metric lacks the inputs it needs."""


class UnsupportedPattern(HpmError):
    pass
