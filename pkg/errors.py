"""Exception hierarchy shared by every isetlab module.

Library code raises these; only ``run.py`` turns them into exit codes.
"""
from typing import Optional


class LabError(Exception):
    """Base class for all isetlab failures."""


class InvalidParameter(LabError, ValueError):
    """A parameter lies outside the domain an operation accepts."""


class GraphParseError(LabError):
    """A graph file could not be parsed.

    Args:
        message: What went wrong.
        line: 1-based line number of the offending line, when known.
        path: File being parsed, when known.
    """

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class BudgetExceeded(LabError):
    """A search ran out of its node, state or time budget.

    ``partial`` carries the best result found so far when the caller can use one.
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class NoRootError(LabError):
    """A threshold equation has no sign change on its search interval."""


class UndefinedRatio(LabError):
    """A term ratio was requested whose denominator is zero."""


class InfeasibleOverlap(LabError):
    """The overlap parameters describe sets that cannot exist."""


class InvalidWitness(LabError):
    """An augmenting witness does not validate against its graph and sets."""


class TruncatedLayer(LabError):
    """An operation that needs a complete layer received a truncated one."""
