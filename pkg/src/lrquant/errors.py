"""Exception hierarchy shared by all modules."""


class LRQuantError(Exception):
    pass


class InvalidParam(LRQuantError, ValueError):
    pass


class InvalidWord(LRQuantError, ValueError):
    pass


class InvalidRepresentation(LRQuantError, ValueError):
    pass


class PresentationMismatch(LRQuantError, ValueError):
    pass


class DimensionMismatch(LRQuantError, ValueError):
    pass


class SupportViolation(LRQuantError, ValueError):
    pass


class BoxTouchesEdge(LRQuantError, ValueError):
    pass


class ParseError(LRQuantError, ValueError):
    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = frozenset(expected)
        detail = f"{message} at offset {offset}"
        if self.expected:
            detail += f" (expected one of: {', '.join(sorted(self.expected))})"
        super().__init__(detail)


class EvaluationError(LRQuantError, ArithmeticError):
    pass


class IntegrationDiverged(LRQuantError, RuntimeError):
    pass


class PathTooCoarse(LRQuantError, ValueError):
    pass


class SolveFailed(LRQuantError, RuntimeError):
    pass


class SolverFailure(LRQuantError, RuntimeError):
    pass


class SizeExceeded(LRQuantError, RuntimeError):
    pass


class ConfigError(LRQuantError, ValueError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path:
            where += f" [{path}]"
        if line is not None:
            where += f" (line {line})"
        super().__init__(message + where)


class JobError(LRQuantError, RuntimeError):
    pass
