"""Exception hierarchy. Every error raised on bad input derives from LedgerMineError."""


class LedgerMineError(Exception):
    """Base class; the CLI maps these to exit code 1."""


class MalformedEvent(LedgerMineError):
    pass


class DuplicateId(LedgerMineError):
    pass


class UnknownEventType(LedgerMineError):
    def __init__(self, paths, message=None):
        if isinstance(paths, str):
            paths = [paths]
        self.paths = list(paths)
        super().__init__(message or "unknown event type(s): " + ", ".join(self.paths))


class ParseError(LedgerMineError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidRange(LedgerMineError):
    pass


class PatternSyntaxError(LedgerMineError):
    """Raised by the DSL parser; ``offset`` is a byte offset into the UTF-8 input."""

    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f"at byte {offset}: {message}")


class WindowError(LedgerMineError):
    pass


class NoAntecedentEvents(LedgerMineError):
    pass


class DegenerateSpan(LedgerMineError):
    pass


class EmptyLedger(LedgerMineError):
    pass


class NoTreatedAnchors(LedgerMineError):
    pass


class AllStrataTooSmall(LedgerMineError):
    pass


class ExclusionExhausted(LedgerMineError):
    pass


class DegenerateStratum(LedgerMineError):
    pass


class InvalidScenario(LedgerMineError):
    pass


class GraphValidationError(LedgerMineError):
    pass


class UnknownGoal(LedgerMineError):
    pass


class ConfigError(LedgerMineError):
    pass
