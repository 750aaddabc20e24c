"""Exception hierarchy for the engine.

Every error the engine raises deliberately derives from EngineError so the
CLI can map them to a single exit code.
"""


class EngineError(Exception):
    """Base class for all engine-level failures."""


# -- catalog ---------------------------------------------------------------

class DuplicateName(EngineError):
    pass


class InvalidSchema(EngineError):
    pass


class UnknownBaseTable(EngineError):
    pass


class UnknownMView(EngineError):
    pass


class MissingMlog(EngineError):
    pass


class Unsupported(EngineError):
    pass


class DependentMViewExists(EngineError):
    pass


# -- storage ---------------------------------------------------------------

class DuplicateKey(EngineError):
    pass


class KeyNotFound(EngineError):
    pass


class EmptyMemtable(EngineError):
    pass


class NothingToCompact(EngineError):
    pass


class CorruptSSTable(EngineError):
    pass


class LockHeld(EngineError):
    pass


# -- encoding / vectors ----------------------------------------------------

class NdvTooHigh(EngineError):
    pass


class NotApplicable(EngineError):
    pass


class TypeMismatch(EngineError):
    pass


class IllegalFormat(EngineError):
    pass


class LengthMismatch(EngineError):
    pass


class CodeOutOfRange(EngineError):
    pass


class NonFixedKey(EngineError):
    pass


class UnsupportedAgg(EngineError):
    pass


class FormatUnavailable(EngineError):
    pass


# -- materialized views ----------------------------------------------------

class MlogGap(EngineError):
    pass


# -- CLI / parsing ---------------------------------------------------------

class ParseError(EngineError):
    """Query or value parse failure carrying the byte offset of the error."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class SchemaMismatch(EngineError):
    pass
