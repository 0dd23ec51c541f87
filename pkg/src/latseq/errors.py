"""Exception hierarchy shared across the package.

Two failure families matter to callers (and to the CLI exit codes):
input problems (malformed files, cap overruns, domain mismatches) and
mathematical precondition failures (non-ideal sets, inconsistent diamond
fields, unsupported paths).
"""


class LatseqError(Exception):
    """Base class for all package errors."""


class InputError(LatseqError):
    """Malformed input, unknown identifiers, or a configured cap exceeded."""


class PreconditionError(LatseqError):
    """A mathematical precondition of an operation does not hold."""


class CapExceeded(InputError):
    """A configured node/path/enumeration cap was exceeded."""

    def __init__(self, message: str, reached: int | None = None):
        super().__init__(message)
        self.reached = reached


class UnsupportedPathError(PreconditionError):
    """A path is not supported by the observational action law."""

    def __init__(self, message: str, stage: int, state=None):
        super().__init__(message)
        self.stage = stage
        self.state = state
