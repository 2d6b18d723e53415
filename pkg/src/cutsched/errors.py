"""Exception types shared across the package."""

from __future__ import annotations


class CutschedError(Exception):
    """Base class for all package errors."""


class ValidationError(CutschedError):
    """A value violates a documented invariant."""


class ParseError(CutschedError):
    """A persisted file could not be parsed.

    Carries enough context (path, line, field) to point at the offending
    record without re-reading the file.
    """

    def __init__(self, message: str, *, path: str | None = None,
                 line: int | None = None, field: str | None = None):
        parts = []
        if path is not None:
            parts.append(str(path))
        if line is not None:
            parts.append(f"line {line}")
        if field is not None:
            parts.append(f"field {field!r}")
        prefix = ": ".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.path = path
        self.line = line
        self.field = field


class CapacityError(CutschedError):
    """A circuit does not fit on the device it was asked to run on."""


class OverheadOverflowError(CutschedError):
    """A sampling-overhead value exceeds the exact integer range in use."""


class InfeasibleCutError(CutschedError):
    """A required cut cannot be realized (no valid bipartition, or the
    expansion would be unbounded)."""


class UnschedulableError(CutschedError):
    """A job cannot be placed on any device in the fleet.

    `job_id` names the offending job so callers can drop it and continue.
    """

    def __init__(self, message: str, *, job_id: str | None = None):
        super().__init__(message)
        self.job_id = job_id


class OracleLimitError(CutschedError):
    """A brute-force oracle refused an instance above its size limits."""
