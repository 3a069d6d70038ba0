"""
Error types for mmkg-align.

Library code raises these; only the CLI turns them into exit codes.
"""

from pathlib import Path


class AlignmentError(Exception):
    """Base class for user/data errors (CLI exit code 1)."""


class ConfigError(AlignmentError):
    """Invalid or inconsistent configuration."""


class DatasetError(AlignmentError):
    """A dataset file is missing or malformed at a known location."""

    def __init__(self, path: str | Path, reason: str, line: int | None = None):
        self.path = Path(path)
        self.line = line
        self.reason = reason
        where = f"{self.path}:{line}" if line is not None else str(self.path)
        super().__init__(f"{where}: {reason}")


class FormatError(DatasetError):
    """Binary FMAT payload does not match the expected layout."""


class ShapeError(AlignmentError):
    """Matrix dimensions do not conform."""


class ModalityUnavailableError(AlignmentError):
    """A modality was requested but its inputs are absent."""


class InvariantViolation(AlignmentError):
    """An internal invariant broke (CLI exit code 2)."""
