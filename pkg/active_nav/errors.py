"""Errors for the active_nav engine."""

from __future__ import annotations


class ActiveNavError(Exception):
    """Base class for every error raised by active_nav."""


class ConfigurationError(ActiveNavError):
    """Raised when a configuration value is out of bounds."""

    def __init__(self, message: str, key: str | None = None) -> None:
        """Init."""
        super().__init__(message)
        self._key = key

    def get_key(self) -> str | None:
        """Get the offending configuration key."""
        return self._key


class CanvasOverflowError(ActiveNavError):
    """Raised when an observation footprint does not fit in a place canvas."""

    def __init__(self, cells: int) -> None:
        """Overflowing footprint."""
        self.cells = cells
        super().__init__(f"{cells} visible cells fall outside the place canvas")


class OutOfFrameError(ActiveNavError):
    """Raised when a place pose lies outside its canvas."""


class InternalConsistencyError(ActiveNavError):
    """Raised when the cognitive map is asked about something it cannot hold."""


class NoTargetError(ActiveNavError):
    """Raised when no mid level candidate carries any value."""


class NoPathError(ActiveNavError):
    """Raised when a low level target cannot be reached."""


class GenerationInvariantError(ActiveNavError):
    """Raised when a generated maze breaks one of its own guarantees."""


class _LineContextError(ActiveNavError):
    """Error that points at a line of an input file."""

    def __init__(self, message: str, line: int | None = None) -> None:
        """Init."""
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MazeFormatError(_LineContextError):
    """Raised when a maze text file cannot be parsed."""


class MapLoadError(_LineContextError):
    """Raised when a saved cognitive map cannot be loaded."""
