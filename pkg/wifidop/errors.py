"""Exception hierarchy for wifidop."""

from __future__ import annotations

from pathlib import Path


class WifiDopError(Exception):
    """Base exception."""


class InvalidUnit(WifiDopError, ValueError):
    """Raised for non-finite signal levels."""


class NonPositivePower(WifiDopError, ValueError):
    """Raised when a power in milliwatts is zero or negative."""


class InvalidDistance(WifiDopError, ValueError):
    """Raised when a range is zero or negative."""


class UnsupportedDirection(WifiDopError):
    """Raised when a propagation model cannot be evaluated in the requested direction."""


class UnknownAp(WifiDopError, KeyError):
    """Raised when a scan references an access point missing from the environment."""

    def __str__(self) -> str:
        return Exception.__str__(self)


class DegenerateRange(WifiDopError, ValueError):
    """Raised when a position coincides with an access point."""


class InsufficientObservations(WifiDopError):
    """Raised when too few access points qualify for positioning."""


class SingularGeometry(WifiDopError):
    """Raised when the normal matrix of a fix is singular."""


class CellTooSmall(WifiDopError, ValueError):
    """Raised when a coverage cell is too small for the compactness indicator."""


class InvalidPixel(WifiDopError, ValueError):
    """Raised when a pixel is not part of the cell it is queried against."""


class ParseError(WifiDopError):
    """Raised when an input file cannot be parsed."""

    def __init__(self, message: str, *, path: Path | str | None = None, line: int | None = None):
        self.path = Path(path) if path is not None else None
        self.line = line
        location = ""
        if self.path is not None:
            location = f"{self.path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        super().__init__(f"{location}{message}")


class ValidationError(WifiDopError, ValueError):
    """Raised when a value violates a documented invariant."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
