"""Core radio types and the milliwatt/dBm unit bridge.

Milliwatts are the canonical power unit everywhere inside the package; dBm only
appears in files and command-line flags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidUnit, NonPositivePower, UnknownAp, ValidationError

Vector3 = tuple[float, float, float]


def dbm_to_mw(level: float) -> float:
    """Convert a level in dBm to milliwatts."""
    if not math.isfinite(level):
        raise InvalidUnit(f"signal level must be finite, got {level!r}")
    return 10.0 ** (level / 10.0)


def mw_to_dbm(power: float) -> float:
    """Convert a power in milliwatts to dBm."""
    if not power > 0:
        raise NonPositivePower(f"power must be positive to express in dBm, got {power!r}")
    return 10.0 * math.log10(power)


def as_vector(value: Iterable[float], name: str = "position") -> Vector3:
    """Return a validated 3-tuple of finite floats."""
    try:
        coords = tuple(float(item) for item in value)
    except (TypeError, ValueError) as err:
        raise ValidationError(name, "expected three numbers") from err
    if len(coords) != 3 or not all(math.isfinite(item) for item in coords):
        raise ValidationError(name, "expected three finite numbers")
    return coords  # type: ignore[return-value]


@dataclass(frozen=True)
class AccessPoint:
    """A fixed transmitter with known coordinates."""

    id: str
    position: Vector3
    tx_power: float
    tx_gain: float = 1.0
    wavelength: float = 0.125

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("id", "access point id must not be empty")
        object.__setattr__(self, "position", as_vector(self.position))
        for name in ("tx_power", "tx_gain", "wavelength"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValidationError(name, f"must be a positive number, got {value!r}")

    @property
    def eirp_gain(self) -> float:
        """P_T * G_T, the transmitter side of the link budget."""
        return self.tx_power * self.tx_gain


@dataclass(frozen=True)
class Receiver:
    """Mobile receiver characteristics."""

    rx_gain: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.rx_gain) and self.rx_gain > 0):
            raise ValidationError("gain", f"receiver gain must be positive, got {self.rx_gain!r}")


@dataclass(frozen=True)
class RssScan:
    """One mobile observation: received power per access point at one instant.

    A reading of 0 mW means the AP was scanned but not received; an absent key
    means the AP was not scanned at all.
    """

    timestamp: float
    readings: Mapping[str, float] = field(default_factory=dict)
    truth: Vector3 | None = None

    def __post_init__(self) -> None:
        readings = {str(key): float(value) for key, value in self.readings.items()}
        for ap_id, value in readings.items():
            if not (math.isfinite(value) and value >= 0):
                raise ValidationError("rss", f"reading for {ap_id} must be >= 0 mW, got {value!r}")
        object.__setattr__(self, "readings", readings)
        if self.truth is not None:
            object.__setattr__(self, "truth", as_vector(self.truth, "truth"))


@dataclass(frozen=True)
class Environment:
    """Access points, receiver and positioning dimension of one deployment."""

    aps: Sequence[AccessPoint]
    receiver: Receiver = field(default_factory=Receiver)
    dimension: int = 3
    ss_threshold: float = 0.0

    def __post_init__(self) -> None:
        aps = tuple(self.aps)
        if not aps:
            raise ValidationError("aps", "at least one access point is required")
        seen: set[str] = set()
        for ap in aps:
            if ap.id in seen:
                raise ValidationError("id", f"duplicate access point id {ap.id!r}")
            seen.add(ap.id)
        if self.dimension not in (2, 3):
            raise ValidationError("dimension", f"must be 2 or 3, got {self.dimension!r}")
        if not (math.isfinite(self.ss_threshold) and self.ss_threshold >= 0):
            raise ValidationError("ss_threshold", "must be a non-negative power")
        object.__setattr__(self, "aps", aps)
        object.__setattr__(self, "_index", {ap.id: ap for ap in aps})

    @property
    def ap_ids(self) -> list[str]:
        return sorted(ap.id for ap in self.aps)

    def ap(self, ap_id: str) -> AccessPoint:
        try:
            return self._index[ap_id]  # type: ignore[attr-defined]
        except KeyError as err:
            raise UnknownAp(f"access point {ap_id!r} is not part of the environment") from err

    def positions(self, ap_ids: Sequence[str]) -> np.ndarray:
        """Return an (n, 3) array of AP coordinates in the given order."""
        if not ap_ids:
            return np.zeros((0, 3))
        return np.array([self.ap(ap_id).position for ap_id in ap_ids], dtype=float)

    def check_scan(self, scan: RssScan) -> None:
        for ap_id in scan.readings:
            self.ap(ap_id)
