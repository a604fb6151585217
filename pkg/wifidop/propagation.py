"""Propagation models: forward RSS prediction, distance inversion and range sensitivity.

Friis (exponent 2) and Interlink Networks (exponent 3.5) share the path-loss form

    P_R = P_T * G_T * G_R * (wavelength / (4 pi d)) ** n

whose inverse is d = (wavelength / 4 pi) * (P_T G_T G_R / P_R) ** (1 / n). The
opt-in legacy Friis inversion drops the wavelength / 4 pi factor and is not
dimensionally consistent with the forward model.

SNAP-WPS is a cubic regression from attenuation magnitude s (dB, positive,
larger is weaker) to metres; it only exists in the inverse direction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .const import (
    EPSILON_DISTANCE,
    FRIIS_EXPONENT,
    INTERLINK_EXPONENT,
    MODEL_FRIIS,
    MODEL_INTERLINK,
    MODEL_NAMES,
    MODEL_SNAP_WPS,
    SNAP_COEFFICIENTS,
    SNAP_NORMAL_RANGE,
)
from .errors import InvalidDistance, InvalidUnit, NonPositivePower, UnsupportedDirection, ValidationError
from .radio import AccessPoint, Receiver, mw_to_dbm

LOGGER = logging.getLogger(__name__)

_FOUR_PI = 4.0 * math.pi


class ModelVariant(str, Enum):
    FRIIS = MODEL_FRIIS
    INTERLINK = MODEL_INTERLINK
    SNAP_WPS = MODEL_SNAP_WPS


@dataclass(frozen=True)
class PropagationModel:
    """A propagation model variant with its path-loss exponent."""

    variant: ModelVariant
    exponent: float = FRIIS_EXPONENT
    legacy_inversion: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "variant", ModelVariant(self.variant))
        if self.is_path_loss and not (math.isfinite(self.exponent) and self.exponent > 0):
            raise ValidationError("exponent", f"must be positive, got {self.exponent!r}")

    @classmethod
    def friis(cls, *, legacy_inversion: bool = False) -> PropagationModel:
        return cls(ModelVariant.FRIIS, FRIIS_EXPONENT, legacy_inversion)

    @classmethod
    def interlink(cls) -> PropagationModel:
        return cls(ModelVariant.INTERLINK, INTERLINK_EXPONENT)

    @classmethod
    def snap_wps(cls) -> PropagationModel:
        return cls(ModelVariant.SNAP_WPS, 0.0)

    @property
    def is_path_loss(self) -> bool:
        return self.variant is not ModelVariant.SNAP_WPS

    @property
    def name(self) -> str:
        return self.variant.value


def model_from_name(name: str, *, legacy: bool = False) -> PropagationModel:
    """Return the model selected by a CLI name."""
    key = name.strip().lower()
    if key == MODEL_FRIIS:
        return PropagationModel.friis(legacy_inversion=legacy)
    if key == MODEL_INTERLINK:
        return PropagationModel.interlink()
    if key == MODEL_SNAP_WPS:
        return PropagationModel.snap_wps()
    raise ValidationError("model", f"unknown model {name!r}; expected one of {', '.join(MODEL_NAMES)}")


def _link_budget(ap: AccessPoint, rx: Receiver) -> float:
    return ap.tx_power * ap.tx_gain * rx.rx_gain


def _range_scale(model: PropagationModel, ap: AccessPoint) -> float:
    if model.legacy_inversion and model.variant is ModelVariant.FRIIS:
        return 1.0
    return ap.wavelength / _FOUR_PI


def forward_rss(model: PropagationModel, ap: AccessPoint, rx: Receiver, distance: float) -> float:
    """Predict the received power in milliwatts at ``distance`` metres."""
    if not model.is_path_loss:
        raise UnsupportedDirection("SNAP-WPS is a distance regression and has no forward form")
    if not (math.isfinite(distance) and distance > 0):
        raise InvalidDistance(f"distance must be positive, got {distance!r}")
    return _link_budget(ap, rx) * (ap.wavelength / (_FOUR_PI * distance)) ** model.exponent


def forward_rss_field(
    model: PropagationModel, ap: AccessPoint, rx: Receiver, distances: np.ndarray
) -> np.ndarray:
    """Vectorised ``forward_rss`` over an array of distances, clamped at EPSILON_DISTANCE."""
    if not model.is_path_loss:
        raise UnsupportedDirection("SNAP-WPS is a distance regression and has no forward form")
    clamped = np.maximum(np.asarray(distances, dtype=float), EPSILON_DISTANCE)
    return _link_budget(ap, rx) * (ap.wavelength / (_FOUR_PI * clamped)) ** model.exponent


def invert_distance(model: PropagationModel, ap: AccessPoint, rx: Receiver, rss: float) -> float:
    """Estimate the range in metres from a received power in milliwatts."""
    if not (math.isfinite(rss) and rss > 0):
        raise NonPositivePower(f"received power must be positive, got {rss!r}")
    if not model.is_path_loss:
        return snap_distance(attenuation_from_rss(rss))
    return _range_scale(model, ap) * (_link_budget(ap, rx) / rss) ** (1.0 / model.exponent)


def attenuation_from_rss(rss: float) -> float:
    """Attenuation magnitude s = -L for a received level L in dBm."""
    return -mw_to_dbm(rss)


def snap_raw(s: float) -> float:
    """The SNAP-WPS cubic without clamping."""
    return float(np.polyval(SNAP_COEFFICIENTS, s))


def snap_derivative(s: float) -> float:
    """d'(s) of the SNAP-WPS cubic, metres per dB."""
    a, b, c, _ = SNAP_COEFFICIENTS
    return 3.0 * a * s * s + 2.0 * b * s + c


def snap_distance(s: float) -> float:
    """Range in metres for an attenuation magnitude ``s`` in dB, clamped at EPSILON_DISTANCE."""
    if not math.isfinite(s):
        raise InvalidUnit(f"attenuation must be finite, got {s!r}")
    low, high = SNAP_NORMAL_RANGE
    if not low <= s <= high:
        LOGGER.warning("SNAP-WPS attenuation %.2f dB outside the usual %.0f-%.0f dB range", s, low, high)
    return max(snap_raw(s), EPSILON_DISTANCE)


def snap_attenuation(distance: float) -> float:
    """Attenuation magnitude whose SNAP-WPS range equals ``distance``.

    The cubic is strictly increasing (its derivative has no real root), so the
    inverse is unique.
    """
    if not (math.isfinite(distance) and distance >= 0):
        raise InvalidDistance(f"distance must be non-negative, got {distance!r}")
    target = max(distance, EPSILON_DISTANCE)
    high = 100.0
    while snap_raw(high) < target:
        high *= 2.0
    return float(brentq(lambda s: snap_raw(s) - target, 0.0, high, xtol=1e-13))


def signal_variable(model: PropagationModel, rss: float) -> float:
    """The signal-domain quantity ``range_sensitivity`` is a derivative against.

    P_R ** (-1/n) for path-loss models, the attenuation magnitude for SNAP-WPS.
    """
    if not (math.isfinite(rss) and rss > 0):
        raise NonPositivePower(f"received power must be positive, got {rss!r}")
    if not model.is_path_loss:
        return attenuation_from_rss(rss)
    return rss ** (-1.0 / model.exponent)


def range_sensitivity(model: PropagationModel, ap: AccessPoint, rx: Receiver, rss: float) -> float:
    """Metres of range per unit of the model's signal variable (the C matrix entry)."""
    if not (math.isfinite(rss) and rss > 0):
        raise NonPositivePower(f"received power must be positive, got {rss!r}")
    if not model.is_path_loss:
        return snap_derivative(attenuation_from_rss(rss))
    return _range_scale(model, ap) * _link_budget(ap, rx) ** (1.0 / model.exponent)
