"""Layered runtime settings: defaults, an optional wifidop.env file, then the environment."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Mapping, TypeVar

from .const import DEFAULT_GOOD_DOP_MAX, SETTINGS_FILENAME
from .errors import ValidationError

LOGGER = logging.getLogger(__name__)

T = TypeVar("T")

KEY_SEED = "WIFIDOP_SEED"
KEY_GOOD_DOP_MAX = "WIFIDOP_GOOD_DOP_MAX"
KEY_ALERT_DOP = "WIFIDOP_ALERT_DOP"
KEY_FRIIS_LEGACY_INVERSION = "WIFIDOP_FRIIS_LEGACY_INVERSION"
KEY_WORKERS = "WIFIDOP_WORKERS"
KNOWN_KEYS = (KEY_SEED, KEY_GOOD_DOP_MAX, KEY_ALERT_DOP, KEY_FRIIS_LEGACY_INVERSION, KEY_WORKERS)

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off", ""}


@dataclass
class SettingsFile:
    """Read-only KEY=VALUE reader for wifidop.env files, parsed once on first use."""

    path: Path
    _values: Dict[str, str] | None = field(default=None, init=False, repr=False)

    def load(self) -> Dict[str, str]:
        if self._values is None:
            self._values = self._read() if self.path.exists() else {}
        return self._values

    def get(self, key: str, default: str | None = None) -> str | None:
        return self.load().get(key, default)

    def _read(self) -> Dict[str, str]:
        values: Dict[str, str] = {}
        for number, line in enumerate(self.path.read_text().splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            key, sep, value = stripped.partition("=")
            if not sep:
                LOGGER.warning("%s:%d: ignoring line without '='", self.path, number)
                continue
            key = key.strip()
            if key.startswith("WIFIDOP_") and key not in KNOWN_KEYS:
                LOGGER.warning("%s:%d: unknown setting %s", self.path, number, key)
            values[key] = value.strip().strip('"').strip("'")
        LOGGER.debug("Read %d settings from %s", len(values), self.path)
        return values


@dataclass(frozen=True)
class Settings:
    """Resolved settings shared by the CLI commands."""

    seed: int | None = None
    good_dop_max: float = DEFAULT_GOOD_DOP_MAX
    alert_dop: float | None = None
    friis_legacy_inversion: bool = False
    workers: int = 1


def load_settings(
    path: Path | None = None,
    environ: Mapping[str, str] | None = None,
) -> Settings:
    """Return settings with the environment overriding the file and the file overriding defaults."""
    settings_file = SettingsFile(path or Path.cwd() / SETTINGS_FILENAME)
    merged: Dict[str, str] = {
        key: value for key, value in settings_file.load().items() if key in KNOWN_KEYS
    }
    source = os.environ if environ is None else environ
    for key in KNOWN_KEYS:
        if key in source:
            merged[key] = source[key]

    defaults = Settings()
    workers = _convert(merged, KEY_WORKERS, int, defaults.workers)
    if workers < 1:
        raise ValidationError(KEY_WORKERS, "must be at least 1")
    good_dop_max = _convert(merged, KEY_GOOD_DOP_MAX, float, defaults.good_dop_max)
    if good_dop_max <= 0:
        raise ValidationError(KEY_GOOD_DOP_MAX, "must be positive")
    return Settings(
        seed=_convert(merged, KEY_SEED, int, None),
        good_dop_max=good_dop_max,
        alert_dop=_convert(merged, KEY_ALERT_DOP, float, None),
        friis_legacy_inversion=_convert(
            merged, KEY_FRIIS_LEGACY_INVERSION, _as_bool, defaults.friis_legacy_inversion
        ),
        workers=workers,
    )


def _convert(data: Mapping[str, str], key: str, factory: Callable[[str], T], default: T) -> T:
    raw = data.get(key)
    if raw is None or raw.strip() == "":
        return default
    try:
        return factory(raw.strip())
    except ValueError as err:
        raise ValidationError(key, f"cannot interpret {raw!r}") from err


def _as_bool(raw: str) -> bool:
    lowered = raw.lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise ValueError(raw)
