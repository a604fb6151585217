"""Shared builders for the test suite."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

from wifidop.propagation import PropagationModel, forward_rss
from wifidop.radio import AccessPoint, Environment, Receiver, RssScan

REPO_ROOT = Path(__file__).resolve().parents[1]


def make_env(
    positions: Sequence[Sequence[float]],
    *,
    threshold: float = 0.0,
    dimension: int = 3,
    tx_power: float = 100.0,
    wavelength: float = 0.125,
) -> Environment:
    aps = [
        AccessPoint(id=f"ap-{index:02d}", position=tuple(position), tx_power=tx_power, wavelength=wavelength)
        for index, position in enumerate(positions)
    ]
    return Environment(aps=aps, receiver=Receiver(1.0), dimension=dimension, ss_threshold=threshold)


def exact_scan(
    env: Environment,
    point: Sequence[float],
    model: PropagationModel | None = None,
    timestamp: float = 0.0,
) -> RssScan:
    model = model or PropagationModel.friis()
    readings = {
        ap.id: forward_rss(model, ap, env.receiver, math.dist(ap.position, point)) for ap in env.aps
    }
    return RssScan(timestamp=timestamp, readings=readings, truth=tuple(point))
