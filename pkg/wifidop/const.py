"""Constants for wifidop."""

from __future__ import annotations

import math

SNAP_COEFFICIENTS = (0.000198, -0.025, 1.14, -14.8)
SNAP_NORMAL_RANGE = (15.0, 90.0)
EPSILON_DISTANCE = 0.01

FRIIS_EXPONENT = 2.0
INTERLINK_EXPONENT = 3.5

MODEL_FRIIS = "friis"
MODEL_INTERLINK = "interlink"
MODEL_SNAP_WPS = "snap-wps"
MODEL_NAMES = (MODEL_FRIIS, MODEL_INTERLINK, MODEL_SNAP_WPS)

COINCIDENCE_TOLERANCE = 1e-9
SINGULAR_RTOL = 1e-10

DEFAULT_GOOD_DOP_MAX = 5.0
DEFAULT_MAX_ITERATIONS = 50
DEFAULT_STEP_TOLERANCE = 1e-6
DEFAULT_MAX_HALVINGS = 8
RESTART_RESIDUAL = 1e-6

DEFAULT_SIGMA_DB = 2.0
DEFAULT_SEED = 42
DEFAULT_DOP_BIN_EDGES = (0.0, 5.0, 10.0, 15.0, math.inf)

DEFAULT_FLOOR_HEIGHT = 3.0
DEFAULT_RX_HEIGHT = 1.0

SETTINGS_FILENAME = "wifidop.env"
