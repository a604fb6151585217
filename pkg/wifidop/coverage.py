"""Grid-based coverage cells and their compactness indicators.

A cell is the set of pixels of one floor where an AP's field reaches the quality
threshold q. Its compactness is

    G'(C) = sum of V(b) over C / (8 |C| - 6 sqrt(pi |C|))

with V(b) the number of the 8 neighbours of b that are also in C. Floors are
independent layers: adjacency never crosses floors, and the building-wide
indicator is the size-weighted mean of the per-floor values.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .const import DEFAULT_FLOOR_HEIGHT, DEFAULT_RX_HEIGHT
from .errors import CellTooSmall, InvalidPixel, UnknownAp, ValidationError
from .propagation import PropagationModel, forward_rss_field
from .radio import Environment

LOGGER = logging.getLogger(__name__)

Pixel = tuple[int, int]

_MOORE = tuple((di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0))


@dataclass(frozen=True)
class CoverageGrid:
    """Per-AP field strengths (mW) on K floors of rows x cols pixels."""

    fields: Mapping[str, np.ndarray]
    pixel_size: float
    quality_threshold: float
    origin: tuple[float, float] = (0.0, 0.0)
    floor_height: float = DEFAULT_FLOOR_HEIGHT
    rx_height: float = DEFAULT_RX_HEIGHT

    def __post_init__(self) -> None:
        arrays = {ap_id: np.asarray(values, dtype=float) for ap_id, values in self.fields.items()}
        if not arrays:
            raise ValidationError("fields", "at least one access point field is required")
        shapes = {values.shape for values in arrays.values()}
        if len(shapes) != 1:
            raise ValidationError("fields", "all fields must share one shape")
        shape = shapes.pop()
        if len(shape) != 3 or min(shape) < 1:
            raise ValidationError("fields", f"expected (floors, rows, cols) >= 1, got {shape}")
        if not self.pixel_size > 0:
            raise ValidationError("pixel_size", "must be positive")
        if not self.quality_threshold >= 0:
            raise ValidationError("quality_threshold", "must be non-negative")
        object.__setattr__(self, "fields", arrays)

    @property
    def shape(self) -> tuple[int, int, int]:
        return next(iter(self.fields.values())).shape  # type: ignore[return-value]

    @property
    def floors(self) -> int:
        return self.shape[0]

    def pixel_center(self, floor: int, pixel: Pixel) -> tuple[float, float, float]:
        i, j = pixel
        x0, y0 = self.origin
        return (
            x0 + (j + 0.5) * self.pixel_size,
            y0 + (i + 0.5) * self.pixel_size,
            floor * self.floor_height + self.rx_height,
        )


@dataclass(frozen=True)
class Cell:
    """Pixels of one floor served by one AP, in row-major order."""

    floor: int
    pixels: tuple[Pixel, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "pixels", tuple(sorted({(int(i), int(j)) for i, j in self.pixels})))

    def __len__(self) -> int:
        return len(self.pixels)

    @cached_property
    def members(self) -> frozenset[Pixel]:
        return frozenset(self.pixels)


def build_grid(
    env: Environment,
    model: PropagationModel,
    width: float,
    height: float,
    pixel_size: float,
    floors: int = 1,
    *,
    quality_threshold: float = 0.0,
    floor_height: float = DEFAULT_FLOOR_HEIGHT,
    rx_height: float = DEFAULT_RX_HEIGHT,
    origin: tuple[float, float] = (0.0, 0.0),
) -> CoverageGrid:
    """Free-space fields of every AP sampled at pixel centres."""
    if not (width > 0 and height > 0 and pixel_size > 0):
        raise ValidationError("grid", "width, height and pixel size must be positive")
    if floors < 1:
        raise ValidationError("floors", "must be at least 1")
    cols = max(1, math.ceil(width / pixel_size - 1e-9))
    rows = max(1, math.ceil(height / pixel_size - 1e-9))
    xs = origin[0] + (np.arange(cols) + 0.5) * pixel_size
    ys = origin[1] + (np.arange(rows) + 0.5) * pixel_size
    zs = np.arange(floors) * floor_height + rx_height
    zz, yy, xx = np.meshgrid(zs, ys, xs, indexing="ij")

    fields: dict[str, np.ndarray] = {}
    for ap in env.aps:
        ax, ay, az = ap.position
        distances = np.sqrt((xx - ax) ** 2 + (yy - ay) ** 2 + (zz - az) ** 2)
        fields[ap.id] = forward_rss_field(model, ap, env.receiver, distances)
    LOGGER.debug("Built %d-floor %dx%d coverage grid for %d APs", floors, rows, cols, len(fields))
    return CoverageGrid(
        fields=fields,
        pixel_size=pixel_size,
        quality_threshold=quality_threshold,
        origin=origin,
        floor_height=floor_height,
        rx_height=rx_height,
    )


def extract_cell(grid: CoverageGrid, floor: int, ap: str) -> Cell:
    """Pixels of ``floor`` where the AP's field reaches the quality threshold."""
    if not 0 <= floor < grid.floors:
        raise IndexError(f"floor {floor} outside 0..{grid.floors - 1}")
    try:
        layer = grid.fields[ap][floor]
    except KeyError as err:
        raise UnknownAp(f"no field for access point {ap!r}") from err
    rows, cols = np.nonzero(layer >= grid.quality_threshold)
    return Cell(floor=floor, pixels=tuple(zip(rows.tolist(), cols.tolist())))


def neighbor_count(cell: Cell, pixel: Pixel) -> int:
    """V(b): how many of the 8 neighbours of ``pixel`` belong to the cell."""
    if pixel not in cell.members:
        raise InvalidPixel(f"pixel {pixel} is not part of the cell")
    i, j = pixel
    return sum((i + di, j + dj) in cell.members for di, dj in _MOORE)


def neighbor_sum(cell: Cell) -> int:
    """Sum of V(b) over the cell, computed on a padded occupancy mask."""
    if not cell.pixels:
        return 0
    coords = np.array(cell.pixels)
    low = coords.min(axis=0)
    extent = coords.max(axis=0) - low + 1
    mask = np.zeros(tuple(extent + 2), dtype=np.int64)
    mask[coords[:, 0] - low[0] + 1, coords[:, 1] - low[1] + 1] = 1
    inner = mask[1:-1, 1:-1]
    total = 0
    for di, dj in _MOORE:
        shifted = mask[1 + di : mask.shape[0] - 1 + di, 1 + dj : mask.shape[1] - 1 + dj]
        total += int(np.sum(inner * shifted))
    return total


def geometric_indicator(cell: Cell) -> float:
    """Compactness G'(C) of one cell."""
    size = len(cell)
    if size <= 1:
        raise CellTooSmall(f"cell on floor {cell.floor} has {size} pixel(s); at least 2 are needed")
    if size < 9:
        LOGGER.warning("Cell on floor %d has only %d pixels; G' may exceed 1", cell.floor, size)
    return neighbor_sum(cell) / (8.0 * size - 6.0 * math.sqrt(math.pi * size))


def wlan_indicator(cells: Sequence[Cell]) -> float:
    """Size-weighted mean of the per-floor indicators."""
    if not cells:
        raise ValidationError("cells", "at least one cell is required")
    values = [geometric_indicator(cell) for cell in cells]
    total = sum(len(cell) for cell in cells)
    return sum(len(cell) / total * value for cell, value in zip(cells, values))


def cell_rows(grid: CoverageGrid, cells: Iterable[Cell]) -> list[tuple[int, int, int, float, float]]:
    """Membership rows ``(floor, i, j, x, y)`` for dumping."""
    rows = []
    for cell in cells:
        for pixel in cell.pixels:
            x, y, _ = grid.pixel_center(cell.floor, pixel)
            rows.append((cell.floor, pixel[0], pixel[1], x, y))
    return rows
