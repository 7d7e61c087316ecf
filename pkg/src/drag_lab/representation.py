"""Entity geometry and the spatial conditioning maps built from it.

Coordinate convention: points are (x, y) with x the column and y the row,
both in pixels. Masks and maps are indexed [row, col], i.e. [y, x].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import distance_transform_edt

from .errors import InvalidEntityError

# Gaussian bumps effectively vanish at the disk edge: sigma = radius / SIGMA_DIVISOR
# puts the edge at 3 sigma.
SIGMA_DIVISOR = 3.0


@dataclass(frozen=True)
class Incircle:
    """Largest circle inscribed in a binary mask.

    ``center`` is an (x, y) pixel coordinate lying on a foreground pixel;
    ``radius`` is the Euclidean distance from the center to the nearest
    background pixel, where everything outside the image counts as background.
    """

    center: tuple[float, float]
    radius: float


@dataclass
class Trajectory:
    """Per-entity motion path: one (x, y) point per frame."""

    entity_id: str
    points: np.ndarray  # (L, 2) float64, columns (x, y)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"trajectory points must be (L, 2), got {pts.shape}")
        if not np.isfinite(pts).all():
            raise ValueError("trajectory points must be finite")
        self.points = pts

    def __len__(self):
        return self.points.shape[0]


@dataclass
class EntityMask:
    """Binary region of one entity on the first frame."""

    entity_id: str
    grid: np.ndarray = field(repr=False)  # (H, W) bool

    def __post_init__(self):
        grid = np.asarray(self.grid)
        if grid.ndim != 2:
            raise ValueError(f"mask grid must be 2D, got shape {grid.shape}")
        self.grid = grid.astype(bool)


def compute_incircle(mask: np.ndarray) -> Incircle:
    """Return the largest inscribed circle of a binary mask.

    The center is the foreground pixel with maximal Euclidean distance to the
    nearest background pixel; the image border counts as background. Ties are
    broken by the smallest (row, col) in lexicographic order.
    """
    grid = np.asarray(mask).astype(bool)
    if grid.ndim != 2:
        raise ValueError(f"mask must be 2D, got shape {grid.shape}")
    if not grid.any():
        raise InvalidEntityError("entity mask has no foreground pixels")
    # One ring of padding makes the out-of-image border count as background;
    # the nearest outside pixel is always in the first ring.
    padded = np.pad(grid, 1)
    dist = distance_transform_edt(padded)[1:-1, 1:-1]
    dist[~grid] = 0.0
    row, col = np.unravel_index(np.argmax(dist), dist.shape)  # first max: smallest (row, col)
    return Incircle(center=(float(col), float(row)), radius=float(dist[row, col]))


def clamp_point(point, height: int, width: int) -> tuple[float, float]:
    """Clamp an (x, y) point to the frame rectangle [0, W-1] x [0, H-1]."""
    x = min(max(float(point[0]), 0.0), float(width - 1))
    y = min(max(float(point[1]), 0.0), float(height - 1))
    return x, y


def rasterize_gaussian(center, radius: float, height: int, width: int) -> np.ndarray:
    """Rasterize exp(-d^2 / (2 sigma^2)) around ``center`` with sigma = radius/3.

    The center is clamped to the frame rectangle before rasterization, so the
    bump never vanishes when a trajectory point exits the canvas.
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    cx, cy = clamp_point(center, height, width)
    sigma = radius / SIGMA_DIVISOR
    xs = np.arange(width, dtype=np.float64)
    ys = np.arange(height, dtype=np.float64)
    d2 = (xs[None, :] - cx) ** 2 + (ys[:, None] - cy) ** 2
    return np.exp(-d2 / (2.0 * sigma * sigma))


def insert_entity_embedding(canvas: np.ndarray, embedding: np.ndarray,
                            center, radius: float) -> np.ndarray:
    """Return a copy of ``canvas`` with ``embedding`` written into a disk.

    Every pixel within ``radius`` of the (clamped) center is set to the
    embedding vector; all other pixels keep their prior value, so overlapping
    entities resolve by insertion order.
    """
    canvas = np.asarray(canvas)
    if canvas.ndim != 3:
        raise ValueError(f"canvas must be (H, W, C), got shape {canvas.shape}")
    embedding = np.asarray(embedding, dtype=canvas.dtype)
    if embedding.ndim != 1 or embedding.shape[0] != canvas.shape[2]:
        raise ValueError(
            f"embedding has {embedding.shape} channels, canvas expects {canvas.shape[2]}")
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    height, width = canvas.shape[:2]
    cx, cy = clamp_point(center, height, width)
    xs = np.arange(width, dtype=np.float64)
    ys = np.arange(height, dtype=np.float64)
    d2 = (xs[None, :] - cx) ** 2 + (ys[:, None] - cy) ** 2
    out = canvas.copy()
    out[d2 <= radius * radius] = embedding
    return out


def build_representation_sequences(entities, length: int, height: int, width: int,
                                   channels: int) -> tuple[np.ndarray, np.ndarray]:
    """Build the per-frame entity-embedding maps and Gaussian heatmaps.

    ``entities`` is a sequence of (embedding, trajectory, radius) triples; the
    radius comes from the first-frame incircle and is held fixed across frames.
    Frame i carries, for each entity, the embedding disk and the Gaussian bump
    at that entity's i-th trajectory point. Embedding overlaps resolve by
    insertion order (later overwrites); Gaussian maps combine by pixelwise max.

    Returns ``(entity_maps, gaussian_maps)`` with shapes (L, H, W, C) and
    (L, H, W), both float32.
    """
    entity_maps = np.zeros((length, height, width, channels), dtype=np.float32)
    gaussian_maps = np.zeros((length, height, width), dtype=np.float32)
    for embedding, trajectory, radius in entities:
        points = trajectory.points if isinstance(trajectory, Trajectory) else np.asarray(trajectory, dtype=np.float64)
        if points.shape[0] != length:
            raise ValueError(
                f"trajectory has {points.shape[0]} points, expected clip length {length}")
        embedding = np.asarray(embedding, dtype=np.float32)
        if embedding.shape != (channels,):
            raise ValueError(
                f"embedding shape {embedding.shape} does not match channel count {channels}")
        for i in range(length):
            entity_maps[i] = insert_entity_embedding(
                entity_maps[i], embedding, points[i], radius)
            bump = rasterize_gaussian(points[i], radius, height, width)
            np.maximum(gaussian_maps[i], bump.astype(np.float32), out=gaussian_maps[i])
    return entity_maps, gaussian_maps
