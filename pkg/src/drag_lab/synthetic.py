"""Synthetic moving-shapes clips with analytically known masks and trajectories.

Shapes translate rigidly along closed-form motion paths, so the exact center
of every entity in every frame is known without running a tracker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SceneSpecError

# Bright, well-separated shape colors plus dark backgrounds so a color-tolerance
# tracker can always separate entities.
SHAPE_PALETTE = (
    (0.90, 0.15, 0.10),
    (0.15, 0.80, 0.20),
    (0.20, 0.35, 0.95),
    (0.95, 0.85, 0.15),
    (0.85, 0.20, 0.85),
    (0.15, 0.85, 0.85),
)
BACKGROUND_PALETTE = (
    (0.05, 0.05, 0.08),
    (0.10, 0.08, 0.05),
    (0.06, 0.10, 0.06),
)


@dataclass(frozen=True)
class LinearMotion:
    velocity: tuple[float, float]  # px/frame (vx, vy)

    def displacement(self, frame: int) -> tuple[float, float]:
        return self.velocity[0] * frame, self.velocity[1] * frame

    def max_step(self) -> float:
        return math.hypot(*self.velocity)


@dataclass(frozen=True)
class SinusoidalMotion:
    amplitude: tuple[float, float]  # px (ax, ay)
    period: float                   # frames per cycle
    phase: float = 0.0

    def displacement(self, frame: int) -> tuple[float, float]:
        s = math.sin(2.0 * math.pi * frame / self.period + self.phase)
        s0 = math.sin(self.phase)
        return self.amplitude[0] * (s - s0), self.amplitude[1] * (s - s0)

    def max_step(self) -> float:
        rate = 2.0 * math.pi / self.period
        return math.hypot(*self.amplitude) * rate


@dataclass(frozen=True)
class ShapeSpec:
    kind: str                       # "disk" | "square"
    color: tuple[float, float, float]
    size: float                     # full extent in px: diameter / side
    start: tuple[float, float]      # center at frame 0, (x, y)
    motion: LinearMotion | SinusoidalMotion

    def center(self, frame: int) -> tuple[float, float]:
        dx, dy = self.motion.displacement(frame)
        return self.start[0] + dx, self.start[1] + dy


@dataclass(frozen=True)
class SceneSpec:
    length: int
    height: int
    width: int
    shapes: tuple[ShapeSpec, ...]
    background: tuple[float, float, float] = BACKGROUND_PALETTE[0]
    seed: int = 0

    def __post_init__(self):
        if self.length < 1 or self.height < 4 or self.width < 4:
            raise SceneSpecError(f"degenerate scene dims L={self.length} "
                                 f"H={self.height} W={self.width}")
        object.__setattr__(self, "shapes", tuple(self.shapes))


def validate_scene(spec: SceneSpec) -> SceneSpec:
    """Check shape kinds, bounds at every frame, speed limits, and overlaps."""
    max_step = spec.height / 4.0
    for k, shape in enumerate(spec.shapes):
        if shape.kind not in ("disk", "square"):
            raise SceneSpecError(f"shape {k}: unknown kind {shape.kind!r}")
        if shape.size < 2.0:
            raise SceneSpecError(f"shape {k}: size {shape.size} is below 2 px")
        if shape.motion.max_step() > max_step:
            raise SceneSpecError(
                f"shape {k}: per-frame displacement {shape.motion.max_step():.2f} "
                f"exceeds H/4 = {max_step:.2f}")
        half = shape.size / 2.0
        for i in range(spec.length):
            cx, cy = shape.center(i)
            if (cx - half < 0 or cy - half < 0
                    or cx + half > spec.width - 1 or cy + half > spec.height - 1):
                raise SceneSpecError(
                    f"shape {k} out of bounds at frame {i}: "
                    f"center ({cx:.1f}, {cy:.1f}), size {shape.size}")
    for a in range(len(spec.shapes)):
        for b in range(a + 1, len(spec.shapes)):
            sa, sb = spec.shapes[a], spec.shapes[b]
            gap = (sa.size + sb.size) / 2.0
            for i in range(spec.length):
                ax, ay = sa.center(i)
                bx, by = sb.center(i)
                if abs(ax - bx) <= gap and abs(ay - by) <= gap:
                    raise SceneSpecError(
                        f"shapes {a} and {b} overlap at frame {i}")
    return spec


def _shape_mask(shape: ShapeSpec, center, height: int, width: int) -> np.ndarray:
    cx, cy = center
    half = shape.size / 2.0
    xs = np.arange(width, dtype=np.float64)
    ys = np.arange(height, dtype=np.float64)
    if shape.kind == "disk":
        d2 = (xs[None, :] - cx) ** 2 + (ys[:, None] - cy) ** 2
        return d2 <= half * half
    return (np.abs(xs[None, :] - cx) <= half) & (np.abs(ys[:, None] - cy) <= half)


@dataclass
class GeneratedClip:
    """A rendered scene plus its analytic ground truth."""

    spec: SceneSpec
    frames: np.ndarray = field(repr=False)        # (L, H, W, 3) float32 in [0, 1]
    masks: np.ndarray = field(repr=False)         # (K, L, H, W) bool
    trajectories: np.ndarray = field(repr=False)  # (K, L, 2) float64 analytic centers
    entity_ids: list[str] = field(default_factory=list)

    @property
    def first_frame_masks(self) -> np.ndarray:
        return self.masks[:, 0]


def generate_clip(spec: SceneSpec) -> GeneratedClip:
    """Render a scene spec into frames, per-frame entity masks, and trajectories.

    Deterministic: the same spec always produces bit-identical output. Shapes
    are drawn in declaration order; the analytic trajectory of each shape is
    its exact center path.
    """
    validate_scene(spec)
    length, height, width = spec.length, spec.height, spec.width
    n = len(spec.shapes)
    frames = np.empty((length, height, width, 3), dtype=np.float32)
    frames[:] = np.asarray(spec.background, dtype=np.float32)
    masks = np.zeros((n, length, height, width), dtype=bool)
    trajectories = np.zeros((n, length, 2), dtype=np.float64)
    for k, shape in enumerate(spec.shapes):
        color = np.asarray(shape.color, dtype=np.float32)
        for i in range(length):
            center = shape.center(i)
            trajectories[k, i] = center
            mask = _shape_mask(shape, center, height, width)
            masks[k, i] = mask
            frames[i][mask] = color
    ids = [f"shape{k}" for k in range(n)]
    return GeneratedClip(spec=spec, frames=frames, masks=masks,
                         trajectories=trajectories, entity_ids=ids)


def random_scene(seed: int, length: int = 8, height: int = 64, width: int = 64,
                 n_shapes: int = 2, max_speed: float = 2.0) -> SceneSpec:
    """Draw a valid random scene: distinct colors, in-bounds motion, no overlap."""
    rng = np.random.default_rng(seed)
    background = BACKGROUND_PALETTE[rng.integers(len(BACKGROUND_PALETTE))]
    color_order = rng.permutation(len(SHAPE_PALETTE))
    for _ in range(200):
        shapes = []
        for k in range(n_shapes):
            size = float(rng.integers(max(4, height // 8), max(6, height // 4) + 1))
            half = size / 2.0
            kind = "disk" if rng.random() < 0.5 else "square"
            color = SHAPE_PALETTE[color_order[k % len(SHAPE_PALETTE)]]
            if rng.random() < 0.5:
                speed = rng.uniform(0.5, max_speed, size=2) * rng.choice([-1.0, 1.0], size=2)
                motion = LinearMotion(velocity=(float(speed[0]), float(speed[1])))
            else:
                amp = rng.uniform(1.0, max_speed * length / (2.0 * math.pi), size=2)
                amp *= rng.choice([-1.0, 1.0], size=2)
                motion = SinusoidalMotion(amplitude=(float(amp[0]), float(amp[1])),
                                          period=float(rng.uniform(length, 2 * length)),
                                          phase=float(rng.uniform(0, 2 * math.pi)))
            disp = np.array([motion.displacement(i) for i in range(length)])
            lo_x = half - disp[:, 0].min()
            lo_y = half - disp[:, 1].min()
            hi_x = width - 1 - half - disp[:, 0].max()
            hi_y = height - 1 - half - disp[:, 1].max()
            if hi_x <= lo_x or hi_y <= lo_y:
                break
            start = (float(rng.uniform(lo_x, hi_x)), float(rng.uniform(lo_y, hi_y)))
            shapes.append(ShapeSpec(kind=kind, color=color, size=size,
                                    start=start, motion=motion))
        if len(shapes) != n_shapes:
            continue
        spec = SceneSpec(length=length, height=height, width=width,
                         shapes=tuple(shapes), background=background, seed=seed)
        try:
            return validate_scene(spec)
        except SceneSpecError:
            continue
    raise SceneSpecError(f"could not sample a valid scene for seed {seed}")
