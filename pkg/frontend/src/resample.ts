import type { Point } from "./types.js";

/**
 * Resample a pointer path to exactly `count` points, evenly spaced by arc
 * length, preserving both endpoints. A degenerate path (single click) yields
 * `count` copies of the point: a static entity.
 */
export function resamplePolyline(path: Point[], count: number): Point[] {
  if (count < 2) throw new Error(`need at least 2 output points, got ${count}`);
  if (path.length === 0) throw new Error("empty path");
  const cumulative = [0];
  for (let i = 1; i < path.length; i++) {
    const d = Math.hypot(path[i].x - path[i - 1].x, path[i].y - path[i - 1].y);
    cumulative.push(cumulative[i - 1] + d);
  }
  const total = cumulative[cumulative.length - 1];
  if (total === 0) {
    return Array.from({ length: count }, () => ({ ...path[0] }));
  }
  const out: Point[] = [];
  let seg = 0;
  for (let k = 0; k < count; k++) {
    const target = (total * k) / (count - 1);
    while (seg < path.length - 2 && cumulative[seg + 1] < target) seg++;
    const span = cumulative[seg + 1] - cumulative[seg];
    const t = span === 0 ? 0 : (target - cumulative[seg]) / span;
    out.push({
      x: path[seg].x + (path[seg + 1].x - path[seg].x) * t,
      y: path[seg].y + (path[seg + 1].y - path[seg].y) * t,
    });
  }
  // endpoints must survive resampling exactly
  out[0] = { ...path[0] };
  out[count - 1] = { ...path[path.length - 1] };
  return out;
}

/**
 * Snap a point to the nearest painted pixel of a region bitmap (row-major
 * Uint8Array). Returns the point unchanged when it already lies inside.
 */
export function snapToRegion(
  p: Point,
  bitmap: Uint8Array,
  width: number,
  height: number,
): { point: Point; snapped: boolean } {
  const px = Math.round(p.x);
  const py = Math.round(p.y);
  if (px >= 0 && py >= 0 && px < width && py < height && bitmap[py * width + px]) {
    return { point: p, snapped: false };
  }
  let best: Point | null = null;
  let bestD = Infinity;
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      if (!bitmap[y * width + x]) continue;
      const d = (x - p.x) ** 2 + (y - p.y) ** 2;
      if (d < bestD) {
        bestD = d;
        best = { x, y };
      }
    }
  }
  if (best === null) throw new Error("region is empty; paint it first");
  return { point: best, snapped: true };
}
