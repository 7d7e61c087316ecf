import { clampToImage } from "./coords.js";
import { resamplePolyline, snapToRegion } from "./resample.js";
import { rleEncode } from "./rle.js";
import type { AnnotationDoc, Point } from "./types.js";

export const ENTITY_COLORS = ["#ff5252", "#4caf50", "#42a5f5", "#ffca28", "#ab47bc", "#26c6da"];

export interface EntityState {
  id: string;
  color: string;
  bitmap: Uint8Array; // row-major H*W, image space
  rawPath: Point[];
  trajectory: Point[] | null; // exactly L points once dragged
  trajectorySnapped: boolean;
}

/**
 * Pure annotation state: painted regions and trajectories in image space.
 * Rendering and pointer handling live in the canvas controller; this class
 * is what gets serialized to the wire.
 */
export class AnnotationState {
  readonly entities: EntityState[] = [];
  selected = 0;
  private locked = false;

  constructor(
    readonly width: number,
    readonly height: number,
    readonly frames: number,
  ) {
    this.addEntity();
  }

  get current(): EntityState {
    return this.entities[this.selected];
  }

  /** Submissions in flight freeze the annotation they were built from. */
  lock(): void {
    this.locked = true;
  }

  unlock(): void {
    this.locked = false;
  }

  get isLocked(): boolean {
    return this.locked;
  }

  private assertUnlocked(): void {
    if (this.locked) throw new Error("annotation is locked while a job is in flight");
  }

  addEntity(): EntityState {
    const index = this.entities.length;
    const entity: EntityState = {
      id: `entity${index}`,
      color: ENTITY_COLORS[index % ENTITY_COLORS.length],
      bitmap: new Uint8Array(this.width * this.height),
      rawPath: [],
      trajectory: null,
      trajectorySnapped: false,
    };
    this.entities.push(entity);
    this.selected = index;
    return entity;
  }

  paint(center: Point, radius: number, erase = false): void {
    this.assertUnlocked();
    const bitmap = this.current.bitmap;
    const { x: cx, y: cy } = clampToImage(center, this.width, this.height);
    const r = Math.max(0.5, radius);
    const x0 = Math.max(0, Math.floor(cx - r));
    const x1 = Math.min(this.width - 1, Math.ceil(cx + r));
    const y0 = Math.max(0, Math.floor(cy - r));
    const y1 = Math.min(this.height - 1, Math.ceil(cy + r));
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) {
        if ((x - cx) ** 2 + (y - cy) ** 2 <= r * r) {
          bitmap[y * this.width + x] = erase ? 0 : 1;
        }
      }
    }
    if (erase && !bitmap.some((v) => v)) {
      this.current.trajectory = null; // region gone: trajectory no longer anchored
    }
  }

  pixelCount(entity: EntityState): number {
    return entity.bitmap.reduce((a, b) => a + b, 0);
  }

  /**
   * Record a drag: resample the raw pointer path to exactly L points and
   * snap the start inside the painted region.
   */
  setTrajectory(rawPath: Point[]): void {
    this.assertUnlocked();
    const entity = this.current;
    if (!entity.bitmap.some((v) => v)) {
      throw new Error("paint the entity region before dragging a trajectory");
    }
    const clamped = rawPath.map((p) => clampToImage(p, this.width, this.height));
    const resampled = resamplePolyline(clamped, this.frames);
    const { point, snapped } = snapToRegion(resampled[0], entity.bitmap, this.width, this.height);
    if (snapped) {
      const dx = point.x - resampled[0].x;
      const dy = point.y - resampled[0].y;
      for (const q of resampled) {
        const moved = clampToImage({ x: q.x + dx, y: q.y + dy }, this.width, this.height);
        q.x = moved.x;
        q.y = moved.y;
      }
      resampled[0] = { ...point };
    }
    entity.rawPath = clamped;
    entity.trajectory = resampled;
    entity.trajectorySnapped = snapped;
  }

  /** Entities ready for submission: painted and dragged. */
  submissionBlockers(): string[] {
    const blockers: string[] = [];
    for (const entity of this.entities) {
      if (!entity.bitmap.some((v) => v)) {
        blockers.push(`${entity.id}: region is empty`);
      } else if (!entity.trajectory) {
        blockers.push(`${entity.id}: no trajectory drawn`);
      }
    }
    return blockers;
  }

  toAnnotationDoc(): AnnotationDoc {
    const blockers = this.submissionBlockers();
    if (blockers.length) throw new Error(blockers.join("; "));
    return {
      width: this.width,
      height: this.height,
      frames: this.frames,
      entities: this.entities.map((entity) => ({
        id: entity.id,
        mask_rle: rleEncode(entity.bitmap),
        trajectory: entity.trajectory!.map((p) => [p.x, p.y] as [number, number]),
      })),
    };
  }
}
