import { imageToCanvas, type ViewTransform } from "./coords.js";
import type { JobResult, Point } from "./types.js";

/** Loads result frames and plays them with requested-vs-tracked overlays. */
export class ClipPlayer {
  private frames: HTMLImageElement[] = [];
  private index = 0;
  private timer: number | null = null;
  fps = 4;
  showOverlay = true;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly view: () => ViewTransform,
  ) {}

  async load(result: JobResult): Promise<void> {
    this.stop();
    this.frames = await Promise.all(
      result.frames.map(
        (url) =>
          new Promise<HTMLImageElement>((resolve, reject) => {
            const img = new Image();
            img.onload = () => resolve(img);
            img.onerror = () => reject(new Error(`failed to load ${url}`));
            img.src = url;
          }),
      ),
    );
    this.index = 0;
  }

  get frameCount(): number {
    return this.frames.length;
  }

  play(requested: Record<string, Point[]>, tracked: Record<string, [number, number][]>): void {
    this.stop();
    if (!this.frames.length) return;
    const tick = () => {
      this.drawFrame(this.index, requested, tracked);
      this.index = (this.index + 1) % this.frames.length;
    };
    tick();
    this.timer = window.setInterval(tick, 1000 / this.fps);
  }

  stop(): void {
    if (this.timer !== null) {
      window.clearInterval(this.timer);
      this.timer = null;
    }
  }

  drawFrame(
    index: number,
    requested: Record<string, Point[]>,
    tracked: Record<string, [number, number][]>,
  ): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx || !this.frames.length) return;
    const vt = this.view();
    const frame = this.frames[index];
    ctx.imageSmoothingEnabled = false;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    const origin = imageToCanvas({ x: 0, y: 0 }, vt);
    ctx.drawImage(frame, origin.x, origin.y, frame.width * vt.scale, frame.height * vt.scale);
    if (!this.showOverlay) return;
    for (const [eid, path] of Object.entries(requested)) {
      this.drawPath(ctx, path, vt, "#ffca28", index);
      const track = tracked[eid];
      if (track) {
        this.drawPath(ctx, track.map(([x, y]) => ({ x, y })), vt, "#42a5f5", index);
      }
    }
  }

  private drawPath(
    ctx: CanvasRenderingContext2D,
    path: Point[],
    vt: ViewTransform,
    color: string,
    upTo: number,
  ): void {
    if (!path.length) return;
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    path.forEach((p, i) => {
      const c = imageToCanvas(p, vt);
      if (i === 0) ctx.moveTo(c.x, c.y);
      else ctx.lineTo(c.x, c.y);
    });
    ctx.stroke();
    const head = imageToCanvas(path[Math.min(upTo, path.length - 1)], vt);
    ctx.fillStyle = color;
    ctx.beginPath();
    ctx.arc(head.x, head.y, 4, 0, 2 * Math.PI);
    ctx.fill();
  }
}
