import { AnnotationState } from "./annotator.js";
import { ApiError, createClient } from "./api.js";
import {
  canvasToImage,
  fitView,
  imageToCanvas,
  pan,
  zoomAt,
  type ViewTransform,
} from "./coords.js";
import { ClipPlayer } from "./player.js";
import type { JobStatus, Point, ServerConfig } from "./types.js";

type Tool = "paint" | "erase" | "drag" | "pan";

class App {
  private readonly client = createClient();
  private config!: ServerConfig;
  private state!: AnnotationState;
  private firstFrame: HTMLCanvasElement | null = null;
  private view: ViewTransform = { scale: 8, offsetX: 0, offsetY: 0 };
  private tool: Tool = "paint";
  private brush = 3;
  private pointerPath: Point[] = [];
  private painting = false;
  private inFlight = false;
  private player!: ClipPlayer;
  private lastJob: JobStatus | null = null;

  private readonly canvas = el<HTMLCanvasElement>("annotCanvas");
  private readonly resultCanvas = el<HTMLCanvasElement>("resultCanvas");
  private readonly status = el<HTMLDivElement>("status");
  private readonly objmcBox = el<HTMLDivElement>("objmc");
  private readonly entityList = el<HTMLDivElement>("entities");

  async start(): Promise<void> {
    try {
      this.config = await this.client.config();
    } catch (err) {
      this.report(`service unavailable: ${describe(err)}`, true);
      return;
    }
    this.state = new AnnotationState(this.config.width, this.config.height, this.config.length);
    this.view = fitView(this.config.width, this.config.height, this.canvas.width, this.canvas.height);
    this.player = new ClipPlayer(this.resultCanvas, () =>
      fitView(this.config.width, this.config.height, this.resultCanvas.width, this.resultCanvas.height),
    );
    this.bindControls();
    this.blankFrame();
    this.report(`ready: ${this.config.width}x${this.config.height}, ${this.config.length} frames`);
  }

  private bindControls(): void {
    for (const tool of ["paint", "erase", "drag", "pan"] as Tool[]) {
      el<HTMLButtonElement>(`tool-${tool}`).onclick = () => {
        this.tool = tool;
        this.refreshToolButtons();
      };
    }
    this.refreshToolButtons();
    el<HTMLInputElement>("brush").oninput = (e) => {
      this.brush = Number((e.target as HTMLInputElement).value);
    };
    el<HTMLButtonElement>("addEntity").onclick = () => {
      if (this.guardLocked()) return;
      this.state.addEntity();
      this.renderEntities();
      this.redraw();
    };
    el<HTMLButtonElement>("blankFrame").onclick = () => {
      if (!this.guardLocked()) this.blankFrame();
    };
    el<HTMLInputElement>("frameFile").onchange = async (e) => {
      if (this.guardLocked()) return;
      const input = e.target as HTMLInputElement;
      if (input.files?.length) await this.loadFrameFile(input.files[0]);
    };
    el<HTMLButtonElement>("submit").onclick = () => void this.submit();
    el<HTMLInputElement>("fps").oninput = (e) => {
      this.player.fps = Number((e.target as HTMLInputElement).value);
      this.replay();
    };
    el<HTMLInputElement>("overlay").onchange = (e) => {
      this.player.showOverlay = (e.target as HTMLInputElement).checked;
      this.replay();
    };

    this.canvas.addEventListener("pointerdown", (e) => this.pointerDown(e));
    this.canvas.addEventListener("pointermove", (e) => this.pointerMove(e));
    this.canvas.addEventListener("pointerup", (e) => this.pointerUp(e));
    this.canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      const rect = this.canvas.getBoundingClientRect();
      const at = { x: e.clientX - rect.left, y: e.clientY - rect.top };
      this.view = zoomAt(this.view, at, e.deltaY < 0 ? 1.25 : 0.8);
      this.redraw();
    });
  }

  private refreshToolButtons(): void {
    for (const tool of ["paint", "erase", "drag", "pan"] as Tool[]) {
      el<HTMLButtonElement>(`tool-${tool}`).classList.toggle("active", tool === this.tool);
    }
  }

  private guardLocked(): boolean {
    if (this.inFlight) {
      this.report("a job is in flight; wait for it to finish", true);
      return true;
    }
    return false;
  }

  private blankFrame(): void {
    const frame = document.createElement("canvas");
    frame.width = this.config.width;
    frame.height = this.config.height;
    const ctx = frame.getContext("2d")!;
    ctx.fillStyle = "#0d0d14";
    ctx.fillRect(0, 0, frame.width, frame.height);
    this.firstFrame = frame;
    this.redraw();
  }

  private async loadFrameFile(file: File): Promise<void> {
    const bitmap = await createImageBitmap(file);
    const frame = document.createElement("canvas");
    frame.width = this.config.width;
    frame.height = this.config.height;
    const ctx = frame.getContext("2d")!;
    ctx.drawImage(bitmap, 0, 0, frame.width, frame.height);
    this.firstFrame = frame;
    if (bitmap.width !== this.config.width || bitmap.height !== this.config.height) {
      this.report(
        `frame resized client-side from ${bitmap.width}x${bitmap.height} to ` +
          `${this.config.width}x${this.config.height}`,
      );
    }
    this.redraw();
  }

  // -- pointer handling ----------------------------------------------------
  private eventPoint(e: PointerEvent): Point {
    const rect = this.canvas.getBoundingClientRect();
    return canvasToImage({ x: e.clientX - rect.left, y: e.clientY - rect.top }, this.view);
  }

  private pointerDown(e: PointerEvent): void {
    this.canvas.setPointerCapture(e.pointerId);
    if (this.tool === "pan") {
      this.pointerPath = [{ x: e.clientX, y: e.clientY }];
      return;
    }
    if (this.inFlight) {
      this.report("annotation is locked while a job runs", true);
      return;
    }
    this.painting = true;
    const p = this.eventPoint(e);
    if (this.tool === "drag") {
      this.pointerPath = [p];
    } else {
      this.state.paint(p, this.brush, this.tool === "erase");
      this.redraw();
    }
  }

  private pointerMove(e: PointerEvent): void {
    if (this.tool === "pan" && this.pointerPath.length) {
      const last = this.pointerPath[this.pointerPath.length - 1];
      this.view = pan(this.view, e.clientX - last.x, e.clientY - last.y);
      this.pointerPath = [{ x: e.clientX, y: e.clientY }];
      this.redraw();
      return;
    }
    if (!this.painting) return;
    const p = this.eventPoint(e);
    if (this.tool === "drag") {
      this.pointerPath.push(p);
      this.redraw(this.pointerPath);
    } else {
      this.state.paint(p, this.brush, this.tool === "erase");
      this.redraw();
    }
  }

  private pointerUp(e: PointerEvent): void {
    if (this.tool === "pan") {
      this.pointerPath = [];
      return;
    }
    if (!this.painting) return;
    this.painting = false;
    if (this.tool === "drag") {
      try {
        this.state.setTrajectory(this.pointerPath.length ? this.pointerPath : [this.eventPoint(e)]);
        if (this.state.current.trajectorySnapped) {
          this.report("trajectory start snapped inside the painted region");
        }
      } catch (err) {
        this.report(describe(err), true);
      }
      this.pointerPath = [];
    }
    this.renderEntities();
    this.redraw();
  }

  // -- rendering -----------------------------------------------------------
  private redraw(liveDrag?: Point[]): void {
    const ctx = this.canvas.getContext("2d")!;
    ctx.imageSmoothingEnabled = false;
    ctx.fillStyle = "#1b1b22";
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    if (this.firstFrame) {
      const o = imageToCanvas({ x: 0, y: 0 }, this.view);
      ctx.drawImage(
        this.firstFrame,
        o.x,
        o.y,
        this.config.width * this.view.scale,
        this.config.height * this.view.scale,
      );
    }
    for (const entity of this.state.entities) {
      ctx.fillStyle = entity.color + "66";
      for (let y = 0; y < this.config.height; y++) {
        for (let x = 0; x < this.config.width; x++) {
          if (!entity.bitmap[y * this.config.width + x]) continue;
          const c = imageToCanvas({ x, y }, this.view);
          ctx.fillRect(c.x - this.view.scale / 2, c.y - this.view.scale / 2, this.view.scale, this.view.scale);
        }
      }
      const path = entity.trajectory;
      if (path) this.strokePath(ctx, path, entity.color);
    }
    if (liveDrag && liveDrag.length > 1) {
      this.strokePath(ctx, liveDrag, "#ffffff");
    }
  }

  private strokePath(ctx: CanvasRenderingContext2D, path: Point[], color: string): void {
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    path.forEach((p, i) => {
      const c = imageToCanvas(p, this.view);
      if (i === 0) ctx.moveTo(c.x, c.y);
      else ctx.lineTo(c.x, c.y);
    });
    ctx.stroke();
  }

  private renderEntities(): void {
    this.entityList.innerHTML = "";
    this.state.entities.forEach((entity, index) => {
      const row = document.createElement("button");
      row.className = "entity" + (index === this.state.selected ? " active" : "");
      row.style.borderColor = entity.color;
      const pixels = this.state.pixelCount(entity);
      const dragged = entity.trajectory ? "path ok" : "no path";
      row.textContent = `${entity.id} (${pixels} px, ${dragged})`;
      row.onclick = () => {
        this.state.selected = index;
        this.renderEntities();
      };
      this.entityList.appendChild(row);
    });
  }

  // -- submission ----------------------------------------------------------
  private async submit(): Promise<void> {
    if (this.inFlight) return;
    const blockers = this.state.submissionBlockers();
    if (blockers.length) {
      this.report(`cannot submit: ${blockers.join("; ")}`, true);
      return;
    }
    if (!this.firstFrame) {
      this.report("no first frame loaded", true);
      return;
    }
    const annotation = this.state.toAnnotationDoc();
    const blob = await new Promise<Blob>((resolve, reject) =>
      this.firstFrame!.toBlob((b) => (b ? resolve(b) : reject(new Error("PNG encode failed"))), "image/png"),
    );
    this.inFlight = true;
    this.state.lock();
    this.report("submitting...");
    try {
      const seed = Number(el<HTMLInputElement>("seed").value) || 0;
      const jobId = await this.client.generate(blob, annotation, { seed });
      this.report(`job ${jobId} queued`);
      const job = await this.client.pollUntilDone(jobId, {
        onUpdate: (j) => this.report(`job ${jobId}: ${j.status}`),
      });
      if (job.status === "failed") {
        this.report(`generation failed: ${job.error}`, true);
        return;
      }
      this.lastJob = job;
      if (job.warning) this.report(`done with warning: ${job.warning}`);
      await this.showResult(job);
    } catch (err) {
      if (err instanceof ApiError && err.status === 400) {
        this.report(`rejected: ${err.detail}`, true);
      } else {
        this.report(describe(err), true);
      }
    } finally {
      this.inFlight = false;
      this.state.unlock();
    }
  }

  private requestedPaths(job: JobStatus): Record<string, Point[]> {
    const out: Record<string, Point[]> = {};
    for (const entity of job.request.annotation.entities) {
      out[entity.id] = entity.trajectory.map(([x, y]) => ({ x, y }));
    }
    return out;
  }

  private async showResult(job: JobStatus): Promise<void> {
    if (!job.result) return;
    await this.player.load(job.result);
    this.replay();
    const report = job.result.objmc;
    if (report) {
      const rows = Object.entries(report.per_entity)
        .map(([eid, v]) => `${eid}: ${v.toFixed(2)} px`)
        .join(", ");
      this.objmcBox.textContent = `trajectory error (ObjMC) — ${rows}; mean ${report.mean_objmc.toFixed(2)} px`;
    }
    this.report(`job done: ${job.result.frames.length} frames`);
  }

  private replay(): void {
    if (this.lastJob?.result) {
      this.player.play(this.requestedPaths(this.lastJob), this.lastJob.result.tracked);
    }
  }

  private report(message: string, isError = false): void {
    this.status.textContent = message;
    this.status.classList.toggle("error", isError);
  }
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function describe(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}

if (typeof document !== "undefined" && document.getElementById("annotCanvas")) {
  void new App().start();
}
