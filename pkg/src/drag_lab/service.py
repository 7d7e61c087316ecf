"""HTTP generation service: accepts first frame + annotation, runs sampling
jobs one at a time, serves result frames and tracking overlays."""

from __future__ import annotations

import io
import json
import queue
import shutil
import tempfile
import threading
import time
import uuid
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.responses import FileResponse, JSONResponse
from PIL import Image

from .annotations import annotation_from_dict, annotation_to_dict
from .errors import AnnotationError
from .evaluation import objmc, track_centroid
from .sampling import GenerationRequest, sample_video
from .training import load_checkpoint_payload, load_model

DEFAULT_QUEUE_CAPACITY = 8
DEFAULT_TTL_SECONDS = 3600.0
DEFAULT_MAX_UPLOAD_BYTES = 4 * 1024 * 1024


@dataclass
class Job:
    job_id: str
    request_echo: dict
    created_at: float
    sample_request: GenerationRequest = field(repr=False, default=None)
    status: str = "queued"  # queued -> running -> done | failed
    finished_at: float | None = None
    warning: str | None = None
    error: str | None = None
    frame_count: int = 0
    tracked: dict | None = None
    objmc_report: dict | None = None
    anchored: dict | None = None


class GenerationService:
    """Owns the model, the job queue, and the single worker thread."""

    def __init__(self, checkpoint=None, results_dir=None,
                 queue_capacity: int = DEFAULT_QUEUE_CAPACITY,
                 ttl_seconds: float = DEFAULT_TTL_SECONDS,
                 max_upload_bytes: int = DEFAULT_MAX_UPLOAD_BYTES):
        self.config = None
        self.model = None
        self.checkpoint_step = None
        if checkpoint is not None:
            self.config, self.model = load_model(checkpoint)
            self.checkpoint_step = load_checkpoint_payload(checkpoint)["step"]
        self.results_dir = Path(results_dir) if results_dir else Path(
            tempfile.mkdtemp(prefix="drag_lab_results_"))
        self.results_dir.mkdir(parents=True, exist_ok=True)
        self.ttl_seconds = ttl_seconds
        self.max_upload_bytes = max_upload_bytes
        self.jobs: dict[str, Job] = {}
        self.jobs_lock = threading.Lock()
        self.job_queue: queue.Queue[str] = queue.Queue(maxsize=queue_capacity)
        self._worker: threading.Thread | None = None
        self._stop = threading.Event()

    # -- lifecycle ---------------------------------------------------------
    def start(self):
        if self._worker is None:
            self._stop.clear()
            self._worker = threading.Thread(target=self._drain, daemon=True)
            self._worker.start()

    def stop(self):
        self._stop.set()
        if self._worker is not None:
            self.job_queue.put(None)
            self._worker.join(timeout=10)
            self._worker = None

    def _drain(self):
        while not self._stop.is_set():
            job_id = self.job_queue.get()
            if job_id is None:
                break
            self._process(job_id)

    # -- job processing ----------------------------------------------------
    def _process(self, job_id: str):
        with self.jobs_lock:
            job = self.jobs.get(job_id)
            if job is None:
                return
            job.status = "running"
        try:
            result = sample_video(job.sample_request, (self.config, self.model))
            job_dir = self.results_dir / job_id
            job_dir.mkdir(parents=True, exist_ok=True)
            for i, frame in enumerate(result.frames):
                img = Image.fromarray(
                    np.clip(frame * 255.0, 0, 255).round().astype(np.uint8))
                img.save(job_dir / f"frame_{i:03d}.png")
            tracked = {}
            reference = {}
            for entity in job.sample_request.entities:
                tracked[entity.entity_id] = track_centroid(
                    result.frames, entity.mask).tolist()
                reference[entity.entity_id] = entity.trajectory
            report = None
            if tracked:
                report = objmc(
                    {k: np.asarray(v) for k, v in tracked.items()},
                    reference).to_dict()
            with self.jobs_lock:
                job.frame_count = len(result.frames)
                job.tracked = tracked
                job.objmc_report = report
                job.anchored = {
                    eid: result.anchored_trajectories[k].tolist()
                    for k, eid in enumerate(result.entity_ids)}
                job.status = "done"
                job.finished_at = time.monotonic()
        except Exception as exc:  # job failures must not kill the worker
            with self.jobs_lock:
                job.status = "failed"
                job.error = f"{type(exc).__name__}: {exc}"
                job.finished_at = time.monotonic()

    # -- job store ---------------------------------------------------------
    def gc_expired(self):
        now = time.monotonic()
        with self.jobs_lock:
            expired = [jid for jid, job in self.jobs.items()
                       if job.finished_at is not None
                       and now - job.finished_at > self.ttl_seconds]
            for jid in expired:
                del self.jobs[jid]
        for jid in expired:
            shutil.rmtree(self.results_dir / jid, ignore_errors=True)

    def submit(self, job: Job):
        with self.jobs_lock:
            self.jobs[job.job_id] = job
        try:
            self.job_queue.put_nowait(job.job_id)
        except queue.Full:
            with self.jobs_lock:
                del self.jobs[job.job_id]
            raise

    def get(self, job_id: str) -> Job | None:
        with self.jobs_lock:
            return self.jobs.get(job_id)


def _decode_png(data: bytes) -> np.ndarray:
    image = Image.open(io.BytesIO(data)).convert("RGB")
    return np.asarray(image, dtype=np.float32) / 255.0


def create_app(checkpoint=None, results_dir=None,
               queue_capacity: int = DEFAULT_QUEUE_CAPACITY,
               ttl_seconds: float = DEFAULT_TTL_SECONDS,
               max_upload_bytes: int = DEFAULT_MAX_UPLOAD_BYTES,
               static_dir=None) -> FastAPI:
    service = GenerationService(checkpoint=checkpoint, results_dir=results_dir,
                                queue_capacity=queue_capacity,
                                ttl_seconds=ttl_seconds,
                                max_upload_bytes=max_upload_bytes)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        service.start()
        yield
        service.stop()

    app = FastAPI(title="drag-lab", lifespan=lifespan)
    app.state.service = service

    @app.get("/api/health")
    def health():
        if service.model is None:
            return {"status": "degraded", "checkpoint_step": None}
        return {"status": "ok", "checkpoint_step": service.checkpoint_step}

    @app.get("/api/config")
    def config():
        if service.config is None:
            raise HTTPException(503, "no checkpoint loaded")
        data = service.config.data
        return {"length": data.length, "height": data.height, "width": data.width,
                "sampler_steps_default": service.config.schedule.T,
                "queue_capacity": service.job_queue.maxsize}

    @app.post("/api/generate", status_code=202)
    async def generate(frame: UploadFile = File(...),
                       annotation: str = Form(...),
                       steps: int | None = Form(default=None),
                       seed: int = Form(default=0)):
        if service.model is None:
            raise HTTPException(503, "no checkpoint loaded")
        service.gc_expired()
        payload = await frame.read()
        if len(payload) > service.max_upload_bytes:
            raise HTTPException(413, f"frame exceeds {service.max_upload_bytes} bytes")
        if len(annotation) > service.max_upload_bytes:
            raise HTTPException(413, "annotation too large")
        try:
            image = _decode_png(payload)
        except Exception as exc:
            raise HTTPException(400, f"frame is not a decodable image: {exc}")
        try:
            doc = json.loads(annotation)
            ann = annotation_from_dict(doc)
        except (AnnotationError, ValueError) as exc:
            raise HTTPException(400, f"annotation: {exc}")
        data = service.config.data
        if ann.frames != data.length:
            raise HTTPException(
                400, f"annotation.frames is {ann.frames}, model expects {data.length}")
        if (ann.height, ann.width) != (data.height, data.width):
            raise HTTPException(
                400, f"annotation grid {ann.height}x{ann.width} does not match "
                     f"model {data.height}x{data.width}")
        warning = None
        if image.shape[:2] != (data.height, data.width):
            original = image.shape[:2]
            pil = Image.fromarray((image * 255).astype(np.uint8)).resize(
                (data.width, data.height), Image.BILINEAR)
            image = np.asarray(pil, dtype=np.float32) / 255.0
            warning = (f"first frame resized from {original[0]}x{original[1]} "
                       f"to {data.height}x{data.width}")
        request = GenerationRequest(first_frame=image, entities=ann.entities,
                                    steps=steps, seed=seed)
        job = Job(job_id=uuid.uuid4().hex, created_at=time.monotonic(),
                  request_echo={"annotation": annotation_to_dict(ann),
                                "steps": steps, "seed": seed},
                  sample_request=request, warning=warning)
        try:
            service.submit(job)
        except queue.Full:
            raise HTTPException(503, "job queue is full, retry later")
        return {"job_id": job.job_id}

    @app.get("/api/jobs/{job_id}")
    def job_status(job_id: str):
        service.gc_expired()
        job = service.get(job_id)
        if job is None:
            raise HTTPException(404, f"unknown job {job_id!r}")
        body = {"job_id": job.job_id, "status": job.status,
                "request": job.request_echo, "warning": job.warning}
        if job.status == "failed":
            body["error"] = job.error
        if job.status == "done":
            body["result"] = {
                "frames": [f"/api/jobs/{job.job_id}/frames/{i}.png"
                           for i in range(job.frame_count)],
                "tracked": job.tracked,
                "anchored": job.anchored,
                "objmc": job.objmc_report,
            }
        return JSONResponse(body)

    @app.get("/api/jobs/{job_id}/frames/{index}.png")
    def job_frame(job_id: str, index: int):
        job = service.get(job_id)
        if job is None or job.status != "done":
            raise HTTPException(404, "unknown job or job not done")
        path = service.results_dir / job_id / f"frame_{index:03d}.png"
        if not path.exists():
            raise HTTPException(404, f"no frame {index}")
        return FileResponse(path, media_type="image/png")

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app
