import type { AnnotationDoc, JobStatus, ServerConfig } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export interface GenerateOptions {
  steps?: number | null;
  seed?: number;
}

export interface PollOptions {
  intervalMs?: number;
  maxIntervalMs?: number;
  timeoutMs?: number;
  onUpdate?: (job: JobStatus) => void;
}

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = await response.json();
    return typeof body.detail === "string" ? body.detail : JSON.stringify(body);
  } catch {
    return response.statusText;
  }
}

/** Thin client over the generation service; `fetchFn` is injectable for tests. */
export function createClient(baseUrl = "", fetchFn: typeof fetch = fetch) {
  async function getJson<T>(path: string): Promise<T> {
    const response = await fetchFn(`${baseUrl}${path}`);
    if (!response.ok) throw new ApiError(response.status, await errorDetail(response));
    return (await response.json()) as T;
  }

  return {
    config(): Promise<ServerConfig> {
      return getJson<ServerConfig>("/api/config");
    },

    job(jobId: string): Promise<JobStatus> {
      return getJson<JobStatus>(`/api/jobs/${jobId}`);
    },

    async generate(frame: Blob, annotation: AnnotationDoc, opts: GenerateOptions = {}): Promise<string> {
      const form = new FormData();
      form.append("frame", frame, "frame.png");
      form.append("annotation", JSON.stringify(annotation));
      if (opts.steps != null) form.append("steps", String(opts.steps));
      form.append("seed", String(opts.seed ?? 0));
      const response = await fetchFn(`${baseUrl}/api/generate`, {
        method: "POST",
        body: form,
      });
      if (!response.ok) throw new ApiError(response.status, await errorDetail(response));
      const body = (await response.json()) as { job_id: string };
      return body.job_id;
    },

    /** Poll until the job reaches a terminal state (500 ms with backoff). */
    async pollUntilDone(jobId: string, opts: PollOptions = {}): Promise<JobStatus> {
      const start = Date.now();
      let interval = opts.intervalMs ?? 500;
      const maxInterval = opts.maxIntervalMs ?? 5000;
      const timeout = opts.timeoutMs ?? 10 * 60 * 1000;
      for (;;) {
        const job = await this.job(jobId);
        opts.onUpdate?.(job);
        if (job.status === "done" || job.status === "failed") return job;
        if (Date.now() - start > timeout) {
          throw new Error(`job ${jobId} still ${job.status} after ${timeout} ms`);
        }
        await new Promise((resolve) => setTimeout(resolve, interval));
        interval = Math.min(interval * 1.5, maxInterval);
      }
    },
  };
}

export type Client = ReturnType<typeof createClient>;
