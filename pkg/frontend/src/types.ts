export interface EntityDoc {
  id: string;
  mask_rle: number[];
  trajectory: [number, number][];
}

export interface AnnotationDoc {
  width: number;
  height: number;
  frames: number;
  entities: EntityDoc[];
}

export interface ServerConfig {
  length: number;
  height: number;
  width: number;
  sampler_steps_default: number;
  queue_capacity: number;
}

export interface ObjMCReport {
  per_entity: Record<string, number>;
  mean_objmc: number;
  per_frame: Record<string, number[]>;
}

export interface JobResult {
  frames: string[];
  tracked: Record<string, [number, number][]>;
  anchored: Record<string, [number, number][]>;
  objmc: ObjMCReport | null;
}

export interface JobStatus {
  job_id: string;
  status: "queued" | "running" | "done" | "failed";
  request: { annotation: AnnotationDoc; steps: number | null; seed: number };
  warning: string | null;
  error?: string;
  result?: JobResult;
}

export type Point = { x: number; y: number };
