// Payload shapes mirroring the exploration service's HTTP+JSON API.

export interface ParamSpace {
  names: string[];
  ranges: [number, number][];
}

export interface PreferenceRow {
  index: number;
  params_raw: number[];
  params_normalized: number[];
  score: number;
}

export interface RunSummary {
  run_id: string;
  status: "running" | "done" | "failed";
  generations_done: number;
  weights: number[];
  error: string | null;
  config: {
    population: number;
    generations: number;
    mutation_rate: number;
    mutation_sigma: number;
    k_nearest: number;
    elite_count: number;
    uq_samples: number;
    seed: number;
  };
}

export interface SessionDoc {
  id: string;
  dataset: string;
  ae: string;
  flow: string;
  seed: number;
  param_space: ParamSpace;
  dims: number[];
  preferences: Array<{
    params_raw: number[];
    params_normalized: number[];
    score: number;
    latent_mean: number[];
  }>;
  runs: RunSummary[];
}

export interface SlicePayload {
  dims: number[];
  values: number[];
}

export interface PredictPayload {
  params_raw: number[];
  params_normalized: number[];
  n: number;
  seed: number;
  mean_slices: { x: SlicePayload; y: SlicePayload; z: SlicePayload };
  var_slices: { x: SlicePayload; y: SlicePayload; z: SlicePayload };
  latent_mean: number[];
  latent_var: number[];
  mean_uncertainty: number;
  latent_uncertainty: number;
  value_range: [number, number];
}

export interface CandidateDoc {
  id: number;
  params: number[];
  raw_params?: number[];
  sim: number;
  div: number;
  unc: number;
  fitness: number;
  parent_ids: number[];
  elite: boolean;
}

export interface GenerationDoc {
  index: number;
  weights: number[];
  mean_fitness: number;
  max_fitness: number;
  candidates: CandidateDoc[];
}

export interface RunDoc extends RunSummary {
  generations: GenerationDoc[];
}

export interface RecommendationEntry {
  params_normalized: number[];
  params_raw: number[];
  cluster_size: number;
  member_ids: number[];
}

export interface RecommendPayload {
  k: number;
  recommendations: RecommendationEntry[];
  projection: Array<{ candidate_id: number; x: number; y: number; cluster: number }>;
}

export interface ApiError {
  code: string;
  message: string;
  detail: unknown;
}
