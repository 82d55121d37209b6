export interface Params {
  alpha_t: number;
  alpha_i: number;
  beta: number;
}

export interface RankEntry {
  id: string;
  score: number;
}

export interface Ranking {
  query_id: string;
  entries: RankEntry[];
}

export interface SessionResponse {
  session_id: string;
  ranking: Ranking;
  phi_deg: number | null;
}

export interface RerankResponse {
  ranking: Ranking;
  params_used: Params;
  filter_fallback: boolean;
}

export interface FilterResponse {
  kept_count: number;
  total: number;
}

export interface TuneResponse {
  alpha_i: number;
  loss: number;
  iterations: number;
  converged: boolean;
}

export interface BundlePayload {
  query_id: string;
  ref_text: number[];
  composed_text: number[];
  ref_image: number[];
  target_ids?: string[];
  subset_ids?: string[];
  prompt_text?: string;
  image_url?: string;
  target_embedding?: number[];
}

/** Service surface the explorer needs; the real client and test stubs both implement it. */
export interface ApiClient {
  createSession(galleryId: string, bundle: BundlePayload, k: number): Promise<SessionResponse>;
  rerank(
    sessionId: string,
    params: Params,
    k: number,
    useFilter: boolean,
    signal?: AbortSignal,
  ): Promise<RerankResponse>;
  applyFilter(sessionId: string, mode: string, threshold: number): Promise<FilterResponse>;
  tune(sessionId: string, alphaT: number): Promise<TuneResponse>;
}

export interface SliderConfig {
  min: number;
  max: number;
  step: number;
}

export const SLIDERS: Record<keyof Params, SliderConfig> = {
  alpha_t: { min: -0.5, max: 3.0, step: 0.1 },
  alpha_i: { min: -0.5, max: 2.0, step: 0.1 },
  beta: { min: 0.0, max: 1.0, step: 0.05 },
};

export const BASELINE_PARAMS: Params = { alpha_t: 1.0, alpha_i: 1.0, beta: 1.0 };

/** Clamp to the slider range and snap onto its step grid. */
export function quantize(cfg: SliderConfig, value: number): number {
  const clamped = Math.min(cfg.max, Math.max(cfg.min, value));
  const steps = Math.round((clamped - cfg.min) / cfg.step);
  const snapped = cfg.min + steps * cfg.step;
  // keep the float dust out of displayed values (0.30000000000000004 -> 0.3)
  const decimals = (cfg.step.toString().split(".")[1] ?? "").length;
  return Number(Math.min(cfg.max, Math.max(cfg.min, snapped)).toFixed(decimals));
}
