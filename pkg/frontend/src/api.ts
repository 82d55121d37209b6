import {
  ApiClient,
  BundlePayload,
  FilterResponse,
  Params,
  RerankResponse,
  SessionResponse,
  TuneResponse,
} from "./types.js";

/** fetch-based client; the base URL is the page's single configuration knob. */
export class HttpApiClient implements ApiClient {
  constructor(private readonly baseUrl: string) {}

  private async post<T>(path: string, body: unknown, signal?: AbortSignal): Promise<T> {
    const resp = await fetch(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    const payload = await resp.json();
    if (!resp.ok) {
      const code = payload?.error?.code ?? resp.status;
      const message = payload?.error?.message ?? "request failed";
      throw new Error(`${code}: ${message}`);
    }
    return payload as T;
  }

  createSession(galleryId: string, bundle: BundlePayload, k: number): Promise<SessionResponse> {
    return this.post("/sessions", { gallery_id: galleryId, bundle, k });
  }

  rerank(
    sessionId: string,
    params: Params,
    k: number,
    useFilter: boolean,
    signal?: AbortSignal,
  ): Promise<RerankResponse> {
    return this.post(
      `/sessions/${sessionId}/rerank`,
      { params, k, use_filter: useFilter },
      signal,
    );
  }

  applyFilter(sessionId: string, mode: string, threshold: number): Promise<FilterResponse> {
    return this.post(`/sessions/${sessionId}/filter`, { mode, threshold });
  }

  tune(sessionId: string, alphaT: number): Promise<TuneResponse> {
    return this.post(`/sessions/${sessionId}/tune`, { alpha_t: alphaT });
  }
}
