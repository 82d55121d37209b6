import { ExplorerState, initialState, recordHistory } from "./state.js";
import { TrailingThrottle } from "./throttle.js";
import {
  ApiClient,
  BASELINE_PARAMS,
  BundlePayload,
  Params,
  SLIDERS,
  quantize,
} from "./types.js";

export interface ControllerOptions {
  k?: number;
  debounceMs?: number;
  filterMode?: string;
  filterThreshold?: number;
  onChange?: (state: ExplorerState) => void;
}

const DEFAULT_K = 50;
const DEFAULT_DEBOUNCE_MS = 150;

/** Orchestrates slider motion, re-ranking, filtering, tuning and pinning.
 *
 * Never does embedding math locally: every displayed score came out of a
 * service response. Slider motion is throttled to one rerank per 150 ms and
 * responses carry a sequence number so a slow, superseded response can never
 * overwrite a newer grid.
 */
export class ExplorerController {
  readonly state: ExplorerState = initialState();

  private readonly throttle: TrailingThrottle;
  private readonly k: number;
  private readonly filterMode: string;
  private readonly filterThreshold: number;
  private readonly onChange: (state: ExplorerState) => void;
  private issued = 0;
  private applied = 0;
  private inFlight: AbortController | null = null;

  constructor(private readonly client: ApiClient, options: ControllerOptions = {}) {
    this.k = options.k ?? DEFAULT_K;
    this.throttle = new TrailingThrottle(options.debounceMs ?? DEFAULT_DEBOUNCE_MS);
    this.filterMode = options.filterMode ?? "drop_if_distance_above";
    this.filterThreshold = options.filterThreshold ?? 0.8;
    this.onChange = options.onChange ?? (() => {});
  }

  async start(galleryId: string, bundle: BundlePayload): Promise<void> {
    const resp = await this.client.createSession(galleryId, bundle, this.k);
    this.state.sessionId = resp.session_id;
    this.state.params = { ...BASELINE_PARAMS };
    this.state.baseline = resp.ranking;
    this.state.current = resp.ranking;
    this.state.phiDeg = resp.phi_deg;
    this.state.history = [];
    recordHistory(this.state, this.state.params, resp.ranking);
    this.notify();
  }

  /** Slider input: snap to the slider grid and schedule a throttled rerank. */
  setParam(name: keyof Params, rawValue: number): void {
    const value = quantize(SLIDERS[name], rawValue);
    if (this.state.params[name] === value) return;
    this.state.params = { ...this.state.params, [name]: value };
    this.state.pending = true;
    this.notify();
    this.throttle.push(() => void this.issueRerank());
  }

  /** Back to the baseline: params (1,1,1) and the session's initial grid. */
  reset(): void {
    this.throttle.cancel();
    this.applied = this.issued; // strand any in-flight response
    this.state.params = { ...BASELINE_PARAMS };
    if (this.state.baseline) {
      this.state.current = this.state.baseline;
      recordHistory(this.state, this.state.params, this.state.baseline);
    }
    this.state.pending = false;
    this.state.error = null;
    this.state.filterFallback = false;
    this.notify();
  }

  /** Tune button: ask the service for the best image scale and snap the slider. */
  async tune(alphaT?: number): Promise<void> {
    if (!this.state.sessionId) return;
    try {
      const resp = await this.client.tune(this.state.sessionId, alphaT ?? this.state.params.alpha_t);
      this.state.params = {
        ...this.state.params,
        alpha_i: quantize(SLIDERS.alpha_i, resp.alpha_i),
      };
      this.state.pending = true;
      this.notify();
      await this.issueRerank();
    } catch (err) {
      this.fail(err);
    }
  }

  /** Filter toggle: on computes and stores a candidate filter, then reranks. */
  async setFilterEnabled(enabled: boolean): Promise<void> {
    if (!this.state.sessionId) return;
    try {
      if (enabled) {
        const resp = await this.client.applyFilter(
          this.state.sessionId,
          this.filterMode,
          this.filterThreshold,
        );
        this.state.filterKept = resp.kept_count;
        this.state.filterTotal = resp.total;
      }
      this.state.filterEnabled = enabled;
      this.state.pending = true;
      this.notify();
      await this.issueRerank();
    } catch (err) {
      this.fail(err);
    }
  }

  pinCurrent(): void {
    if (!this.state.current) return;
    this.state.pin = {
      params: { ...this.state.params },
      topIds: this.state.current.entries.map((e) => e.id),
    };
    this.notify();
  }

  pinHistory(index: number): void {
    const item = this.state.history[index];
    if (!item) return;
    this.state.pin = { params: { ...item.params }, topIds: [...item.topIds] };
    this.notify();
  }

  unpin(): void {
    this.state.pin = null;
    this.notify();
  }

  private async issueRerank(): Promise<void> {
    if (!this.state.sessionId) return;
    // last-write-wins: abort the in-flight request, then guard by sequence
    // number in case the aborted response still arrives
    this.inFlight?.abort();
    const abort = typeof AbortController !== "undefined" ? new AbortController() : null;
    this.inFlight = abort;
    const seq = ++this.issued;
    const params = { ...this.state.params };
    try {
      const resp = await this.client.rerank(
        this.state.sessionId,
        params,
        this.k,
        this.state.filterEnabled,
        abort?.signal,
      );
      if (seq <= this.applied) return; // superseded: a newer grid already landed
      this.applied = seq;
      this.state.current = resp.ranking;
      this.state.filterFallback = resp.filter_fallback;
      this.state.pending = false;
      this.state.error = null;
      recordHistory(this.state, params, resp.ranking);
      this.notify();
    } catch (err) {
      if (seq <= this.applied) return;
      if (err instanceof Error && err.name === "AbortError") return;
      this.applied = seq;
      this.fail(err);
    }
  }

  private fail(err: unknown): void {
    this.state.error = err instanceof Error ? err.message : String(err);
    this.state.pending = false;
    this.notify();
  }

  private notify(): void {
    this.onChange(this.state);
  }
}
