import { BASELINE_PARAMS, Params, Ranking } from "./types.js";

export interface HistoryItem {
  params: Params;
  topIds: string[];
}

/** Everything the page renders; mutated only by the controller. */
export interface ExplorerState {
  sessionId: string | null;
  params: Params;
  baseline: Ranking | null;
  current: Ranking | null;
  history: HistoryItem[];
  pin: HistoryItem | null;
  phiDeg: number | null;
  filterEnabled: boolean;
  filterKept: number | null;
  filterTotal: number | null;
  filterFallback: boolean;
  pending: boolean;
  error: string | null;
}

export function initialState(): ExplorerState {
  return {
    sessionId: null,
    params: { ...BASELINE_PARAMS },
    baseline: null,
    current: null,
    history: [],
    pin: null,
    phiDeg: null,
    filterEnabled: false,
    filterKept: null,
    filterTotal: null,
    filterFallback: false,
    pending: false,
    error: null,
  };
}

export function recordHistory(state: ExplorerState, params: Params, ranking: Ranking): void {
  state.history.push({
    params: { ...params },
    topIds: ranking.entries.map((e) => e.id),
  });
}
