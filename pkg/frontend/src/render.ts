import { ExplorerState } from "./state.js";
import { Params, SLIDERS } from "./types.js";

export interface RenderOptions {
  /** Thumbnail URL template with an {id} placeholder, e.g. "/thumbs/{id}.jpg". */
  thumbnailTemplate?: string;
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function sliderRow(name: keyof Params, value: number): string {
  const cfg = SLIDERS[name];
  return (
    `<label class="slider-row" data-param="${name}">` +
    `<span class="slider-name">${name}</span>` +
    `<input type="range" min="${cfg.min}" max="${cfg.max}" step="${cfg.step}" ` +
    `value="${value}" data-param-input="${name}">` +
    `<span class="slider-value">${value}</span>` +
    `</label>`
  );
}

function badge(cls: string, text: string): string {
  return `<span class="badge ${cls}">${text}</span>`;
}

export function renderBadges(state: ExplorerState): string {
  const parts: string[] = [];
  if (state.phiDeg !== null) {
    parts.push(badge("phi", `phi ${state.phiDeg.toFixed(1)}&deg;`));
  }
  if (state.filterEnabled && state.filterKept !== null && state.filterTotal !== null) {
    parts.push(badge("filter", `${state.filterKept} / ${state.filterTotal} candidates`));
  }
  if (state.filterFallback) {
    parts.push(badge("fallback", "empty filter: full gallery"));
  }
  if (state.pending) {
    parts.push(badge("pending", "reranking&hellip;"));
  }
  return `<div class="badges">${parts.join("")}</div>`;
}

export function renderGrid(state: ExplorerState, options: RenderOptions = {}): string {
  if (!state.current) {
    return `<div class="grid empty">no session</div>`;
  }
  const pinned = state.pin ? new Set(state.pin.topIds) : null;
  const rows = state.current.entries.map((entry, index) => {
    const widthPct = Math.max(0, Math.min(100, ((entry.score + 1) / 2) * 100));
    const entered = pinned !== null && !pinned.has(entry.id);
    const thumb = options.thumbnailTemplate
      ? `<img class="thumb" src="${escapeHtml(options.thumbnailTemplate.replace("{id}", encodeURIComponent(entry.id)))}" alt="">`
      : "";
    return (
      `<div class="result${entered ? " entered" : ""}" data-id="${escapeHtml(entry.id)}">` +
      `<span class="rank">${index + 1}</span>` +
      thumb +
      `<span class="result-id">${escapeHtml(entry.id)}</span>` +
      `<span class="bar"><span class="bar-fill" style="width:${widthPct.toFixed(1)}%"></span></span>` +
      `<span class="score">${entry.score.toFixed(4)}</span>` +
      `</div>`
    );
  });
  let left = "";
  if (pinned) {
    const currentIds = new Set(state.current.entries.map((e) => e.id));
    const gone = state.pin!.topIds.filter((id) => !currentIds.has(id));
    if (gone.length > 0) {
      left =
        `<div class="left-pinned">left top-k: ` +
        gone.map((id) => `<span class="gone">${escapeHtml(id)}</span>`).join(" ") +
        `</div>`;
    }
  }
  return `<div class="grid">${rows.join("")}</div>${left}`;
}

export function renderHistory(state: ExplorerState): string {
  const items = state.history.map((item, index) => {
    const p = item.params;
    return (
      `<li class="history-item" data-history-index="${index}">` +
      `a_t=${p.alpha_t} a_i=${p.alpha_i} b=${p.beta} ` +
      `top: ${item.topIds.slice(0, 3).map(escapeHtml).join(", ")}` +
      `</li>`
    );
  });
  return `<ol class="history">${items.join("")}</ol>`;
}

export function renderApp(state: ExplorerState, options: RenderOptions = {}): string {
  const sliders = (Object.keys(SLIDERS) as (keyof Params)[])
    .map((name) => sliderRow(name, state.params[name]))
    .join("");
  const error = state.error
    ? `<div class="error">${escapeHtml(state.error)}</div>`
    : "";
  return (
    `<div class="explorer">` +
    `<div class="controls">${sliders}` +
    `<button data-action="reset">reset</button>` +
    `<button data-action="tune">tune alpha_i</button>` +
    `<label><input type="checkbox" data-action="filter"${state.filterEnabled ? " checked" : ""}> filter</label>` +
    `<button data-action="pin">pin</button>` +
    `<button data-action="unpin">unpin</button>` +
    `</div>` +
    renderBadges(state) +
    error +
    renderGrid(state, options) +
    renderHistory(state) +
    `</div>`
  );
}
