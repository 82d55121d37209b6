import { HttpApiClient } from "./api.js";
import { ExplorerController } from "./controller.js";
import { renderApp } from "./render.js";
import { BundlePayload, Params } from "./types.js";

/** Browser bootstrap: one text input for the service base URL, a bundle
 * JSON textarea, and the explorer below. All logic lives in the controller;
 * this file only moves DOM events in and HTML out. */

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
}

function wire(root: HTMLElement, controller: ExplorerController): void {
  root.addEventListener("input", (event) => {
    const target = event.target as HTMLElement;
    const param = target.getAttribute("data-param-input");
    if (param) {
      controller.setParam(
        param as keyof Params,
        Number((target as HTMLInputElement).value),
      );
    }
  });
  root.addEventListener("change", (event) => {
    const target = event.target as HTMLElement;
    if (target.getAttribute("data-action") === "filter") {
      void controller.setFilterEnabled((target as HTMLInputElement).checked);
    }
  });
  root.addEventListener("click", (event) => {
    const target = (event.target as HTMLElement).closest("[data-action],[data-history-index]");
    if (!target) return;
    const action = target.getAttribute("data-action");
    if (action === "reset") controller.reset();
    else if (action === "tune") void controller.tune();
    else if (action === "pin") controller.pinCurrent();
    else if (action === "unpin") controller.unpin();
    const historyIndex = target.getAttribute("data-history-index");
    if (historyIndex !== null) controller.pinHistory(Number(historyIndex));
  });
}

export function boot(): void {
  const root = byId<HTMLDivElement>("explorer-root");
  const form = byId<HTMLFormElement>("connect-form");
  const thumbnailTemplate =
    byId<HTMLInputElement>("thumb-template").value || undefined;

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const baseUrl = byId<HTMLInputElement>("base-url").value.replace(/\/$/, "");
    const galleryId = byId<HTMLInputElement>("gallery-id").value;
    const bundle = JSON.parse(
      byId<HTMLTextAreaElement>("bundle-json").value,
    ) as BundlePayload;

    const controller = new ExplorerController(new HttpApiClient(baseUrl), {
      onChange: (state) => {
        const focused = document.activeElement as HTMLElement | null;
        const focusParam = focused?.getAttribute?.("data-param-input") ?? null;
        root.innerHTML = renderApp(state, { thumbnailTemplate });
        if (focusParam) {
          root
            .querySelector<HTMLInputElement>(`[data-param-input="${focusParam}"]`)
            ?.focus();
        }
      },
    });
    wire(root, controller);
    void controller.start(galleryId, bundle).catch((err) => {
      root.innerHTML = `<div class="error">${String(err)}</div>`;
    });
  });
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  boot();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", boot);
}
