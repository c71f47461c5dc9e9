import { ApiClient } from "./api.js";
import { DashboardController, LabelingController } from "./controller.js";
import {
  renderDashboard,
  renderLabelingView,
  renderProgressBar,
} from "./render.js";
import type { Granularity, TaskKind } from "./types.js";

/** Bind the labeling controller to the page and the keyboard. */
export function mountLabeling(
  root: HTMLElement,
  api: ApiClient,
  annotator: string,
  kind: TaskKind = "relevance",
): LabelingController {
  const controller = new LabelingController(api, annotator, kind);

  controller.onChange = (state) => {
    const progress = state.progress[kind];
    root.innerHTML =
      `<div class="annotator-line">annotator: <b>${annotator}</b></div>` +
      (progress ? renderProgressBar(progress) : "") +
      renderLabelingView(state);
  };

  root.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const verdictButton = target.closest<HTMLElement>("button.verdict");
    if (verdictButton?.dataset.verdict !== undefined) {
      void controller.select(verdictButton.dataset.verdict);
      return;
    }
    if (target.closest("button.submit")) {
      void controller.submit();
    }
  });

  document.addEventListener("keydown", (event) => {
    if (event.target instanceof HTMLInputElement) return;
    void controller.handleKey(event.key);
  });

  window.addEventListener("online", () => {
    void controller.flushQueue().then(() => controller.loadNext());
  });

  void controller.start();
  return controller;
}

export function mountDashboard(
  root: HTMLElement,
  api: ApiClient,
): DashboardController {
  const controller = new DashboardController(api);

  controller.onChange = () => {
    root.innerHTML =
      `<div class="granularity-toggle">` +
      `<button data-granularity="four_level">4-level</button>` +
      `<button data-granularity="binary">binary</button>` +
      `</div>` +
      renderDashboard(controller.raters, controller.cells,
        controller.granularity);
  };

  root.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const granularity = target.dataset.granularity as Granularity | undefined;
    if (granularity) void controller.setGranularity(granularity);
  });

  void controller.load();
  return controller;
}
