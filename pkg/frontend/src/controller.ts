import { ApiClient, ApiError } from "./api.js";
import {
  initialState,
  pendingSubmission,
  reduce,
  type ViewEvent,
  type ViewState,
} from "./state.js";
import type { TaskKind } from "./types.js";

/**
 * Labeling flow, DOM-free: the app layer feeds key presses and clicks in,
 * and re-renders whenever `onChange` fires. Submits optimistically: the
 * label goes into the queue and the next task is fetched immediately;
 * rejected labels (422/404) surface inline, network failures keep the
 * queue and retry.
 */
export class LabelingController {
  state: ViewState;
  onChange: (state: ViewState) => void = () => undefined;
  private flushing = false;

  constructor(
    private api: ApiClient,
    annotator: string,
    private kind: TaskKind = "relevance",
    private modality?: string,
  ) {
    this.state = initialState(annotator);
  }

  private dispatch(event: ViewEvent): void {
    this.state = reduce(this.state, event);
    this.onChange(this.state);
  }

  async start(): Promise<void> {
    await this.refreshProgress();
    await this.loadNext();
  }

  async loadNext(): Promise<void> {
    try {
      const task = await this.api.nextTask(
        this.state.annotator,
        this.kind,
        this.modality,
      );
      this.dispatch({ type: "task-loaded", task });
    } catch (error) {
      this.noteNetworkError(error);
    }
  }

  async handleKey(key: string): Promise<void> {
    const before = this.state.pendingQueue.length;
    this.dispatch({ type: "key", key });
    if (this.state.pendingQueue.length > before) {
      await this.afterSubmit();
    }
  }

  async select(verdict: string): Promise<void> {
    this.dispatch({ type: "select", verdict });
  }

  async submit(): Promise<void> {
    if (pendingSubmission(this.state) === null) return;
    this.dispatch({ type: "submit" });
    await this.afterSubmit();
  }

  private async afterSubmit(): Promise<void> {
    await this.flushQueue();
    await this.refreshProgress();
    if (this.state.inlineError === null) {
      // advance only on acceptance; a rejected label keeps the view
      // (and its inline error) so nothing the annotator did is lost
      await this.loadNext();
    }
  }

  /** Push queued labels to the service; keep them on network failure. */
  async flushQueue(): Promise<void> {
    if (this.flushing) return;
    this.flushing = true;
    try {
      while (this.state.pendingQueue.length > 0) {
        const submission = this.state.pendingQueue[0]!;
        try {
          await this.api.submitLabel(submission);
          this.state = {
            ...this.state,
            pendingQueue: this.state.pendingQueue.slice(1),
            offline: false,
          };
          this.onChange(this.state);
        } catch (error) {
          if (error instanceof ApiError) {
            this.dispatch({
              type: "submit-rejected",
              status: error.status,
              message: error.message,
            });
            continue;
          }
          this.dispatch({ type: "network-lost" });
          return;
        }
      }
    } finally {
      this.flushing = false;
    }
  }

  async refreshProgress(): Promise<void> {
    try {
      const progress = await this.api.progress(this.state.annotator);
      this.dispatch({ type: "progress", progress });
    } catch (error) {
      this.noteNetworkError(error);
    }
  }

  private noteNetworkError(error: unknown): void {
    if (error instanceof ApiError) {
      this.dispatch({
        type: "submit-rejected",
        status: error.status,
        message: error.message,
      });
      return;
    }
    this.dispatch({ type: "network-lost" });
  }
}

import type { AgreementReport, Granularity } from "./types.js";
import { pairKey, type KappaCell } from "./render.js";

/**
 * Agreement dashboard model. Every cell value comes verbatim from
 * /api/agreement; the client never computes kappa itself.
 */
export class DashboardController {
  raters: string[] = [];
  cells = new Map<string, KappaCell>();
  granularity: Granularity = "four_level";
  onChange: () => void = () => undefined;

  constructor(private api: ApiClient) {}

  async load(): Promise<void> {
    this.raters = await this.api.raters();
    await this.refresh();
  }

  async setGranularity(granularity: Granularity): Promise<void> {
    this.granularity = granularity;
    await this.refresh();
  }

  async refresh(): Promise<void> {
    this.cells = new Map();
    for (let i = 0; i < this.raters.length; i++) {
      for (let j = i + 1; j < this.raters.length; j++) {
        const a = this.raters[i]!;
        const b = this.raters[j]!;
        let cell: KappaCell;
        try {
          const report: AgreementReport = await this.api.agreement(
            a,
            b,
            this.granularity,
          );
          cell = { kind: "value", report };
        } catch (error) {
          if (error instanceof ApiError && error.status === 409) {
            cell = { kind: "insufficient" };
          } else {
            throw error;
          }
        }
        this.cells.set(pairKey(a, b), cell);
      }
    }
    this.onChange();
  }
}
