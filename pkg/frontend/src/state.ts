import type { LabelSubmission, LabelTask, ProgressByKind } from "./types.js";

/**
 * Labeling view state. Pure: every transition is a function of
 * (state, event), so the keyboard-only contract is testable without a DOM.
 */
export interface ViewState {
  annotator: string;
  task: LabelTask | null;
  selected: string | null;
  phase: "loading" | "labeling" | "done";
  inlineError: string | null;
  /** submissions awaiting a (re)try; nonempty shows the retry banner */
  pendingQueue: LabelSubmission[];
  offline: boolean;
  progress: ProgressByKind;
  labeledThisSession: number;
}

export type ViewEvent =
  | { type: "task-loaded"; task: LabelTask | null }
  | { type: "key"; key: string }
  | { type: "select"; verdict: string }
  | { type: "submit" }
  | { type: "submit-rejected"; status: number; message: string }
  | { type: "network-lost" }
  | { type: "network-restored" }
  | { type: "queue-flushed" }
  | { type: "progress"; progress: ProgressByKind };

export function initialState(annotator: string): ViewState {
  return {
    annotator,
    task: null,
    selected: null,
    phase: "loading",
    inlineError: null,
    pendingQueue: [],
    offline: false,
    progress: {},
    labeledThisSession: 0,
  };
}

/**
 * Keyboard shortcuts for a task: digits 0-3 for relevance levels, unique
 * letter prefixes for audit verdicts (e.g. p/g/o/b/m for table audits),
 * Enter to submit. The map covers exactly the task's allowed verdicts.
 */
export function shortcutMap(task: LabelTask): Record<string, string> {
  const map: Record<string, string> = {};
  for (const verdict of task.allowed) {
    if (task.kind === "relevance") {
      map[verdict] = verdict;
      continue;
    }
    let key = "";
    for (const ch of verdict) {
      key += ch;
      if (!(key in map) && !task.allowed.some(
        (other) => other !== verdict && other.startsWith(key),
      )) {
        break;
      }
    }
    map[key] = verdict;
  }
  return map;
}

export function canSubmit(state: ViewState): boolean {
  return state.task !== null && state.selected !== null;
}

/** The submission the UI wants to send; null while submit is disabled. */
export function pendingSubmission(state: ViewState): LabelSubmission | null {
  if (!canSubmit(state)) return null;
  return {
    task_id: state.task!.task_id,
    annotator: state.annotator,
    verdict: state.selected!,
  };
}

export function reduce(state: ViewState, event: ViewEvent): ViewState {
  switch (event.type) {
    case "task-loaded":
      return {
        ...state,
        task: event.task,
        selected: null,
        inlineError: null,
        phase: event.task === null ? "done" : "labeling",
      };
    case "select": {
      if (state.task === null || !state.task.allowed.includes(event.verdict)) {
        return state;
      }
      return { ...state, selected: event.verdict, inlineError: null };
    }
    case "key": {
      if (state.task === null) return state;
      if (event.key === "Enter") {
        return reduce(state, { type: "submit" });
      }
      const verdict = shortcutMap(state.task)[event.key];
      if (verdict === undefined) return state;
      return reduce(state, { type: "select", verdict });
    }
    case "submit": {
      const submission = pendingSubmission(state);
      if (submission === null) return state; // submit disabled until selected
      return {
        ...state,
        pendingQueue: [...state.pendingQueue, submission],
        selected: null,
        phase: "loading",
        labeledThisSession: state.labeledThisSession + 1,
      };
    }
    case "submit-rejected":
      // 422/404: surface inline, drop the bad submission, keep the view
      return {
        ...state,
        pendingQueue: state.pendingQueue.slice(1),
        inlineError: `rejected (${event.status}): ${event.message}`,
        phase: "labeling",
        labeledThisSession: Math.max(0, state.labeledThisSession - 1),
      };
    case "network-lost":
      return { ...state, offline: true };
    case "network-restored":
      return { ...state, offline: false };
    case "queue-flushed":
      return { ...state, pendingQueue: [], offline: false };
    case "progress":
      return { ...state, progress: event.progress };
    default:
      return state;
  }
}
