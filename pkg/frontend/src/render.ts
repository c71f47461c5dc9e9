import type { ViewState } from "./state.js";
import { shortcutMap } from "./state.js";
import type {
  AgreementReport,
  LabelTask,
  ProgressCounts,
  TablePayload,
  TopicInfo,
} from "./types.js";
import { isTablePayload } from "./types.js";

export function escapeHtml(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

export function renderTopic(topic: TopicInfo | null): string {
  if (!topic) return "";
  const parts = [`<h2 class="topic-title">${escapeHtml(topic.title)}</h2>`];
  if (topic.description) {
    parts.push(`<p class="topic-description">${escapeHtml(topic.description)}</p>`);
  }
  if (topic.narrative) {
    parts.push(`<p class="topic-narrative">${escapeHtml(topic.narrative)}</p>`);
  }
  return `<section class="topic">${parts.join("")}</section>`;
}

/** Table from structured JSON: caption above, grid, reference notes below. */
export function renderTable(payload: TablePayload): string {
  const parts: string[] = [];
  if (payload.caption) {
    parts.push(`<div class="table-caption">${escapeHtml(payload.caption)}</div>`);
  }
  const rows = payload.grid
    .map((row) => {
      const cells = row
        .map((cell) =>
          cell.trim() === ""
            ? `<td class="empty-cell"></td>`
            : `<td>${escapeHtml(cell)}</td>`,
        )
        .join("");
      return `<tr>${cells}</tr>`;
    })
    .join("");
  parts.push(`<table class="item-table"><tbody>${rows}</tbody></table>`);
  if (payload.intext_refs.length > 0) {
    const refs = payload.intext_refs
      .map((ref) => `<li class="intext-ref">${escapeHtml(ref)}</li>`)
      .join("");
    parts.push(`<ul class="intext-refs">${refs}</ul>`);
  }
  return `<div class="table-item">${parts.join("")}</div>`;
}

export function renderItem(task: LabelTask): string {
  if (isTablePayload(task.payload)) {
    return renderTable(task.payload);
  }
  return `<p class="passage-text">${escapeHtml(task.payload.text)}</p>`;
}

function verdictLabel(task: LabelTask, verdict: string): string {
  if (task.kind === "relevance") {
    const names = task.payload.level_names ?? {};
    const name = names[verdict];
    return name ? `${verdict} – ${name}` : verdict;
  }
  return verdict.replace(/_/g, " ");
}

/** One button per allowed verdict, exactly, with its keyboard hint. */
export function renderVerdictButtons(task: LabelTask, selected: string | null): string {
  const shortcuts = shortcutMap(task);
  const keyOf: Record<string, string> = {};
  for (const [key, verdict] of Object.entries(shortcuts)) keyOf[verdict] = key;
  const buttons = task.allowed
    .map((verdict) => {
      const pressed = verdict === selected ? ` aria-pressed="true"` : "";
      const hint = keyOf[verdict] ? ` <kbd>${escapeHtml(keyOf[verdict]!)}</kbd>` : "";
      return (
        `<button class="verdict" data-verdict="${escapeHtml(verdict)}"${pressed}>` +
        `${escapeHtml(verdictLabel(task, verdict))}${hint}</button>`
      );
    })
    .join("");
  return `<div class="verdicts">${buttons}</div>`;
}

export function renderProgressBar(counts: ProgressCounts): string {
  const percent =
    counts.total > 0 ? Math.round((100 * counts.labeled) / counts.total) : 0;
  return (
    `<div class="progress" data-percent="${percent}">` +
    `<div class="progress-fill" style="width: ${percent}%"></div>` +
    `<span class="progress-text">${counts.labeled}/${counts.total} (${percent}%)</span>` +
    `</div>`
  );
}

export function renderBanner(state: ViewState): string {
  const parts: string[] = [];
  if (state.inlineError) {
    parts.push(`<div class="error-banner">${escapeHtml(state.inlineError)}</div>`);
  }
  if (state.offline || state.pendingQueue.length > 0) {
    parts.push(
      `<div class="retry-banner">connection trouble – ` +
      `${state.pendingQueue.length} label(s) queued, retrying…</div>`,
    );
  }
  return parts.join("");
}

export function renderLabelingView(state: ViewState): string {
  if (state.phase === "done") {
    return `${renderBanner(state)}<div class="all-done">Queue complete. ` +
      `${state.labeledThisSession} labels this session.</div>`;
  }
  if (!state.task) {
    return `${renderBanner(state)}<div class="loading">loading…</div>`;
  }
  const submitDisabled = state.selected === null ? " disabled" : "";
  return [
    renderBanner(state),
    renderTopic(state.task.topic),
    `<section class="item">${renderItem(state.task)}</section>`,
    renderVerdictButtons(state.task, state.selected),
    `<button class="submit"${submitDisabled}>Submit <kbd>Enter</kbd></button>`,
  ].join("");
}

// ----------------------------------------------------------------------
// agreement dashboard

export type KappaCell =
  | { kind: "value"; report: AgreementReport }
  | { kind: "insufficient" }
  | { kind: "self" };

export function renderKappaCell(cell: KappaCell): string {
  if (cell.kind === "self") {
    return `<td class="kappa self">1.00</td>`;
  }
  if (cell.kind === "insufficient") {
    return `<td class="kappa insufficient">insufficient overlap</td>`;
  }
  const value = cell.report.kappa;
  return `<td class="kappa" data-kappa="${value}" data-n="${cell.report.n_items}">` +
    `${value.toFixed(3)}</td>`;
}

export function renderDashboard(
  raters: string[],
  cells: Map<string, KappaCell>,
  granularity: string,
): string {
  const header = raters
    .map((rater) => `<th>${escapeHtml(rater)}</th>`)
    .join("");
  const body = raters
    .map((rowRater) => {
      const row = raters
        .map((colRater) => {
          if (rowRater === colRater) return renderKappaCell({ kind: "self" });
          const cell = cells.get(pairKey(rowRater, colRater));
          return cell ? renderKappaCell(cell) : `<td class="kappa pending"></td>`;
        })
        .join("");
      return `<tr><th>${escapeHtml(rowRater)}</th>${row}</tr>`;
    })
    .join("");
  return (
    `<table class="kappa-matrix" data-granularity="${escapeHtml(granularity)}">` +
    `<thead><tr><th></th>${header}</tr></thead><tbody>${body}</tbody></table>`
  );
}

export function pairKey(a: string, b: string): string {
  return [a, b].sort().join("␟");
}
