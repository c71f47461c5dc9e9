export type TaskKind = "relevance" | "table_audit" | "caption_audit";

export type Granularity = "four_level" | "binary";

export interface TopicInfo {
  topic_id: string;
  title: string;
  description: string | null;
  narrative: string | null;
}

export interface PassagePayload {
  passage_id: string;
  text: string;
  level_names?: Record<string, string>;
}

export interface TablePayload {
  table_id: string;
  grid: string[][];
  caption: string | null;
  label?: string | null;
  intext_refs: string[];
  level_names?: Record<string, string>;
}

export interface LabelTask {
  task_id: string;
  index: number;
  kind: TaskKind;
  modality: string | null;
  item_id: string;
  topic: TopicInfo | null;
  payload: PassagePayload | TablePayload;
  allowed: string[];
  assigned: string[] | null;
}

export interface LabelSubmission {
  task_id: string;
  annotator: string;
  verdict: string;
}

export interface AgreementReport {
  rater_a: string;
  rater_b: string;
  n_items: number;
  kappa: number;
  granularity: Granularity;
}

export interface ProgressCounts {
  labeled: number;
  total: number;
}

export type ProgressByKind = Record<string, ProgressCounts>;

export function isTablePayload(
  payload: PassagePayload | TablePayload,
): payload is TablePayload {
  return (payload as TablePayload).grid !== undefined;
}
