import type {
  AgreementReport,
  Granularity,
  LabelSubmission,
  LabelTask,
  ProgressByKind,
  TaskKind,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** Thin client over the annotation service; never computes anything itself. */
export class ApiClient {
  private fetchFn: FetchLike;

  constructor(
    public baseUrl: string,
    fetchFn?: FetchLike,
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async get(path: string, params: Record<string, string>): Promise<Response> {
    const query = new URLSearchParams(params).toString();
    return this.fetchFn(`${this.baseUrl}${path}?${query}`);
  }

  /** Next unlabeled task for this annotator, or null when the queue is done. */
  async nextTask(
    annotator: string,
    kind: TaskKind = "relevance",
    modality?: string,
  ): Promise<LabelTask | null> {
    const params: Record<string, string> = { annotator, kind };
    if (modality) params.modality = modality;
    const response = await this.get("/api/tasks/next", params);
    if (response.status === 204) return null;
    if (!response.ok) {
      throw new ApiError(response.status, await response.text());
    }
    return (await response.json()) as LabelTask;
  }

  async submitLabel(submission: LabelSubmission): Promise<void> {
    const response = await this.fetchFn(`${this.baseUrl}/api/labels`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(submission),
    });
    if (!response.ok) {
      throw new ApiError(response.status, await response.text());
    }
  }

  async agreement(
    raterA: string,
    raterB: string,
    granularity: Granularity,
  ): Promise<AgreementReport> {
    const response = await this.get("/api/agreement", {
      a: raterA,
      b: raterB,
      granularity,
    });
    if (!response.ok) {
      throw new ApiError(response.status, await response.text());
    }
    return (await response.json()) as AgreementReport;
  }

  async progress(annotator: string): Promise<ProgressByKind> {
    const response = await this.get("/api/progress", { annotator });
    if (!response.ok) {
      throw new ApiError(response.status, await response.text());
    }
    return (await response.json()) as ProgressByKind;
  }

  async raters(): Promise<string[]> {
    const response = await this.fetchFn(`${this.baseUrl}/api/raters`);
    if (!response.ok) {
      throw new ApiError(response.status, await response.text());
    }
    const body = (await response.json()) as { raters: string[] };
    return body.raters;
  }
}
