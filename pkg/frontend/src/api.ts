/** Typed client for the labeling-service JSON API.
 *
 * The fetch implementation is injectable so the client is testable without
 * a browser or a live server.
 */

export interface RoundMetrics {
  round: number;
  labeled_count: number;
  accuracy: number;
  precision: number;
  recall: number;
  f1: number;
}

export type SessionState =
  | "training"
  | "selecting"
  | "awaiting_labels"
  | "finished"
  | "failed";

export interface SessionSnapshot {
  id: string;
  state: SessionState;
  error: string | null;
  round: number;
  rounds_total: number;
  strategy: string;
  labeled_count: number;
  pending_count: number;
  class_names: string[];
  metrics: RoundMetrics[];
}

export interface QueryItem {
  group_id: string;
  classes: string[];
  observed_png: string; // base64 PNG
  variant_pngs: string[];
}

export interface SessionConfig {
  strategy?: string;
  rounds?: number;
  n_batch?: number;
  n_cand?: number;
  initial_labeled?: number;
  seed?: number;
  train?: { epochs?: number };
}

export class ApiError extends Error {
  constructor(public readonly status: number, detail: string) {
    super(detail);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchImpl(this.base + path, init);
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const body = await res.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        /* non-JSON error body; keep the status text */
      }
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("/api/health");
  }

  classes(): Promise<{ class_names: string[] }> {
    return this.request("/api/classes");
  }

  createSession(config: SessionConfig): Promise<{ id: string }> {
    return this.request("/api/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ ...config, oracle_mode: "human" }),
    });
  }

  getSession(id: string): Promise<SessionSnapshot> {
    return this.request(`/api/sessions/${id}`);
  }

  getQueries(id: string): Promise<{ items: QueryItem[] }> {
    return this.request(`/api/sessions/${id}/queries`);
  }

  submitLabels(
    id: string,
    labels: Record<string, number>,
  ): Promise<{ accepted: number; remaining: number }> {
    return this.request(`/api/sessions/${id}/labels`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ labels }),
    });
  }

  metricsCsvUrl(id: string): string {
    return `${this.base}/api/sessions/${id}/metrics.csv`;
  }
}
