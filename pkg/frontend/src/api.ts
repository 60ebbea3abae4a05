/** Typed client for the review service. All UI state derives from these
 * responses; nothing is persisted client-side. */

import type {
  AnomaliesResponse,
  GazeFeed,
  IndexResponse,
  MetricsFeed,
  RenormalizeResponse,
  ResolveResponse,
  SyncFeed,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** A 409 means another renormalize holds the writer; safe to retry. */
export function isRetryableConflict(error: unknown): boolean {
  return error instanceof ApiError && error.status === 409;
}

export class ReviewApi {
  constructor(private readonly base: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await fetch(this.base + path, init);
    } catch (err) {
      throw new ApiError(0, `network error: ${String(err)}`);
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: unknown };
        if (body && body.detail !== undefined) detail = JSON.stringify(body.detail);
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  getIndex(): Promise<IndexResponse> {
    return this.request("/api/index");
  }

  getAnomalies(promptId?: string): Promise<AnomaliesResponse> {
    const query = promptId ? `?prompt_id=${encodeURIComponent(promptId)}` : "";
    return this.request(`/api/anomalies${query}`);
  }

  /** Resolve one anomaly to an option without generalizing. */
  resolveToOption(anomalyId: string, option: string): Promise<ResolveResponse> {
    return this.post(`/api/anomalies/${encodeURIComponent(anomalyId)}/resolve`, { option });
  }

  /** Resolve and insert the anomaly's folded raw response as an alias of the option. */
  resolveAsAlias(anomalyId: string, option: string): Promise<ResolveResponse> {
    return this.post(`/api/anomalies/${encodeURIComponent(anomalyId)}/resolve`, { alias: option });
  }

  dismiss(anomalyId: string): Promise<{ anomaly_id: string; status: string }> {
    return this.post(`/api/anomalies/${encodeURIComponent(anomalyId)}/dismiss`);
  }

  renormalize(): Promise<RenormalizeResponse> {
    return this.post("/api/renormalize");
  }

  getSync(session: string): Promise<SyncFeed> {
    return this.request(`/api/sync/${encodeURIComponent(session)}`);
  }

  getMetrics(stream: string): Promise<MetricsFeed> {
    return this.request(`/api/metrics/${encodeURIComponent(stream)}`);
  }

  getGaze(stream: string): Promise<GazeFeed> {
    return this.request(`/api/gaze/${encodeURIComponent(stream)}`);
  }

  private post<T>(path: string, body?: unknown): Promise<T> {
    return this.request(path, {
      method: "POST",
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
  }
}
