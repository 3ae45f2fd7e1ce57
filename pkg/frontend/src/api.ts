/**
 * Typed fetch client for the triage service.
 *
 * Every method maps to one documented v1 endpoint; nothing else is ever
 * called, so contract tests can pin the full URL surface.
 */

import type {
  ClusterDetail,
  MetaclusterDetail,
  PipelineReport,
  QueuePage,
  RecomputeDelta,
  VerdictReceipt,
  VerdictRequest,
} from "./types.js";

/** Failed request. `status` is the HTTP code, or 0 when fetch itself failed. */
export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, message: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(url, init);
  } catch (err) {
    throw new ApiError(0, `network failure: ${String(err)}`);
  }
  let payload: unknown = null;
  try {
    payload = await response.json();
  } catch {
    // error bodies are JSON too; a non-JSON body falls through to the
    // generic message below
  }
  if (!response.ok) {
    const message =
      payload !== null && typeof payload === "object" && "error" in payload
        ? String((payload as { error: unknown }).error)
        : `request failed with status ${response.status}`;
    throw new ApiError(response.status, message);
  }
  return payload as T;
}

export class TriageApi {
  queue(page = 1, label = ""): Promise<QueuePage> {
    const params = new URLSearchParams({ page: String(page) });
    if (label) {
      params.set("label", label);
    }
    return request(`/api/clusters?${params.toString()}`);
  }

  cluster(id: number): Promise<ClusterDetail> {
    return request(`/api/clusters/${id}`);
  }

  metacluster(id: number): Promise<MetaclusterDetail> {
    return request(`/api/metaclusters/${id}`);
  }

  submitVerdict(verdict: VerdictRequest): Promise<VerdictReceipt> {
    return request("/api/verdicts", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(verdict),
    });
  }

  recompute(): Promise<RecomputeDelta> {
    return request("/api/recompute", { method: "POST" });
  }

  report(): Promise<PipelineReport> {
    return request("/api/report");
  }
}
