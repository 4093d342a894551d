/** Thin gateway client. The console never computes a score, class, or alpha
 * itself; every number comes out of these response payloads untouched. */

import type {
  AlertsResult,
  ClusterViewResult,
  EnrollResult,
  Envelope,
  ErrorInfo,
  IncidentResult,
  PeersResult,
  RecordPayload,
  Schema,
  SimilarityStatsResult,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class GatewayError extends Error {
  readonly info: ErrorInfo;
  readonly status: number;

  constructor(info: ErrorInfo, status: number) {
    super(`${info.code}: ${info.message}`);
    this.info = info;
    this.status = status;
  }
}

export class GatewayClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async call<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.base}${path}`, init);
    const body = (await response.json()) as Envelope<T>;
    if (body.error) {
      throw new GatewayError(body.error, response.status);
    }
    if (body.result === undefined) {
      throw new GatewayError(
        { code: "BAD_ENVELOPE", message: "response has no result", field: null },
        response.status,
      );
    }
    return body.result;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.call<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  schema(): Promise<Schema> {
    return this.call<Schema>("/schema");
  }

  enroll(
    agentId: string,
    record: RecordPayload,
    requestId?: string,
  ): Promise<EnrollResult> {
    const payload: Record<string, unknown> = { record };
    if (requestId) payload.request_id = requestId;
    return this.post<EnrollResult>(
      `/agents/${encodeURIComponent(agentId)}/enroll`,
      payload,
    );
  }

  reportIncident(
    agentId: string,
    subjectId: string,
    outcome: "trafficked" | "confirmed-safe",
    observedAt: number,
    requestId?: string,
  ): Promise<IncidentResult> {
    const payload: Record<string, unknown> = {
      label: { subject_id: subjectId, outcome, observed_at: observedAt },
    };
    if (requestId) payload.request_id = requestId;
    return this.post<IncidentResult>(
      `/agents/${encodeURIComponent(agentId)}/incidents`,
      payload,
    );
  }

  alerts(agentId: string, since: number): Promise<AlertsResult> {
    return this.call<AlertsResult>(
      `/agents/${encodeURIComponent(agentId)}/alerts?since=${since}`,
    );
  }

  prediction(agentId: string, subjectId: string) {
    return this.call<{ prediction: import("./types.js").Prediction }>(
      `/agents/${encodeURIComponent(agentId)}/predictions/` +
        encodeURIComponent(subjectId),
    );
  }

  peers(agentId: string, subjectId: string, top: number): Promise<PeersResult> {
    return this.call<PeersResult>(
      `/agents/${encodeURIComponent(agentId)}/peers/` +
        `${encodeURIComponent(subjectId)}?top=${top}`,
    );
  }

  clusterView(agentId: string, clusters: number): Promise<ClusterViewResult> {
    return this.call<ClusterViewResult>(
      `/agents/${encodeURIComponent(agentId)}/cluster-view?clusters=${clusters}`,
    );
  }

  similarityStats(agentId: string): Promise<SimilarityStatsResult> {
    return this.call<SimilarityStatsResult>(
      `/agents/${encodeURIComponent(agentId)}/similarity-stats`,
    );
  }
}
