/** Thin typed client over the advisory service. All numbers shown in the
 * UI come from these responses; the dashboard computes nothing itself. */

import {
  GroundClass,
  ModelsInfo,
  Recommendation,
  SCHEMA_VERSION,
  SessionOpened,
  TickPayload,
  checkSchemaVersion,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceError extends Error {
  constructor(public status: number, public code: string, message: string) {
    super(message);
    this.name = "ServiceError";
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T extends { schema_version?: unknown }>(
    path: string,
    init?: RequestInit,
  ): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    const body = await resp.json();
    if (!resp.ok) {
      throw new ServiceError(resp.status, body.error ?? "Unknown", body.message ?? "");
    }
    return checkSchemaVersion(body as T);
  }

  private post<T extends { schema_version?: unknown }>(path: string, payload: object): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ schema_version: SCHEMA_VERSION, ...payload }),
    });
  }

  health(): Promise<{ schema_version: number; status: string; models_loaded: string[] }> {
    return this.request("/health");
  }

  models(): Promise<ModelsInfo> {
    return this.request("/models");
  }

  recommend(groundClass: GroundClass, cop: number[], cxp: number[]): Promise<Recommendation> {
    return this.post("/recommend", { ground_class: groundClass, cop, cxp });
  }

  openSession(options: { seed?: number; ground_class?: GroundClass } = {}): Promise<SessionOpened> {
    return this.post("/session", options);
  }

  step(sessionId: string, cop: number[]): Promise<TickPayload> {
    return this.post(`/session/${sessionId}/step`, { cop });
  }

  closeSession(sessionId: string): Promise<{ schema_version: number; closed: string }> {
    return this.request(`/session/${sessionId}`, { method: "DELETE" });
  }

  streamUrl(sessionId: string): string {
    return `${this.baseUrl}/session/${sessionId}/stream`;
  }
}
