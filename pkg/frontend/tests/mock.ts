/** Scripted stand-in for the advisory service. Deterministic: the n-th
 * step of a session always yields the same payload, so replaying a POST
 * log reproduces the exact response sequence. */

import { FetchLike } from "../src/api.js";
import { Recommendation, SCHEMA_VERSION, SensorRecord, TickPayload } from "../src/types.js";

export function record(overrides: Partial<SensorRecord> = {}): SensorRecord {
  return {
    timestamp: 0,
    tunnel_length: 1.0,
    advance_rate: 14.2,
    working_pressure: 88.0,
    cop: [5, 5, 5, 5, 5],
    cxp: Array(19).fill(0.1),
    ground_class: "GC1",
    ...overrides,
  };
}

export function recommendation(overrides: Partial<Recommendation> = {}): Recommendation {
  return {
    schema_version: SCHEMA_VERSION,
    gradients: [0.2, 0.1, 0, -0.05, -0.3],
    deltas: [0.02, 0.01, 0, -0.005, -0.03],
    predicted_optimality: 50.0,
    credibility: 0.5,
    ground_class: "GC1",
    at_bound: [],
    no_improvement: false,
    ...overrides,
  };
}

export interface MockOptions {
  /** payload for the n-th tick (0 = session open) */
  tick?: (n: number, cop: number[]) => TickPayload;
  schemaVersion?: number;
}

export class MockService {
  requests: Array<{ url: string; body: unknown }> = [];
  private counters = new Map<string, number>();
  private nextId = 1;

  constructor(private options: MockOptions = {}) {}

  private tickPayload(n: number, cop: number[]): TickPayload {
    if (this.options.tick) return this.options.tick(n, cop);
    return {
      schema_version: this.options.schemaVersion ?? SCHEMA_VERSION,
      record: record({ timestamp: 10 * n, cop }),
      recommendation: recommendation(),
    };
  }

  fetch: FetchLike = async (url, init) => {
    const body = init?.body ? JSON.parse(init.body as string) : undefined;
    this.requests.push({ url, body });
    const respond = (payload: object, status = 200) =>
      new Response(JSON.stringify(payload), {
        status,
        headers: { "content-type": "application/json" },
      });

    if (url.endsWith("/session") && init?.method === "POST") {
      const id = `m${this.nextId++}`;
      this.counters.set(id, 0);
      return respond({ session_id: id, ...this.tickPayload(0, [5, 5, 5, 5, 5]) });
    }
    const step = url.match(/\/session\/([^/]+)\/step$/);
    if (step) {
      const id = step[1];
      const n = (this.counters.get(id) ?? 0) + 1;
      this.counters.set(id, n);
      return respond(this.tickPayload(n, body.cop));
    }
    const close = url.match(/\/session\/([^/]+)$/);
    if (close && init?.method === "DELETE") {
      return respond({ schema_version: SCHEMA_VERSION, closed: close[1] });
    }
    if (url.endsWith("/recommend")) {
      return respond({
        ...recommendation(),
        schema_version: this.options.schemaVersion ?? SCHEMA_VERSION,
      });
    }
    if (url.endsWith("/health")) {
      return respond({
        schema_version: this.options.schemaVersion ?? SCHEMA_VERSION,
        status: "ok",
        models_loaded: ["GC1", "GC2", "GC3"],
      });
    }
    return respond({ schema_version: SCHEMA_VERSION, error: "Unknown", message: url }, 404);
  };
}
