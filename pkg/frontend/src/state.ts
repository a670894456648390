/** Client-side session state: a pure fold over service responses.
 *
 * Every mutation of the simulated drive flows through an explicit POST;
 * the state is a deterministic function of the logged requests and the
 * service's responses, so replaying the log reproduces the session.
 */

import { ApiClient } from "./api.js";
import { GroundClass, SessionOpened, TickPayload } from "./types.js";

export const HISTORY_LIMIT = 60;

export interface HistoryEntry {
  timestamp: number;
  optimality: number;
  credibility: number;
  advance_rate: number;
  working_pressure: number;
  acted: boolean;
}

export type PostLogEntry =
  | { kind: "open"; options: { seed?: number; ground_class?: GroundClass } }
  | { kind: "step"; cop: number[] };

export interface SessionState {
  sessionId: string | null;
  tick: TickPayload | null;
  history: HistoryEntry[];
  postLog: PostLogEntry[];
}

export function emptyState(): SessionState {
  return { sessionId: null, tick: null, history: [], postLog: [] };
}

function copChanged(previous: TickPayload | null, next: TickPayload): boolean {
  if (!previous) return false;
  return previous.record.cop.some((v, i) => v !== next.record.cop[i]);
}

/** Fold one (record, recommendation) tick into the state. */
export function applyTick(state: SessionState, payload: TickPayload): SessionState {
  const entry: HistoryEntry = {
    timestamp: payload.record.timestamp,
    optimality: payload.recommendation.predicted_optimality,
    credibility: payload.recommendation.credibility,
    advance_rate: payload.record.advance_rate,
    working_pressure: payload.record.working_pressure,
    acted: copChanged(state.tick, payload),
  };
  const history = [...state.history, entry].slice(-HISTORY_LIMIT);
  return { ...state, tick: payload, history };
}

/** Drives a session through the API client, recording the POST log. */
export class SessionStore {
  state: SessionState = emptyState();
  private listeners: Array<(s: SessionState) => void> = [];

  constructor(private client: ApiClient) {}

  subscribe(fn: (s: SessionState) => void): void {
    this.listeners.push(fn);
  }

  private commit(next: SessionState): void {
    this.state = next;
    for (const fn of this.listeners) fn(next);
  }

  /** Ingest a tick that arrived over the SSE stream (display only). */
  ingest(payload: TickPayload): void {
    this.commit(applyTick(this.state, payload));
  }

  async open(options: { seed?: number; ground_class?: GroundClass } = {}): Promise<SessionOpened> {
    const opened = await this.client.openSession(options);
    const next = applyTick(emptyState(), opened);
    next.sessionId = opened.session_id;
    next.postLog = [{ kind: "open", options }];
    this.commit(next);
    return opened;
  }

  async step(cop: number[]): Promise<TickPayload> {
    if (!this.state.sessionId) throw new Error("no open session");
    const payload = await this.client.step(this.state.sessionId, cop);
    const next = applyTick(this.state, payload);
    next.postLog = [...this.state.postLog, { kind: "step", cop: [...cop] }];
    this.commit(next);
    return payload;
  }

  /** Apply the service-recommended delta for one control and step. */
  async applyRecommendedStep(index: number): Promise<TickPayload> {
    const tick = this.state.tick;
    if (!tick) throw new Error("no tick yet");
    const cop = [...tick.record.cop];
    cop[index] += tick.recommendation.deltas[index];
    return this.step(cop);
  }

  async close(): Promise<void> {
    if (this.state.sessionId) {
      await this.client.closeSession(this.state.sessionId);
    }
  }
}

/** Re-run a recorded POST log; the resulting state must reproduce the
 * original session (the service is deterministic given the log). */
export async function replay(client: ApiClient, log: PostLogEntry[]): Promise<SessionState> {
  const store = new SessionStore(client);
  for (const entry of log) {
    if (entry.kind === "open") {
      await store.open(entry.options);
    } else {
      await store.step(entry.cop);
    }
  }
  return store.state;
}
