/** Wire types of the advisory service. Every payload carries a
 * schema_version; a mismatch is a hard error (the UI must not guess). */

export const SCHEMA_VERSION = 1;

export type GroundClass = "GC1" | "GC2" | "GC3";

export interface SensorRecord {
  timestamp: number;
  tunnel_length: number;
  advance_rate: number;
  working_pressure: number;
  cop: number[];
  cxp: number[];
  ground_class: GroundClass;
}

export interface Recommendation {
  schema_version: number;
  gradients: number[];
  deltas: number[];
  predicted_optimality: number;
  credibility: number;
  ground_class: GroundClass;
  at_bound: number[];
  no_improvement: boolean;
}

export interface TickPayload {
  schema_version: number;
  record: SensorRecord;
  recommendation: Recommendation;
}

export interface SessionOpened extends TickPayload {
  session_id: string;
}

export interface ModelsInfo {
  schema_version: number;
  models: Record<
    string,
    {
      arch: number[];
      corpus_fingerprint: string;
      corpus_size: number;
      optimality: { mb: number; ub: number; norm_min: number; norm_max: number };
    }
  >;
}

export class SchemaVersionError extends Error {
  constructor(got: unknown) {
    super(`service speaks schema_version ${String(got)}, this dashboard needs ${SCHEMA_VERSION}`);
    this.name = "SchemaVersionError";
  }
}

/** Throw on any payload whose schema_version differs from ours. */
export function checkSchemaVersion<T extends { schema_version?: unknown }>(payload: T): T {
  if (payload.schema_version !== SCHEMA_VERSION) {
    throw new SchemaVersionError(payload.schema_version);
  }
  return payload;
}

export const COP_NAMES = [
  "Cutter-head speed",
  "HP nozzle",
  "Drive-line pressure",
  "Jacking thrust",
  "Feed-pump speed",
];
