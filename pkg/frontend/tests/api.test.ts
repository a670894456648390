import { describe, expect, it } from "vitest";

import { ApiClient, ServiceError } from "../src/api.js";
import { SCHEMA_VERSION, SchemaVersionError } from "../src/types.js";
import { MockService } from "./mock.js";

describe("ApiClient", () => {
  it("passes recommendations through untouched", async () => {
    const mock = new MockService();
    const client = new ApiClient("", mock.fetch);
    const rec = await client.recommend("GC1", [5, 5, 5, 5, 5], Array(19).fill(0));
    expect(rec.deltas).toHaveLength(5);
    expect(rec.predicted_optimality).toBe(50.0);
    const sent = mock.requests[0].body as { schema_version: number; cop: number[] };
    expect(sent.schema_version).toBe(SCHEMA_VERSION);
    expect(sent.cop).toEqual([5, 5, 5, 5, 5]);
  });

  it("hard-fails on a schema_version mismatch", async () => {
    const mock = new MockService({ schemaVersion: 2 });
    const client = new ApiClient("", mock.fetch);
    await expect(client.health()).rejects.toBeInstanceOf(SchemaVersionError);
    await expect(
      client.recommend("GC1", [5, 5, 5, 5, 5], Array(19).fill(0)),
    ).rejects.toBeInstanceOf(SchemaVersionError);
  });

  it("surfaces service errors with their code", async () => {
    const client = new ApiClient("", async () =>
      new Response(
        JSON.stringify({ schema_version: 1, error: "UnknownSession", message: "no s9" }),
        { status: 404 },
      ),
    );
    const err = await client.step("s9", [1, 2, 3, 4, 5]).catch((e) => e);
    expect(err).toBeInstanceOf(ServiceError);
    expect(err.code).toBe("UnknownSession");
    expect(err.status).toBe(404);
  });
});
