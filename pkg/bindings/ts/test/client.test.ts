import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterEach, describe, expect, it } from "vitest";

import { Context, CoreError, ProvTrackClient, STATUS_CODES } from "../src/index.js";

const EPOCH = 1767225600000;

let client: ProvTrackClient | null = null;
let scratch: string | null = null;

afterEach(async () => {
  if (client) {
    await client.close();
    client = null;
  }
  if (scratch) {
    rmSync(scratch, { recursive: true, force: true });
    scratch = null;
  }
});

function tempDir(): string {
  scratch = mkdtempSync(join(tmpdir(), "provtrack-ts-"));
  return scratch;
}

function startOptions(dir: string) {
  return {
    prov_user_namespace: "www.example.org",
    experiment_name: "ts",
    provenance_save_dir: dir,
    clock_start_ms: EPOCH,
    clock_tick_ms: 100,
    environ: { RANK: "0" },
    dependencies: [] as Array<[string, string]>,
    host: { hostname: "h", os_tag: "linux", pid: 1, command_line: ["x"] },
  };
}

describe("lifecycle", () => {
  it("starts and ends a run", async () => {
    client = await ProvTrackClient.start();
    const dir = tempDir();
    const info = await client.start_run(startOptions(dir));
    expect(info.run_id).toBe(0);
    expect(info.rank).toBe(0);
    expect(info.sink).toBe(false);
    await client.log_param("lr", 0.01);
    await client.log_metric("loss", 0.5, Context.TRAINING, 0);
    const path = await client.end_run();
    expect(path).toMatch(/provgraph_ts_0_rank0\.json$/);
  });

  it("reports illegal state before start", async () => {
    client = await ProvTrackClient.start();
    const failure = await client.log_param("k", 1).catch((e: unknown) => e);
    expect(failure).toBeInstanceOf(CoreError);
    const err = failure as CoreError;
    expect(err.code).toBe("illegal-state");
    expect(err.status).toBe(STATUS_CODES["illegal-state"]);
  });

  it("maps duplicate params to the stable code", async () => {
    client = await ProvTrackClient.start();
    const dir = tempDir();
    await client.start_run(startOptions(dir));
    await client.log_param("lr", 1);
    const failure = await client.log_param("lr", 2).catch((e: unknown) => e);
    expect((failure as CoreError).code).toBe("duplicate-param");
    expect((failure as CoreError).status).toBe(4);
    await client.end_run();
  });

  it("keeps serving after an error response", async () => {
    client = await ProvTrackClient.start();
    const dir = tempDir();
    await client.start_run(startOptions(dir));
    await expect(client.log_metric("loss", NaN, Context.TRAINING, 0)).rejects.toBeInstanceOf(
      CoreError,
    );
    await client.log_metric("loss", 1.0, Context.TRAINING, 0);
    expect(await client.end_run()).toBeTruthy();
  });

  it("rejects unknown ops with not-found", async () => {
    client = await ProvTrackClient.start();
    const failure = await client.request("frobnicate").catch((e: unknown) => e);
    expect((failure as CoreError).code).toBe("not-found");
    expect((failure as CoreError).status).toBe(5);
  });
});

describe("api parity", () => {
  it("exposes exactly the ops the bridge advertises", async () => {
    client = await ProvTrackClient.start();
    const advertised = await client.list_ops();
    for (const op of advertised) {
      expect(
        typeof (client as unknown as Record<string, unknown>)[op],
        `client is missing directive ${op}`,
      ).toBe("function");
    }
    expect(advertised).toContain("start_run");
    expect(advertised).toContain("log_carbon_metrics");
    expect(advertised.length).toBe(12);
  });

  it("correlates out-of-order pipelined requests by id", async () => {
    client = await ProvTrackClient.start();
    const dir = tempDir();
    await client.start_run(startOptions(dir));
    // fire a batch without awaiting in between
    const batch = Array.from({ length: 20 }, (_, i) =>
      client!.log_metric("loss", 1.0 / (i + 1), Context.TRAINING, i),
    );
    await Promise.all(batch);
    const path = await client.end_run();
    expect(path).toBeTruthy();
  });

  it("round-trips binary blobs", async () => {
    client = await ProvTrackClient.start();
    const dir = tempDir();
    await client.start_run(startOptions(dir));
    const blob = new Uint8Array([0, 1, 2, 255, 254, 128]);
    const record = await client.save_model_version("net", blob, Context.TRAINING, 0);
    expect(record.size_bytes).toBe(6);
    expect(record.rel_path).toBe("artifacts/net/net_step0");
    await client.end_run();
  });

  it("surfaces bridge death as unavailable", async () => {
    client = await ProvTrackClient.start();
    const pending = client.request("list_ops");
    await pending; // make sure the pipe works first
    client.kill();
    const failure = await client.request("list_ops").catch((e: unknown) => e);
    expect((failure as CoreError).code).toBe("unavailable");
    client = null;
  });
});
