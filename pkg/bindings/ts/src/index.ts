/**
 * Node client for the provtrack stdio bridge.
 *
 * Spawns `python3 -m provtrack.bridge` and speaks its JSON-lines protocol:
 * one request object per line out, one response per line back, correlated
 * by id. Structured payloads travel as JSON text inside string arguments
 * and binary blobs as base64, so every argument stays a flat scalar.
 */

import { spawn, type ChildProcessWithoutNullStreams } from "node:child_process";

/** Stable numeric status table, mirrored from the Python side. */
export const STATUS_CODES = {
  ok: 0,
  "invalid-argument": 1,
  "illegal-state": 2,
  "duplicate-record": 3,
  "duplicate-param": 4,
  "not-found": 5,
  "io-error": 6,
  "parse-error": 7,
  "invalid-document": 8,
  "export-error": 9,
  unavailable: 10,
  internal: 99,
} as const;

export type StatusSlug = keyof typeof STATUS_CODES;

/** A failed bridge call; `code` is the stable slug, `status` its number. */
export class CoreError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(code: string, status: number, message: string) {
    super(message);
    this.name = "CoreError";
    this.code = code;
    this.status = status;
  }
}

export const Context = {
  TRAINING: "training",
  VALIDATION: "validation",
  EVALUATION: "evaluation",
} as const;

export type ContextLabel = string;

export interface SystemSample {
  memory_used_bytes: number;
  memory_total_bytes: number;
  disk_used_bytes: number;
  disk_total_bytes: number;
  cpu_utilization_percent: number;
  gpu_memory_used_bytes?: number | null;
  gpu_utilization_percent?: number | null;
}

export interface EnergySample {
  cpu_power_watts: number;
  sample_time_ms: number;
  gpu_power_watts?: number | null;
  ram_power_watts?: number | null;
}

export interface TelemetryScript {
  system?: SystemSample[];
  energy?: EnergySample[];
}

export interface HostInfo {
  hostname: string;
  os_tag: string;
  pid: number;
  command_line?: string[];
}

export interface LayerInfo {
  name: string;
  kind: string;
  input_shape: number[];
  output_shape: number[];
  dtype: string;
}

export interface ModelDescriptor {
  total_parameters: number;
  memory_bytes: number;
  label?: string | null;
  gradient_memory_bytes?: number | null;
  layers?: LayerInfo[];
}

export interface DatasetDescriptor {
  label: string;
  num_samples?: number | null;
  batch_size?: number | null;
  num_batches?: number | null;
  source?: string | null;
}

export interface StartRunOptions {
  prov_user_namespace: string;
  experiment_name?: string;
  provenance_save_dir?: string;
  collect_all_processes?: boolean;
  save_after_n_logs?: number | null;
  rank?: number | null;
  /** Deterministic clock injection: fixed start plus per-read increment. */
  clock_start_ms?: number;
  clock_tick_ms?: number;
  telemetry?: TelemetryScript;
  environ?: Record<string, string>;
  dependencies?: Array<[string, string]>;
  env_allowlist?: string[];
  host?: HostInfo;
}

export interface RunInfo {
  run_id: number;
  rank: number;
  run_dir: string;
  sink: boolean;
}

export interface ArtifactRecord {
  label: string;
  path: string;
  rel_path: string;
  timestamp_ms: number;
  size_bytes: number;
  content_hash: string;
  context: string | null;
  step: number | null;
}

interface BridgeResponse {
  id: number;
  status: number;
  result?: Record<string, unknown>;
  code?: string;
  error?: string;
}

interface Pending {
  resolve: (value: Record<string, unknown>) => void;
  reject: (reason: Error) => void;
}

export interface ClientOptions {
  /** Python interpreter to launch; defaults to python3 on PATH. */
  python?: string;
  cwd?: string;
  env?: Record<string, string>;
}

export class ProvTrackClient {
  private child: ChildProcessWithoutNullStreams;
  private pending = new Map<number, Pending>();
  private nextId = 0;
  private buffer = "";
  private stderrTail = "";
  private closed = false;

  private constructor(child: ChildProcessWithoutNullStreams) {
    this.child = child;
    child.stdout.setEncoding("utf8");
    child.stdout.on("data", (chunk: string) => this.consume(chunk));
    child.stderr.setEncoding("utf8");
    child.stderr.on("data", (chunk: string) => {
      // keep only a bounded tail for diagnostics
      this.stderrTail = (this.stderrTail + chunk).slice(-4096);
    });
    child.on("exit", (code) => {
      const failure = new CoreError(
        "unavailable",
        STATUS_CODES.unavailable,
        `bridge exited with code ${code}: ${this.stderrTail.trim()}`,
      );
      for (const entry of this.pending.values()) entry.reject(failure);
      this.pending.clear();
      this.closed = true;
    });
  }

  static async start(options: ClientOptions = {}): Promise<ProvTrackClient> {
    const child = spawn(options.python ?? "python3", ["-m", "provtrack.bridge"], {
      cwd: options.cwd,
      env: { ...process.env, ...options.env },
      stdio: ["pipe", "pipe", "pipe"],
    });
    await new Promise<void>((resolve, reject) => {
      child.once("spawn", () => resolve());
      child.once("error", (err) => reject(err));
    });
    return new ProvTrackClient(child);
  }

  private consume(chunk: string): void {
    this.buffer += chunk;
    let newline;
    while ((newline = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, newline).trim();
      this.buffer = this.buffer.slice(newline + 1);
      if (!line) continue;
      const response = JSON.parse(line) as BridgeResponse;
      const entry = this.pending.get(response.id);
      if (!entry) continue;
      this.pending.delete(response.id);
      if (response.status === STATUS_CODES.ok) {
        entry.resolve(response.result ?? {});
      } else {
        entry.reject(
          new CoreError(
            response.code ?? "internal",
            response.status,
            response.error ?? "unknown bridge error",
          ),
        );
      }
    }
  }

  /** Send one raw request; prefer the typed wrappers below. */
  request(op: string, args: Record<string, unknown> = {}): Promise<Record<string, unknown>> {
    if (this.closed) {
      return Promise.reject(
        new CoreError("unavailable", STATUS_CODES.unavailable, "bridge already closed"),
      );
    }
    const id = this.nextId++;
    const line = JSON.stringify({ id, op, args }) + "\n";
    return new Promise((resolve, reject) => {
      this.pending.set(id, { resolve, reject });
      this.child.stdin.write(line);
    });
  }

  async start_run(options: StartRunOptions): Promise<RunInfo> {
    const args: Record<string, unknown> = {
      prov_user_namespace: options.prov_user_namespace,
    };
    if (options.experiment_name !== undefined) args.experiment_name = options.experiment_name;
    if (options.provenance_save_dir !== undefined)
      args.provenance_save_dir = options.provenance_save_dir;
    if (options.collect_all_processes !== undefined)
      args.collect_all_processes = options.collect_all_processes;
    if (options.save_after_n_logs !== undefined) args.save_after_n_logs = options.save_after_n_logs;
    if (options.rank !== undefined) args.rank = options.rank;
    if (options.clock_start_ms !== undefined) args.clock_start_ms = options.clock_start_ms;
    if (options.clock_tick_ms !== undefined) args.clock_tick_ms = options.clock_tick_ms;
    if (options.telemetry !== undefined) args.telemetry_json = JSON.stringify(options.telemetry);
    if (options.environ !== undefined) args.environ_json = JSON.stringify(options.environ);
    if (options.dependencies !== undefined) args.deps_json = JSON.stringify(options.dependencies);
    if (options.env_allowlist !== undefined)
      args.allowlist_json = JSON.stringify(options.env_allowlist);
    if (options.host !== undefined) args.host_json = JSON.stringify(options.host);
    return (await this.request("start_run", args)) as unknown as RunInfo;
  }

  async end_run(options: { create_graph?: boolean; create_svg?: boolean } = {}): Promise<
    string | null
  > {
    const result = await this.request("end_run", options);
    return (result.path as string | null) ?? null;
  }

  async log_param(key: string, value: string | number | boolean): Promise<void> {
    await this.request("log_param", { key, value });
  }

  async log_metric(
    key: string,
    value: number,
    context: ContextLabel,
    step: number,
  ): Promise<void> {
    await this.request("log_metric", { key, value, context, step });
  }

  async log_artifact(options: {
    label: string;
    path: string;
    context?: ContextLabel;
    step?: number;
    timestamp_ms?: number;
  }): Promise<ArtifactRecord> {
    return (await this.request("log_artifact", { ...options })) as unknown as ArtifactRecord;
  }

  async save_model_version(
    label: string,
    blob: Uint8Array,
    context?: ContextLabel,
    step?: number,
    timestamp_ms?: number,
  ): Promise<ArtifactRecord> {
    const args: Record<string, unknown> = {
      label,
      blob_b64: Buffer.from(blob).toString("base64"),
    };
    if (context !== undefined) args.context = context;
    if (step !== undefined) args.step = step;
    if (timestamp_ms !== undefined) args.timestamp_ms = timestamp_ms;
    return (await this.request("save_model_version", args)) as unknown as ArtifactRecord;
  }

  async log_model(
    label: string,
    descriptor: ModelDescriptor,
    log_as_artifact = false,
  ): Promise<void> {
    await this.request("log_model", {
      label,
      descriptor_json: JSON.stringify(descriptor),
      log_as_artifact,
    });
  }

  async log_dataset(descriptor: DatasetDescriptor): Promise<void> {
    await this.request("log_dataset", { ...descriptor });
  }

  async log_current_execution_time(
    label: string,
    context: ContextLabel,
    step: number,
  ): Promise<void> {
    await this.request("log_current_execution_time", { label, context, step });
  }

  async log_system_metrics(context: ContextLabel, step: number): Promise<void> {
    await this.request("log_system_metrics", { context, step });
  }

  async log_carbon_metrics(context: ContextLabel, step: number): Promise<void> {
    await this.request("log_carbon_metrics", { context, step });
  }

  async set_carbon_intensity(g_per_kwh: number): Promise<void> {
    await this.request("set_carbon_intensity", { g_per_kwh });
  }

  async list_ops(): Promise<string[]> {
    const result = await this.request("list_ops");
    return result.ops as string[];
  }

  /** Graceful shutdown: asks the bridge to exit and waits for it. */
  async close(): Promise<void> {
    if (this.closed) return;
    const exited = new Promise<void>((resolve) => this.child.once("exit", () => resolve()));
    try {
      await this.request("shutdown");
    } catch {
      // the process may already be gone; exit handling below still applies
    }
    this.child.stdin.end();
    await exited;
    this.closed = true;
  }

  /** Last-resort teardown for tests. */
  kill(): void {
    if (!this.closed) this.child.kill();
  }
}
