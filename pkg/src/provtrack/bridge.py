"""Line-oriented stdio endpoint for foreign-language callers.

Protocol: one JSON object per line in, one per line out.

    request:  {"id": <int>, "op": <name>, "args": {...}}
    response: {"id": <int>, "status": 0, "result": {...}}
              {"id": <int>, "status": <code>, "code": <slug>, "error": <msg>}

Argument values are flat scalars (string/int/float/bool/null); structured
payloads travel as JSON text in string arguments, binary blobs as base64.
Status codes are the stable numeric table from errors.STATUS_CODES. One
bridge process hosts at most one active run, matching the in-process rule.

Run with: python3 -m provtrack.bridge
"""

from __future__ import annotations

import base64
import json
import sys
from typing import Any

from . import run as runmod
from .clock import TickingClock
from .environment import HostInfo
from .errors import STATUS_CODES, NotFoundError, ProvTrackError, status_code_for
from .records import Context, DatasetDescriptor, LayerInfo, ModelDescriptor
from .telemetry import EnergySample, ScriptedProvider, SystemSample

# The public directive set; foreign bindings check themselves against this
# list so they cannot grow calls the core lacks.
DIRECTIVES = (
    "start_run",
    "end_run",
    "log_param",
    "log_metric",
    "log_artifact",
    "log_model",
    "save_model_version",
    "log_dataset",
    "log_current_execution_time",
    "log_system_metrics",
    "log_carbon_metrics",
    "set_carbon_intensity",
)


def _context(label: str) -> Context:
    return Context(label)


def _record_result(record) -> dict:
    return {
        "label": record.label,
        "path": str(record.path),
        "rel_path": record.rel_path,
        "timestamp_ms": record.timestamp_ms,
        "size_bytes": record.size_bytes,
        "content_hash": record.content_hash,
        "context": record.context.label if record.context else None,
        "step": record.step,
    }


def _scripted_provider(spec_text: str) -> ScriptedProvider:
    data = json.loads(spec_text)
    system = [SystemSample(**item) for item in data.get("system", ())]
    energy = [EnergySample(**item) for item in data.get("energy", ())]
    return ScriptedProvider(system=system, energy=energy)


def _op_start_run(args: dict) -> dict:
    injection: dict[str, Any] = {}
    if args.get("clock_start_ms") is not None:
        injection["clock"] = TickingClock(
            int(args["clock_start_ms"]), int(args.get("clock_tick_ms") or 0)
        )
    if args.get("telemetry_json"):
        injection["telemetry"] = _scripted_provider(args["telemetry_json"])
    if args.get("environ_json") is not None:
        injection["environ"] = {
            str(k): str(v) for k, v in json.loads(args["environ_json"]).items()
        }
    if args.get("deps_json") is not None:
        deps = [(str(n), str(v)) for n, v in json.loads(args["deps_json"])]
        injection["dependency_prober"] = lambda: deps
    if args.get("allowlist_json") is not None:
        injection["env_allowlist"] = [str(p) for p in json.loads(args["allowlist_json"])]
    if args.get("host_json") is not None:
        host = json.loads(args["host_json"])
        injection["host_info"] = HostInfo(
            hostname=str(host["hostname"]),
            os_tag=str(host["os_tag"]),
            pid=int(host["pid"]),
            command_line=tuple(str(part) for part in host.get("command_line", ())),
        )
    handle = runmod.start_run(
        prov_user_namespace=args["prov_user_namespace"],
        experiment_name=args.get("experiment_name", "default"),
        provenance_save_dir=args.get("provenance_save_dir", "prov"),
        collect_all_processes=bool(args.get("collect_all_processes", False)),
        save_after_n_logs=args.get("save_after_n_logs", 100),
        rank=args.get("rank"),
        **injection,
    )
    return {
        "run_id": handle.run_id,
        "rank": handle.rank,
        "run_dir": str(handle.run_dir),
        "sink": handle.sink,
    }


def _op_log_model(args: dict) -> dict:
    data = json.loads(args["descriptor_json"])
    descriptor = ModelDescriptor(
        total_parameters=int(data["total_parameters"]),
        memory_bytes=int(data["memory_bytes"]),
        label=data.get("label"),
        gradient_memory_bytes=data.get("gradient_memory_bytes"),
        layers=tuple(
            LayerInfo(
                name=str(layer["name"]),
                kind=str(layer["kind"]),
                input_shape=tuple(int(d) for d in layer["input_shape"]),
                output_shape=tuple(int(d) for d in layer["output_shape"]),
                dtype=str(layer["dtype"]),
            )
            for layer in data.get("layers", ())
        ),
    )
    runmod.log_model(args["label"], descriptor, bool(args.get("log_as_artifact", False)))
    return {}


def handle_request(op: str, args: dict) -> dict:
    if op == "list_ops":
        return {"ops": list(DIRECTIVES)}
    if op == "start_run":
        return _op_start_run(args)
    if op == "end_run":
        path = runmod.end_run(
            create_graph=bool(args.get("create_graph", False)),
            create_svg=bool(args.get("create_svg", False)),
        )
        return {"path": str(path) if path is not None else None}
    if op == "log_param":
        runmod.log_param(args["key"], args["value"])
        return {}
    if op == "log_metric":
        runmod.log_metric(
            args["key"], float(args["value"]), _context(args["context"]), int(args["step"])
        )
        return {}
    if op == "log_artifact":
        record = runmod.log_artifact(
            args["label"],
            args["path"],
            _context(args["context"]) if args.get("context") else None,
            args.get("step"),
            args.get("timestamp_ms"),
        )
        return _record_result(record)
    if op == "save_model_version":
        record = runmod.save_model_version(
            args["label"],
            base64.b64decode(args["blob_b64"]),
            _context(args["context"]) if args.get("context") else None,
            args.get("step"),
            args.get("timestamp_ms"),
        )
        return _record_result(record)
    if op == "log_model":
        return _op_log_model(args)
    if op == "log_dataset":
        runmod.log_dataset(
            DatasetDescriptor(
                label=args["label"],
                num_samples=args.get("num_samples"),
                batch_size=args.get("batch_size"),
                num_batches=args.get("num_batches"),
                source=args.get("source"),
            )
        )
        return {}
    if op == "log_current_execution_time":
        runmod.log_current_execution_time(
            args["label"], _context(args["context"]), int(args["step"])
        )
        return {}
    if op == "log_system_metrics":
        runmod.log_system_metrics(_context(args["context"]), int(args["step"]))
        return {}
    if op == "log_carbon_metrics":
        runmod.log_carbon_metrics(_context(args["context"]), int(args["step"]))
        return {}
    if op == "set_carbon_intensity":
        runmod.set_carbon_intensity(float(args["g_per_kwh"]))
        return {}
    raise NotFoundError(f"unknown op {op!r}")


def _respond(out, payload: dict) -> None:
    out.write(json.dumps(payload, separators=(",", ":")) + "\n")
    out.flush()


def serve(stdin=None, stdout=None) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        request_id = None
        try:
            request = json.loads(line)
            request_id = request.get("id")
            op = request["op"]
            if op == "shutdown":
                _respond(stdout, {"id": request_id, "status": 0, "result": {}})
                break
            result = handle_request(op, request.get("args") or {})
            _respond(stdout, {"id": request_id, "status": 0, "result": result})
        except ProvTrackError as exc:
            _respond(
                stdout,
                {
                    "id": request_id,
                    "status": STATUS_CODES.get(exc.code, STATUS_CODES["internal"]),
                    "code": exc.code,
                    "error": str(exc),
                },
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            _respond(
                stdout,
                {
                    "id": request_id,
                    "status": STATUS_CODES["invalid-argument"],
                    "code": "invalid-argument",
                    "error": f"{type(exc).__name__}: {exc}",
                },
            )
        except OSError as exc:
            _respond(
                stdout,
                {
                    "id": request_id,
                    "status": status_code_for(exc),
                    "code": "io-error",
                    "error": str(exc),
                },
            )
    return 0


if __name__ == "__main__":
    sys.exit(serve())
