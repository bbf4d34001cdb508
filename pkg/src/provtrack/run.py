"""Run lifecycle: start/end, rank gating, the logging directives, and
assembly of the final provenance document.

One run may be active per process at a time. A handle can be shared across
threads; every mutating call holds the handle lock, so appends never
interleave. When ``collect_all_processes`` is false, handles on nonzero
ranks accept every call, validate arguments, and write nothing.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .clock import Clock, SystemClock
from .environment import (
    DEFAULT_ALLOWLIST_PREFIXES,
    EnvironmentSnapshot,
    HostInfo,
    capture_environment,
    default_dependency_prober,
    resolve_rank,
)
from .errors import (
    DuplicateParamError,
    IllegalStateError,
    InvalidArgumentError,
)
from .prov.model import AttributeValue
from .records import ArtifactRecord, Context, DatasetDescriptor, ModelDescriptor
from .series import MetricStore
from .telemetry import EnergyAccumulator, EnergySample, HostProvider, TelemetryProvider

_RUN_DIR_SUFFIX = re.compile(r"_(\d+)$")


@dataclass
class RunConfig:
    user_namespace: str
    experiment_name: str = "default"
    save_dir: Path = Path("prov")
    collect_all_processes: bool = False
    save_after_n_logs: int | None = 100
    rank: int | None = None
    # Injection points; defaults reproduce live behavior.
    clock: Clock = field(default_factory=SystemClock)
    telemetry: TelemetryProvider | None = None
    environ: Mapping[str, str] | None = None
    dependency_prober: Callable[[], Sequence[tuple[str, str]]] | None = default_dependency_prober
    env_allowlist: Sequence[str] | None = None
    host_info: HostInfo | None = None

    def __post_init__(self):
        if not self.user_namespace:
            raise InvalidArgumentError("user namespace must be non-empty")
        if not self.experiment_name:
            raise InvalidArgumentError("experiment name must be non-empty")
        if "/" in self.experiment_name or "\x00" in self.experiment_name:
            raise InvalidArgumentError("experiment name must be a single path segment")
        if self.save_after_n_logs is not None and self.save_after_n_logs < 1:
            raise InvalidArgumentError("save_after_n_logs must be >= 1")
        if self.rank is not None and self.rank < 0:
            raise InvalidArgumentError("rank must be nonnegative")
        self.save_dir = Path(self.save_dir)


def next_run_id(save_dir: Path, experiment_name: str) -> int:
    """1 + highest id among existing `<experiment>_<n>` directories; ids come
    from the directory names alone, so a crashed run still claims its slot."""
    highest = -1
    prefix = experiment_name + "_"
    if save_dir.is_dir():
        for child in save_dir.iterdir():
            if not child.name.startswith(prefix):
                continue
            tail = child.name[len(prefix) :]
            if tail.isdigit() and child.is_dir():
                highest = max(highest, int(tail))
    return highest + 1


def _sha256_file(path: Path) -> tuple[str, int]:
    digest = hashlib.sha256()
    size = 0
    with open(path, "rb") as fh:
        while True:
            chunk = fh.read(1 << 20)
            if not chunk:
                break
            digest.update(chunk)
            size += len(chunk)
    return digest.hexdigest(), size


class RunHandle:
    """Live state of one run. Construct through start_run()."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.rank = resolve_rank(config.rank, config.environ)
        self.sink = not config.collect_all_processes and self.rank != 0
        self.active = True
        self.started_at_ms = config.clock.now_ms()
        self.ended_at_ms: int | None = None

        self.params: dict[str, AttributeValue] = {}
        self.datasets: dict[str, DatasetDescriptor] = {}
        self.artifacts: list[ArtifactRecord] = []
        self.model_versions: dict[str, list[ArtifactRecord]] = {}
        self.final_model: tuple[str, ModelDescriptor] | None = None
        self.energy = EnergyAccumulator()
        self.environment: EnvironmentSnapshot | None = None

        self._lock = threading.RLock()
        self._provider: TelemetryProvider | None = config.telemetry

        if self.sink:
            self.run_id = -1
            self.run_dir = config.save_dir / f"{config.experiment_name}_sink"
            # Spill must never trigger on a sink, whatever the threshold.
            self.metrics = MetricStore(self.run_dir / "metrics", None)
            return

        config.save_dir.mkdir(parents=True, exist_ok=True)
        self.run_id = next_run_id(config.save_dir, config.experiment_name)
        self.run_dir = config.save_dir / f"{config.experiment_name}_{self.run_id}"
        self.artifacts_dir = self.run_dir / "artifacts"
        self.metrics_dir = self.run_dir / "metrics"
        self.artifacts_dir.mkdir(parents=True)
        self.metrics_dir.mkdir()
        self.metrics = MetricStore(self.metrics_dir, config.save_after_n_logs)
        self.environment = capture_environment(
            environ=config.environ,
            prober=config.dependency_prober,
            allowlist=config.env_allowlist,
            host_info=config.host_info,
        )

    # -- lifecycle ---------------------------------------------------------

    def _require_active(self) -> None:
        if not self.active:
            raise IllegalStateError("run already ended")

    def _now(self) -> int:
        return self.config.clock.now_ms()

    def end(self, create_graph: bool = False, create_svg: bool = False) -> Path | None:
        """Flush everything, write the provenance document, deactivate.

        Returns the document path, or None on a sink handle. The DOT file is
        written only when asked; the SVG additionally needs the external
        layout tool and degrades to a warning without it.
        """
        from .graph import build_provenance, to_dot, to_svg
        from .prov.jsonio import serialize

        with self._lock:
            self._require_active()
            self.ended_at_ms = self._now()
            self.active = False
            _clear_active(self)
            if self.sink:
                return None
            self.metrics.flush_all()

            doc = build_provenance(self)
            stem = f"provgraph_{self.config.experiment_name}_{self.run_id}_rank{self.rank}"
            json_path = self.run_dir / f"{stem}.json"
            json_path.write_bytes(serialize(doc))

            if create_graph or create_svg:
                dot_text = to_dot(doc)
                if create_graph:
                    (self.run_dir / f"{stem}.dot").write_text(dot_text, encoding="utf-8")
                if create_svg:
                    svg = to_svg(dot_text)
                    if svg is None:
                        warnings.warn(
                            "graph layout tool not found; skipping SVG",
                            RuntimeWarning,
                            stacklevel=2,
                        )
                    else:
                        (self.run_dir / f"{stem}.svg").write_bytes(svg)
            return json_path

    # -- directives --------------------------------------------------------

    def log_param(self, key: str, value) -> None:
        with self._lock:
            self._require_active()
            if not key:
                raise InvalidArgumentError("param key must be non-empty")
            if key in self.params:
                raise DuplicateParamError(f"param {key!r} already logged")
            self.params[key] = value if isinstance(value, AttributeValue) else AttributeValue(value)

    def log_metric(self, key: str, value: float, context: Context, step: int) -> None:
        with self._lock:
            self._require_active()
            self.metrics.log(key, value, context, step, self._now())

    def _log_metric_at(self, key: str, value: float, context: Context, step: int, ts: int) -> None:
        self.metrics.log(key, value, context, step, ts)

    def _unique_dest(self, directory: Path, name: str, digest: str) -> Path:
        """First free or content-identical path for `name` in `directory`,
        adding `_<k>` before the extension when contents differ."""
        stem, dot, ext = name.partition(".")
        suffix = dot + ext if dot else ""
        candidate = directory / name
        k = 0
        while candidate.exists():
            if _sha256_file(candidate)[0] == digest:
                return candidate
            k += 1
            candidate = directory / f"{stem}_{k}{suffix}"
        return candidate

    def _record_artifact(
        self,
        label: str,
        dest: Path,
        digest: str,
        size: int,
        context: Context | None,
        step: int | None,
        timestamp_ms: int,
    ) -> ArtifactRecord:
        rel = "/".join(dest.relative_to(self.run_dir).parts) if not self.sink else dest.name
        return ArtifactRecord(
            label=label,
            path=dest,
            rel_path=rel,
            timestamp_ms=timestamp_ms,
            size_bytes=size,
            content_hash=digest,
            context=context,
            step=step,
        )

    def log_artifact(
        self,
        label: str,
        path: str | Path,
        context: Context | None = None,
        step: int | None = None,
        timestamp_ms: int | None = None,
    ) -> ArtifactRecord:
        with self._lock:
            self._require_active()
            source = Path(path)
            digest, size = _sha256_file(source)  # raises OSError when unreadable
            ts = timestamp_ms if timestamp_ms is not None else self._now()
            if self.sink:
                record = self._record_artifact(label, source, digest, size, context, step, ts)
                self.artifacts.append(record)
                return record
            directory = self.artifacts_dir / context.label if context else self.artifacts_dir
            directory.mkdir(parents=True, exist_ok=True)
            dest = self._unique_dest(directory, source.name, digest)
            if not dest.exists():
                dest.write_bytes(source.read_bytes())
            record = self._record_artifact(label, dest, digest, size, context, step, ts)
            self.artifacts.append(record)
            return record

    def save_model_version(
        self,
        label: str,
        blob: bytes,
        context: Context | None = None,
        step: int | None = None,
        timestamp_ms: int | None = None,
    ) -> ArtifactRecord:
        with self._lock:
            self._require_active()
            if not label:
                raise InvalidArgumentError("model version label must be non-empty")
            chain = self.model_versions.setdefault(label, [])
            digest = hashlib.sha256(blob).hexdigest()
            ts = timestamp_ms if timestamp_ms is not None else self._now()
            name = f"{label}_step{step}" if step is not None else f"{label}_v{len(chain)}"
            if self.sink:
                record = self._record_artifact(
                    label, Path(name), digest, len(blob), context, step, ts
                )
                chain.append(record)
                return record
            directory = self.artifacts_dir / label
            directory.mkdir(parents=True, exist_ok=True)
            dest = self._unique_dest(directory, name, digest)
            if not dest.exists():
                dest.write_bytes(blob)
            record = self._record_artifact(label, dest, digest, len(blob), context, step, ts)
            chain.append(record)
            return record

    def log_model(self, label: str, descriptor: ModelDescriptor, log_as_artifact: bool = False) -> None:
        with self._lock:
            self._require_active()
            if not label:
                raise InvalidArgumentError("model label must be non-empty")
            if self.final_model is not None:
                raise DuplicateParamError("final model already logged")
            self.final_model = (label, descriptor)
            if log_as_artifact and not self.sink:
                blob = json.dumps(
                    {
                        "label": descriptor.label or label,
                        "total_parameters": descriptor.total_parameters,
                        "memory_bytes": descriptor.memory_bytes,
                        "gradient_memory_bytes": descriptor.gradient_memory_bytes,
                        "layers": [
                            {
                                "name": layer.name,
                                "kind": layer.kind,
                                "input_shape": list(layer.input_shape),
                                "output_shape": list(layer.output_shape),
                                "dtype": layer.dtype,
                            }
                            for layer in descriptor.layers
                        ],
                    },
                    indent=2,
                    sort_keys=True,
                ).encode("utf-8")
                directory = self.artifacts_dir
                digest = hashlib.sha256(blob).hexdigest()
                dest = self._unique_dest(directory, f"{label}.json", digest)
                if not dest.exists():
                    dest.write_bytes(blob)
                self.artifacts.append(
                    self._record_artifact(label, dest, digest, len(blob), None, None, self._now())
                )

    def log_dataset(self, descriptor: DatasetDescriptor) -> None:
        with self._lock:
            self._require_active()
            if descriptor.label in self.datasets:
                raise DuplicateParamError(f"dataset {descriptor.label!r} already logged")
            self.datasets[descriptor.label] = descriptor

    def log_current_execution_time(self, label: str, context: Context, step: int) -> None:
        with self._lock:
            self._require_active()
            now = self._now()
            seconds = (now - self.started_at_ms) / 1000.0
            self._log_metric_at(label, seconds, context, step, now)

    def _telemetry(self) -> TelemetryProvider:
        if self._provider is None:
            self._provider = HostProvider(self.config.clock)
        return self._provider

    def log_system_metrics(self, context: Context, step: int) -> None:
        with self._lock:
            self._require_active()
            try:
                sample = self._telemetry().sample_system()
            except Exception as exc:
                warnings.warn(f"system telemetry failed: {exc}", RuntimeWarning, stacklevel=2)
                return
            ts = self._now()
            self._log_metric_at("memory_usage", float(sample.memory_used_bytes), context, step, ts)
            self._log_metric_at("disk_usage", float(sample.disk_used_bytes), context, step, ts)
            if sample.gpu_memory_used_bytes is not None:
                self._log_metric_at(
                    "gpu_memory_usage", float(sample.gpu_memory_used_bytes), context, step, ts
                )
            if sample.gpu_utilization_percent is not None:
                self._log_metric_at(
                    "gpu_usage", float(sample.gpu_utilization_percent), context, step, ts
                )
            self._log_metric_at(
                "cpu_usage", float(sample.cpu_utilization_percent), context, step, ts
            )

    def log_carbon_metrics(self, context: Context, step: int) -> None:
        with self._lock:
            self._require_active()
            try:
                sample: EnergySample = self._telemetry().sample_energy()
            except Exception as exc:
                warnings.warn(f"energy telemetry failed: {exc}", RuntimeWarning, stacklevel=2)
                return
            self.energy.observe(sample)
            ts = sample.sample_time_ms
            self._log_metric_at("cpu_power_W", sample.cpu_power_watts, context, step, ts)
            if sample.gpu_power_watts is not None:
                self._log_metric_at("gpu_power_W", sample.gpu_power_watts, context, step, ts)
            self._log_metric_at("energy_kWh", self.energy.cumulative_energy_kwh, context, step, ts)
            self._log_metric_at("emissions_gCO2eq", self.energy.emissions_g, context, step, ts)

    def set_carbon_intensity(self, g_per_kwh: float) -> None:
        with self._lock:
            self._require_active()
            self.energy.set_carbon_intensity(g_per_kwh)


# -- process-level lifecycle -------------------------------------------------

_ACTIVE: RunHandle | None = None
_ACTIVE_LOCK = threading.Lock()


def _clear_active(handle: RunHandle) -> None:
    global _ACTIVE
    with _ACTIVE_LOCK:
        if _ACTIVE is handle:
            _ACTIVE = None


def active_run() -> RunHandle:
    if _ACTIVE is None:
        raise IllegalStateError("no active run")
    return _ACTIVE


def start_run(
    prov_user_namespace: str,
    experiment_name: str = "default",
    provenance_save_dir: str | Path = "prov",
    collect_all_processes: bool = False,
    save_after_n_logs: int | None = 100,
    rank: int | None = None,
    **injection,
) -> RunHandle:
    """Open a run and make it the process-active one.

    Keyword-only injection points (clock, telemetry, environ,
    dependency_prober, env_allowlist, host_info) exist so tests and goldens
    can pin every source of nondeterminism.
    """
    global _ACTIVE
    config = RunConfig(
        user_namespace=prov_user_namespace,
        experiment_name=experiment_name,
        save_dir=Path(provenance_save_dir),
        collect_all_processes=collect_all_processes,
        save_after_n_logs=save_after_n_logs,
        rank=rank,
        **injection,
    )
    with _ACTIVE_LOCK:
        if _ACTIVE is not None:
            raise IllegalStateError("a run is already active in this process")
        handle = RunHandle(config)
        _ACTIVE = handle
        return handle


def end_run(create_graph: bool = False, create_svg: bool = False) -> Path | None:
    return active_run().end(create_graph=create_graph, create_svg=create_svg)


def log_param(key: str, value) -> None:
    active_run().log_param(key, value)


def log_metric(key: str, value: float, context: Context, step: int) -> None:
    active_run().log_metric(key, value, context, step)


def log_artifact(
    label: str,
    path: str | Path,
    context: Context | None = None,
    step: int | None = None,
    timestamp_ms: int | None = None,
) -> ArtifactRecord:
    return active_run().log_artifact(label, path, context, step, timestamp_ms)


def save_model_version(
    label: str,
    blob: bytes,
    context: Context | None = None,
    step: int | None = None,
    timestamp_ms: int | None = None,
) -> ArtifactRecord:
    return active_run().save_model_version(label, blob, context, step, timestamp_ms)


def log_model(label: str, descriptor: ModelDescriptor, log_as_artifact: bool = False) -> None:
    active_run().log_model(label, descriptor, log_as_artifact)


def log_dataset(descriptor: DatasetDescriptor) -> None:
    active_run().log_dataset(descriptor)


def log_current_execution_time(label: str, context: Context, step: int) -> None:
    active_run().log_current_execution_time(label, context, step)


def log_system_metrics(context: Context, step: int) -> None:
    active_run().log_system_metrics(context, step)


def log_carbon_metrics(context: Context, step: int) -> None:
    active_run().log_carbon_metrics(context, step)


def set_carbon_intensity(g_per_kwh: float) -> None:
    active_run().set_carbon_intensity(g_per_kwh)
