"""provtrack: experiment lineage tracking with canonical PROV-JSON output.

Typical use mirrors an ML training script::

    import provtrack
    from provtrack import Context

    provtrack.start_run(
        prov_user_namespace="www.example.org",
        experiment_name="mnist",
        provenance_save_dir="prov",
    )
    provtrack.log_param("lr", 0.01)
    for epoch in range(3):
        provtrack.log_metric("MSE_train", 0.5, Context.TRAINING, step=epoch)
        provtrack.save_model_version("mnist_model_version", blob, Context.TRAINING, epoch)
    provtrack.log_model("mnist_model_final", descriptor)
    provtrack.end_run(create_graph=True, create_svg=True)

Every run produces one PROV-JSON document plus per-series sample files; the
``provtrack`` command-line tool merges, diffs, validates, converts, and
exports them.
"""

from .clock import Clock, ManualClock, SystemClock, TickingClock
from .environment import (
    EnvironmentSnapshot,
    HostInfo,
    capture_environment,
    resolve_rank,
)
from .errors import (
    DuplicateParamError,
    DuplicateRecordError,
    ExportError,
    IllegalStateError,
    InvalidArgumentError,
    InvalidDocumentError,
    NotFoundError,
    ParseError,
    ProvTrackError,
)
from .records import (
    ArtifactRecord,
    Context,
    DatasetDescriptor,
    LayerInfo,
    ModelDescriptor,
)
from .run import (
    RunConfig,
    RunHandle,
    active_run,
    end_run,
    log_artifact,
    log_carbon_metrics,
    log_current_execution_time,
    log_dataset,
    log_metric,
    log_model,
    log_param,
    log_system_metrics,
    save_model_version,
    set_carbon_intensity,
    start_run,
)
from .telemetry import (
    EnergyAccumulator,
    EnergySample,
    HostProvider,
    ScriptedProvider,
    SystemSample,
    TelemetryProvider,
)

__version__ = "0.1.0"

__all__ = [
    "ArtifactRecord",
    "Clock",
    "Context",
    "DatasetDescriptor",
    "DuplicateParamError",
    "DuplicateRecordError",
    "EnergyAccumulator",
    "EnergySample",
    "EnvironmentSnapshot",
    "ExportError",
    "HostInfo",
    "HostProvider",
    "IllegalStateError",
    "InvalidArgumentError",
    "InvalidDocumentError",
    "LayerInfo",
    "ManualClock",
    "ModelDescriptor",
    "NotFoundError",
    "ParseError",
    "ProvTrackError",
    "RunConfig",
    "RunHandle",
    "ScriptedProvider",
    "SystemClock",
    "SystemSample",
    "TelemetryProvider",
    "TickingClock",
    "active_run",
    "capture_environment",
    "end_run",
    "log_artifact",
    "log_carbon_metrics",
    "log_current_execution_time",
    "log_dataset",
    "log_metric",
    "log_model",
    "log_param",
    "log_system_metrics",
    "resolve_rank",
    "save_model_version",
    "set_carbon_intensity",
    "start_run",
    "__version__",
]
