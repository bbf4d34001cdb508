"""Domain records logged during a run: contexts, artifacts, model and
dataset descriptors."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import ClassVar

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class Context:
    """Label partitioning logged data by phase (training, validation,
    evaluation, or any custom non-empty label)."""

    label: str

    TRAINING: ClassVar["Context"]
    VALIDATION: ClassVar["Context"]
    EVALUATION: ClassVar["Context"]

    def __post_init__(self):
        if not self.label:
            raise InvalidArgumentError("context label must be non-empty")

    def __str__(self) -> str:
        return self.label

    @classmethod
    def custom(cls, label: str) -> "Context":
        return cls(label)


Context.TRAINING = Context("training")
Context.VALIDATION = Context("validation")
Context.EVALUATION = Context("evaluation")


def _require_nonnegative(name: str, value: int | None) -> None:
    if value is not None and value < 0:
        raise InvalidArgumentError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class ArtifactRecord:
    """One file captured under the run's artifacts directory."""

    label: str
    path: Path
    rel_path: str
    timestamp_ms: int
    size_bytes: int
    content_hash: str
    context: Context | None = None
    step: int | None = None

    def __post_init__(self):
        _require_nonnegative("size_bytes", self.size_bytes)


@dataclass(frozen=True)
class LayerInfo:
    name: str
    kind: str
    input_shape: tuple[int, ...]
    output_shape: tuple[int, ...]
    dtype: str


@dataclass(frozen=True)
class ModelDescriptor:
    """Architecture summary: parameter count, memory footprint, and the
    ordered layer composition (which may be empty).

    `label` is the architecture's own name; the record label under which
    the descriptor is stored comes from the log call."""

    total_parameters: int
    memory_bytes: int
    label: str | None = None
    gradient_memory_bytes: int | None = None
    layers: tuple[LayerInfo, ...] = ()

    def __post_init__(self):
        _require_nonnegative("total_parameters", self.total_parameters)
        _require_nonnegative("memory_bytes", self.memory_bytes)
        _require_nonnegative("gradient_memory_bytes", self.gradient_memory_bytes)
        object.__setattr__(self, "layers", tuple(self.layers))


@dataclass(frozen=True)
class DatasetDescriptor:
    label: str
    num_samples: int | None = None
    batch_size: int | None = None
    num_batches: int | None = None
    source: str | None = None

    def __post_init__(self):
        if not self.label:
            raise InvalidArgumentError("dataset label must be non-empty")
        for name in ("num_samples", "batch_size", "num_batches"):
            _require_nonnegative(name, getattr(self, name))
