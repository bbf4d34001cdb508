"""Execution-environment capture: filtered environment variables, installed
dependencies, host identity, and distributed-rank resolution."""

from __future__ import annotations

import os
import socket
import sys
import warnings
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .errors import InvalidArgumentError

# Launcher variables consulted for rank, in precedence order.
RANK_ENV_VARS = ("SLURM_PROCID", "OMPI_COMM_WORLD_RANK", "RANK", "LOCAL_RANK")

# Variables worth keeping by default: distributed launchers, accelerators,
# and interpreter context. Everything else is dropped unless the caller
# widens the allowlist.
DEFAULT_ALLOWLIST_PREFIXES = (
    "SLURM_",
    "OMPI_",
    "PMI_",
    "MPI_",
    "CUDA_",
    "ROCR_",
    "NCCL_",
    "RANK",
    "LOCAL_RANK",
    "WORLD_SIZE",
    "MASTER_ADDR",
    "MASTER_PORT",
    "NODE_RANK",
    "CONDA_DEFAULT_ENV",
    "VIRTUAL_ENV",
    "PYTHONHASHSEED",
)

_REDACT_MARKERS = ("KEY", "TOKEN", "SECRET", "PASSWORD")
REDACTED = "[redacted]"


def resolve_rank(explicit: int | None, environ: Mapping[str, str] | None = None) -> int:
    """Explicit value wins; otherwise the first parsable launcher variable;
    otherwise 0. Unparsable values are skipped with a warning."""
    if explicit is not None:
        if explicit < 0:
            raise InvalidArgumentError("rank must be nonnegative")
        return explicit
    if environ is None:
        environ = os.environ
    for name in RANK_ENV_VARS:
        raw = environ.get(name)
        if raw is None:
            continue
        try:
            value = int(raw)
        except ValueError:
            warnings.warn(f"ignoring unparsable {name}={raw!r}", RuntimeWarning, stacklevel=2)
            continue
        if value < 0:
            warnings.warn(f"ignoring negative {name}={raw!r}", RuntimeWarning, stacklevel=2)
            continue
        return value
    return 0


def redact_value(name: str, value: str) -> str:
    upper = name.upper()
    if any(marker in upper for marker in _REDACT_MARKERS):
        return REDACTED
    return value


@dataclass(frozen=True)
class HostInfo:
    hostname: str
    os_tag: str
    pid: int
    command_line: tuple[str, ...]

    @classmethod
    def current(cls) -> "HostInfo":
        return cls(
            hostname=socket.gethostname(),
            os_tag=sys.platform,
            pid=os.getpid(),
            command_line=tuple(sys.argv),
        )


@dataclass(frozen=True)
class EnvironmentSnapshot:
    variables: tuple[tuple[str, str], ...]
    dependencies: tuple[tuple[str, str], ...]
    host: HostInfo
    prober_missing: bool = False


def default_dependency_prober() -> list[tuple[str, str]]:
    import importlib.metadata as md

    pairs = []
    for dist in md.distributions():
        name = dist.metadata.get("Name") or ""
        if name:
            pairs.append((name, dist.version or ""))
    return pairs


def capture_environment(
    environ: Mapping[str, str] | None = None,
    prober: Callable[[], Sequence[tuple[str, str]]] | None = default_dependency_prober,
    allowlist: Sequence[str] | None = None,
    host_info: HostInfo | None = None,
) -> EnvironmentSnapshot:
    """Read-only snapshot. Never raises: a missing prober degrades to an
    empty dependency list plus a warning flag."""
    if environ is None:
        environ = os.environ
    prefixes = tuple(allowlist) if allowlist is not None else DEFAULT_ALLOWLIST_PREFIXES

    variables = tuple(
        (name, redact_value(name, value))
        for name, value in sorted(environ.items())
        if any(name.startswith(p) for p in prefixes)
    )

    prober_missing = prober is None
    dependencies: tuple[tuple[str, str], ...] = ()
    if prober is None:
        warnings.warn("no dependency prober available", RuntimeWarning, stacklevel=2)
    else:
        try:
            dependencies = tuple(sorted((str(n), str(v)) for n, v in prober()))
        except Exception as exc:
            warnings.warn(f"dependency prober failed: {exc}", RuntimeWarning, stacklevel=2)
            prober_missing = True

    return EnvironmentSnapshot(
        variables=variables,
        dependencies=dependencies,
        host=host_info if host_info is not None else HostInfo.current(),
        prober_missing=prober_missing,
    )
