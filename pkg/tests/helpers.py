"""Deterministic run construction shared across test modules."""

from __future__ import annotations

from pathlib import Path

import provtrack
from provtrack import EnergySample, HostInfo, ScriptedProvider, SystemSample, TickingClock

EPOCH_2026 = 1767225600000  # 2026-01-01T00:00:00Z

FIXED_HOST = HostInfo(hostname="demo-host", os_tag="linux", pid=4242, command_line=("train.py",))
FIXED_ENV = {"RANK": "0", "CUDA_VISIBLE_DEVICES": "0"}
FIXED_DEPS = [("numpy", "2.1.0"), ("torch", "2.4.1")]


def fixed_system_sample(**overrides) -> SystemSample:
    values = dict(
        memory_used_bytes=2 * 1024**3,
        memory_total_bytes=8 * 1024**3,
        disk_used_bytes=40 * 1024**3,
        disk_total_bytes=100 * 1024**3,
        cpu_utilization_percent=37.5,
        gpu_memory_used_bytes=1024**3,
        gpu_utilization_percent=81.0,
    )
    values.update(overrides)
    return SystemSample(**values)


def constant_power(watts: float, times_ms: list[int]) -> ScriptedProvider:
    return ScriptedProvider(
        system=[fixed_system_sample()],
        energy=[EnergySample(cpu_power_watts=watts, sample_time_ms=t) for t in times_ms],
    )


def start_fixed_run(save_dir: Path, experiment: str = "exp", tick_ms: int = 250, **overrides):
    """A run whose every nondeterministic input is pinned."""
    kwargs = dict(
        prov_user_namespace="www.example.org",
        experiment_name=experiment,
        provenance_save_dir=str(save_dir),
        clock=TickingClock(EPOCH_2026, tick_ms),
        environ=dict(FIXED_ENV),
        dependency_prober=lambda: list(FIXED_DEPS),
        host_info=FIXED_HOST,
    )
    kwargs.update(overrides)
    return provtrack.start_run(**kwargs)
