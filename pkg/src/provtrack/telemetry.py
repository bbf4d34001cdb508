"""System and energy telemetry: sample types, pluggable providers, and the
power-to-energy accumulator behind the carbon figures."""

from __future__ import annotations

import shutil
import subprocess
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Protocol, runtime_checkable

from .clock import Clock, SystemClock
from .errors import InvalidArgumentError

DEFAULT_CARBON_INTENSITY_G_PER_KWH = 475.0

_MS_PER_S = 1000.0
_J_PER_KWH = 3.6e6


def _check_pair(used: float, total: float, what: str) -> None:
    if used < 0 or total < 0:
        raise InvalidArgumentError(f"{what} counters must be nonnegative")
    if used > total:
        raise InvalidArgumentError(f"{what} used exceeds total")


def _check_percent(value: float | None, what: str) -> None:
    if value is not None and not 0.0 <= value <= 100.0:
        raise InvalidArgumentError(f"{what} must lie in [0, 100]")


@dataclass(frozen=True)
class SystemSample:
    memory_used_bytes: int
    memory_total_bytes: int
    disk_used_bytes: int
    disk_total_bytes: int
    cpu_utilization_percent: float
    gpu_memory_used_bytes: int | None = None
    gpu_utilization_percent: float | None = None

    def __post_init__(self):
        _check_pair(self.memory_used_bytes, self.memory_total_bytes, "memory")
        _check_pair(self.disk_used_bytes, self.disk_total_bytes, "disk")
        _check_percent(self.cpu_utilization_percent, "cpu utilization")
        _check_percent(self.gpu_utilization_percent, "gpu utilization")
        if self.gpu_memory_used_bytes is not None and self.gpu_memory_used_bytes < 0:
            raise InvalidArgumentError("gpu memory must be nonnegative")


@dataclass(frozen=True)
class EnergySample:
    cpu_power_watts: float
    sample_time_ms: int
    gpu_power_watts: float | None = None
    ram_power_watts: float | None = None

    def __post_init__(self):
        for name in ("cpu_power_watts", "gpu_power_watts", "ram_power_watts"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise InvalidArgumentError(f"{name} must be nonnegative")

    @property
    def total_watts(self) -> float:
        return (
            self.cpu_power_watts
            + (self.gpu_power_watts or 0.0)
            + (self.ram_power_watts or 0.0)
        )


@runtime_checkable
class TelemetryProvider(Protocol):
    def sample_system(self) -> SystemSample: ...

    def sample_energy(self) -> EnergySample: ...


class ScriptedProvider:
    """Deterministic provider for tests and goldens: replays fixed sample
    sequences, repeating the final entry once exhausted.

    Energy entries may be EnergySample values (pre-timed) or bare watt
    numbers, which get stamped with the provider clock at read time.
    """

    def __init__(
        self,
        system: Iterable[SystemSample] = (),
        energy: Iterable[EnergySample | float] = (),
        clock: Clock | None = None,
    ):
        self._system = list(system)
        self._energy = list(energy)
        self._clock = clock if clock is not None else SystemClock()
        self._system_reads = 0
        self._energy_reads = 0

    def sample_system(self) -> SystemSample:
        if not self._system:
            raise RuntimeError("no scripted system samples")
        index = min(self._system_reads, len(self._system) - 1)
        self._system_reads += 1
        return self._system[index]

    def sample_energy(self) -> EnergySample:
        if not self._energy:
            raise RuntimeError("no scripted energy samples")
        index = min(self._energy_reads, len(self._energy) - 1)
        self._energy_reads += 1
        entry = self._energy[index]
        if isinstance(entry, EnergySample):
            return entry
        return EnergySample(cpu_power_watts=float(entry), sample_time_ms=self._clock.now_ms())


class HostProvider:
    """Best-effort live counters. GPU figures come from an optional
    management CLI; its absence just leaves those fields unset."""

    def __init__(self, clock: Clock | None = None):
        self._clock = clock if clock is not None else SystemClock()
        self._nvsmi = shutil.which("nvidia-smi")
        self._rapl_path = "/sys/class/powercap/intel-rapl:0/energy_uj"
        self._last_rapl: tuple[int, int] | None = None  # (uj, ms)

    def _gpu_stats(self) -> tuple[int | None, float | None, float | None]:
        if not self._nvsmi:
            return None, None, None
        try:
            out = subprocess.run(
                [
                    self._nvsmi,
                    "--query-gpu=memory.used,utilization.gpu,power.draw",
                    "--format=csv,noheader,nounits",
                ],
                capture_output=True,
                text=True,
                timeout=5,
                check=True,
            ).stdout
            first = out.strip().splitlines()[0]
            mem_mib, util, power = (part.strip() for part in first.split(","))
            return int(float(mem_mib)) * 1024 * 1024, float(util), float(power)
        except Exception:
            return None, None, None

    def sample_system(self) -> SystemSample:
        import psutil

        vm = psutil.virtual_memory()
        disk = psutil.disk_usage("/")
        gpu_mem, gpu_util, _ = self._gpu_stats()
        return SystemSample(
            memory_used_bytes=vm.used,
            memory_total_bytes=vm.total,
            disk_used_bytes=disk.used,
            disk_total_bytes=disk.total,
            cpu_utilization_percent=min(psutil.cpu_percent(interval=None), 100.0),
            gpu_memory_used_bytes=gpu_mem,
            gpu_utilization_percent=gpu_util,
        )

    def _cpu_power(self, now_ms: int) -> float:
        # Energy counter when the kernel exposes one; otherwise unknown (0).
        try:
            with open(self._rapl_path, "r", encoding="ascii") as fh:
                uj = int(fh.read().strip())
        except OSError:
            return 0.0
        prev, self._last_rapl = self._last_rapl, (uj, now_ms)
        if prev is None or now_ms <= prev[1] or uj < prev[0]:
            return 0.0
        joules = (uj - prev[0]) / 1e6
        return joules / ((now_ms - prev[1]) / _MS_PER_S)

    def sample_energy(self) -> EnergySample:
        now_ms = self._clock.now_ms()
        _, _, gpu_power = self._gpu_stats()
        return EnergySample(
            cpu_power_watts=self._cpu_power(now_ms),
            sample_time_ms=now_ms,
            gpu_power_watts=gpu_power,
        )


@dataclass
class EnergyAccumulator:
    """Left-point rectangle integration of sampled power over wall clock.

    The first observation only anchors the integration; each later one adds
    (previous total watts) x (elapsed seconds). Emissions are derived from
    cumulative energy, never integrated separately, so changing the carbon
    intensity retroactively rescales them.
    """

    carbon_intensity_g_per_kwh: float = DEFAULT_CARBON_INTENSITY_G_PER_KWH
    cumulative_energy_kwh: float = 0.0
    last_sample: EnergySample | None = field(default=None)

    def observe(self, sample: EnergySample) -> None:
        prev = self.last_sample
        if prev is not None:
            dt_ms = sample.sample_time_ms - prev.sample_time_ms
            if dt_ms < 0:
                warnings.warn(
                    "energy sample time went backwards; skipping interval",
                    RuntimeWarning,
                    stacklevel=2,
                )
            else:
                joules = prev.total_watts * (dt_ms / _MS_PER_S)
                self.cumulative_energy_kwh += joules / _J_PER_KWH
        self.last_sample = sample

    @property
    def emissions_g(self) -> float:
        return self.cumulative_energy_kwh * self.carbon_intensity_g_per_kwh

    def set_carbon_intensity(self, g_per_kwh: float) -> None:
        if not g_per_kwh > 0:
            raise InvalidArgumentError("carbon intensity must be positive")
        self.carbon_intensity_g_per_kwh = float(g_per_kwh)
