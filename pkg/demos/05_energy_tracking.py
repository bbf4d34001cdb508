"""
Energy and emissions accounting
===============================

Uses a scripted power trace so the numbers are reproducible: 100 W for one
simulated hour is 0.1 kWh, which is 47.5 gCO2eq at the default grid
intensity of 475 g/kWh. Swapping in a country-specific intensity rescales
the already-accumulated emissions too.

With no scripted provider the same calls read live values from the host
(psutil, nvidia-smi and RAPL when available).
"""

import provtrack
from provtrack import Context, TickingClock
from provtrack.telemetry import EnergySample, ScriptedProvider

START_MS = 1767225600000
HOUR_MS = 3_600_000

trace = ScriptedProvider(
    system=[],
    energy=[EnergySample(cpu_power_watts=100.0, sample_time_ms=START_MS + i * HOUR_MS) for i in range(4)],
)

handle = provtrack.start_run(
    prov_user_namespace="www.example.org",
    experiment_name="energy",
    provenance_save_dir="demos/out/energy",
    clock=TickingClock(START_MS, 250),
    telemetry=trace,
)

for hour in range(3):
    provtrack.log_carbon_metrics(Context.TRAINING, hour)
    print(
        f"after sample {hour}: "
        f"{handle.energy.cumulative_energy_kwh:.3f} kWh, "
        f"{handle.energy.emissions_g:.2f} gCO2eq"
    )

# Italy's grid average, for example, is far below the world default.
provtrack.set_carbon_intensity(280.0)
provtrack.log_carbon_metrics(Context.TRAINING, 3)
print(f"re-based at 280 g/kWh: {handle.energy.emissions_g:.2f} gCO2eq")

print("document:", provtrack.end_run())
