"""Deterministic end-to-end training scenario.

Drives a small simulated image-classifier experiment with every source of
nondeterminism pinned (clock, telemetry, environment, host, dependency
probe). The resulting document is frozen under golden/ and compared byte
for byte; regenerate with

    python3 tests/demo_scenario.py <output-dir>

and copy the printed file over golden/demo_provgraph.json if the change is
intentional.
"""

import sys
from pathlib import Path

import provtrack
from provtrack import Context, TickingClock
from provtrack.environment import HostInfo
from provtrack.telemetry import EnergySample, ScriptedProvider, SystemSample

EPOCH_MS = 1767225600000  # 2026-01-01T00:00:00Z
TRAIN = Context.TRAINING
VAL = Context.VALIDATION

STEPS_PER_EPOCH = 5
EPOCHS = 2


def scripted_telemetry() -> ScriptedProvider:
    minute = 60_000
    energy = [
        EnergySample(
            cpu_power_watts=90.0,
            sample_time_ms=EPOCH_MS + i * minute,
            gpu_power_watts=160.0,
        )
        for i in range(EPOCHS + 1)
    ]
    system = [
        SystemSample(
            memory_used_bytes=6 * 1024**3 + i * 1024**2,
            memory_total_bytes=16 * 1024**3,
            disk_used_bytes=52 * 1024**3,
            disk_total_bytes=256 * 1024**3,
            cpu_utilization_percent=35.0 + i,
            gpu_memory_used_bytes=2 * 1024**3,
            gpu_utilization_percent=88.0 - i,
        )
        for i in range(EPOCHS)
    ]
    return ScriptedProvider(system=system, energy=energy)


def run_demo(save_dir: str | Path) -> Path:
    """Execute the scenario and return the written document path."""
    save_dir = Path(save_dir)
    handle = provtrack.start_run(
        prov_user_namespace="www.example.org",
        experiment_name="mnist_demo",
        provenance_save_dir=save_dir,
        save_after_n_logs=4,  # small threshold so spilling is exercised
        clock=TickingClock(EPOCH_MS, 250),
        telemetry=scripted_telemetry(),
        environ={"RANK": "0", "CUDA_VISIBLE_DEVICES": "0", "WORLD_SIZE": "1"},
        dependency_prober=lambda: [("numpy", "2.1.0"), ("torch", "2.4.1")],
        host_info=HostInfo("demo-host", "linux", 4242, ("python3", "train.py")),
    )

    handle.log_param("lr", 0.001)
    handle.log_param("batch_size", 32)
    handle.log_param("optimizer", "adam")
    handle.log_param("epochs", EPOCHS)
    handle.log_dataset(
        provtrack.DatasetDescriptor(
            "mnist_train", num_samples=60000, batch_size=32, num_batches=1875
        )
    )
    handle.log_dataset(
        provtrack.DatasetDescriptor(
            "mnist_test", num_samples=10000, batch_size=32, num_batches=313
        )
    )

    config = save_dir / "config.yaml"
    config.write_text("lr: 0.001\nbatch_size: 32\noptimizer: adam\n")
    handle.log_artifact("config", config)

    global_step = 0
    for epoch in range(EPOCHS):
        for _ in range(STEPS_PER_EPOCH):
            # a made-up but strictly decreasing loss curve
            loss = 2.0 / (global_step + 1)
            accuracy = 1.0 - loss / 2.5
            handle.log_metric("loss", loss, TRAIN, global_step)
            handle.log_metric("accuracy", accuracy, TRAIN, global_step)
            global_step += 1
        handle.log_metric("loss", 2.2 / (global_step + 1), VAL, global_step)
        handle.log_system_metrics(TRAIN, global_step)
        handle.log_carbon_metrics(TRAIN, global_step)
        handle.save_model_version(
            "classifier", f"weights after epoch {epoch}".encode(), TRAIN, global_step
        )
        handle.log_current_execution_time("elapsed", TRAIN, global_step)

    handle.log_carbon_metrics(TRAIN, global_step)
    handle.log_model(
        "classifier",
        provtrack.ModelDescriptor(
            total_parameters=61706,
            memory_bytes=246824,
            gradient_memory_bytes=246824,
            layers=(
                provtrack.LayerInfo("conv1", "Conv2d", (1, 28, 28), (6, 24, 24), "float32"),
                provtrack.LayerInfo("pool", "MaxPool2d", (6, 24, 24), (6, 12, 12), "float32"),
                provtrack.LayerInfo("fc1", "Linear", (864,), (128,), "float32"),
                provtrack.LayerInfo("fc2", "Linear", (128,), (10,), "float32"),
            ),
        ),
        log_as_artifact=True,
    )

    path = handle.end(create_graph=True)
    assert path is not None
    return path


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else "demo_out"
    print(run_demo(target))
