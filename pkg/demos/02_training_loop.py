"""
Simulated training loop with checkpoints
========================================

No real model here, just a made-up loss curve, but the logging calls are
exactly what a torch/tf loop would issue: metrics per step, a model version
per epoch, system and carbon telemetry, and a final model summary.
"""

import provtrack
from provtrack import Context

EPOCHS = 3
STEPS = 20

handle = provtrack.start_run(
    prov_user_namespace="www.example.org",
    experiment_name="sim_training",
    provenance_save_dir="demos/out/training",
    save_after_n_logs=50,
)

provtrack.log_param("lr", 0.001)
provtrack.log_param("batch_size", 64)
provtrack.log_param("epochs", EPOCHS)
provtrack.log_dataset(
    provtrack.DatasetDescriptor("synthetic", num_samples=1280, batch_size=64, num_batches=20)
)

step = 0
for epoch in range(EPOCHS):
    for _ in range(STEPS):
        loss = 2.0 / (step + 1)
        provtrack.log_metric("loss", loss, Context.TRAINING, step)
        provtrack.log_metric("accuracy", 1.0 - loss / 2.5, Context.TRAINING, step)
        step += 1
    provtrack.log_metric("loss", 2.3 / (step + 1), Context.VALIDATION, step)
    provtrack.log_system_metrics(Context.TRAINING, step)
    provtrack.log_carbon_metrics(Context.TRAINING, step)
    provtrack.save_model_version("simnet", f"fake weights {epoch}".encode(), Context.TRAINING, step)
    provtrack.log_current_execution_time("elapsed", Context.TRAINING, step)
    print(f"epoch {epoch}: loss={loss:.4f}")

provtrack.log_model(
    "simnet",
    provtrack.ModelDescriptor(
        total_parameters=4242,
        memory_bytes=16968,
        layers=(
            provtrack.LayerInfo("fc1", "Linear", (32,), (64,), "float32"),
            provtrack.LayerInfo("fc2", "Linear", (64,), (10,), "float32"),
        ),
    ),
    log_as_artifact=True,
)

path = provtrack.end_run(create_graph=True)
print("document:", path)
print("inspect it with: provtrack validate", path)
