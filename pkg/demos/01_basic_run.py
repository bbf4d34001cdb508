"""
Smallest possible tracked run
=============================

Starts a run, logs a couple of things, ends it, and shows where the
provenance document landed.
"""

import provtrack
from provtrack import Context

provtrack.start_run(
    prov_user_namespace="www.example.org",
    experiment_name="hello",
    provenance_save_dir="demos/out/basic",
)

provtrack.log_param("lr", 0.01)
provtrack.log_param("optimizer", "sgd")

for step in range(5):
    provtrack.log_metric("loss", 1.0 / (step + 1), Context.TRAINING, step)

path = provtrack.end_run(create_graph=True)
print("provenance written to", path)
print("DOT graph next to it:", path.with_suffix(".dot"))
