"""
Comparing two runs
==================

Two runs of the same experiment with one hyperparameter changed. The diff
shows the parameter change and how the final metric moved.

Equivalent shell command:

    provtrack diff demos/out/compare/tune_0 demos/out/compare/tune_1
"""

import provtrack
from provtrack import Context
from provtrack.diffing import compute_diff, load_run, render_text


def train(lr):
    provtrack.start_run(
        prov_user_namespace="www.example.org",
        experiment_name="tune",
        provenance_save_dir="demos/out/compare",
    )
    provtrack.log_param("lr", lr)
    provtrack.log_param("optimizer", "adam")
    loss = 2.0
    for step in range(30):
        loss *= 1.0 - lr  # bigger lr converges faster in this toy
        provtrack.log_metric("loss", loss, Context.TRAINING, step)
    path = provtrack.end_run()
    return path.parent


first = train(0.01)
second = train(0.05)

diff = compute_diff(load_run(first), load_run(second))
print(render_text(diff), end="")
