"""
Per-rank documents and the merge step
=====================================

A real distributed job runs one process per rank and each writes its own
document (rank 0 by default, every rank with collect_all_processes=True).
Here the ranks run sequentially in one process; the merge is identical.

The same merge is available from the shell:

    provtrack merge rank*/exp_0/provgraph_*.json -o merged.json
"""

from pathlib import Path

import provtrack
from provtrack import Context
from provtrack.merge import merge_documents
from provtrack.prov.jsonio import parse, serialize, validate

WORLD = 4
out_root = Path("demos/out/distributed")

documents = []
for rank in range(WORLD):
    provtrack.start_run(
        prov_user_namespace="www.example.org",
        experiment_name="allreduce",
        provenance_save_dir=out_root / f"rank{rank}",
        rank=rank,
        collect_all_processes=True,
    )
    provtrack.log_param("world_size", WORLD)
    provtrack.log_param("rank", rank)
    for step in range(10):
        provtrack.log_metric("loss", 1.0 / (step + rank + 1), Context.TRAINING, step)
    documents.append(provtrack.end_run())
    print(f"rank {rank} wrote {documents[-1]}")

merged = merge_documents([parse(p.read_bytes()) for p in documents])
merged_path = out_root / "merged.json"
merged_path.write_bytes(serialize(merged))

report = validate(merged)
print(f"merged document: {merged_path} ({len(merged.records)} records)")
print(f"validation errors: {len(report.errors)}")
