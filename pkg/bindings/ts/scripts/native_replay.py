#!/usr/bin/env python3
"""Replay a recorded request scenario against the Python API directly.

Usage: native_replay.py SCENARIO_JSON OUT_DIR DATA_DIR

Reuses the replay interpreter from the test suite so the binding's parity
checks compare against exactly one native implementation. Prints the path
of the written provenance document.
"""

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[3]
sys.path.insert(0, str(ROOT / "tests"))

from scenario import materialize_files, replay_native, substituted_requests  # noqa: E402


def main() -> int:
    scenario_path, out_dir, data_dir = sys.argv[1], Path(sys.argv[2]), Path(sys.argv[3])
    scenario = json.loads(Path(scenario_path).read_text())
    materialize_files(scenario, data_dir)
    document = replay_native(substituted_requests(scenario, out_dir, data_dir))
    if document is None:
        print("scenario ended without a document", file=sys.stderr)
        return 1
    print(document)
    return 0


if __name__ == "__main__":
    sys.exit(main())
