"""Compare two completed runs by their provenance documents.

Comparison keys: params by key, metric series by (key, context) summary,
artifacts (including model versions) by run-relative path and content hash.
Full-series mode additionally compares the spilled sample files of series
whose summaries agree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import NotFoundError
from .prov.jsonio import parse
from .prov.model import AttributeValue, ProvDocument, QualifiedName, RecordKind

_VOCAB = "provtrack"


def _attr(record, name: str) -> AttributeValue | None:
    return record.attribute(QualifiedName(_VOCAB, name))


@dataclass(frozen=True)
class SeriesSummary:
    count: int
    min_value: float
    max_value: float
    last_value: float
    series_file: str | None

    def as_json(self) -> dict:
        return {
            "count": self.count,
            "min": self.min_value,
            "max": self.max_value,
            "last": self.last_value,
        }


@dataclass
class RunData:
    """What the diff needs from one run directory."""

    run_dir: Path
    document_path: Path
    params: dict[str, AttributeValue]
    metrics: dict[tuple[str, str], SeriesSummary]
    artifacts: dict[str, str]  # rel path -> content hash


def find_run_document(run_dir: Path, rank: int = 0) -> Path:
    candidates = sorted(run_dir.glob("provgraph_*.json"))
    if not candidates:
        raise NotFoundError(f"no provenance document in {run_dir}")
    for path in candidates:
        if path.stem.endswith(f"_rank{rank}"):
            return path
    return candidates[0]


def load_run(run_dir: str | Path, rank: int = 0) -> RunData:
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise NotFoundError(f"run directory {run_dir} does not exist")
    doc_path = find_run_document(run_dir, rank)
    doc: ProvDocument = parse(doc_path.read_bytes())

    params: dict[str, AttributeValue] = {}
    metrics: dict[tuple[str, str], SeriesSummary] = {}
    artifacts: dict[str, str] = {}
    for record in doc.records_of(RecordKind.ENTITY):
        kind = _attr(record, "kind")
        kind_text = kind.value if kind is not None else None
        if kind_text == "param":
            key = _attr(record, "key")
            value = _attr(record, "value")
            if key is not None and value is not None:
                params[str(key.value)] = value
        elif kind_text == "metric_series":
            key = _attr(record, "key")
            context = _attr(record, "context")
            count = _attr(record, "count")
            if key is None or context is None or count is None:
                continue
            series_file = _attr(record, "series_file")
            metrics[(str(key.value), str(context.value))] = SeriesSummary(
                count=int(count.value),
                min_value=float(_attr(record, "min").value),
                max_value=float(_attr(record, "max").value),
                last_value=float(_attr(record, "last").value),
                series_file=str(series_file.value) if series_file is not None else None,
            )
        elif kind_text in ("artifact", "model_version"):
            path_attr = _attr(record, "path")
            hash_attr = _attr(record, "hash")
            if path_attr is not None and hash_attr is not None:
                artifacts[str(path_attr.value)] = str(hash_attr.value)
    return RunData(
        run_dir=run_dir,
        document_path=doc_path,
        params=params,
        metrics=metrics,
        artifacts=artifacts,
    )


@dataclass(frozen=True)
class ParamChange:
    key: str
    left: AttributeValue
    right: AttributeValue


@dataclass(frozen=True)
class MetricDelta:
    key: str
    context: str
    left: SeriesSummary | None
    right: SeriesSummary | None
    delta_of_last: float | None
    samples_differ: bool = False


@dataclass(frozen=True)
class HashMismatch:
    path: str
    left_hash: str
    right_hash: str


@dataclass
class RunDiff:
    params_added: list[str] = field(default_factory=list)
    params_removed: list[str] = field(default_factory=list)
    params_changed: list[ParamChange] = field(default_factory=list)
    metrics: list[MetricDelta] = field(default_factory=list)
    artifacts_only_left: list[str] = field(default_factory=list)
    artifacts_only_right: list[str] = field(default_factory=list)
    artifacts_hash_mismatch: list[HashMismatch] = field(default_factory=list)

    def empty(self) -> bool:
        return not (
            self.params_added
            or self.params_removed
            or self.params_changed
            or self.metrics
            or self.artifacts_only_left
            or self.artifacts_only_right
            or self.artifacts_hash_mismatch
        )


def _values_equal(a: AttributeValue, b: AttributeValue) -> bool:
    return a.datatype == b.datatype and a.text_form() == b.text_form()


def _series_bytes(run: RunData, summary: SeriesSummary) -> bytes | None:
    if summary.series_file is None:
        return None
    path = run.run_dir / summary.series_file
    try:
        return path.read_bytes()
    except OSError:
        return None


def compute_diff(left: RunData, right: RunData, full_series: bool = False) -> RunDiff:
    diff = RunDiff()

    left_keys, right_keys = set(left.params), set(right.params)
    diff.params_added = sorted(right_keys - left_keys)
    diff.params_removed = sorted(left_keys - right_keys)
    diff.params_changed = [
        ParamChange(key, left.params[key], right.params[key])
        for key in sorted(left_keys & right_keys)
        if not _values_equal(left.params[key], right.params[key])
    ]

    for ident in sorted(set(left.metrics) | set(right.metrics)):
        l = left.metrics.get(ident)
        r = right.metrics.get(ident)
        if l is not None and r is not None:
            if l == r:
                if full_series:
                    lb, rb = _series_bytes(left, l), _series_bytes(right, r)
                    if lb is None or rb is None or lb != rb:
                        diff.metrics.append(
                            MetricDelta(ident[0], ident[1], l, r, 0.0, samples_differ=True)
                        )
                continue
            delta = r.last_value - l.last_value
            diff.metrics.append(MetricDelta(ident[0], ident[1], l, r, delta))
        else:
            diff.metrics.append(MetricDelta(ident[0], ident[1], l, r, None))

    left_paths, right_paths = set(left.artifacts), set(right.artifacts)
    diff.artifacts_only_left = sorted(left_paths - right_paths)
    diff.artifacts_only_right = sorted(right_paths - left_paths)
    diff.artifacts_hash_mismatch = [
        HashMismatch(path, left.artifacts[path], right.artifacts[path])
        for path in sorted(left_paths & right_paths)
        if left.artifacts[path] != right.artifacts[path]
    ]
    return diff


def diff_as_json(diff: RunDiff) -> dict:
    return {
        "params": {
            "added": diff.params_added,
            "removed": diff.params_removed,
            "changed": [
                {
                    "key": change.key,
                    "left": change.left.text_form(),
                    "right": change.right.text_form(),
                }
                for change in diff.params_changed
            ],
        },
        "metrics": [
            {
                "key": delta.key,
                "context": delta.context,
                "left": delta.left.as_json() if delta.left else None,
                "right": delta.right.as_json() if delta.right else None,
                "delta_of_last": delta.delta_of_last,
                "samples_differ": delta.samples_differ,
            }
            for delta in diff.metrics
        ],
        "artifacts": {
            "only_left": diff.artifacts_only_left,
            "only_right": diff.artifacts_only_right,
            "hash_mismatch": [
                {"path": m.path, "left": m.left_hash, "right": m.right_hash}
                for m in diff.artifacts_hash_mismatch
            ],
        },
    }


def render_text(diff: RunDiff) -> str:
    if diff.empty():
        return "runs are identical\n"
    lines: list[str] = []
    if diff.params_added or diff.params_removed or diff.params_changed:
        lines.append("params:")
        for key in diff.params_added:
            lines.append(f"  + {key}")
        for key in diff.params_removed:
            lines.append(f"  - {key}")
        for change in diff.params_changed:
            lines.append(
                f"  ~ {change.key}: {change.left.text_form()} -> {change.right.text_form()}"
            )
    if diff.metrics:
        lines.append("metrics:")
        for delta in diff.metrics:
            name = f"{delta.key} [{delta.context}]"
            if delta.left is None:
                lines.append(f"  + {name}")
            elif delta.right is None:
                lines.append(f"  - {name}")
            elif delta.samples_differ:
                lines.append(f"  ~ {name}: summaries equal, samples differ")
            else:
                lines.append(
                    f"  ~ {name}: last {delta.left.last_value} -> {delta.right.last_value}"
                    f" (delta {delta.delta_of_last})"
                )
    if diff.artifacts_only_left or diff.artifacts_only_right or diff.artifacts_hash_mismatch:
        lines.append("artifacts:")
        for path in diff.artifacts_only_left:
            lines.append(f"  - {path}")
        for path in diff.artifacts_only_right:
            lines.append(f"  + {path}")
        for mismatch in diff.artifacts_hash_mismatch:
            lines.append(f"  ~ {mismatch.path}: content differs")
    return "\n".join(lines) + "\n"


def render_json(diff: RunDiff) -> str:
    return json.dumps(diff_as_json(diff), indent=2, sort_keys=True) + "\n"
