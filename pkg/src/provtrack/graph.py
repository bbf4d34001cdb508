"""Assemble the final provenance document from a completed run, plus DOT
text and SVG rendering of any document.

Mapping: the run is an Activity associated with the user Agent; parameters,
datasets, and the captured environment are Entities the run used; metric
series summaries, artifacts, model versions, and the final model are
Entities the run generated; successive versions of one label form a
wasDerivedFrom chain, and the final model derives from the last version of
each label.
"""

from __future__ import annotations

import shutil
import subprocess
from typing import TYPE_CHECKING

from .errors import ExportError, IllegalStateError
from .prov.model import (
    AttributeValue,
    ProvDocument,
    QualifiedName,
    RecordKind,
    Relation,
    RelationKind,
    activity,
    agent,
    entity,
    new_document,
)
from .records import LayerInfo
from .series import fs_escape, metric_filename

if TYPE_CHECKING:
    from .run import RunHandle

VOCAB_PREFIX = "provtrack"
VOCAB_IRI = "urn:provtrack:"
ENV_PREFIX = "env"
ENV_IRI = "urn:provtrack:env:"


def _u(local: str) -> QualifiedName:
    return QualifiedName("user", local)


def _pt(local: str) -> QualifiedName:
    return QualifiedName(VOCAB_PREFIX, local)


def _shape(dims: tuple[int, ...]) -> str:
    return "x".join(str(d) for d in dims)


def _layer_text(layer: LayerInfo) -> str:
    return (
        f"{layer.name}|{layer.kind}|in={_shape(layer.input_shape)}"
        f"|out={_shape(layer.output_shape)}|{layer.dtype}"
    )


class _Edges:
    """Relation factory with per-family counters for stable ids."""

    def __init__(self, doc: ProvDocument):
        self.doc = doc
        self.counts = {kind: 0 for kind in RelationKind}

    def add(self, kind: RelationKind, tag: str, subject: QualifiedName, obj: QualifiedName) -> None:
        n = self.counts[kind]
        self.counts[kind] = n + 1
        self.doc.add_relation(Relation(kind, _u(f"r_{tag}_{n}"), subject, obj))


def build_provenance(handle: "RunHandle") -> ProvDocument:
    """Deterministic document for an ended run; identical handles give
    identical documents."""
    if handle.ended_at_ms is None:
        raise IllegalStateError("run has not ended")
    cfg = handle.config
    doc = new_document(cfg.user_namespace, "user")
    doc.declare_prefix(VOCAB_PREFIX, VOCAB_IRI)

    run_qn = _u(f"{cfg.experiment_name}_{handle.run_id}_run")
    doc.add_record(
        activity(
            run_qn,
            start_ms=handle.started_at_ms,
            end_ms=handle.ended_at_ms,
            attributes=[
                (_pt("kind"), AttributeValue("run")),
                (_pt("experiment"), AttributeValue(cfg.experiment_name)),
                (_pt("run_id"), AttributeValue(handle.run_id)),
                (_pt("rank"), AttributeValue(handle.rank)),
            ],
        )
    )
    agent_qn = _u("user")
    doc.add_record(agent(agent_qn, attributes=[(_pt("kind"), AttributeValue("user"))]))

    edges = _Edges(doc)
    edges.add(RelationKind.WAS_ASSOCIATED_WITH, "assoc", run_qn, agent_qn)

    env = handle.environment
    env_attrs = [(_pt("kind"), AttributeValue("environment"))]
    if env is not None:
        env_attrs.extend(
            [
                (_pt("hostname"), AttributeValue(env.host.hostname)),
                (_pt("os"), AttributeValue(env.host.os_tag)),
                (_pt("pid"), AttributeValue(env.host.pid)),
                (_pt("command_line"), AttributeValue(" ".join(env.host.command_line))),
                (
                    _pt("dependencies"),
                    AttributeValue("; ".join(f"{n}=={v}" for n, v in env.dependencies)),
                ),
            ]
        )
        if env.prober_missing:
            env_attrs.append((_pt("prober_missing"), AttributeValue(True)))
        if env.variables:
            doc.declare_prefix(ENV_PREFIX, ENV_IRI)
            env_attrs.extend(
                (QualifiedName(ENV_PREFIX, name), AttributeValue(value))
                for name, value in env.variables
            )
    env_qn = _u("environment")
    doc.add_record(entity(env_qn, attributes=env_attrs))
    edges.add(RelationKind.USED, "used", run_qn, env_qn)

    for key, value in handle.params.items():
        qn = _u(f"param_{key}")
        doc.add_record(
            entity(
                qn,
                attributes=[
                    (_pt("kind"), AttributeValue("param")),
                    (_pt("key"), AttributeValue(key)),
                    (_pt("value"), value),
                ],
            )
        )
        edges.add(RelationKind.USED, "used", run_qn, qn)

    for label, ds in handle.datasets.items():
        attrs = [
            (_pt("kind"), AttributeValue("dataset")),
            (_pt("label"), AttributeValue(label)),
        ]
        for name in ("num_samples", "batch_size", "num_batches", "source"):
            value = getattr(ds, name)
            if value is not None:
                attrs.append((_pt(name), AttributeValue(value)))
        qn = _u(f"dataset_{label}")
        doc.add_record(entity(qn, attributes=attrs))
        edges.add(RelationKind.USED, "used", run_qn, qn)

    for series in handle.metrics.all_series():
        qn = _u(f"metric_{fs_escape(series.context.label)}_{fs_escape(series.key)}")
        doc.add_record(
            entity(
                qn,
                attributes=[
                    (_pt("kind"), AttributeValue("metric_series")),
                    (_pt("key"), AttributeValue(series.key)),
                    (_pt("context"), AttributeValue(series.context.label)),
                    (_pt("count"), AttributeValue(series.count)),
                    (_pt("min"), AttributeValue(float(series.min_value))),
                    (_pt("max"), AttributeValue(float(series.max_value))),
                    (_pt("last"), AttributeValue(float(series.last_value))),
                    (
                        _pt("series_file"),
                        AttributeValue("metrics/" + metric_filename(series.key, series.context)),
                    ),
                ],
            )
        )
        edges.add(RelationKind.WAS_GENERATED_BY, "gen", qn, run_qn)

    def artifact_attrs(record, kind_text):
        attrs = [
            (_pt("kind"), AttributeValue(kind_text)),
            (_pt("label"), AttributeValue(record.label)),
            (_pt("path"), AttributeValue(record.rel_path)),
            (_pt("size_bytes"), AttributeValue(record.size_bytes)),
            (_pt("hash"), AttributeValue(record.content_hash)),
            (_pt("timestamp_ms"), AttributeValue(record.timestamp_ms)),
        ]
        if record.context is not None:
            attrs.append((_pt("context"), AttributeValue(record.context.label)))
        if record.step is not None:
            attrs.append((_pt("step"), AttributeValue(record.step)))
        return attrs

    for index, record in enumerate(handle.artifacts):
        qn = _u(f"artifact_{index}_{record.label}")
        doc.add_record(entity(qn, attributes=artifact_attrs(record, "artifact")))
        edges.add(RelationKind.WAS_GENERATED_BY, "gen", qn, run_qn)

    last_version_qn: dict[str, QualifiedName] = {}
    for label, chain in handle.model_versions.items():
        previous = None
        for ordinal, record in enumerate(chain):
            qn = _u(f"model_version_{label}_{ordinal}")
            doc.add_record(entity(qn, attributes=artifact_attrs(record, "model_version")))
            edges.add(RelationKind.WAS_GENERATED_BY, "gen", qn, run_qn)
            if previous is not None:
                edges.add(RelationKind.WAS_DERIVED_FROM, "deriv", qn, previous)
            previous = qn
        last_version_qn[label] = previous

    if handle.final_model is not None:
        label, desc = handle.final_model
        attrs = [
            (_pt("kind"), AttributeValue("final_model")),
            (_pt("label"), AttributeValue(label)),
            (_pt("total_parameters"), AttributeValue(desc.total_parameters)),
            (_pt("memory_bytes"), AttributeValue(desc.memory_bytes)),
        ]
        if desc.gradient_memory_bytes is not None:
            attrs.append((_pt("gradient_memory_bytes"), AttributeValue(desc.gradient_memory_bytes)))
        if desc.label is not None:
            attrs.append((_pt("model_name"), AttributeValue(desc.label)))
        attrs.append((_pt("layer_count"), AttributeValue(len(desc.layers))))
        if desc.layers:
            attrs.append(
                (_pt("layers"), AttributeValue("; ".join(_layer_text(l) for l in desc.layers)))
            )
        qn = _u(f"final_model_{label}")
        doc.add_record(entity(qn, attributes=attrs))
        edges.add(RelationKind.WAS_GENERATED_BY, "gen", qn, run_qn)
        for version_label, last_qn in last_version_qn.items():
            edges.add(RelationKind.WAS_DERIVED_FROM, "deriv", qn, last_qn)

    return doc


_DOT_SHAPES = {
    RecordKind.ENTITY: ("ellipse", "#FFFC87"),
    RecordKind.ACTIVITY: ("box", "#9FB1FC"),
    RecordKind.AGENT: ("house", "#FED37F"),
}


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _node_name(kind: RecordKind, rendered_id: str) -> str:
    # Kind-prefixed so an entity and an activity sharing an id stay distinct.
    return f"{kind.value}:{rendered_id}"


def to_dot(doc: ProvDocument) -> str:
    """One digraph: a node per record (shape by kind) and an edge per
    relation (labeled by kind), both emitted in sorted order."""
    lines = [
        "digraph provenance {",
        "  rankdir=BT;",
        "  node [style=filled];",
    ]
    nodes = sorted(
        (record.kind.value, str(record.id), record.kind) for record in doc.records
    )
    for _, rendered, kind in nodes:
        shape, color = _DOT_SHAPES[kind]
        lines.append(
            f"  {_dot_quote(_node_name(kind, rendered))} "
            f"[label={_dot_quote(rendered)} shape={shape} fillcolor={_dot_quote(color)}];"
        )
    edges = sorted(
        (rel.kind.section, str(rel.relation_id), rel) for rel in doc.relations
    )
    for section, _, rel in edges:
        source = _node_name(rel.kind.subject_kind, str(rel.subject))
        target = _node_name(rel.kind.object_kind, str(rel.object))
        lines.append(
            f"  {_dot_quote(source)} -> {_dot_quote(target)} [label={_dot_quote(section)}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_svg(dot_text: str) -> bytes | None:
    """Render DOT through the external layout tool; None when the tool is
    not on PATH."""
    tool = shutil.which("dot")
    if tool is None:
        return None
    result = subprocess.run(
        [tool, "-Tsvg"],
        input=dot_text.encode("utf-8"),
        capture_output=True,
    )
    if result.returncode != 0:
        raise ExportError(
            f"layout tool exited with {result.returncode}",
            tool_output=result.stderr.decode("utf-8", "replace"),
        )
    return result.stdout
