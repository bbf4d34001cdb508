"""Combine per-rank provenance documents into one collection document.

Namespace tokens that would make record or relation ids collide across
inputs get a per-input ``_r<k>`` suffix; tokens bound to the same IRI that
appear only in attribute keys stay shared. A fresh namespace holds the
collection entity plus one synthesized run-summary entity per input, each
generated by that input's run activity and a member of the collection.
"""

from __future__ import annotations

from .errors import InvalidArgumentError
from .prov.model import (
    PROV_QUALIFIED_NAME,
    RESERVED_PREFIXES,
    AttributeValue,
    ProvDocument,
    ProvRecord,
    QualifiedName,
    RecordKind,
    Relation,
    RelationKind,
    entity,
)

MERGE_IRI = "urn:provtrack:merge:"
VOCAB_PREFIX = "provtrack"
VOCAB_IRI = "urn:provtrack:"


def _id_prefix_tokens(doc: ProvDocument) -> set[str]:
    tokens = {record.id.prefix for record in doc.records}
    for rel in doc.relations:
        tokens.update((rel.relation_id.prefix, rel.subject.prefix, rel.object.prefix))
    return tokens


def _fresh_token(base: str, taken: set[str]) -> str:
    candidate = base
    n = 0
    while candidate in taken:
        candidate = f"{base}{n}"
        n += 1
    taken.add(candidate)
    return candidate


def _build_rename_maps(docs: list[ProvDocument]) -> list[dict[str, str]]:
    declared_by: dict[str, list[int]] = {}
    iris: dict[str, set[str]] = {}
    for index, doc in enumerate(docs):
        for token, iri in doc.prefixes.items():
            declared_by.setdefault(token, []).append(index)
            iris.setdefault(token, set()).add(iri)

    id_tokens = [_id_prefix_tokens(doc) for doc in docs]
    taken = set(declared_by)
    renames: list[dict[str, str]] = [{} for _ in docs]
    for token, owners in declared_by.items():
        if token in RESERVED_PREFIXES or len(owners) < 2:
            continue
        used_in_ids = any(token in id_tokens[k] for k in owners)
        if not used_in_ids and len(iris[token]) == 1:
            continue  # attribute-only and unambiguous: share one binding
        for k in owners:
            renames[k][token] = _fresh_token(f"{token}_r{k}", taken)
    return renames


def _rename_qn(qn: QualifiedName, renames: dict[str, str]) -> QualifiedName:
    new_prefix = renames.get(qn.prefix)
    return qn if new_prefix is None else QualifiedName(new_prefix, qn.local)


def _rename_value(value: AttributeValue, renames: dict[str, str]) -> AttributeValue:
    if value.datatype != PROV_QUALIFIED_NAME or not renames:
        return value
    try:
        qn = QualifiedName.parse(str(value.value))
    except Exception:
        return value
    renamed = _rename_qn(qn, renames)
    return value if renamed is qn else AttributeValue(str(renamed), PROV_QUALIFIED_NAME)


def _rename_attrs(attrs, renames):
    return [
        (_rename_qn(key, renames), _rename_value(value, renames)) for key, value in attrs
    ]


def merge_documents(
    docs: list[ProvDocument], collection_id: str | None = None
) -> ProvDocument:
    """Union of the inputs plus a collection entity with one member per
    input. Raises invalid-argument when the collection id is already taken
    by an input record."""
    if not docs:
        raise InvalidArgumentError("need at least one document to merge")

    renames = _build_rename_maps(docs)
    merged = ProvDocument()
    for index, doc in enumerate(docs):
        for token, iri in doc.prefixes.items():
            merged.declare_prefix(renames[index].get(token, token), iri)
        for name, section in doc.extra_sections.items():
            merged.extra_sections.setdefault(name, section)

    for index, doc in enumerate(docs):
        mapping = renames[index]
        for record in doc.records:
            merged.add_record(
                ProvRecord(
                    id=_rename_qn(record.id, mapping),
                    kind=record.kind,
                    attributes=_rename_attrs(record.attributes, mapping),
                    start_ms=record.start_ms,
                    end_ms=record.end_ms,
                )
            )
        for rel in doc.relations:
            merged.add_relation(
                Relation(
                    kind=rel.kind,
                    relation_id=_rename_qn(rel.relation_id, mapping),
                    subject=_rename_qn(rel.subject, mapping),
                    object=_rename_qn(rel.object, mapping),
                    attributes=_rename_attrs(rel.attributes, mapping),
                )
            )

    taken = set(merged.prefixes)
    merge_token = _fresh_token("merge", taken)
    merged.declare_prefix(merge_token, MERGE_IRI)
    if merged.prefixes.get(VOCAB_PREFIX) == VOCAB_IRI:
        vocab_token = VOCAB_PREFIX
    else:
        vocab_token = _fresh_token(VOCAB_PREFIX, taken)
        merged.declare_prefix(vocab_token, VOCAB_IRI)

    def vocab(local: str) -> QualifiedName:
        return QualifiedName(vocab_token, local)

    collection_qn = _resolve_collection_id(merged, merge_token, collection_id, docs, renames)
    if merged.kinds_declaring(str(collection_qn)):
        raise InvalidArgumentError(f"collection id {collection_qn} already present in inputs")

    members: list[QualifiedName] = []
    for index, doc in enumerate(docs):
        mapping = renames[index]
        summary_qn = QualifiedName(merge_token, f"summary_r{index}")
        attrs = [
            (vocab("kind"), AttributeValue("run_summary")),
            (vocab("input_index"), AttributeValue(index)),
        ]
        activities = sorted(
            str(_rename_qn(r.id, mapping)) for r in doc.records if r.kind is RecordKind.ACTIVITY
        )
        if activities:
            attrs.append((vocab("source_activity"), AttributeValue(activities[0])))
        merged.add_record(entity(summary_qn, attributes=attrs))
        if activities:
            merged.add_relation(
                Relation(
                    RelationKind.WAS_GENERATED_BY,
                    QualifiedName(merge_token, f"r_gen_{index}"),
                    summary_qn,
                    QualifiedName.parse(activities[0]),
                )
            )
        members.append(summary_qn)

    merged.add_record(
        entity(
            collection_qn,
            attributes=[
                (QualifiedName("prov", "type"), AttributeValue("prov:Collection", PROV_QUALIFIED_NAME)),
                (vocab("kind"), AttributeValue("collection")),
                (vocab("member_count"), AttributeValue(len(members))),
            ],
        )
    )
    for index, member in enumerate(members):
        merged.add_relation(
            Relation(
                RelationKind.HAD_MEMBER,
                QualifiedName(merge_token, f"r_member_{index}"),
                collection_qn,
                member,
            )
        )
    return merged


def _resolve_collection_id(
    merged: ProvDocument,
    merge_token: str,
    collection_id: str | None,
    docs: list[ProvDocument],
    renames: list[dict[str, str]],
) -> QualifiedName:
    if collection_id:
        prefix, sep, local = collection_id.partition(":")
        if sep and local and prefix in merged.prefixes:
            return QualifiedName(prefix, local)
        return QualifiedName(merge_token, collection_id)
    # Derive `<experiment>_run<id>_collection` from the first input's run
    # activity; fall back to a fixed name for foreign documents.
    first = docs[0]
    for record in first.records:
        if record.kind is not RecordKind.ACTIVITY:
            continue
        exp = record.attribute(QualifiedName(VOCAB_PREFIX, "experiment"))
        run_id = record.attribute(QualifiedName(VOCAB_PREFIX, "run_id"))
        if exp is not None and run_id is not None:
            return QualifiedName(
                merge_token, f"{exp.value}_run{run_id.value}_collection"
            )
    return QualifiedName(merge_token, "merged_collection")
