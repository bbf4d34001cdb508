"""Canonical PROV-JSON serialization, parsing, and structural validation.

The emitted dialect is deliberately rigid so that outputs are byte-stable
across runs, machines, and merges:

* top-level sections appear in the fixed order ``prefix``, ``entity``,
  ``activity``, ``agent``, ``used``, ``wasGeneratedBy``,
  ``wasAssociatedWith``, ``wasDerivedFrom``, ``hadMember``; empty sections
  are omitted; foreign sections are re-emitted after the known ones, sorted
  by name, with their object keys sorted;
* ids inside a section are sorted lexicographically;
* every attribute value is a two-field object ``{"$": text, "type": tag}``;
  numbers are never bare JSON numbers, doubles use the shortest
  round-trip decimal form;
* activity times serialize as ``xsd:dateTime`` with millisecond precision;
* 2-space indentation, UTF-8, exactly one trailing newline.

The parser accepts a laxer surface (bare literals, sections in any order)
and canonicalizes on the next serialize.
"""

from __future__ import annotations

import calendar
import json
import logging
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone

from ..errors import DuplicateRecordError, InvalidArgumentError, InvalidDocumentError, ParseError
from .model import (
    RELATION_SECTIONS,
    RESERVED_PREFIXES,
    XSD_DATETIME,
    AttributeValue,
    ProvDocument,
    ProvRecord,
    QualifiedName,
    RecordKind,
    Relation,
    RelationKind,
)

logger = logging.getLogger(__name__)

_START_KEY = "prov:startTime"
_END_KEY = "prov:endTime"
_DATETIME_RE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})T(\d{2}):(\d{2}):(\d{2})\.(\d{3})Z$")

KNOWN_SECTIONS = ("prefix", "entity", "activity", "agent") + tuple(
    kind.section for kind in RelationKind
)


def format_datetime_ms(epoch_ms: int) -> str:
    secs, ms = divmod(epoch_ms, 1000)
    stamp = datetime.fromtimestamp(secs, tz=timezone.utc)
    return f"{stamp:%Y-%m-%dT%H:%M:%S}.{ms:03d}Z"


def parse_datetime_ms(text: str) -> int:
    m = _DATETIME_RE.match(text)
    if not m:
        raise InvalidArgumentError(f"bad xsd:dateTime literal {text!r}")
    y, mo, d, h, mi, s, ms = (int(g) for g in m.groups())
    secs = calendar.timegm((y, mo, d, h, mi, s))
    return secs * 1000 + ms


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    message: str
    subject: str | None = None

    def render(self) -> str:
        where = f" [{self.subject}]" if self.subject else ""
        return f"{self.code}: {self.message}{where}"


@dataclass
class ValidationReport:
    errors: list[ValidationIssue] = field(default_factory=list)
    warnings: list[ValidationIssue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def render_lines(self) -> list[str]:
        lines = [f"error {issue.render()}" for issue in self.errors]
        lines += [f"warning {issue.render()}" for issue in self.warnings]
        return lines


def _typed(value: AttributeValue) -> dict:
    return {"$": value.text_form(), "type": value.datatype}


def _sort_json(value):
    """Recursively sort object keys so foreign sections serialize stably."""
    if isinstance(value, dict):
        return {k: _sort_json(value[k]) for k in sorted(value)}
    if isinstance(value, list):
        return [_sort_json(v) for v in value]
    return value


def _record_body(record: ProvRecord) -> dict:
    body: dict = {}
    if record.start_ms is not None:
        body[_START_KEY] = {"$": format_datetime_ms(record.start_ms), "type": XSD_DATETIME}
    if record.end_ms is not None:
        body[_END_KEY] = {"$": format_datetime_ms(record.end_ms), "type": XSD_DATETIME}
    for key, value in record.attributes:
        body[str(key)] = _typed(value)
    return body


def _relation_body(relation: Relation) -> dict:
    body = {
        relation.kind.subject_role: str(relation.subject),
        relation.kind.object_role: str(relation.object),
    }
    for key, value in relation.attributes:
        body[str(key)] = _typed(value)
    return body


def serialize(doc: ProvDocument) -> bytes:
    """Serialize a structurally valid document to canonical PROV-JSON."""
    report = validate(doc)
    if not report.ok:
        raise InvalidDocumentError(
            "document fails validation: " + "; ".join(i.render() for i in report.errors),
            report=report,
        )
    tree: dict = {"prefix": {k: doc.prefixes[k] for k in sorted(doc.prefixes)}}
    for kind in RecordKind:
        records = doc.records_of(kind)
        if records:
            tree[kind.value] = {
                str(r.id): _record_body(r) for r in sorted(records, key=lambda r: str(r.id))
            }
    for rkind in RelationKind:
        relations = doc.relations_of(rkind)
        if relations:
            tree[rkind.section] = {
                str(r.relation_id): _relation_body(r)
                for r in sorted(relations, key=lambda r: str(r.relation_id))
            }
    for name in sorted(doc.extra_sections):
        tree[name] = _sort_json(doc.extra_sections[name])
    return (json.dumps(tree, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


class _DuplicateJsonKey(Exception):
    def __init__(self, key: str):
        self.key = key


def _pairs_hook(pairs):
    obj = {}
    for key, value in pairs:
        if key in obj:
            raise _DuplicateJsonKey(key)
        obj[key] = value
    return obj


def _parse_attr_value(raw, where: str) -> AttributeValue:
    if isinstance(raw, dict):
        if "$" not in raw:
            raise ParseError(f"attribute object without '$' in {where}")
        text = raw["$"]
        if not isinstance(text, str):
            text = _infer_literal(text, where).text_form()
        tag = raw.get("type", "")
        if not isinstance(tag, str):
            raise ParseError(f"non-string datatype tag in {where}")
        try:
            return AttributeValue.from_typed(text, tag)
        except InvalidArgumentError as exc:
            logger.warning("%s in %s; keeping value as string", exc, where)
            return AttributeValue(text, tag or "xsd:string")
    return _infer_literal(raw, where)


def _infer_literal(raw, where: str) -> AttributeValue:
    if isinstance(raw, (str, bool, int, float)):
        return AttributeValue(raw)
    raise ParseError(f"unsupported attribute value {type(raw).__name__} in {where}")


def _parse_qualified(text: str, where: str) -> QualifiedName:
    if not isinstance(text, str):
        raise ParseError(f"expected qualified name string in {where}")
    try:
        return QualifiedName.parse(text)
    except InvalidArgumentError as exc:
        raise ParseError(f"{exc} in {where}")


def parse(data: bytes | str) -> ProvDocument:
    """Parse PROV-JSON text into a document.

    Dangling references and kind mismatches are deferred to
    :func:`validate`; malformed JSON and duplicate ids fail here.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"invalid UTF-8: {exc.reason}", offset=exc.start)
    else:
        text = data
    try:
        raw = json.loads(text, object_pairs_hook=_pairs_hook)
    except _DuplicateJsonKey as exc:
        raise ParseError(f"duplicate id {exc.key!r}", code="duplicate-record")
    except json.JSONDecodeError as exc:
        byte_offset = len(text[: exc.pos].encode("utf-8"))
        raise ParseError(f"malformed JSON: {exc.msg}", offset=byte_offset)
    if not isinstance(raw, dict):
        raise ParseError("top-level JSON value must be an object")

    prefixes = raw.get("prefix", {})
    if not isinstance(prefixes, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in prefixes.items()
    ):
        raise ParseError("'prefix' section must map prefix strings to IRI strings")
    doc = ProvDocument(prefixes)

    for kind in RecordKind:
        section = raw.get(kind.value, {})
        if not isinstance(section, dict):
            raise ParseError(f"section {kind.value!r} must be an object")
        for id_text, body in section.items():
            if not isinstance(body, dict):
                raise ParseError(f"record {id_text!r} must be an object")
            where = f"{kind.value} {id_text}"
            record_id = _parse_qualified(id_text, where)
            start_ms = end_ms = None
            attrs: list[tuple[QualifiedName, AttributeValue]] = []
            for key, value in body.items():
                if kind is RecordKind.ACTIVITY and key in (_START_KEY, _END_KEY):
                    stamp = value.get("$") if isinstance(value, dict) else value
                    if not isinstance(stamp, str):
                        raise ParseError(f"bad time value in {where}")
                    try:
                        ms = parse_datetime_ms(stamp)
                    except InvalidArgumentError as exc:
                        raise ParseError(f"{exc} in {where}")
                    if key == _START_KEY:
                        start_ms = ms
                    else:
                        end_ms = ms
                    continue
                attrs.append((_parse_qualified(key, where), _parse_attr_value(value, where)))
            try:
                doc.add_record(ProvRecord(record_id, kind, attrs, start_ms, end_ms))
            except (DuplicateRecordError, InvalidArgumentError) as exc:
                raise ParseError(str(exc), code=getattr(exc, "code", "parse-error"))

    for section_name, rkind in RELATION_SECTIONS.items():
        section = raw.get(section_name, {})
        if not isinstance(section, dict):
            raise ParseError(f"section {section_name!r} must be an object")
        for rel_text, body in section.items():
            if not isinstance(body, dict):
                raise ParseError(f"relation {rel_text!r} must be an object")
            where = f"{section_name} {rel_text}"
            if rkind.subject_role not in body or rkind.object_role not in body:
                raise ParseError(
                    f"{where} needs {rkind.subject_role} and {rkind.object_role}")
            attrs = [
                (_parse_qualified(k, where), _parse_attr_value(v, where))
                for k, v in body.items()
                if k not in (rkind.subject_role, rkind.object_role)
            ]
            relation = Relation(
                rkind,
                _parse_qualified(rel_text, where),
                _parse_qualified(body[rkind.subject_role], where),
                _parse_qualified(body[rkind.object_role], where),
                attrs,
            )
            try:
                doc.add_relation(relation)
            except DuplicateRecordError as exc:
                raise ParseError(str(exc), code="duplicate-record")

    for name, value in raw.items():
        if name not in KNOWN_SECTIONS:
            doc.extra_sections[name] = value
    return doc


def validate(doc: ProvDocument) -> ValidationReport:
    """Structural validation; always returns a report, never raises."""
    report = ValidationReport()
    declared = set(doc.prefixes) | set(RESERVED_PREFIXES)
    flagged_prefixes: set[str] = set()

    def check_prefix(name: QualifiedName, subject: str):
        if name.prefix not in declared and name.prefix not in flagged_prefixes:
            flagged_prefixes.add(name.prefix)
            report.errors.append(ValidationIssue(
                "undeclared-prefix", f"prefix {name.prefix!r} is not declared", subject))

    def check_attrs(attrs, subject: str):
        seen: set[str] = set()
        for key, _ in attrs:
            check_prefix(key, subject)
            rendered = str(key)
            if rendered in seen:
                report.errors.append(ValidationIssue(
                    "duplicate-attribute", f"attribute {rendered} repeated", subject))
            seen.add(rendered)

    seen_records: set[tuple[RecordKind, str]] = set()
    for record in doc.records:
        subject = str(record.id)
        key = (record.kind, subject)
        if key in seen_records:
            report.errors.append(ValidationIssue(
                "duplicate-record", f"{record.kind.value} id {subject} repeated", subject))
        seen_records.add(key)
        check_prefix(record.id, subject)
        check_attrs(record.attributes, subject)

    seen_relations: set[tuple[RelationKind, str]] = set()
    associated: set[str] = set()
    for relation in doc.relations:
        subject = str(relation.relation_id)
        key = (relation.kind, subject)
        if key in seen_relations:
            report.errors.append(ValidationIssue(
                "duplicate-record", f"{relation.kind.section} id {subject} repeated", subject))
        seen_relations.add(key)
        check_prefix(relation.relation_id, subject)
        check_attrs(relation.attributes, subject)
        for endpoint, expected in (
            (relation.subject, relation.kind.subject_kind),
            (relation.object, relation.kind.object_kind),
        ):
            check_prefix(endpoint, subject)
            declared_kinds = doc.kinds_declaring(str(endpoint))
            if not declared_kinds:
                report.errors.append(ValidationIssue(
                    "dangling-reference",
                    f"{relation.kind.section} references undeclared id {endpoint}",
                    subject))
            elif expected not in declared_kinds:
                report.errors.append(ValidationIssue(
                    "kind-mismatch",
                    f"{relation.kind.section} expects {expected.value} at {endpoint}",
                    subject))
        if relation.kind is RelationKind.WAS_ASSOCIATED_WITH:
            associated.add(str(relation.subject))

    if not doc.records and not doc.relations:
        report.warnings.append(ValidationIssue("empty-document", "document has no records"))
    for record in doc.records_of(RecordKind.ACTIVITY):
        if str(record.id) not in associated:
            report.warnings.append(ValidationIssue(
                "unassociated-activity",
                f"activity {record.id} has no agent association",
                str(record.id)))
    return report
