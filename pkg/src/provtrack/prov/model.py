"""In-memory PROV-DM subset: entities, activities, agents and the five
relations needed by generated lineage graphs.

Documents are single-writer, insertion-ordered containers. Structural
equality ignores insertion order for records and relations (ids are unique
per kind, so content comparison is well defined) but preserves attribute
order within a record.
"""

from __future__ import annotations

import math
import re
import string
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Union

from ..errors import DuplicateRecordError, InvalidArgumentError

PROV_PREFIX = "prov"
XSD_PREFIX = "xsd"
PROV_IRI = "http://www.w3.org/ns/prov#"
XSD_IRI = "http://www.w3.org/2001/XMLSchema#"
RESERVED_PREFIXES = {PROV_PREFIX: PROV_IRI, XSD_PREFIX: XSD_IRI}

_PREFIX_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")
_LOCAL_SAFE = frozenset(string.ascii_letters + string.digits + "_.:-")
_ESCAPE_RE = re.compile(r"%([0-9A-Fa-f]{2})")


def escape_local(text: str) -> str:
    """Percent-escape characters a local name may not carry verbatim."""
    out: list[str] = []
    for ch in text:
        if ch in _LOCAL_SAFE:
            out.append(ch)
        else:
            out.extend("%{:02X}".format(b) for b in ch.encode("utf-8"))
    return "".join(out)


def unescape_local(text: str) -> str:
    """Inverse of :func:`escape_local`; stray ``%`` is kept literally."""
    raw = bytearray()
    i = 0
    while i < len(text):
        m = _ESCAPE_RE.match(text, i)
        if m:
            raw.append(int(m.group(1), 16))
            i = m.end()
        else:
            raw.extend(text[i].encode("utf-8"))
            i += 1
    return raw.decode("utf-8", errors="replace")


@dataclass(frozen=True)
class QualifiedName:
    """A ``prefix:local`` identifier.

    The local part is stored raw and escaped only when rendered, so
    ``QualifiedName.parse(str(qn)) == qn`` for every constructible name.
    """

    prefix: str
    local: str

    def __post_init__(self):
        if not _PREFIX_RE.match(self.prefix):
            raise InvalidArgumentError(f"invalid prefix {self.prefix!r}")
        if not self.local:
            raise InvalidArgumentError("local name must be non-empty")

    def __str__(self) -> str:
        return f"{self.prefix}:{escape_local(self.local)}"

    @classmethod
    def parse(cls, text: str) -> "QualifiedName":
        prefix, sep, local = text.partition(":")
        if not sep or not local:
            raise InvalidArgumentError(f"not a qualified name: {text!r}")
        return cls(prefix, unescape_local(local))


XSD_STRING = "xsd:string"
XSD_LONG = "xsd:long"
XSD_DOUBLE = "xsd:double"
XSD_BOOLEAN = "xsd:boolean"
XSD_DATETIME = "xsd:dateTime"
PROV_QUALIFIED_NAME = "prov:QUALIFIED_NAME"

CANONICAL_DATATYPES = (XSD_STRING, XSD_LONG, XSD_DOUBLE, XSD_BOOLEAN, XSD_DATETIME)

Scalar = Union[str, int, float, bool]


def format_double(value: float) -> str:
    """Shortest round-trip decimal form, XSD lexical space for non-finites."""
    if math.isnan(value):
        return "NaN"
    if math.isinf(value):
        return "INF" if value > 0 else "-INF"
    return repr(value)


def parse_double(text: str) -> float:
    if text in ("INF", "+INF"):
        return math.inf
    if text == "-INF":
        return -math.inf
    if text == "NaN":
        return math.nan
    return float(text)


@dataclass(frozen=True)
class AttributeValue:
    """One typed PROV attribute value.

    The datatype tag is inferred from the Python variant when omitted.
    Tags outside the canonical xsd set are allowed for passthrough of
    foreign documents; their values are carried as strings.
    """

    value: Scalar
    datatype: str = ""

    def __post_init__(self):
        value, tag = self.value, self.datatype
        if not isinstance(value, (str, int, float, bool)):
            raise InvalidArgumentError(f"unsupported attribute value type {type(value).__name__}")
        if not tag:
            if isinstance(value, bool):
                tag = XSD_BOOLEAN
            elif isinstance(value, int):
                tag = XSD_LONG
            elif isinstance(value, float):
                tag = XSD_DOUBLE
            else:
                tag = XSD_STRING
            object.__setattr__(self, "datatype", tag)
            return
        if tag == XSD_BOOLEAN:
            if not isinstance(value, bool):
                raise InvalidArgumentError("xsd:boolean requires a bool value")
        elif tag == XSD_LONG:
            if isinstance(value, bool) or not isinstance(value, int):
                raise InvalidArgumentError("xsd:long requires an int value")
        elif tag == XSD_DOUBLE:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise InvalidArgumentError("xsd:double requires a numeric value")
            object.__setattr__(self, "value", float(value))
        elif tag in (XSD_STRING, XSD_DATETIME):
            if not isinstance(value, str):
                raise InvalidArgumentError(f"{tag} requires a string value")
        else:
            # Foreign tag: keep the textual form verbatim.
            if not isinstance(value, str):
                raise InvalidArgumentError("non-xsd datatype tags require a string value")

    def text_form(self) -> str:
        if self.datatype == XSD_BOOLEAN:
            return "true" if self.value else "false"
        if self.datatype == XSD_DOUBLE:
            return format_double(float(self.value))
        return str(self.value)

    @classmethod
    def from_typed(cls, text: str, datatype: str) -> "AttributeValue":
        """Rebuild a value from its serialized ``($, type)`` pair."""
        if datatype == XSD_LONG:
            try:
                return cls(int(text), XSD_LONG)
            except ValueError:
                raise InvalidArgumentError(f"bad xsd:long literal {text!r}")
        if datatype == XSD_DOUBLE:
            try:
                return cls(parse_double(text), XSD_DOUBLE)
            except ValueError:
                raise InvalidArgumentError(f"bad xsd:double literal {text!r}")
        if datatype == XSD_BOOLEAN:
            if text in ("true", "1"):
                return cls(True, XSD_BOOLEAN)
            if text in ("false", "0"):
                return cls(False, XSD_BOOLEAN)
            raise InvalidArgumentError(f"bad xsd:boolean literal {text!r}")
        return cls(text, datatype or XSD_STRING)


class RecordKind(Enum):
    ENTITY = "entity"
    ACTIVITY = "activity"
    AGENT = "agent"


class RelationKind(Enum):
    # (json section, subject role, object role, subject kind, object kind)
    USED = ("used", "prov:activity", "prov:entity", RecordKind.ACTIVITY, RecordKind.ENTITY)
    WAS_GENERATED_BY = (
        "wasGeneratedBy", "prov:entity", "prov:activity", RecordKind.ENTITY, RecordKind.ACTIVITY)
    WAS_ASSOCIATED_WITH = (
        "wasAssociatedWith", "prov:activity", "prov:agent", RecordKind.ACTIVITY, RecordKind.AGENT)
    WAS_DERIVED_FROM = (
        "wasDerivedFrom", "prov:generatedEntity", "prov:usedEntity",
        RecordKind.ENTITY, RecordKind.ENTITY)
    HAD_MEMBER = ("hadMember", "prov:collection", "prov:entity", RecordKind.ENTITY, RecordKind.ENTITY)

    @property
    def section(self) -> str:
        return self.value[0]

    @property
    def subject_role(self) -> str:
        return self.value[1]

    @property
    def object_role(self) -> str:
        return self.value[2]

    @property
    def subject_kind(self) -> RecordKind:
        return self.value[3]

    @property
    def object_kind(self) -> RecordKind:
        return self.value[4]


RELATION_SECTIONS = {kind.section: kind for kind in RelationKind}

AttributeInput = Union[
    Mapping[QualifiedName, Union[AttributeValue, Scalar]],
    Iterable[tuple[QualifiedName, Union[AttributeValue, Scalar]]],
    None,
]


def _normalize_attributes(attrs: AttributeInput) -> list[tuple[QualifiedName, AttributeValue]]:
    if attrs is None:
        return []
    pairs = attrs.items() if isinstance(attrs, Mapping) else attrs
    out: list[tuple[QualifiedName, AttributeValue]] = []
    seen: set[str] = set()
    for key, value in pairs:
        if not isinstance(key, QualifiedName):
            raise InvalidArgumentError("attribute keys must be QualifiedName")
        rendered = str(key)
        if rendered in seen:
            raise InvalidArgumentError(f"duplicate attribute key {rendered}")
        seen.add(rendered)
        if not isinstance(value, AttributeValue):
            value = AttributeValue(value)
        out.append((key, value))
    return out


@dataclass
class ProvRecord:
    """An entity, activity, or agent."""

    id: QualifiedName
    kind: RecordKind
    attributes: list[tuple[QualifiedName, AttributeValue]] = field(default_factory=list)
    start_ms: int | None = None
    end_ms: int | None = None

    def __post_init__(self):
        self.attributes = _normalize_attributes(self.attributes)
        if self.kind is not RecordKind.ACTIVITY and (self.start_ms is not None or self.end_ms is not None):
            raise InvalidArgumentError("only activities carry start/end times")
        if self.start_ms is not None and self.end_ms is not None and self.end_ms < self.start_ms:
            raise InvalidArgumentError("activity endTime precedes startTime")

    def attribute(self, key: QualifiedName) -> AttributeValue | None:
        for k, v in self.attributes:
            if k == key:
                return v
        return None


def entity(id: QualifiedName, attributes: AttributeInput = None) -> ProvRecord:
    return ProvRecord(id, RecordKind.ENTITY, _normalize_attributes(attributes))


def activity(
    id: QualifiedName,
    attributes: AttributeInput = None,
    start_ms: int | None = None,
    end_ms: int | None = None,
) -> ProvRecord:
    return ProvRecord(id, RecordKind.ACTIVITY, _normalize_attributes(attributes), start_ms, end_ms)


def agent(id: QualifiedName, attributes: AttributeInput = None) -> ProvRecord:
    return ProvRecord(id, RecordKind.AGENT, _normalize_attributes(attributes))


@dataclass
class Relation:
    """A directed relation between two records; endpoint kinds are checked
    against the declared records at validation time, not at insertion."""

    kind: RelationKind
    relation_id: QualifiedName
    subject: QualifiedName
    object: QualifiedName
    attributes: list[tuple[QualifiedName, AttributeValue]] = field(default_factory=list)

    def __post_init__(self):
        self.attributes = _normalize_attributes(self.attributes)


class ProvDocument:
    """Namespaces plus ordered sets of records and relations."""

    def __init__(self, prefixes: Mapping[str, str] | None = None):
        self.prefixes: dict[str, str] = dict(prefixes or {})
        self.records: list[ProvRecord] = []
        self.relations: list[Relation] = []
        # Top-level sections from foreign documents, re-emitted on serialize.
        self.extra_sections: dict[str, object] = {}
        self._record_index: dict[tuple[RecordKind, str], ProvRecord] = {}
        self._relation_index: dict[tuple[RelationKind, str], Relation] = {}

    def declare_prefix(self, prefix: str, iri: str) -> None:
        if not _PREFIX_RE.match(prefix):
            raise InvalidArgumentError(f"invalid prefix {prefix!r}")
        if not iri:
            raise InvalidArgumentError("namespace IRI must be non-empty")
        existing = self.prefixes.get(prefix)
        if existing is not None and existing != iri:
            raise InvalidArgumentError(f"prefix {prefix!r} already bound to {existing!r}")
        self.prefixes[prefix] = iri

    def add_record(self, record: ProvRecord) -> None:
        key = (record.kind, str(record.id))
        if key in self._record_index:
            raise DuplicateRecordError(f"duplicate {record.kind.value} id {key[1]}")
        self._record_index[key] = record
        self.records.append(record)

    def add_relation(self, relation: Relation) -> None:
        key = (relation.kind, str(relation.relation_id))
        if key in self._relation_index:
            raise DuplicateRecordError(f"duplicate {relation.kind.section} id {key[1]}")
        self._relation_index[key] = relation
        self.relations.append(relation)

    def get_record(self, id: QualifiedName, kind: RecordKind) -> ProvRecord | None:
        return self._record_index.get((kind, str(id)))

    def records_of(self, kind: RecordKind) -> list[ProvRecord]:
        return [r for r in self.records if r.kind is kind]

    def relations_of(self, kind: RelationKind) -> list[Relation]:
        return [r for r in self.relations if r.kind is kind]

    def kinds_declaring(self, id_text: str) -> set[RecordKind]:
        return {kind for (kind, text) in self._record_index if text == id_text}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProvDocument):
            return NotImplemented
        def record_map(doc: ProvDocument):
            return {
                (r.kind, str(r.id)): (r.attributes, r.start_ms, r.end_ms)
                for r in doc.records
            }
        def relation_map(doc: ProvDocument):
            return {
                (r.kind, str(r.relation_id)): (str(r.subject), str(r.object), r.attributes)
                for r in doc.relations
            }
        return (
            self.prefixes == other.prefixes
            and record_map(self) == record_map(other)
            and relation_map(self) == relation_map(other)
            and self.extra_sections == other.extra_sections
        )

    def __repr__(self) -> str:
        return (f"ProvDocument(prefixes={len(self.prefixes)}, records={len(self.records)}, "
                f"relations={len(self.relations)})")


def new_document(default_namespace: str, default_prefix: str = "user") -> ProvDocument:
    """A document holding only the prefix table: the caller's namespace plus
    the ``prov`` and ``xsd`` bindings."""
    if not default_namespace:
        raise InvalidArgumentError("default namespace IRI must be non-empty")
    doc = ProvDocument()
    doc.declare_prefix(default_prefix, default_namespace)
    doc.declare_prefix(PROV_PREFIX, PROV_IRI)
    doc.declare_prefix(XSD_PREFIX, XSD_IRI)
    return doc
