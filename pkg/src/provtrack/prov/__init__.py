from .model import (
    AttributeValue,
    ProvDocument,
    ProvRecord,
    QualifiedName,
    RecordKind,
    Relation,
    RelationKind,
    activity,
    agent,
    entity,
    new_document,
)
from .jsonio import ValidationIssue, ValidationReport, parse, serialize, validate

__all__ = [
    "AttributeValue",
    "ProvDocument",
    "ProvRecord",
    "QualifiedName",
    "RecordKind",
    "Relation",
    "RelationKind",
    "activity",
    "agent",
    "entity",
    "new_document",
    "parse",
    "serialize",
    "validate",
    "ValidationIssue",
    "ValidationReport",
]
