"""Policy-ontology-grounded, context-aware access decision engine."""

from .model import (
    AccessRequest,
    Consent,
    Decision,
    Purpose,
    RecordScope,
    RegistrationStatus,
    Relationship,
    Role,
    Sensitivity,
    Stage,
    SubjectDescriptor,
    Supervision,
    Verdict,
    VerdictKind,
    new_request_id,
    validate_request,
)
from .ontology import (
    Condition,
    Effect,
    Ontology,
    Priority,
    Provision,
    applicable_provisions,
    load_policy_corpus,
    load_policy_dir,
    validate_ontology,
)
from .pipeline import decide, detect_conflicts, generate_recommendations, resolve

__all__ = [
    "AccessRequest",
    "Consent",
    "Condition",
    "Decision",
    "Effect",
    "Ontology",
    "Priority",
    "Provision",
    "Purpose",
    "RecordScope",
    "RegistrationStatus",
    "Relationship",
    "Role",
    "Sensitivity",
    "Stage",
    "SubjectDescriptor",
    "Supervision",
    "Verdict",
    "VerdictKind",
    "applicable_provisions",
    "decide",
    "detect_conflicts",
    "generate_recommendations",
    "load_policy_corpus",
    "load_policy_dir",
    "new_request_id",
    "resolve",
    "validate_ontology",
    "validate_request",
]

__version__ = "0.1.0"
