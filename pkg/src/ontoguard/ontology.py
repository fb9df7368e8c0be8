"""Structured medical-legal provision store: load, validate, query."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

from .model import AccessRequest, Purpose, RecordScope, Relationship, Role


class SourceAct(str, Enum):
    PRIVACY_ACT_1988 = "privacy-act-1988"
    MY_HEALTH_RECORDS_ACT_2012 = "my-health-records-act-2012"
    HEALTH_RECORDS_ACT_2001 = "health-records-act-2001"


class Effect(str, Enum):
    AUTHORIZE = "Authorize"
    PROHIBIT = "Prohibit"
    AUTHORIZE_WITH_CONDITIONS = "AuthorizeWithConditions"


class Priority(str, Enum):
    MANDATORY = "Mandatory"  # legal prohibition/obligation
    DEFAULT = "Default"      # institutional policy


class Condition(str, Enum):
    CONSENT_REQUIRED = "consent-required"
    REGISTERED_PROVIDER_REQUIRED = "registered-provider-required"
    SUPERVISION_REQUIRED = "supervision-required"
    PURPOSE_MUST_BE_HEALTHCARE = "purpose-must-be-healthcare"
    EMERGENCY_OVERRIDABLE = "emergency-overridable"
    APPROVED_DEVICE_REQUIRED = "approved-device-required"


# Conditions decided from subject/resource/purpose attributes, vs. the live
# situational context. Every condition belongs to exactly one side.
ATTRIBUTE_CONDITIONS = frozenset(
    {
        Condition.CONSENT_REQUIRED,
        Condition.REGISTERED_PROVIDER_REQUIRED,
        Condition.SUPERVISION_REQUIRED,
        Condition.PURPOSE_MUST_BE_HEALTHCARE,
    }
)
CONTEXT_CONDITIONS = frozenset(
    {Condition.EMERGENCY_OVERRIDABLE, Condition.APPROVED_DEVICE_REQUIRED}
)
# Gaps a requester can close without changing who they are.
REMEDIABLE_CONDITIONS = frozenset(
    {Condition.CONSENT_REQUIRED, Condition.SUPERVISION_REQUIRED}
)


@dataclass(frozen=True)
class Matcher:
    """Conjunction of set-membership tests; None means wildcard."""

    roles: Optional[frozenset[Role]] = None
    purposes: Optional[frozenset[Purpose]] = None
    scopes: Optional[frozenset[RecordScope]] = None
    relationships: Optional[frozenset[Relationship]] = None

    def accepts(self, request: AccessRequest) -> bool:
        if self.roles is not None and request.subject.actor_role not in self.roles:
            return False
        if self.purposes is not None and request.purpose not in self.purposes:
            return False
        if self.scopes is not None and request.resource.record_scope not in self.scopes:
            return False
        if self.relationships is not None and request.subject.relationship_to_patient not in self.relationships:
            return False
        return True

    def never_fires(self) -> bool:
        return any(s is not None and len(s) == 0
                   for s in (self.roles, self.purposes, self.scopes, self.relationships))

    def covered_by(self, other: "Matcher") -> bool:
        """True when every request this matcher accepts, `other` accepts too."""
        if self.never_fires():
            return True  # accepts nothing, so coverage holds vacuously

        def covers(mine: Optional[frozenset], theirs: Optional[frozenset], universe: type[Enum]) -> bool:
            theirs_set = set(universe) if theirs is None else theirs
            mine_set = set(universe) if mine is None else mine
            return mine_set <= theirs_set

        return (
            covers(self.roles, other.roles, Role)
            and covers(self.purposes, other.purposes, Purpose)
            and covers(self.scopes, other.scopes, RecordScope)
            and covers(self.relationships, other.relationships, Relationship)
        )

    def to_dict(self) -> dict:
        def show(s: Optional[frozenset]) -> object:
            return "*" if s is None else sorted(v.value for v in s)

        return {
            "roles": show(self.roles),
            "purposes": show(self.purposes),
            "scopes": show(self.scopes),
            "relationships": show(self.relationships),
        }


@dataclass(frozen=True)
class Provision:
    """One machine-readable rule distilled from an Act."""

    provision_id: str
    source_act: SourceAct
    effect: Effect
    applies_to: Matcher
    conditions: tuple[Condition, ...]
    priority: Priority
    description: str = ""

    def __post_init__(self) -> None:
        # Prohibitions are unconditional within their matcher.
        if self.effect is Effect.PROHIBIT and self.conditions:
            raise ValueError(f"{self.provision_id}: Prohibit provisions carry no conditions")

    def to_dict(self) -> dict:
        return {
            "provision_id": self.provision_id,
            "source_act": self.source_act.value,
            "effect": self.effect.value,
            "applies_to": self.applies_to.to_dict(),
            "conditions": [c.value for c in self.conditions],
            "priority": self.priority.value,
            "description": self.description,
        }


@dataclass(frozen=True)
class Ontology:
    """Immutable provision store; reload produces a new value."""

    provisions: tuple[Provision, ...]
    act_versions: dict[SourceAct, str]
    loaded_from: tuple[str, ...] = ()

    def by_id(self, provision_id: str) -> Provision:
        for p in self.provisions:
            if p.provision_id == provision_id:
                return p
        raise KeyError(provision_id)


class PolicyLoadError(Exception):
    """Raised for any problem turning provision files into an Ontology."""

    def __init__(self, code: str, detail: str):
        self.code = code
        self.detail = detail
        super().__init__(f"{code}: {detail}")


def _parse_set(raw: object, enum_cls: type[Enum], path: str, where: str) -> Optional[frozenset]:
    if raw == "*" or raw is None:
        return None
    if not isinstance(raw, list):
        raise PolicyLoadError("ParseError", f"{path}: {where} must be a list or '*'")
    out = set()
    for item in raw:
        try:
            out.add(enum_cls(item))
        except ValueError:
            raise PolicyLoadError("ParseError", f"{path}: {where} has unknown value {item!r}") from None
    return frozenset(out)


def _parse_provision(raw: dict, path: str) -> Provision:
    for key in ("provision_id", "source_act", "effect", "applies_to", "priority"):
        if key not in raw:
            raise PolicyLoadError("ParseError", f"{path}: provision missing field {key!r}")
    pid = raw["provision_id"]
    try:
        act = SourceAct(raw["source_act"])
    except ValueError:
        raise PolicyLoadError("UnknownAct", f"{path}: {raw['source_act']!r}") from None
    try:
        effect = Effect(raw["effect"])
        priority = Priority(raw["priority"])
        conditions = tuple(Condition(c) for c in raw.get("conditions", []))
    except ValueError as exc:
        raise PolicyLoadError("ParseError", f"{path}: {pid}: {exc}") from None
    applies = raw["applies_to"]
    matcher = Matcher(
        roles=_parse_set(applies.get("roles", "*"), Role, path, f"{pid}.roles"),
        purposes=_parse_set(applies.get("purposes", "*"), Purpose, path, f"{pid}.purposes"),
        scopes=_parse_set(applies.get("scopes", "*"), RecordScope, path, f"{pid}.scopes"),
        relationships=_parse_set(applies.get("relationships", "*"), Relationship, path, f"{pid}.relationships"),
    )
    try:
        return Provision(
            provision_id=pid,
            source_act=act,
            effect=effect,
            applies_to=matcher,
            conditions=conditions,
            priority=priority,
            description=raw.get("description", ""),
        )
    except ValueError as exc:
        raise PolicyLoadError("ParseError", f"{path}: {exc}") from None


def load_policy_corpus(paths: Sequence[str | Path]) -> Ontology:
    """Load every provision file into a single validated Ontology.

    Each file holds one Act: {"act": ..., "version": ..., "provisions": [...]}.
    Duplicate provision ids across files are an error, not a merge.
    """
    provisions: list[Provision] = []
    act_versions: dict[SourceAct, str] = {}
    seen: dict[str, str] = {}
    loaded: list[str] = []

    for path in paths:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise PolicyLoadError("FileUnreadable", f"{path}: {exc}") from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise PolicyLoadError("ParseError", f"{path}: line {exc.lineno}: {exc.msg}") from None
        if not isinstance(doc, dict) or "act" not in doc or "provisions" not in doc:
            raise PolicyLoadError("ParseError", f"{path}: expected act header and provisions list")
        try:
            act = SourceAct(doc["act"])
        except ValueError:
            raise PolicyLoadError("UnknownAct", f"{path}: {doc['act']!r}") from None
        act_versions[act] = str(doc.get("version", ""))
        for raw in doc["provisions"]:
            provision = _parse_provision(raw, str(path))
            if provision.provision_id in seen:
                raise PolicyLoadError(
                    "DuplicateProvisionId",
                    f"{provision.provision_id} defined in both {seen[provision.provision_id]} and {path}",
                )
            seen[provision.provision_id] = str(path)
            provisions.append(provision)
        loaded.append(str(path))

    return Ontology(
        provisions=tuple(provisions),
        act_versions=act_versions,
        loaded_from=tuple(loaded),
    )


def load_policy_dir(directory: str | Path) -> Ontology:
    """Load every .json provision file in a directory, sorted by name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise PolicyLoadError("FileUnreadable", f"{directory}: not a directory")
    return load_policy_corpus(sorted(directory.glob("*.json")))


class ConditionState(str, Enum):
    SATISFIED = "satisfied"
    UNSATISFIED = "unsatisfied"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class ProvisionMatch:
    """A provision whose matcher accepted a request, with condition states."""

    provision: Provision
    condition_states: tuple[tuple[Condition, ConditionState], ...]

    def state_of(self, condition: Condition) -> Optional[ConditionState]:
        for cond, state in self.condition_states:
            if cond is condition:
                return state
        return None

    def attribute_conditions(self) -> list[tuple[Condition, ConditionState]]:
        return [(c, s) for c, s in self.condition_states if c in ATTRIBUTE_CONDITIONS]

    def unmet_attribute_conditions(self) -> list[Condition]:
        return [c for c, s in self.attribute_conditions() if s is not ConditionState.SATISFIED]

    def to_dict(self) -> dict:
        return {
            "provision_id": self.provision.provision_id,
            "effect": self.provision.effect.value,
            "priority": self.provision.priority.value,
            "conditions": {c.value: s.value for c, s in self.condition_states},
        }


def _condition_state(condition: Condition, request: AccessRequest) -> ConditionState:
    from .model import Consent, Purpose as P, RegistrationStatus, Supervision

    if condition is Condition.CONSENT_REQUIRED:
        if request.consent is Consent.GRANTED:
            return ConditionState.SATISFIED
        if request.consent is Consent.ABSENT:
            return ConditionState.UNSATISFIED
        return ConditionState.INDETERMINATE
    if condition is Condition.REGISTERED_PROVIDER_REQUIRED:
        return (
            ConditionState.SATISFIED
            if request.subject.registration_status is RegistrationStatus.REGISTERED_PROVIDER
            else ConditionState.UNSATISFIED
        )
    if condition is Condition.SUPERVISION_REQUIRED:
        if request.supervision is Supervision.SUPERVISED:
            return ConditionState.SATISFIED
        if request.supervision is Supervision.UNSUPERVISED:
            return ConditionState.UNSATISFIED
        return ConditionState.INDETERMINATE
    if condition is Condition.PURPOSE_MUST_BE_HEALTHCARE:
        return (
            ConditionState.SATISFIED
            if request.purpose is P.HEALTHCARE_PROVISION
            else ConditionState.UNSATISFIED
        )
    # Context conditions cannot be decided from the request alone.
    return ConditionState.INDETERMINATE


def applicable_provisions(ontology: Ontology, request: AccessRequest) -> list[ProvisionMatch]:
    """Every provision whose matcher accepts the request.

    Ordered Mandatory before Default, then by provision id; pure in both
    arguments. An empty list means no provision speaks to the request.
    """
    matches = []
    for provision in ontology.provisions:
        if not provision.applies_to.accepts(request):
            continue
        states = tuple((c, _condition_state(c, request)) for c in provision.conditions)
        matches.append(ProvisionMatch(provision=provision, condition_states=states))
    matches.sort(key=lambda m: (m.provision.priority is not Priority.MANDATORY, m.provision.provision_id))
    return matches


@dataclass(frozen=True)
class OntologyProblem:
    code: str
    detail: str

    def to_dict(self) -> dict:
        return {"code": self.code, "detail": self.detail}


def validate_ontology(ontology: Ontology) -> list[OntologyProblem]:
    """Report structural problems; an empty list means the store is sound."""
    problems: list[OntologyProblem] = []

    if not ontology.provisions:
        problems.append(OntologyProblem("empty-ontology", "no provisions loaded"))
        return problems

    ids = [p.provision_id for p in ontology.provisions]
    for pid, count in sorted({i: ids.count(i) for i in ids}.items()):
        if count > 1:
            problems.append(OntologyProblem("duplicate-id", pid))

    acts_present = {p.source_act for p in ontology.provisions}
    for act in ontology.act_versions:
        if act not in acts_present:
            problems.append(OntologyProblem("act-without-provisions", act.value))

    for provision in ontology.provisions:
        if provision.applies_to.never_fires():
            problems.append(OntologyProblem("matcher-never-fires", provision.provision_id))

    mandatory_prohibits = [
        p for p in ontology.provisions
        if p.effect is Effect.PROHIBIT and p.priority is Priority.MANDATORY
    ]
    for provision in ontology.provisions:
        if provision.priority is not Priority.DEFAULT or provision.effect is Effect.PROHIBIT:
            continue
        for prohibit in mandatory_prohibits:
            if provision.applies_to.covered_by(prohibit.applies_to):
                problems.append(OntologyProblem(
                    "shadowed-provision",
                    f"{provision.provision_id} fully covered by {prohibit.provision_id}",
                ))
                break

    return problems
