"""Context capture and the two intrinsic evaluation channels (ABAC, CAAC)."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Optional, Sequence

from .model import AccessRequest, RegistrationStatus
from .ontology import (
    CONTEXT_CONDITIONS,
    REMEDIABLE_CONDITIONS,
    Condition,
    ConditionState,
    Effect,
    ProvisionMatch,
)


class Situation(str, Enum):
    ROUTINE = "routine"
    EMERGENCY = "emergency"
    AFTER_HOURS = "after-hours"
    REMOTE_TELEHEALTH = "remote-telehealth"
    HOME_CARE = "home-care"


class Urgency(str, Enum):
    LOW = "low"
    NORMAL = "normal"
    HIGH = "high"
    CRITICAL = "critical"


class Location(str, Enum):
    ON_PREMISES = "on-premises"
    OFF_SITE = "off-site"
    PATIENT_HOME = "patient-home"
    UNKNOWN = "unknown"


class Device(str, Enum):
    HOSPITAL_APPROVED = "hospital-approved"
    BYOD = "byod"
    UNKNOWN = "unknown"


class Clearance(str, Enum):
    NONE = "none"
    STANDARD = "standard"
    ELEVATED = "elevated"


@dataclass(frozen=True)
class ContextSnapshot:
    situation: Situation
    urgency: Urgency
    location: Location
    device: Device
    timestamp: str

    def __post_init__(self) -> None:
        if self.situation is Situation.EMERGENCY and self.urgency not in (Urgency.HIGH, Urgency.CRITICAL):
            raise ValueError("emergency situation requires high or critical urgency")

    def to_dict(self) -> dict:
        return {
            "situation": self.situation.value,
            "urgency": self.urgency.value,
            "location": self.location.value,
            "device": self.device.value,
            "timestamp": self.timestamp,
        }


@dataclass(frozen=True)
class AttributeSet:
    """Standardized subject/resource/environment attributes for one request."""

    subject_attrs: dict[str, str]
    resource_attrs: dict[str, object]
    environment_attrs: ContextSnapshot
    derivation_notes: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "subject_attrs": dict(self.subject_attrs),
            "resource_attrs": dict(self.resource_attrs),
            "environment_attrs": self.environment_attrs.to_dict(),
            "derivation_notes": list(self.derivation_notes),
        }


class ContradictoryOverride(ValueError):
    """A structured override conflicts with a hard field or another override."""


# Narrative keyword tables. Deterministic and auditable by design: the first
# situation row whose keywords appear wins, top to bottom.
_SITUATION_KEYWORDS: list[tuple[Situation, tuple[str, ...]]] = [
    (Situation.EMERGENCY, (
        "emergency", "critical condition", "unconscious", "collapsed",
        "airlifted", "trauma", "rushed", "resuscitat", "crisis",
    )),
    (Situation.REMOTE_TELEHEALTH, (
        "telehealth", "teleconsultation", "telemedicine", "remote",
        "virtual consultation", "video consultation", "teleconference",
    )),
    (Situation.HOME_CARE, (
        "home visit", "in-home", "at home", "home care", "home-based",
        "house call", "patient's home",
    )),
    (Situation.AFTER_HOURS, ("after hours", "after-hours", "overnight", "night shift")),
]

_CRITICAL_KEYWORDS = ("critical", "life-threatening", "cardiac arrest")
_HIGH_KEYWORDS = ("urgent", "severe", "acute")

_BYOD_KEYWORDS = ("byod", "personal device", "personal laptop", "personal phone", "own device", "private laptop")
_APPROVED_DEVICE_KEYWORDS = ("hospital-approved device", "hospital-issued", "approved workstation", "ward terminal")

_ON_PREMISES_KEYWORDS = ("hospital", "emergency department", "emergency room", "ward", "clinic", "on-site", "admitted")

_CLEARANCE_KEYWORDS = ("security clearance", "elevated clearance")

_NFR_KEYWORDS = ("not for resuscitation", "nfr")


def _scan(narrative: str, keywords: Sequence[str]) -> Optional[str]:
    for keyword in keywords:
        if keyword in narrative:
            return keyword
    return None


def capture_context(
    request: AccessRequest,
    overrides: Optional[Mapping[str, str]] = None,
    timestamp: str = "",
) -> tuple[AttributeSet, ContextSnapshot]:
    """Map the request narrative and fields into the standard vocabulary.

    Explicit structured overrides always win over narrative-derived values;
    every inference is appended to derivation_notes. Deterministic and
    idempotent: same request and overrides, same output.

    Raises:
        ContradictoryOverride: on unknown override keys (attempts to override
            hard request fields) or an override combination that violates the
            snapshot invariants (e.g. emergency with low urgency).
    """
    overrides = dict(overrides or {})
    notes: list[str] = []
    narrative = request.raw_narrative.lower()

    unknown = sorted(set(overrides) - {"situation", "urgency", "location", "device"})
    if unknown:
        raise ContradictoryOverride(
            f"override keys {unknown} are not context fields; request fields cannot be overridden"
        )

    situation = Situation.ROUTINE
    hit = None
    for candidate, keywords in _SITUATION_KEYWORDS:
        hit = _scan(narrative, keywords)
        if hit:
            situation = candidate
            notes.append(f"situation={candidate.value} from narrative keyword {hit!r}")
            break
    if not hit:
        notes.append("situation=routine defaulted (no situational keyword)")

    if _scan(narrative, _CRITICAL_KEYWORDS):
        urgency = Urgency.CRITICAL
        notes.append("urgency=critical from narrative keyword")
    elif _scan(narrative, _HIGH_KEYWORDS):
        urgency = Urgency.HIGH
        notes.append("urgency=high from narrative keyword")
    elif situation is Situation.EMERGENCY:
        urgency = Urgency.HIGH
        notes.append("urgency=high implied by emergency situation")
    else:
        urgency = Urgency.NORMAL
        notes.append("urgency=normal defaulted")

    if situation is Situation.REMOTE_TELEHEALTH:
        location = Location.OFF_SITE
        notes.append("location=off-site implied by telehealth situation")
    elif situation is Situation.HOME_CARE:
        location = Location.PATIENT_HOME
        notes.append("location=patient-home implied by home-care situation")
    elif _scan(narrative, _ON_PREMISES_KEYWORDS):
        location = Location.ON_PREMISES
        notes.append("location=on-premises from narrative keyword")
    else:
        location = Location.UNKNOWN
        notes.append("location=unknown defaulted")

    if _scan(narrative, _BYOD_KEYWORDS):
        device = Device.BYOD
        notes.append("device=byod from narrative keyword")
    elif _scan(narrative, _APPROVED_DEVICE_KEYWORDS):
        device = Device.HOSPITAL_APPROVED
        notes.append("device=hospital-approved from narrative keyword")
    else:
        device = Device.UNKNOWN
        notes.append("device=unknown defaulted")

    try:
        if "situation" in overrides:
            situation = Situation(overrides["situation"])
            notes.append(f"situation={situation.value} from explicit override")
        if "urgency" in overrides:
            urgency = Urgency(overrides["urgency"])
            notes.append(f"urgency={urgency.value} from explicit override")
        if "location" in overrides:
            location = Location(overrides["location"])
            notes.append(f"location={location.value} from explicit override")
        if "device" in overrides:
            device = Device(overrides["device"])
            notes.append(f"device={device.value} from explicit override")
    except ValueError as exc:
        raise ContradictoryOverride(str(exc)) from None

    if situation is Situation.EMERGENCY and urgency not in (Urgency.HIGH, Urgency.CRITICAL):
        if "urgency" in overrides:
            raise ContradictoryOverride("emergency situation contradicts low/normal urgency override")
        urgency = Urgency.HIGH
        notes.append("urgency=high forced to satisfy emergency invariant")

    snapshot = ContextSnapshot(
        situation=situation,
        urgency=urgency,
        location=location,
        device=device,
        timestamp=timestamp,
    )

    if _scan(narrative, _CLEARANCE_KEYWORDS):
        clearance = Clearance.ELEVATED
        notes.append("clearance=elevated from narrative keyword")
    elif request.subject.registration_status is RegistrationStatus.REGISTERED_PROVIDER:
        clearance = Clearance.STANDARD
        notes.append("clearance=standard implied by provider registration")
    else:
        clearance = Clearance.NONE
        notes.append("clearance=none defaulted")

    clinical_flags: list[str] = []
    if _scan(narrative, _NFR_KEYWORDS):
        clinical_flags.append("NFR")
        notes.append("clinical flag NFR from narrative keyword")

    attrs = AttributeSet(
        subject_attrs={
            "role": request.subject.actor_role.value,
            "registration": request.subject.registration_status.value,
            "relationship": request.subject.relationship_to_patient.value,
            "clearance": clearance.value,
        },
        resource_attrs={
            "scope": request.resource.record_scope.value,
            "sensitivity": request.resource.sensitivity.value,
            "clinical_flags": clinical_flags,
        },
        environment_attrs=snapshot,
        derivation_notes=tuple(notes),
    )
    return attrs, snapshot


class Channel(str, Enum):
    ONTOLOGY = "Ontology"
    ABAC = "ABAC"
    CAAC = "CAAC"


class Stance(str, Enum):
    PERMIT = "Permit"
    PERMIT_WITH_CONDITIONS = "PermitWithConditions"
    FORBID = "Forbid"
    ABSTAIN = "Abstain"


@dataclass(frozen=True)
class ChannelVerdict:
    channel: Channel
    stance: Stance
    conditions: tuple[Condition, ...] = ()
    basis: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.stance is Stance.ABSTAIN:
            if self.conditions:
                raise ValueError("Abstain carries no conditions")
            if not self.basis:
                raise ValueError("Abstain must explain itself in basis")

    def permissive(self) -> bool:
        return self.stance in (Stance.PERMIT, Stance.PERMIT_WITH_CONDITIONS)

    def to_dict(self) -> dict:
        return {
            "channel": self.channel.value,
            "stance": self.stance.value,
            "conditions": [c.value for c in self.conditions],
            "basis": list(self.basis),
        }


def _authorizing(matches: Sequence[ProvisionMatch]) -> list[ProvisionMatch]:
    return [m for m in matches if m.provision.effect is not Effect.PROHIBIT]


def evaluate_ontology(matches: Sequence[ProvisionMatch]) -> ChannelVerdict:
    """Extrinsic channel: which provisions speak to the request at all."""
    prohibits = [m for m in matches if m.provision.effect is Effect.PROHIBIT]
    if prohibits:
        return ChannelVerdict(
            channel=Channel.ONTOLOGY,
            stance=Stance.FORBID,
            basis=tuple(m.provision.provision_id for m in prohibits),
        )
    unconditional = [m for m in matches if m.provision.effect is Effect.AUTHORIZE]
    if unconditional:
        return ChannelVerdict(
            channel=Channel.ONTOLOGY,
            stance=Stance.PERMIT,
            basis=tuple(m.provision.provision_id for m in unconditional),
        )
    conditional = [m for m in matches if m.provision.effect is Effect.AUTHORIZE_WITH_CONDITIONS]
    if conditional:
        conditions: list[Condition] = []
        for m in conditional:
            for c in m.provision.conditions:
                if c not in conditions:
                    conditions.append(c)
        return ChannelVerdict(
            channel=Channel.ONTOLOGY,
            stance=Stance.PERMIT_WITH_CONDITIONS,
            conditions=tuple(conditions),
            basis=tuple(m.provision.provision_id for m in conditional),
        )
    return ChannelVerdict(
        channel=Channel.ONTOLOGY,
        stance=Stance.ABSTAIN,
        basis=("no provision matched the request",),
    )


def evaluate_abac(attrs: AttributeSet, matches: Sequence[ProvisionMatch]) -> ChannelVerdict:
    """Attribute channel: can the subject's attributes satisfy some match.

    Reads only subject/resource attributes; never consults the context
    snapshot. `attrs` is accepted for interface symmetry and auditability.
    """
    del attrs  # attribute facts are already folded into the condition states
    # Only matches decidable from attributes alone: a provision that also
    # carries a context condition cannot be satisfied by this channel.
    conditioned = [
        m for m in _authorizing(matches)
        if m.attribute_conditions()
        and not any(c in CONTEXT_CONDITIONS for c in m.provision.conditions)
    ]

    satisfied = [
        m for m in conditioned
        if all(s is ConditionState.SATISFIED for _, s in m.attribute_conditions())
    ]
    if satisfied:
        best = min(satisfied, key=lambda m: m.provision.provision_id)
        return ChannelVerdict(
            channel=Channel.ABAC,
            stance=Stance.PERMIT,
            basis=(best.provision.provision_id,)
            + tuple(f"{c.value}=satisfied" for c, _ in best.attribute_conditions()),
        )

    remediable = [
        m for m in conditioned
        if m.unmet_attribute_conditions()
        and set(m.unmet_attribute_conditions()) <= REMEDIABLE_CONDITIONS
    ]
    if remediable:
        best = min(remediable, key=lambda m: (len(m.unmet_attribute_conditions()), m.provision.provision_id))
        unmet = tuple(c for c in Condition if c in best.unmet_attribute_conditions())
        return ChannelVerdict(
            channel=Channel.ABAC,
            stance=Stance.PERMIT_WITH_CONDITIONS,
            conditions=unmet,
            basis=(best.provision.provision_id,) + tuple(f"{c.value}=unmet" for c in unmet),
        )

    if matches and all(m.provision.effect is Effect.PROHIBIT for m in matches):
        return ChannelVerdict(
            channel=Channel.ABAC,
            stance=Stance.FORBID,
            basis=tuple(m.provision.provision_id for m in matches),
        )

    if conditioned:
        # Every attribute-conditioned authorization has a non-remediable gap.
        basis: list[str] = []
        for m in sorted(conditioned, key=lambda m: m.provision.provision_id):
            basis.append(m.provision.provision_id)
            basis.extend(
                f"{c.value}={m.state_of(c).value}"  # type: ignore[union-attr]
                for c in m.unmet_attribute_conditions()
                if c not in REMEDIABLE_CONDITIONS
            )
        return ChannelVerdict(channel=Channel.ABAC, stance=Stance.FORBID, basis=tuple(basis))

    return ChannelVerdict(
        channel=Channel.ABAC,
        stance=Stance.ABSTAIN,
        basis=("no matched provision carries attribute conditions",),
    )


def evaluate_caac(context: ContextSnapshot, matches: Sequence[ProvisionMatch]) -> ChannelVerdict:
    """Context channel: emergency override and context-condition violations.

    Reads only the context snapshot; never consults subject attributes.
    """
    overridable = [
        m for m in _authorizing(matches)
        if Condition.EMERGENCY_OVERRIDABLE in m.provision.conditions
    ]
    if context.situation is Situation.EMERGENCY and overridable:
        return ChannelVerdict(
            channel=Channel.CAAC,
            stance=Stance.PERMIT,
            basis=tuple(m.provision.provision_id for m in overridable)
            + (f"situation=emergency urgency={context.urgency.value}",),
        )

    device_bound = [
        m for m in matches
        if Condition.APPROVED_DEVICE_REQUIRED in m.provision.conditions
    ]
    if device_bound and context.device is Device.BYOD:
        return ChannelVerdict(
            channel=Channel.CAAC,
            stance=Stance.FORBID,
            basis=tuple(m.provision.provision_id for m in device_bound) + ("device=byod",),
        )

    return ChannelVerdict(
        channel=Channel.CAAC,
        stance=Stance.ABSTAIN,
        basis=("no context-relevant provision engaged",),
    )
