"""Core domain vocabulary: requests, verdicts, decisions, identifiers."""

from __future__ import annotations

import itertools
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Any, Mapping, Optional

if TYPE_CHECKING:
    from .context import ChannelVerdict
    from .pipeline import Conflict


class Role(str, Enum):
    """Controlled actor-role vocabulary.

    Reconstructed from the bundled scenario corpus; extend here (and in the
    policy files) when new actor kinds appear. `OTHER` is the explicit
    catch-all — free-form role strings are rejected at validation.
    """

    # Allied health and therapy
    DIETITIAN = "dietitian"
    SPEECH_THERAPIST = "speech-therapist"
    OCCUPATIONAL_THERAPIST = "occupational-therapist"
    PHYSICAL_THERAPIST = "physical-therapist"
    RESPIRATORY_THERAPIST = "respiratory-therapist"
    AUDIOLOGIST = "audiologist"
    PODIATRIST = "podiatrist"
    RADIATION_THERAPIST = "radiation-therapist"
    ORTHOTIST = "orthotist"
    PSYCHIATRIC_TECHNICIAN = "psychiatric-technician"
    # Specialist consultants
    ENDOCRINOLOGIST = "endocrinologist"
    NEUROLOGIST = "neurologist"
    CARDIOLOGIST = "cardiologist"
    NEPHROLOGIST = "nephrologist"
    PSYCHIATRIST = "psychiatrist"
    DERMATOLOGIST = "dermatologist"
    RHEUMATOLOGIST = "rheumatologist"
    GASTROENTEROLOGIST = "gastroenterologist"
    PULMONOLOGIST = "pulmonologist"
    # Direct care
    GENERAL_PRACTITIONER = "general-practitioner"
    REGISTERED_NURSE = "registered-nurse"
    NURSE_PRACTITIONER = "nurse-practitioner"
    PHYSICIAN_ASSISTANT = "physician-assistant"
    PEDIATRICIAN = "pediatrician"
    ONCOLOGY_NURSE = "oncology-nurse"
    EMERGENCY_PHYSICIAN = "emergency-physician"
    ORTHOPEDIC_SURGEON = "orthopedic-surgeon"
    # Emergency services
    PARAMEDIC = "paramedic"
    EMERGENCY_NURSE = "emergency-nurse"
    EMERGENCY_MEDICAL_TECHNICIAN = "emergency-medical-technician"
    FLIGHT_NURSE = "flight-nurse"
    EMERGENCY_PSYCHIATRIC_CLINICIAN = "emergency-psychiatric-clinician"
    TRAUMA_SURGEON = "trauma-surgeon"
    SOCIAL_WORKER = "social-worker"
    RADIOLOGIST = "radiologist"
    # Home care
    HOME_HEALTH_NURSE = "home-health-nurse"
    HOME_HEALTH_AIDE = "home-health-aide"
    MEDICAL_SOCIAL_WORKER = "medical-social-worker"
    PALLIATIVE_CARE_SPECIALIST = "palliative-care-specialist"
    PSYCHIATRIC_NURSE = "psychiatric-nurse"
    # Laboratory and diagnostics
    CLINICAL_LABORATORY_SCIENTIST = "clinical-laboratory-scientist"
    PATHOLOGIST = "pathologist"
    CYTOTECHNOLOGIST = "cytotechnologist"
    HISTOTECHNICIAN = "histotechnician"
    MEDICAL_LABORATORY_TECHNICIAN = "medical-laboratory-technician"
    NUCLEAR_MEDICINE_TECHNOLOGIST = "nuclear-medicine-technologist"
    SONOGRAPHER = "sonographer"
    MRI_TECHNICIAN = "mri-technician"
    PHLEBOTOMIST = "phlebotomist"
    # Mental health
    CLINICAL_PSYCHOLOGIST = "clinical-psychologist"
    COUNSELING_PSYCHOLOGIST = "counseling-psychologist"
    MENTAL_HEALTH_COUNSELOR = "mental-health-counselor"
    CHILD_ADOLESCENT_THERAPIST = "child-adolescent-therapist"
    MARRIAGE_FAMILY_THERAPIST = "marriage-family-therapist"
    BEHAVIORAL_ANALYST = "behavioral-analyst"
    ADDICTION_COUNSELOR = "addiction-counselor"
    # Community clinical
    SCHOOL_NURSE = "school-nurse"
    PHARMACIST = "pharmacist"
    DENTIST = "dentist"
    CHIROPRACTOR = "chiropractor"
    OPTOMETRIST = "optometrist"
    # Pharmacy
    COMMUNITY_PHARMACIST = "community-pharmacist"
    CLINICAL_PHARMACIST = "clinical-pharmacist"
    PHARMACY_TECHNICIAN = "pharmacy-technician"
    AMBULATORY_CARE_PHARMACIST = "ambulatory-care-pharmacist"
    MANAGED_CARE_PHARMACIST = "managed-care-pharmacist"
    PHARMACY_MANAGER = "pharmacy-manager"
    HOME_HEALTH_PHARMACIST = "home-health-pharmacist"
    SPECIALTY_PHARMACIST = "specialty-pharmacist"
    PHARMACY_INTERN = "pharmacy-intern"
    PHARMACY_STUDENT = "pharmacy-student"
    # Wellness actors outside the registered professions
    PERSONAL_TRAINER = "personal-trainer"
    YOGA_INSTRUCTOR = "yoga-instructor"
    NUTRITIONIST = "nutritionist"
    # Hospital support staff
    HOSPITAL_ADMINISTRATOR = "hospital-administrator"
    MEDICAL_RECORDS_TECHNICIAN = "medical-records-technician"
    HEALTH_DATA_ANALYST = "health-data-analyst"
    IT_SUPPORT_STAFF = "it-support-staff"
    MEDICAL_TRANSCRIPTIONIST = "medical-transcriptionist"
    MEDICAL_BILLING_SPECIALIST = "medical-billing-specialist"
    HEALTH_INFORMATICS_SPECIALIST = "health-informatics-specialist"
    PATIENT_COORDINATOR = "patient-coordinator"
    PRIVACY_OFFICER = "privacy-officer"
    QUALITY_ASSURANCE_MANAGER = "quality-assurance-manager"
    # Patients and personal contacts
    PATIENT = "patient"
    SPOUSE = "spouse"
    DOMESTIC_PARTNER = "domestic-partner"
    PARENT = "parent"
    ADULT_CHILD = "adult-child"
    SIBLING = "sibling"
    LEGAL_GUARDIAN = "legal-guardian"
    POWER_OF_ATTORNEY = "power-of-attorney"
    CAREGIVER = "caregiver"
    FRIEND = "friend"
    OTHER = "other"


class RegistrationStatus(str, Enum):
    REGISTERED_PROVIDER = "registered-provider"
    UNREGISTERED = "unregistered"


class Relationship(str, Enum):
    NONE = "none"
    FRIEND = "friend"
    RELATIVE = "relative"
    PARTNER = "partner"
    COLLEAGUE = "colleague"
    NEIGHBOR = "neighbor"
    OTHER = "other"


class RecordScope(str, Enum):
    FULL_RECORD = "full-record"
    MEDICATION_LIST = "medication-list"
    IMAGING = "imaging"
    MENTAL_HEALTH = "mental-health"
    CONTACT_INFO = "contact-info"
    OTHER = "other"


class Sensitivity(str, Enum):
    NORMAL = "normal"
    RESTRICTED = "restricted"


class Purpose(str, Enum):
    HEALTHCARE_PROVISION = "healthcare-provision"
    RESEARCH = "research"
    BILLING = "billing"
    ADMINISTRATION = "administration"
    EDUCATION = "education"
    PERSONAL = "personal"
    OTHER = "other"


class Consent(str, Enum):
    GRANTED = "granted"
    ABSENT = "absent"
    UNKNOWN = "unknown"


class Supervision(str, Enum):
    SUPERVISED = "supervised"
    UNSUPERVISED = "unsupervised"
    NOT_APPLICABLE = "not-applicable"


@dataclass(frozen=True)
class SubjectDescriptor:
    actor_role: Role
    registration_status: RegistrationStatus
    relationship_to_patient: Relationship


@dataclass(frozen=True)
class ResourceDescriptor:
    patient_id: str
    record_scope: RecordScope
    sensitivity: Sensitivity


@dataclass(frozen=True)
class AccessRequest:
    """A single who/what/why access request with explicit unknowns."""

    request_id: str
    subject: SubjectDescriptor
    resource: ResourceDescriptor
    purpose: Purpose
    consent: Consent
    supervision: Supervision
    raw_narrative: str

    def to_dict(self) -> dict:
        return {
            "request_id": self.request_id,
            "subject": {
                "actor_role": self.subject.actor_role.value,
                "registration_status": self.subject.registration_status.value,
                "relationship_to_patient": self.subject.relationship_to_patient.value,
            },
            "resource": {
                "patient_id": self.resource.patient_id,
                "record_scope": self.resource.record_scope.value,
                "sensitivity": self.resource.sensitivity.value,
            },
            "purpose": self.purpose.value,
            "consent": self.consent.value,
            "supervision": self.supervision.value,
            "raw_narrative": self.raw_narrative,
        }


class VerdictKind(str, Enum):
    GRANT = "Grant"
    CONDITIONAL_GRANT = "ConditionalGrant"
    DENY = "Deny"


# Sentinel citation used when no provision in the ontology speaks to a request.
NO_AUTHORIZING_PROVISION = "no-authorizing-provision"


@dataclass(frozen=True)
class ProvisionCitation:
    """Reference to a provision and the condition it matched or violated."""

    provision_id: str
    condition: str = ""

    def to_dict(self) -> dict:
        return {"provision_id": self.provision_id, "condition": self.condition}


@dataclass(frozen=True)
class Verdict:
    """Outcome of an evaluation: grant kind, duties, and cited provisions."""

    kind: VerdictKind
    obligations: tuple[str, ...] = ()
    recommendations: tuple[str, ...] = ()
    rationale: tuple[ProvisionCitation, ...] = ()

    def __post_init__(self) -> None:
        # Grant-side verdicts never carry remediation advice; denials never
        # carry duties.
        if self.kind in (VerdictKind.GRANT, VerdictKind.CONDITIONAL_GRANT) and self.recommendations:
            raise ValueError(f"{self.kind.value} verdict cannot carry recommendations")
        if self.kind is VerdictKind.DENY and self.obligations:
            raise ValueError("Deny verdict cannot carry obligations")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "obligations": list(self.obligations),
            "recommendations": list(self.recommendations),
            "rationale": [c.to_dict() for c in self.rationale],
        }


class Stage(str, Enum):
    DRAFT = "Draft"
    RESOLVED = "Resolved"
    FINAL = "Final"


@dataclass(frozen=True)
class Decision:
    """A verdict at a pipeline stage, with its evaluation evidence attached."""

    stage: Stage
    verdict: Verdict
    conflicts: tuple["Conflict", ...]
    channels: tuple["ChannelVerdict", ...]
    backend_id: str
    request_id: str
    produced_at: str
    reviewer: Optional[str] = None

    def __post_init__(self) -> None:
        if self.stage is Stage.FINAL and not self.reviewer:
            raise ValueError("Final decisions must carry a reviewer id")

    def to_dict(self) -> dict:
        return {
            "stage": self.stage.value,
            "verdict": self.verdict.to_dict(),
            "conflicts": [c.to_dict() for c in self.conflicts],
            "channels": [c.to_dict() for c in self.channels],
            "backend_id": self.backend_id,
            "request_id": self.request_id,
            "reviewer": self.reviewer,
            "produced_at": self.produced_at,
        }


class RequestValidationError(ValueError):
    """Carries the full list of problems found in a candidate request."""

    def __init__(self, errors: list[tuple[str, str, str]]):
        self.errors = errors
        super().__init__("; ".join(f"{code}({field_}: {detail})" if detail else f"{code}({field_})"
                                   for code, field_, detail in errors))


_ENUM_FIELDS: list[tuple[str, type[Enum]]] = [
    ("subject.actor_role", Role),
    ("subject.registration_status", RegistrationStatus),
    ("subject.relationship_to_patient", Relationship),
    ("resource.record_scope", RecordScope),
    ("resource.sensitivity", Sensitivity),
    ("purpose", Purpose),
    ("consent", Consent),
    ("supervision", Supervision),
]


def _lookup(record: Mapping[str, Any], dotted: str) -> Any:
    value: Any = record
    for part in dotted.split("."):
        if not isinstance(value, Mapping) or part not in value:
            return None
        value = value[part]
    return value


def validate_request(candidate: Mapping[str, Any]) -> AccessRequest:
    """Validate a parsed request record into an AccessRequest.

    Unknown enum values are errors, never silently coerced; callers that
    want the catch-all must map to "other" explicitly before validating.

    Raises:
        RequestValidationError: with every MissingField / UnknownEnumValue /
            EmptyNarrative problem found.
    """
    errors: list[tuple[str, str, str]] = []

    for dotted in ("request_id", "resource.patient_id", "raw_narrative"):
        value = _lookup(candidate, dotted)
        if value is None:
            errors.append(("MissingField", dotted, ""))
        elif not isinstance(value, str) or (dotted != "raw_narrative" and not value.strip()):
            errors.append(("MissingField", dotted, "must be a non-empty string"))

    narrative = _lookup(candidate, "raw_narrative")
    if isinstance(narrative, str) and not narrative.strip():
        errors.append(("EmptyNarrative", "raw_narrative", ""))

    resolved: dict[str, Enum] = {}
    for dotted, enum_cls in _ENUM_FIELDS:
        raw = _lookup(candidate, dotted)
        if raw is None:
            errors.append(("MissingField", dotted, ""))
            continue
        try:
            resolved[dotted] = enum_cls(raw)
        except ValueError:
            errors.append(("UnknownEnumValue", dotted, str(raw)))

    if errors:
        raise RequestValidationError(errors)

    return AccessRequest(
        request_id=str(candidate["request_id"]),
        subject=SubjectDescriptor(
            actor_role=resolved["subject.actor_role"],  # type: ignore[arg-type]
            registration_status=resolved["subject.registration_status"],  # type: ignore[arg-type]
            relationship_to_patient=resolved["subject.relationship_to_patient"],  # type: ignore[arg-type]
        ),
        resource=ResourceDescriptor(
            patient_id=str(_lookup(candidate, "resource.patient_id")),
            record_scope=resolved["resource.record_scope"],  # type: ignore[arg-type]
            sensitivity=resolved["resource.sensitivity"],  # type: ignore[arg-type]
        ),
        purpose=resolved["purpose"],  # type: ignore[arg-type]
        consent=resolved["consent"],  # type: ignore[arg-type]
        supervision=resolved["supervision"],  # type: ignore[arg-type]
        raw_narrative=str(candidate["raw_narrative"]),
    )


# Identifier generation: a fixed per-process prefix plus a monotonic counter,
# so ids are unique within the run and sort in creation order.
_ID_LOCK = threading.Lock()
_ID_COUNTER = itertools.count(1)
_ID_PREFIX = time.strftime("%Y%m%dT%H%M%SZ", time.gmtime())


def new_request_id() -> str:
    with _ID_LOCK:
        seq = next(_ID_COUNTER)
    return f"req-{_ID_PREFIX}-{seq:010d}"


def iso_from_tick(tick: int) -> str:
    """Render a logical-clock tick as an ISO-8601 UTC instant."""
    base = time.gmtime(tick)
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", base)


class LogicalClock:
    """Deterministic clock: counts seconds from the epoch.

    Offline commands use this so identical inputs produce identical output
    bytes; the live service uses SystemClock instead.
    """

    def __init__(self, start: int = 0):
        self._tick = start
        self._lock = threading.Lock()

    def __call__(self) -> str:
        with self._lock:
            self._tick += 1
            return iso_from_tick(self._tick)


class SystemClock:
    """Wall-clock ISO-8601 UTC timestamps."""

    def __call__(self) -> str:
        return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
