"""Decision orchestration: draft, conflict detection, precedence resolution."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Mapping, Optional, Protocol, Sequence

from .context import (
    AttributeSet,
    Channel,
    ChannelVerdict,
    ContextSnapshot,
    Stance,
    capture_context,
    evaluate_abac,
    evaluate_caac,
    evaluate_ontology,
)
from .model import (
    NO_AUTHORIZING_PROVISION,
    AccessRequest,
    Decision,
    LogicalClock,
    ProvisionCitation,
    Stage,
    Verdict,
    VerdictKind,
)
from .ontology import (
    Condition,
    Effect,
    Ontology,
    ProvisionMatch,
    applicable_provisions,
)


class ConflictKind(str, Enum):
    STANCE_DISAGREEMENT = "StanceDisagreement"
    CONDITION_CONTRADICTION = "ConditionContradiction"


@dataclass(frozen=True)
class Conflict:
    """Two evaluation sources in tension; `between` is an unordered pair."""

    between: tuple[str, str]
    kind: ConflictKind
    detail: str

    def __post_init__(self) -> None:
        if self.between[0] == self.between[1]:
            raise ValueError("conflict endpoints must be distinct")
        object.__setattr__(self, "between", tuple(sorted(self.between)))

    def to_dict(self) -> dict:
        return {"between": list(self.between), "kind": self.kind.value, "detail": self.detail}


class NoProvisionCorpus(Exception):
    """The ontology holds no provisions; decisions cannot be grounded."""


class BackendUnavailable(Exception):
    """A decision backend failed without producing a verdict."""


class InvalidStage(Exception):
    """Decision is not at the stage the operation requires."""


class NotADenial(Exception):
    """Recommendations are generated for denials only."""


class DecisionBackendProtocol(Protocol):
    backend_id: str

    def decide(self, request: AccessRequest, matches: Sequence[ProvisionMatch],
               context: ContextSnapshot) -> "BackendVerdictLike": ...


class BackendVerdictLike(Protocol):
    verdict: Verdict


# Fixed remediation templates keyed by the condition they close; order is the
# order recommendations appear in. Registration gaps cannot be remediated.
CONDITION_ORDER: tuple[Condition, ...] = (
    Condition.CONSENT_REQUIRED,
    Condition.SUPERVISION_REQUIRED,
    Condition.PURPOSE_MUST_BE_HEALTHCARE,
    Condition.REGISTERED_PROVIDER_REQUIRED,
)

REMEDIATION_TEMPLATES: dict[Condition, str] = {
    Condition.CONSENT_REQUIRED: "obtain patient's informed consent",
    Condition.SUPERVISION_REQUIRED: "perform under supervision of a registered provider",
    Condition.PURPOSE_MUST_BE_HEALTHCARE: "route via ethics/authority approval",
    Condition.REGISTERED_PROVIDER_REQUIRED: "access not obtainable for unregistered actors",
}

RETROSPECTIVE_REVIEW_OBLIGATION = "complete retrospective review of this emergency access"


def _rationale(matches: Sequence[ProvisionMatch]) -> tuple[ProvisionCitation, ...]:
    """One citation per provision consulted, with its condition states."""
    if not matches:
        return (ProvisionCitation(NO_AUTHORIZING_PROVISION, "no provision matched the request"),)
    citations: list[ProvisionCitation] = []
    for m in matches:
        if m.provision.effect is Effect.PROHIBIT:
            citations.append(ProvisionCitation(m.provision.provision_id, "prohibits"))
        elif not m.condition_states:
            citations.append(ProvisionCitation(m.provision.provision_id, "authorizes unconditionally"))
        else:
            note = "; ".join(f"{c.value}={s.value}" for c, s in m.condition_states)
            citations.append(ProvisionCitation(m.provision.provision_id, note))
    return tuple(citations)


def _deny_recommendations(matches: Sequence[ProvisionMatch]) -> tuple[str, ...]:
    authorizing = [m for m in matches if m.provision.effect is not Effect.PROHIBIT]
    if matches and not authorizing:
        # Only prohibitions spoke: nothing the actor can change helps.
        return (REMEDIATION_TEMPLATES[Condition.REGISTERED_PROVIDER_REQUIRED],)
    unmet: set[Condition] = set()
    for m in authorizing:
        unmet.update(m.unmet_attribute_conditions())
    return tuple(REMEDIATION_TEMPLATES[c] for c in CONDITION_ORDER if c in unmet)


def _stance_of(channels: Sequence[ChannelVerdict], channel: Channel) -> ChannelVerdict:
    for cv in channels:
        if cv.channel is channel:
            return cv
    raise ValueError(f"missing channel verdict for {channel.value}")


def resolution_kind(channels: Sequence[ChannelVerdict]) -> VerdictKind:
    """Verdict kind the precedence lattice assigns to the channel stances."""
    o = _stance_of(channels, Channel.ONTOLOGY)
    a = _stance_of(channels, Channel.ABAC)
    c = _stance_of(channels, Channel.CAAC)

    if o.stance is Stance.FORBID:
        return VerdictKind.DENY
    if o.stance is Stance.ABSTAIN:
        return VerdictKind.DENY  # no authorizing provision
    if c.stance is Stance.FORBID or a.stance is Stance.FORBID:
        return VerdictKind.DENY  # intrinsic veto is fail-safe
    if a.stance is Stance.PERMIT:
        return VerdictKind.GRANT
    if a.stance is Stance.PERMIT_WITH_CONDITIONS:
        return VerdictKind.CONDITIONAL_GRANT
    # ABAC abstained: an unconditional authorization grants, a live emergency
    # override conditionally grants, anything else fails safe.
    if o.stance is Stance.PERMIT:
        return VerdictKind.GRANT
    if c.stance is Stance.PERMIT:
        return VerdictKind.CONDITIONAL_GRANT
    return VerdictKind.DENY


def resolution_verdict(channels: Sequence[ChannelVerdict],
                       matches: Sequence[ProvisionMatch]) -> Verdict:
    """Full rule-engine verdict for the given stances and matches.

    Pure function; the deterministic backend and the pipeline share it.
    """
    kind = resolution_kind(channels)
    rationale = _rationale(matches)

    if kind is VerdictKind.DENY:
        return Verdict(kind=kind, recommendations=_deny_recommendations(matches), rationale=rationale)

    if kind is VerdictKind.GRANT:
        return Verdict(kind=kind, rationale=rationale)

    # Conditional grant: union the intrinsic channels' outstanding conditions
    # (fixed order), and add mandatory retrospective review when the grant
    # rides an emergency override.
    a = _stance_of(channels, Channel.ABAC)
    c = _stance_of(channels, Channel.CAAC)
    outstanding = set(a.conditions) | set(c.conditions)
    obligations = [REMEDIATION_TEMPLATES[cond] for cond in CONDITION_ORDER if cond in outstanding]
    if c.stance is Stance.PERMIT:
        obligations.append(RETROSPECTIVE_REVIEW_OBLIGATION)
    return Verdict(kind=kind, obligations=tuple(obligations), rationale=rationale)


def detect_conflicts(channels: Sequence[ChannelVerdict], backend_verdict: Verdict) -> list[Conflict]:
    """Stance disagreements between channels, plus backend vs rule engine.

    Abstain never conflicts with anything.
    """
    conflicts: list[Conflict] = []
    ordered = [
        _stance_of(channels, Channel.ONTOLOGY),
        _stance_of(channels, Channel.ABAC),
        _stance_of(channels, Channel.CAAC),
    ]
    for i, left in enumerate(ordered):
        for right in ordered[i + 1:]:
            if (left.permissive() and right.stance is Stance.FORBID) or (
                right.permissive() and left.stance is Stance.FORBID
            ):
                conflicts.append(Conflict(
                    between=(left.channel.value, right.channel.value),
                    kind=ConflictKind.STANCE_DISAGREEMENT,
                    detail=f"{left.channel.value}={left.stance.value} vs {right.channel.value}={right.stance.value}",
                ))

    rule_kind = resolution_kind(channels)
    if backend_verdict.kind is not rule_kind:
        conflicts.append(Conflict(
            between=("Backend", "RuleEngine"),
            kind=ConflictKind.STANCE_DISAGREEMENT,
            detail=f"backend={backend_verdict.kind.value} vs rule-engine={rule_kind.value}",
        ))
    return conflicts


@dataclass(frozen=True)
class PipelineRun:
    """A draft decision bundled with the evidence that produced it."""

    decision: Decision
    matches: tuple[ProvisionMatch, ...]
    attributes: AttributeSet
    context: ContextSnapshot
    rule_verdict: Verdict
    backend_fault: Optional[str] = None
    backend_raw_response: Optional[str] = None


def decide(
    ontology: Ontology,
    request: AccessRequest,
    overrides: Optional[Mapping[str, str]] = None,
    backend: Optional[DecisionBackendProtocol] = None,
    clock: Optional[Callable[[], str]] = None,
) -> PipelineRun:
    """Run matching, capture, channel evaluation, and the backend draft.

    The draft decision's verdict is the backend's; channel stances and
    detected conflicts ride along for resolution and review.
    """
    if backend is None:
        raise BackendUnavailable("no decision backend configured")
    if not ontology.provisions:
        raise NoProvisionCorpus("refusing to decide against an empty ontology")
    clock = clock or LogicalClock()

    matches = applicable_provisions(ontology, request)
    attributes, snapshot = capture_context(request, overrides, timestamp=clock())
    channels = (
        evaluate_ontology(matches),
        evaluate_abac(attributes, matches),
        evaluate_caac(snapshot, matches),
    )
    backend_verdict = backend.decide(request, matches, snapshot)
    conflicts = detect_conflicts(channels, backend_verdict.verdict)

    decision = Decision(
        stage=Stage.DRAFT,
        verdict=backend_verdict.verdict,
        conflicts=tuple(conflicts),
        channels=channels,
        backend_id=backend.backend_id,
        request_id=request.request_id,
        produced_at=clock(),
    )
    return PipelineRun(
        decision=decision,
        matches=tuple(matches),
        attributes=attributes,
        context=snapshot,
        rule_verdict=resolution_verdict(channels, matches),
        backend_fault=getattr(backend_verdict, "fault", None),
        backend_raw_response=getattr(backend_verdict, "raw_response", None),
    )


def _merge_texts(primary: Sequence[str], extra: Sequence[str]) -> tuple[str, ...]:
    merged = list(primary)
    merged.extend(t for t in extra if t not in merged)
    return tuple(merged)


def resolve(run: PipelineRun, clock: Optional[Callable[[], str]] = None) -> Decision:
    """Apply the precedence lattice to the draft.

    The rule engine is the arbiter: the backend verdict survives only when
    its kind agrees with the lattice, and then only as extra obligation or
    recommendation text on top of the rule verdict. Disagreement was already
    recorded as a (Backend, RuleEngine) conflict at draft time.
    """
    draft = run.decision
    if draft.stage is not Stage.DRAFT:
        raise InvalidStage(f"expected Draft, got {draft.stage.value}")
    clock = clock or LogicalClock()

    rule = run.rule_verdict
    if draft.verdict.kind is rule.kind:
        verdict = Verdict(
            kind=rule.kind,
            obligations=_merge_texts(rule.obligations, draft.verdict.obligations),
            recommendations=_merge_texts(rule.recommendations, draft.verdict.recommendations),
            rationale=rule.rationale,
        )
    else:
        verdict = rule

    return replace(draft, stage=Stage.RESOLVED, verdict=verdict, produced_at=clock())


def generate_recommendations(resolved: Decision, matches: Sequence[ProvisionMatch]) -> list[str]:
    """Remediation strings for a denial, from the fixed template table."""
    if resolved.verdict.kind is not VerdictKind.DENY:
        raise NotADenial(f"verdict is {resolved.verdict.kind.value}")
    return list(_deny_recommendations(matches))
