"""Decision pipeline: drafting, conflict detection, resolution, recommendations."""

import random

import pytest

from ontoguard.context import Channel, ChannelVerdict, Stance
from ontoguard.model import (
    Consent,
    LogicalClock,
    Purpose,
    RecordScope,
    RegistrationStatus,
    Relationship,
    Role,
    Stage,
    Supervision,
    Verdict,
    VerdictKind,
    validate_request,
)
from ontoguard.ontology import (
    Condition,
    Effect,
    Matcher,
    Ontology,
    Priority,
    Provision,
    SourceAct,
)
from ontoguard.pipeline import (
    RETROSPECTIVE_REVIEW_OBLIGATION,
    Conflict,
    ConflictKind,
    InvalidStage,
    NoProvisionCorpus,
    NotADenial,
    decide,
    detect_conflicts,
    generate_recommendations,
    resolution_verdict,
    resolve,
)

from conftest import make_request_record


class TestDecide:
    def test_er_nurse_drafts_conditional_grant_without_conflicts(self, ontology, deterministic_backend, er_nurse_request):
        run = decide(ontology, er_nurse_request, None, deterministic_backend)
        assert run.decision.stage is Stage.DRAFT
        assert run.decision.verdict.kind is VerdictKind.CONDITIONAL_GRANT
        assert run.decision.conflicts == ()

    def test_research_request_drafts_denial_with_consent_and_ethics_remediation(self, ontology, deterministic_backend, research_request):
        run = decide(ontology, research_request, None, deterministic_backend)
        assert run.decision.verdict.kind is VerdictKind.DENY
        assert run.decision.verdict.recommendations == (
            "obtain patient's informed consent",
            "route via ethics/authority approval",
        )

    def test_empty_ontology_refused(self, deterministic_backend, er_nurse_request):
        empty = Ontology(provisions=(), act_versions={})
        with pytest.raises(NoProvisionCorpus):
            decide(empty, er_nurse_request, None, deterministic_backend)


def _cv(channel, stance, conditions=(), basis=("x",)):
    return ChannelVerdict(channel=channel, stance=stance, conditions=conditions, basis=basis)


def _channels(o, a, c, a_conditions=(), c_conditions=()):
    return (
        _cv(Channel.ONTOLOGY, o),
        _cv(Channel.ABAC, a, conditions=a_conditions),
        _cv(Channel.CAAC, c, conditions=c_conditions),
    )


class TestDetectConflicts:
    def test_ontology_forbid_against_abac_permit(self):
        channels = _channels(Stance.FORBID, Stance.PERMIT, Stance.ABSTAIN)
        conflicts = detect_conflicts(channels, Verdict(kind=VerdictKind.DENY))
        pairs = [c.between for c in conflicts]
        assert ("ABAC", "Ontology") in pairs

    def test_all_permit_with_agreeing_backend_is_conflict_free(self):
        channels = _channels(Stance.PERMIT, Stance.PERMIT, Stance.PERMIT)
        assert detect_conflicts(channels, Verdict(kind=VerdictKind.GRANT)) == []

    def test_emergency_permit_plus_conditional_abac_does_not_conflict(self):
        # Hand trace of the merge rule: no Forbid anywhere, so the stances
        # merge into a conditional grant instead of conflicting.
        channels = _channels(
            Stance.PERMIT_WITH_CONDITIONS,
            Stance.PERMIT_WITH_CONDITIONS,
            Stance.PERMIT,
            a_conditions=(Condition.CONSENT_REQUIRED,),
        )
        conflicts = detect_conflicts(channels, Verdict(kind=VerdictKind.CONDITIONAL_GRANT))
        assert conflicts == []
        merged = resolution_verdict(channels, [])
        assert merged.kind is VerdictKind.CONDITIONAL_GRANT
        assert "obtain patient's informed consent" in merged.obligations
        assert RETROSPECTIVE_REVIEW_OBLIGATION in merged.obligations

    def test_backend_disagreement_recorded(self):
        channels = _channels(Stance.FORBID, Stance.ABSTAIN, Stance.ABSTAIN)
        conflicts = detect_conflicts(channels, Verdict(kind=VerdictKind.GRANT))
        assert any(c.between == ("Backend", "RuleEngine") for c in conflicts)

    def test_abstain_never_conflicts(self):
        channels = _channels(Stance.ABSTAIN, Stance.FORBID, Stance.ABSTAIN)
        conflicts = detect_conflicts(channels, Verdict(kind=VerdictKind.DENY))
        assert all("Backend" in c.between for c in conflicts) or conflicts == []

    def test_conflict_endpoints_must_differ(self):
        with pytest.raises(ValueError):
            Conflict(between=("ABAC", "ABAC"), kind=ConflictKind.STANCE_DISAGREEMENT, detail="x")


class TestResolve:
    def test_mandatory_prohibition_outranks_all_permits(self, deterministic_backend):
        # One wide Mandatory Prohibit plus a fully-satisfied authorization:
        # the prohibition must win.
        provisions = (
            Provision(
                provision_id="t/prohibit-everything",
                source_act=SourceAct.PRIVACY_ACT_1988,
                effect=Effect.PROHIBIT,
                applies_to=Matcher(),
                conditions=(),
                priority=Priority.MANDATORY,
            ),
            Provision(
                provision_id="t/authorize-everything",
                source_act=SourceAct.PRIVACY_ACT_1988,
                effect=Effect.AUTHORIZE,
                applies_to=Matcher(),
                conditions=(),
                priority=Priority.DEFAULT,
            ),
        )
        ontology = Ontology(provisions=provisions, act_versions={})
        request = validate_request(make_request_record())
        run = decide(ontology, request, None, deterministic_backend)
        resolved = resolve(run)
        assert resolved.verdict.kind is VerdictKind.DENY

    def test_break_glass_resolves_to_conditional_grant_with_retrospective_review(self, ontology, deterministic_backend, er_nurse_request):
        run = decide(ontology, er_nurse_request, None, deterministic_backend)
        resolved = resolve(run)
        assert resolved.stage is Stage.RESOLVED
        assert resolved.verdict.kind is VerdictKind.CONDITIONAL_GRANT
        assert RETROSPECTIVE_REVIEW_OBLIGATION in resolved.verdict.obligations
        assert any(c.provision_id == "mhra-2012/emergency-access" for c in resolved.verdict.rationale)

    def test_all_permit_keeps_backend_grant(self, ontology, deterministic_backend):
        request = validate_request(make_request_record())
        run = decide(ontology, request, None, deterministic_backend)
        resolved = resolve(run)
        assert resolved.verdict.kind is VerdictKind.GRANT

    def test_resolving_twice_is_an_error_but_stance_is_stable(self, ontology, deterministic_backend, er_nurse_request):
        run = decide(ontology, er_nurse_request, None, deterministic_backend)
        resolved = resolve(run)
        with pytest.raises(InvalidStage):
            resolve(type(run)(
                decision=resolved,
                matches=run.matches,
                attributes=run.attributes,
                context=run.context,
                rule_verdict=run.rule_verdict,
            ))
        # The lattice itself is idempotent: same stances, same verdict.
        again = resolution_verdict(resolved.channels, run.matches)
        assert again.kind is resolved.verdict.kind
        assert again == resolution_verdict(resolved.channels, run.matches)

    def test_rationale_never_empty(self, ontology, deterministic_backend, trainer_request):
        run = decide(ontology, trainer_request, None, deterministic_backend)
        resolved = resolve(run)
        assert resolved.verdict.rationale


class TestGenerateRecommendations:
    def test_unmet_consent_and_research_purpose(self, ontology, deterministic_backend, research_request):
        run = decide(ontology, research_request, None, deterministic_backend)
        resolved = resolve(run)
        recommendations = generate_recommendations(resolved, run.matches)
        assert recommendations == [
            "obtain patient's informed consent",
            "route via ethics/authority approval",
        ]

    def test_prohibit_only_matches_name_registration_gap(self, ontology, deterministic_backend, trainer_request):
        run = decide(ontology, trainer_request, None, deterministic_backend)
        resolved = resolve(run)
        assert generate_recommendations(resolved, run.matches) == [
            "access not obtainable for unregistered actors",
        ]

    def test_called_on_grant_raises(self, ontology, deterministic_backend):
        request = validate_request(make_request_record())
        run = decide(ontology, request, None, deterministic_backend)
        resolved = resolve(run)
        with pytest.raises(NotADenial):
            generate_recommendations(resolved, run.matches)


# Randomized ontology/request generator shared with the acceptance suite.
def random_provision(rng, index, force_mandatory_prohibit=False):
    roles = None if rng.random() < 0.5 else frozenset(rng.sample(list(Role), rng.randint(1, 6)))
    purposes = None if rng.random() < 0.5 else frozenset(rng.sample(list(Purpose), rng.randint(1, 3)))
    scopes = None if rng.random() < 0.6 else frozenset(rng.sample(list(RecordScope), rng.randint(1, 3)))
    relationships = None if rng.random() < 0.6 else frozenset(rng.sample(list(Relationship), rng.randint(1, 3)))
    matcher = Matcher(roles=roles, purposes=purposes, scopes=scopes, relationships=relationships)
    if force_mandatory_prohibit:
        effect, priority, conditions = Effect.PROHIBIT, Priority.MANDATORY, ()
    else:
        effect = rng.choice(list(Effect))
        priority = rng.choice(list(Priority))
        conditions = ()
        if effect is not Effect.PROHIBIT:
            conditions = tuple(rng.sample(list(Condition), rng.randint(0, 3)))
    return Provision(
        provision_id=f"rand/p{index}",
        source_act=rng.choice(list(SourceAct)),
        effect=effect,
        applies_to=matcher,
        conditions=conditions,
        priority=priority,
    )


def random_request(rng):
    return validate_request(make_request_record(
        request_id=f"rand-{rng.randint(0, 10**9)}",
        subject={
            "actor_role": rng.choice(list(Role)).value,
            "registration_status": rng.choice(list(RegistrationStatus)).value,
            "relationship_to_patient": rng.choice(list(Relationship)).value,
        },
        resource={"record_scope": rng.choice(list(RecordScope)).value},
        purpose=rng.choice(list(Purpose)).value,
        consent=rng.choice(list(Consent)).value,
        supervision=rng.choice(list(Supervision)).value,
        raw_narrative=rng.choice([
            "routine request for the record",
            "emergency admission with a critical patient",
            "telehealth session preparation",
            "review on a personal laptop",
        ]),
    ))


class StubBackend:
    """Returns a fixed verdict regardless of input."""

    backend_id = "stub"
    supports_free_text = False

    def __init__(self, verdict):
        self._verdict = verdict

    def decide(self, request, matches, context):
        from ontoguard.backends import BackendVerdict
        return BackendVerdict(verdict=self._verdict)


def random_backend_verdict(rng):
    kind = rng.choice(list(VerdictKind))
    if kind is VerdictKind.DENY:
        return Verdict(kind=kind, recommendations=("seek approval",))
    return Verdict(kind=kind, obligations=("log the access",))


def run_primacy_trial(rng):
    """One randomized tuple; returns (prohibit_matched, resolved_kind)."""
    provisions = [random_provision(rng, i) for i in range(rng.randint(1, 5))]
    if rng.random() < 0.5:
        provisions.append(random_provision(rng, 99, force_mandatory_prohibit=True))
    ontology = Ontology(provisions=tuple(provisions), act_versions={})
    request = random_request(rng)
    backend = StubBackend(random_backend_verdict(rng))
    run = decide(ontology, request, None, backend)
    resolved = resolve(run)
    prohibit_matched = any(
        m.provision.effect is Effect.PROHIBIT and m.provision.priority is Priority.MANDATORY
        for m in run.matches
    )
    return prohibit_matched, resolved.verdict.kind


def test_ontology_primacy_randomized_sample():
    rng = random.Random(20240801)
    checked = 0
    for _ in range(800):
        prohibit_matched, kind = run_primacy_trial(rng)
        if prohibit_matched:
            checked += 1
            assert kind is VerdictKind.DENY
    assert checked > 100  # the generator must actually exercise the property


def test_condition_union_is_commutative():
    # Swapping the intrinsic channels' evaluation order cannot change the
    # resolved verdict; the lattice sees stances, not an ordering.
    a = _cv(Channel.ABAC, Stance.PERMIT_WITH_CONDITIONS, conditions=(Condition.CONSENT_REQUIRED,))
    c = _cv(Channel.CAAC, Stance.PERMIT)
    o = _cv(Channel.ONTOLOGY, Stance.PERMIT_WITH_CONDITIONS,
            conditions=(Condition.CONSENT_REQUIRED,))
    assert resolution_verdict((o, a, c), []) == resolution_verdict((o, c, a), [])


def test_decide_resolve_pure_function(ontology, deterministic_backend, er_nurse_request):
    def run_once():
        clock = LogicalClock()
        run = decide(ontology, er_nurse_request, None, deterministic_backend, clock=clock)
        return resolve(run, clock=clock)

    assert run_once() == run_once()
