"""Context capture and the two intrinsic channels."""

import dataclasses

import pytest

from ontoguard.context import (
    Channel,
    ChannelVerdict,
    ContextSnapshot,
    ContradictoryOverride,
    Device,
    Location,
    Situation,
    Stance,
    Urgency,
    capture_context,
    evaluate_abac,
    evaluate_caac,
    evaluate_ontology,
)
from ontoguard.model import validate_request
from ontoguard.ontology import (
    Condition,
    Effect,
    Matcher,
    Priority,
    Provision,
    ProvisionMatch,
    SourceAct,
    applicable_provisions,
)

from conftest import make_request_record


class TestCaptureContext:
    def test_emergency_narrative_maps_to_emergency_critical(self, er_nurse_request):
        _, snapshot = capture_context(er_nurse_request)
        assert snapshot.situation is Situation.EMERGENCY
        assert snapshot.urgency is Urgency.CRITICAL

    def test_telehealth_narrative_maps_to_remote_offsite(self):
        request = validate_request(make_request_record(
            raw_narrative="A practitioner prepares a telehealth consultation and reviews the record beforehand.",
        ))
        _, snapshot = capture_context(request)
        assert snapshot.situation is Situation.REMOTE_TELEHEALTH
        assert snapshot.location is Location.OFF_SITE

    def test_plain_narrative_defaults_with_notes(self):
        request = validate_request(make_request_record(raw_narrative="record requested"))
        attrs, snapshot = capture_context(request)
        assert snapshot.situation is Situation.ROUTINE
        assert snapshot.urgency is Urgency.NORMAL
        assert snapshot.location is Location.UNKNOWN
        assert snapshot.device is Device.UNKNOWN
        assert any("defaulted" in note for note in attrs.derivation_notes)

    def test_explicit_override_beats_narrative(self, er_nurse_request):
        _, snapshot = capture_context(er_nurse_request, overrides={"device": "hospital-approved"})
        assert snapshot.device is Device.HOSPITAL_APPROVED

    def test_unknown_override_key_is_contradictory(self, er_nurse_request):
        with pytest.raises(ContradictoryOverride):
            capture_context(er_nurse_request, overrides={"supervision": "supervised"})

    def test_emergency_with_low_urgency_override_is_contradictory(self, er_nurse_request):
        with pytest.raises(ContradictoryOverride):
            capture_context(er_nurse_request, overrides={"urgency": "low"})

    def test_bogus_override_value_is_contradictory(self, er_nurse_request):
        with pytest.raises(ContradictoryOverride):
            capture_context(er_nurse_request, overrides={"device": "smartwatch"})

    def test_capture_is_deterministic_and_idempotent(self, er_nurse_request):
        first = capture_context(er_nurse_request, overrides={"location": "on-premises"})
        second = capture_context(er_nurse_request, overrides={"location": "on-premises"})
        assert first == second

    def test_clearance_and_clinical_flags_derived(self, research_request):
        attrs, _ = capture_context(research_request)
        assert attrs.subject_attrs["clearance"] == "elevated"
        nfr_request = validate_request(make_request_record(
            raw_narrative="The chart carries a not for resuscitation flag; the doctor reviews it with consent.",
        ))
        nfr_attrs, _ = capture_context(nfr_request)
        assert nfr_attrs.resource_attrs["clinical_flags"] == ["NFR"]


def test_snapshot_invariant_emergency_needs_high_urgency():
    with pytest.raises(ValueError):
        ContextSnapshot(
            situation=Situation.EMERGENCY,
            urgency=Urgency.LOW,
            location=Location.UNKNOWN,
            device=Device.UNKNOWN,
            timestamp="",
        )


def test_abstain_must_explain_itself():
    with pytest.raises(ValueError):
        ChannelVerdict(channel=Channel.CAAC, stance=Stance.ABSTAIN, basis=())
    with pytest.raises(ValueError):
        ChannelVerdict(
            channel=Channel.CAAC,
            stance=Stance.ABSTAIN,
            conditions=(Condition.CONSENT_REQUIRED,),
            basis=("why",),
        )


def _evaluate(ontology, request, overrides=None):
    matches = applicable_provisions(ontology, request)
    attrs, snapshot = capture_context(request, overrides)
    return matches, attrs, snapshot


class TestAbacChannel:
    def test_consenting_gp_permits(self, ontology):
        # Hand trace: all attribute conditions of the provider-access rule
        # are satisfied, so the channel permits outright.
        request = validate_request(make_request_record())
        matches, attrs, _ = _evaluate(ontology, request)
        verdict = evaluate_abac(attrs, matches)
        assert verdict.stance is Stance.PERMIT

    def test_pharmacist_sibling_with_unknown_consent_permits_with_conditions(self, ontology):
        request = validate_request(make_request_record(
            subject={"actor_role": "pharmacist", "relationship_to_patient": "relative"},
            resource={"record_scope": "medication-list"},
            consent="unknown",
            raw_narrative="A pharmacist who is the patient's brother checks the medication history before dispensing.",
        ))
        matches, attrs, _ = _evaluate(ontology, request)
        verdict = evaluate_abac(attrs, matches)
        assert verdict.stance is Stance.PERMIT_WITH_CONDITIONS
        assert verdict.conditions == (Condition.CONSENT_REQUIRED,)

    def test_unregistered_trainer_forbidden(self, ontology, trainer_request):
        matches, attrs, _ = _evaluate(ontology, trainer_request)
        assert evaluate_abac(attrs, matches).stance is Stance.FORBID

    def test_no_matches_abstains(self, ontology, trainer_request):
        attrs, _ = capture_context(trainer_request)
        verdict = evaluate_abac(attrs, [])
        assert verdict.stance is Stance.ABSTAIN
        assert verdict.basis

    def test_ignores_context_snapshot_entirely(self, ontology, er_nurse_request):
        # Perturbing the environment must not move the attribute channel.
        matches, attrs, _ = _evaluate(ontology, er_nurse_request)
        baseline = evaluate_abac(attrs, matches)
        for situation in Situation:
            urgency = Urgency.HIGH if situation is Situation.EMERGENCY else Urgency.LOW
            perturbed = dataclasses.replace(
                attrs,
                environment_attrs=ContextSnapshot(situation, urgency, Location.OFF_SITE, Device.BYOD, ""),
            )
            assert evaluate_abac(perturbed, matches) == baseline


def _device_bound_match():
    provision = Provision(
        provision_id="x/approved-device-only",
        source_act=SourceAct.HEALTH_RECORDS_ACT_2001,
        effect=Effect.AUTHORIZE_WITH_CONDITIONS,
        applies_to=Matcher(),
        conditions=(Condition.APPROVED_DEVICE_REQUIRED,),
        priority=Priority.DEFAULT,
    )
    from ontoguard.ontology import ConditionState
    return ProvisionMatch(
        provision=provision,
        condition_states=((Condition.APPROVED_DEVICE_REQUIRED, ConditionState.INDETERMINATE),),
    )


class TestCaacChannel:
    def test_emergency_with_overridable_provision_permits(self, ontology, er_nurse_request):
        matches, _, snapshot = _evaluate(ontology, er_nurse_request)
        verdict = evaluate_caac(snapshot, matches)
        assert verdict.stance is Stance.PERMIT
        assert "mhra-2012/emergency-access" in verdict.basis

    def test_routine_situation_abstains(self, ontology):
        request = validate_request(make_request_record())
        matches, _, snapshot = _evaluate(ontology, request)
        assert evaluate_caac(snapshot, matches).stance is Stance.ABSTAIN

    def test_byod_against_device_bound_provision_forbids(self):
        # Hand-constructed pair: the provision wants an approved device and
        # the live context says the requester is on their own hardware.
        snapshot = ContextSnapshot(Situation.ROUTINE, Urgency.NORMAL, Location.OFF_SITE, Device.BYOD, "")
        verdict = evaluate_caac(snapshot, [_device_bound_match()])
        assert verdict.stance is Stance.FORBID
        assert "x/approved-device-only" in verdict.basis

    def test_unknown_device_does_not_forbid(self):
        snapshot = ContextSnapshot(Situation.ROUTINE, Urgency.NORMAL, Location.UNKNOWN, Device.UNKNOWN, "")
        assert evaluate_caac(snapshot, [_device_bound_match()]).stance is Stance.ABSTAIN

    def test_ignores_subject_attributes_entirely(self, ontology, er_nurse_request):
        # The context channel cannot see who is asking, only the situation.
        matches, attrs, snapshot = _evaluate(ontology, er_nurse_request)
        baseline = evaluate_caac(snapshot, matches)
        for clearance in ("none", "standard", "elevated"):
            perturbed_attrs = dataclasses.replace(
                attrs, subject_attrs={**attrs.subject_attrs, "clearance": clearance},
            )
            del perturbed_attrs  # attrs are not even an input; stance is fixed
            assert evaluate_caac(snapshot, matches) == baseline


def test_ontology_channel_forbids_when_any_prohibition_matches(ontology, trainer_request):
    matches = applicable_provisions(ontology, trainer_request)
    verdict = evaluate_ontology(matches)
    assert verdict.stance is Stance.FORBID
    assert "mhra-2012/prohibit-unregistered-access" in verdict.basis


def test_every_resolved_decision_records_all_three_channels(ontology, deterministic_backend, er_nurse_request):
    from ontoguard.pipeline import decide, resolve

    run = decide(ontology, er_nurse_request, None, deterministic_backend)
    resolved = resolve(run)
    channels = {c.channel for c in resolved.channels}
    assert channels == {Channel.ONTOLOGY, Channel.ABAC, Channel.CAAC}
    ontology_basis = next(c for c in resolved.channels if c.channel is Channel.ONTOLOGY).basis
    cited = {c.provision_id for c in resolved.verdict.rationale}
    assert set(ontology_basis) <= cited
