import json
from pathlib import Path

import pytest

from ontoguard.backends import DeterministicBackend
from ontoguard.model import validate_request
from ontoguard.ontology import load_policy_dir

REPO_ROOT = Path(__file__).resolve().parent.parent
POLICIES_DIR = REPO_ROOT / "policies"
CORPUS_DIR = REPO_ROOT / "corpus"
FIXTURES_DIR = Path(__file__).resolve().parent / "fixtures"
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"


@pytest.fixture(scope="session")
def ontology():
    return load_policy_dir(POLICIES_DIR)


@pytest.fixture(scope="session")
def deterministic_backend():
    return DeterministicBackend()


def load_fixture_request(name: str):
    record = json.loads((FIXTURES_DIR / name).read_text(encoding="utf-8"))
    return validate_request(record)


@pytest.fixture
def er_nurse_request():
    """Emergency-room nurse scenario: critical patient, consent unobtainable."""
    return load_fixture_request("er_nurse_request.json")


@pytest.fixture
def research_request():
    """Clinical-study request for John Doe's record by a cleared doctor."""
    return load_fixture_request("john_doe_request.json")


@pytest.fixture
def trainer_request():
    """Unregistered personal trainer asking for a friend's record."""
    return load_fixture_request("personal_trainer_request.json")


def make_request_record(**overrides):
    """Baseline valid request record; override any dotted section wholesale."""
    record = {
        "request_id": "req-test-0001",
        "subject": {
            "actor_role": "general-practitioner",
            "registration_status": "registered-provider",
            "relationship_to_patient": "none",
        },
        "resource": {
            "patient_id": "P-0001",
            "record_scope": "full-record",
            "sensitivity": "normal",
        },
        "purpose": "healthcare-provision",
        "consent": "granted",
        "supervision": "not-applicable",
        "raw_narrative": "A general practitioner reviews a patient's history during a routine checkup, with the patient's consent.",
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(record.get(key), dict):
            record[key].update(value)
        else:
            record[key] = value
    return record
