#!/usr/bin/env python3
"""Walk three showcase requests through the full decision pipeline.

Shows the break-glass emergency grant, a research-purpose denial with
remediation advice, and an unregistered-actor denial, then runs the bundled
corpus evaluation and prints the headline metrics.

Usage: python scripts/run_demo.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from ontoguard.backends import DeterministicBackend
from ontoguard.harness import load_corpus, run_evaluation
from ontoguard.model import LogicalClock, validate_request
from ontoguard.ontology import load_policy_dir
from ontoguard.oversight import DecisionWorkflow, Journal


def main() -> None:
    ontology = load_policy_dir(REPO / "policies")
    backend = DeterministicBackend()
    workflow = DecisionWorkflow(ontology, backend, Journal(None), clock=LogicalClock())

    for name in ("er_nurse_request.json", "john_doe_request.json", "personal_trainer_request.json"):
        record = json.loads((REPO / "tests" / "fixtures" / name).read_text())
        request = validate_request(record)
        _, resolved, ticket = workflow.process(request)
        final = workflow.reviews.sign_off(ticket.ticket_id, "demo-reviewer", "approve")
        print(f"== {name}")
        print(f"   verdict: {final.verdict.kind.value}")
        if final.verdict.obligations:
            print(f"   obligations: {list(final.verdict.obligations)}")
        if final.verdict.recommendations:
            print(f"   recommendations: {list(final.verdict.recommendations)}")
        print(f"   cited: {[c.provision_id for c in final.verdict.rationale][:4]} ...")
        print()

    corpus = load_corpus(REPO / "corpus")
    report = run_evaluation(ontology, corpus, backend)
    print("== bundled corpus evaluation (deterministic backend)")
    print(f"   scenarios: {len(report.results)}")
    print(f"   compliance rate: {report.compliance_rate}")
    print(f"   conflict resolution efficiency: {report.conflict_resolution_efficiency}")
    print(f"   categories: {len(report.per_category)}")


if __name__ == "__main__":
    main()
