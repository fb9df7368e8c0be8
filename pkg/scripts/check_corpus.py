#!/usr/bin/env python3
"""Re-derive every corpus scenario through the engine and diff the answer keys.

Stricter than the harness compliance check: verifies the verdict kind, that
the expected provisions are actually cited, that the detected conflict flag
matches, and that the exact set of recommendation keys surfacing in the
decision text equals the authored key set. Run after editing policies/ or
corpus/.

Usage: python scripts/check_corpus.py [--policies DIR] [--corpus DIR]
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from ontoguard.backends import DeterministicBackend
from ontoguard.harness import RECOMMENDATION_KEY_NEEDLES, load_corpus
from ontoguard.ontology import load_policy_dir
from ontoguard.pipeline import decide, resolve


def keys_in_text(blob: str) -> set[str]:
    blob = blob.lower()
    return {
        key for key, needles in RECOMMENDATION_KEY_NEEDLES.items()
        if any(needle in blob for needle in needles)
    }


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--policies", default="policies")
    parser.add_argument("--corpus", default="corpus")
    args = parser.parse_args()

    ontology = load_policy_dir(args.policies)
    corpus = load_corpus(args.corpus)
    backend = DeterministicBackend()

    failures = 0
    for scenario in corpus:
        run = decide(ontology, scenario.request, scenario.context_overrides, backend)
        resolved = resolve(run)
        verdict = resolved.verdict
        problems = []

        if verdict.kind is not scenario.expected.verdict:
            problems.append(f"verdict {verdict.kind.value} != expected {scenario.expected.verdict.value}")

        cited = {c.provision_id for c in verdict.rationale}
        missing = set(scenario.expected.provisions) - cited
        if missing:
            problems.append(f"expected provisions not cited: {sorted(missing)}")

        blob = " ".join(list(verdict.obligations) + list(verdict.recommendations))
        actual_keys = keys_in_text(blob)
        if actual_keys != set(scenario.expected.recommendation_keys):
            problems.append(
                f"keys in decision text {sorted(actual_keys)} != authored {sorted(scenario.expected.recommendation_keys)}"
            )

        has_conflicts = bool(resolved.conflicts)
        if has_conflicts != scenario.is_conflict_case:
            problems.append(f"conflicts detected={has_conflicts} but flagged={scenario.is_conflict_case}")

        if problems:
            failures += 1
            print(f"FAIL {scenario.scenario_id}:")
            for p in problems:
                print(f"  - {p}")

    print(f"{len(corpus)} scenarios checked, {failures} mismatched")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
