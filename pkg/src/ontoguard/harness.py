"""Scenario corpus, rubric scoring, metrics, and the evaluation runner."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

from .backends import UnparseableResponse, parse_response
from .model import AccessRequest, Decision, LogicalClock, RequestValidationError, VerdictKind, validate_request
from .ontology import Ontology
from .oversight import DecisionWorkflow, Journal
from .pipeline import DecisionBackendProtocol

CATEGORIES: tuple[str, ...] = (
    "Allied Health",
    "Consultants",
    "Direct Care",
    "Emergency Services",
    "Home Care",
    "Laboratory Services",
    "Mental Health",
    "Misleading Situations",
    "Hospital Support Staff",
    "Patients and Contact",
    "Pharmacy",
    "Telemedicine",
)

MIN_SCENARIOS_PER_CATEGORY = 10

# Recommendation keys and the needles that count as covering them, checked
# against obligation/recommendation text (or raw backend text).
RECOMMENDATION_KEY_NEEDLES: dict[str, tuple[str, ...]] = {
    "consent": ("consent",),
    "supervision": ("supervision",),
    "purpose": ("ethics", "authority approval"),
    "registration": ("unregistered",),
    "retrospective-review": ("retrospective",),
}


class CorpusError(Exception):
    """Problem loading or validating a scenario corpus."""

    def __init__(self, code: str, detail: str):
        self.code = code
        self.detail = detail
        super().__init__(f"{code}: {detail}")


class MissingKey(Exception):
    pass


class EmptySample(Exception):
    pass


class NoConflictCases(Exception):
    pass


class ZeroBaseline(Exception):
    pass


class UnknownScenario(KeyError):
    pass


class EmptyCategory(Exception):
    pass


@dataclass(frozen=True)
class ExpectedOutcome:
    verdict: VerdictKind
    provisions: tuple[str, ...]
    recommendation_keys: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "provisions": list(self.provisions),
            "recommendation_keys": list(self.recommendation_keys),
        }


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    category: str
    request: AccessRequest
    expected: ExpectedOutcome
    is_conflict_case: bool
    narrative: str
    context_overrides: Optional[dict[str, str]] = None

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "category": self.category,
            "narrative": self.narrative,
            "is_conflict_case": self.is_conflict_case,
            "context_overrides": self.context_overrides,
            "request": self.request.to_dict(),
            "expected": self.expected.to_dict(),
        }


@dataclass(frozen=True)
class ScenarioSet:
    scenarios: tuple[Scenario, ...]

    def __iter__(self):
        return iter(self.scenarios)

    def __len__(self) -> int:
        return len(self.scenarios)

    def category_of(self, scenario_id: str) -> str:
        for s in self.scenarios:
            if s.scenario_id == scenario_id:
                return s.category
        raise UnknownScenario(scenario_id)

    def categories(self) -> list[str]:
        seen: list[str] = []
        for s in self.scenarios:
            if s.category not in seen:
                seen.append(s.category)
        return seen

    def subset(self, categories: Sequence[str]) -> "ScenarioSet":
        wanted = set(categories)
        return ScenarioSet(tuple(s for s in self.scenarios if s.category in wanted))

    def corpus_hash(self) -> str:
        canonical = json.dumps(
            [s.to_dict() for s in sorted(self.scenarios, key=lambda s: s.scenario_id)],
            sort_keys=True,
            separators=(",", ":"),
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _parse_scenario(raw: dict, path: str) -> Scenario:
    for key in ("scenario_id", "category", "narrative", "request", "expected"):
        if key not in raw:
            raise CorpusError("ParseError", f"{path}: scenario missing field {key!r}")
    if raw["category"] not in CATEGORIES:
        raise CorpusError("ParseError", f"{path}: unknown category {raw['category']!r}")
    try:
        request = validate_request(raw["request"])
    except RequestValidationError as exc:
        raise CorpusError("ParseError", f"{path}: {raw['scenario_id']}: {exc}") from None
    expected_raw = raw["expected"]
    try:
        expected = ExpectedOutcome(
            verdict=VerdictKind(expected_raw["verdict"]),
            provisions=tuple(expected_raw.get("provisions", [])),
            recommendation_keys=tuple(expected_raw.get("recommendation_keys", [])),
        )
    except (KeyError, ValueError) as exc:
        raise CorpusError("ParseError", f"{path}: {raw['scenario_id']}: bad expected outcome: {exc}") from None
    unknown_keys = set(expected.recommendation_keys) - set(RECOMMENDATION_KEY_NEEDLES)
    if unknown_keys:
        raise CorpusError(
            "ParseError",
            f"{path}: {raw['scenario_id']}: unknown recommendation keys {sorted(unknown_keys)}",
        )
    overrides = raw.get("context_overrides")
    return Scenario(
        scenario_id=raw["scenario_id"],
        category=raw["category"],
        request=request,
        expected=expected,
        is_conflict_case=bool(raw.get("is_conflict_case", False)),
        narrative=raw["narrative"],
        context_overrides=dict(overrides) if overrides else None,
    )


def load_corpus(path: str | Path, require_full: bool = True) -> ScenarioSet:
    """Load a corpus directory (one JSON file per category).

    With require_full (the default), the category/count invariant is
    enforced: all twelve categories present, each with at least ten
    scenarios.
    """
    directory = Path(path)
    if not directory.is_dir():
        raise CorpusError("ParseError", f"{directory}: not a directory")
    scenarios: list[Scenario] = []
    seen_ids: set[str] = set()
    for file_path in sorted(directory.glob("*.json")):
        try:
            doc = json.loads(file_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise CorpusError("ParseError", f"{file_path}: {exc}") from None
        if not isinstance(doc, dict) or "category" not in doc or "scenarios" not in doc:
            raise CorpusError("ParseError", f"{file_path}: expected category header and scenarios list")
        if doc["category"] not in CATEGORIES:
            raise CorpusError("ParseError", f"{file_path}: unknown category {doc['category']!r}")
        for raw in doc["scenarios"]:
            scenario = _parse_scenario(raw, str(file_path))
            if scenario.category != doc["category"]:
                raise CorpusError(
                    "ParseError",
                    f"{file_path}: {scenario.scenario_id} category disagrees with file header",
                )
            if scenario.scenario_id in seen_ids:
                raise CorpusError("ParseError", f"{file_path}: duplicate scenario id {scenario.scenario_id}")
            seen_ids.add(scenario.scenario_id)
            scenarios.append(scenario)

    corpus = ScenarioSet(tuple(sorted(scenarios, key=lambda s: s.scenario_id)))
    if require_full:
        counts = {c: 0 for c in CATEGORIES}
        for s in corpus:
            counts[s.category] += 1
        missing = [c for c, n in counts.items() if n == 0]
        thin = [f"{c} ({n})" for c, n in counts.items() if 0 < n < MIN_SCENARIOS_PER_CATEGORY]
        if missing or thin:
            raise CorpusError(
                "CategoryCountViolation",
                f"missing categories: {missing}; under-populated: {thin}",
            )
    return corpus


_RUBRIC_VALUES = (0.0, 0.25, 0.5)


@dataclass(frozen=True)
class RubricScore:
    """Two-criterion score; recommendation credit depends on comprehension."""

    context_comprehension: float
    recommendation_effectiveness: float

    def __post_init__(self) -> None:
        if self.context_comprehension not in _RUBRIC_VALUES:
            raise ValueError(f"context_comprehension {self.context_comprehension} not in {_RUBRIC_VALUES}")
        if self.recommendation_effectiveness not in _RUBRIC_VALUES:
            raise ValueError(f"recommendation_effectiveness {self.recommendation_effectiveness} not in {_RUBRIC_VALUES}")
        if self.context_comprehension == 0.0 and self.recommendation_effectiveness != 0.0:
            raise ValueError("zero comprehension forces zero recommendation effectiveness")

    @property
    def total(self) -> float:
        return self.context_comprehension + self.recommendation_effectiveness

    @classmethod
    def enforced(cls, context_comprehension: float, recommendation_effectiveness: float) -> "RubricScore":
        """Apply the dependency rule to a raw (cc, re) proposal."""
        if context_comprehension == 0.0:
            recommendation_effectiveness = 0.0
        return cls(context_comprehension, recommendation_effectiveness)

    def to_dict(self) -> dict:
        return {
            "context_comprehension": self.context_comprehension,
            "recommendation_effectiveness": self.recommendation_effectiveness,
            "total": self.total,
        }


def _keys_found(expected: ExpectedOutcome, blob: str) -> set[str]:
    blob = blob.lower()
    return {
        key for key in expected.recommendation_keys
        if any(needle in blob for needle in RECOMMENDATION_KEY_NEEDLES[key])
    }


def score_response(response: Union[Decision, str], expected: Optional[ExpectedOutcome]) -> RubricScore:
    """Score a decision (or raw backend text) against the answer key.

    Comprehension: 0.5 when the verdict kind matches and the rationale cites
    an expected provision, 0.25 when exactly one holds, else 0. Effectiveness
    follows recommendation-key coverage and is zeroed by zero comprehension.
    """
    if expected is None:
        raise MissingKey("no expected outcome for response")

    if isinstance(response, Decision):
        kind: Optional[VerdictKind] = response.verdict.kind
        cited = {c.provision_id for c in response.verdict.rationale}
        citation_ok = bool(set(expected.provisions) & cited)
        blob = " ".join(list(response.verdict.obligations) + list(response.verdict.recommendations))
    else:
        try:
            kind = parse_response(response).verdict.kind
        except UnparseableResponse:
            kind = None
        citation_ok = any(pid in response for pid in expected.provisions)
        blob = response

    kind_ok = kind is expected.verdict
    if kind_ok and citation_ok:
        cc = 0.5
    elif kind_ok or citation_ok:
        cc = 0.25
    else:
        cc = 0.0

    if cc == 0.0:
        re_score = 0.0
    else:
        wanted = set(expected.recommendation_keys)
        found = _keys_found(expected, blob)
        if not wanted or found == wanted:
            re_score = 0.5
        elif found:
            re_score = 0.25
        else:
            re_score = 0.0
    return RubricScore.enforced(cc, re_score)


def compliance_rate(results: Sequence[tuple[object, bool]]) -> float:
    """Fraction of results flagged compliant."""
    if not results:
        raise EmptySample("compliance rate over an empty result list")
    compliant = sum(1 for _, ok in results if ok)
    return compliant / len(results)


def conflict_resolution_efficiency(results: Sequence[tuple[object, bool]]) -> float:
    """Fraction of conflict cases resolved correctly."""
    if not results:
        raise NoConflictCases("no conflict cases in the run")
    correct = sum(1 for _, ok in results if ok)
    return correct / len(results)


def adaptability_score(perf_immediate: float, perf_later: float) -> float:
    """Signed rate of improvement over the baseline performance."""
    if perf_immediate == 0:
        raise ZeroBaseline("baseline performance is zero")
    return (perf_later - perf_immediate) / perf_immediate


@dataclass(frozen=True)
class BoxStats:
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float

    def to_dict(self) -> dict:
        return {
            "min": self.minimum,
            "q1": self.q1,
            "median": self.median,
            "q3": self.q3,
            "max": self.maximum,
        }


def _quantile(sorted_values: Sequence[float], q: float) -> float:
    # Linear interpolation between closest ranks; whiskers are true min/max.
    position = (len(sorted_values) - 1) * q
    lower = math.floor(position)
    upper = math.ceil(position)
    if lower == upper:
        return sorted_values[lower]
    fraction = position - lower
    return sorted_values[lower] + fraction * (sorted_values[upper] - sorted_values[lower])


def box_stats(values: Sequence[float]) -> BoxStats:
    if not values:
        raise EmptyCategory("box stats over an empty value list")
    ordered = sorted(values)
    return BoxStats(
        minimum=ordered[0],
        q1=_quantile(ordered, 0.25),
        median=_quantile(ordered, 0.5),
        q3=_quantile(ordered, 0.75),
        maximum=ordered[-1],
    )


def aggregate_by_category(scores: Mapping[str, float], corpus: ScenarioSet) -> dict[str, BoxStats]:
    """Five-number summary of scores per category present in the scores map."""
    grouped: dict[str, list[float]] = {}
    for scenario_id, total in scores.items():
        category = corpus.category_of(scenario_id)  # raises UnknownScenario
        grouped.setdefault(category, []).append(total)
    return {category: box_stats(values) for category, values in sorted(grouped.items())}


@dataclass(frozen=True)
class ScenarioResult:
    scenario_id: str
    category: str
    expected_verdict: VerdictKind
    actual_verdict: VerdictKind
    score: RubricScore
    compliant: bool
    is_conflict_case: bool
    conflicts_detected: int
    backend_fault: Optional[str]

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "category": self.category,
            "expected_verdict": self.expected_verdict.value,
            "actual_verdict": self.actual_verdict.value,
            "context_comprehension": self.score.context_comprehension,
            "recommendation_effectiveness": self.score.recommendation_effectiveness,
            "total": self.score.total,
            "compliant": self.compliant,
            "is_conflict_case": self.is_conflict_case,
            "conflicts_detected": self.conflicts_detected,
            "backend_fault": self.backend_fault,
        }


@dataclass(frozen=True)
class MetricReport:
    compliance_rate: float
    conflict_resolution_efficiency: Optional[float]
    adaptability: Optional[float]
    per_category: dict[str, BoxStats]
    backend_id: str
    corpus_hash: str
    timestamp: Optional[str]
    results: tuple[ScenarioResult, ...]

    def to_dict(self) -> dict:
        return {
            "compliance_rate": self.compliance_rate,
            "conflict_resolution_efficiency": self.conflict_resolution_efficiency,
            "adaptability": self.adaptability,
            "per_category": {c: s.to_dict() for c, s in sorted(self.per_category.items())},
            "meta": {
                "backend_id": self.backend_id,
                "corpus_hash": self.corpus_hash,
                "timestamp": self.timestamp,
                "scenario_count": len(self.results),
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"


def _is_compliant(final: Decision, expected: ExpectedOutcome) -> bool:
    if final.verdict.kind is not expected.verdict:
        return False
    blob = " ".join(list(final.verdict.obligations) + list(final.verdict.recommendations))
    return _keys_found(expected, blob) == set(expected.recommendation_keys)


HARNESS_REVIEWER = "harness-auto"


def run_evaluation(
    ontology: Ontology,
    corpus: ScenarioSet,
    backend: DecisionBackendProtocol,
    report_path: Optional[str | Path] = None,
    csv_path: Optional[str | Path] = None,
    jobs: int = 1,
    timestamp: Optional[str] = None,
    journal_path: Optional[str | Path] = None,
) -> MetricReport:
    """Drive every scenario through the full pipeline and score it.

    The human step is auto-approved under the `harness-auto` reviewer and
    recorded as such in the journal. With the deterministic backend the
    report is bit-identical across runs (timestamps are omitted unless one
    is injected).
    """
    journal = Journal(journal_path)
    workflow = DecisionWorkflow(ontology, backend, journal, clock=LogicalClock())

    def evaluate(scenario: Scenario) -> ScenarioResult:
        run, resolved, ticket = workflow.process(scenario.request, scenario.context_overrides)
        final = workflow.reviews.sign_off(ticket.ticket_id, HARNESS_REVIEWER, "approve")
        score = score_response(final, scenario.expected)
        return ScenarioResult(
            scenario_id=scenario.scenario_id,
            category=scenario.category,
            expected_verdict=scenario.expected.verdict,
            actual_verdict=final.verdict.kind,
            score=score,
            compliant=_is_compliant(final, scenario.expected),
            is_conflict_case=scenario.is_conflict_case,
            conflicts_detected=len(resolved.conflicts),
            backend_fault=run.backend_fault,
        )

    ordered = sorted(corpus, key=lambda s: s.scenario_id)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = tuple(pool.map(evaluate, ordered))
    else:
        results = tuple(evaluate(s) for s in ordered)

    compliance = compliance_rate([(r, r.compliant) for r in results])
    conflict_results = [(r, r.compliant) for r in results if r.is_conflict_case]
    efficiency = conflict_resolution_efficiency(conflict_results) if conflict_results else None

    scores = {r.scenario_id: r.score.total for r in results}
    per_category = aggregate_by_category(scores, corpus)

    report = MetricReport(
        compliance_rate=compliance,
        conflict_resolution_efficiency=efficiency,
        adaptability=None,
        per_category=per_category,
        backend_id=backend.backend_id,
        corpus_hash=corpus.corpus_hash(),
        timestamp=timestamp,
        results=results,
    )

    if report_path is not None:
        Path(report_path).write_text(report.to_json(), encoding="utf-8")
    if csv_path is not None:
        write_scores_csv(report, csv_path)
    return report


def write_scores_csv(report: MetricReport, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow([
            "scenario_id", "category", "expected_verdict", "actual_verdict",
            "context_comprehension", "recommendation_effectiveness", "total",
            "compliant", "is_conflict_case",
        ])
        for r in report.results:
            writer.writerow([
                r.scenario_id, r.category, r.expected_verdict.value, r.actual_verdict.value,
                r.score.context_comprehension, r.score.recommendation_effectiveness,
                r.score.total, r.compliant, r.is_conflict_case,
            ])
