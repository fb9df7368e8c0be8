"""Pluggable decision backends: deterministic rules, LLM client, scripted mock."""

from __future__ import annotations

import json
import os
import re
import threading
import time
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import httpx

from .context import ChannelVerdict, ContextSnapshot, evaluate_abac, evaluate_caac, evaluate_ontology
from .model import AccessRequest, Verdict, VerdictKind
from .ontology import ProvisionMatch
from .pipeline import resolution_verdict


@dataclass(frozen=True)
class BackendVerdict:
    verdict: Verdict
    raw_response: Optional[str] = None
    latency_ms: float = 0.0
    fault: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.to_dict(),
            "raw_response": self.raw_response,
            "latency_ms": self.latency_ms,
            "fault": self.fault,
        }


class UnparseableResponse(ValueError):
    """Free text that matches none of the anchored response shapes."""

    def __init__(self, text: str):
        self.text = text
        super().__init__(f"unparseable backend response: {text[:120]!r}")


_GRANT_CONDITIONAL_ANCHOR = "access granted with conditions"
_GRANT_ANCHOR = "access granted"
_DENY_ANCHOR = "access denied"
_REMEDIATION_VERBS = ("seek", "obtain", "need to")

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")


def _sentences(text: str) -> list[str]:
    return [s.strip() for s in _SENTENCE_SPLIT.split(text.strip()) if s.strip()]


def render_prompt(request: AccessRequest, matches: Sequence[ProvisionMatch],
                  context: ContextSnapshot) -> str:
    """Deterministic scenario prompt; identical inputs render identical bytes."""
    lines = [
        f"Scenario: {request.raw_narrative}",
        f"Subject: role={request.subject.actor_role.value},"
        f" registration={request.subject.registration_status.value},"
        f" relationship-to-patient={request.subject.relationship_to_patient.value}",
        f"Resource: patient={request.resource.patient_id},"
        f" scope={request.resource.record_scope.value},"
        f" sensitivity={request.resource.sensitivity.value}",
        f"Purpose: {request.purpose.value}",
        f"Consent: {request.consent.value}",
        f"Supervision: {request.supervision.value}",
        f"Context: situation={context.situation.value}, urgency={context.urgency.value},"
        f" location={context.location.value}, device={context.device.value}",
        "Matched provisions:",
    ]
    if matches:
        for i, m in enumerate(matches, start=1):
            conditions = ", ".join(c.value for c in m.provision.conditions) or "none"
            lines.append(
                f"  {i}. {m.provision.provision_id}"
                f" ({m.provision.effect.value}, {m.provision.priority.value}):"
                f" conditions {conditions}"
            )
    else:
        lines.append("  No authorizing provision matched.")
    lines.append("Is access granted?")
    return "\n".join(lines)


def parse_response(text: str) -> BackendVerdict:
    """Classify free backend text by anchored rules.

    Leading "Access granted [with conditions]" takes the remaining sentences
    on the anchor line plus any following lines as obligations. Leading
    "Access denied" takes only following lines as recommendations (prose on
    the anchor line is explanation, not remediation). Un-anchored text
    containing remediation verbs becomes a denial whose sentences are each a
    recommendation.

    Raises:
        UnparseableResponse: nothing matched; callers fall back and record it.
    """
    if not text or not text.strip():
        raise UnparseableResponse(text)
    stripped = text.strip()
    lowered = stripped.lower()
    first_line, _, rest = stripped.partition("\n")
    tail_lines = [ln.strip() for ln in rest.splitlines() if ln.strip()]

    if lowered.startswith(_GRANT_CONDITIONAL_ANCHOR):
        remainder = first_line[len(_GRANT_CONDITIONAL_ANCHOR):].lstrip(" .:;,")
        obligations = _sentences(remainder) + tail_lines
        verdict = Verdict(kind=VerdictKind.CONDITIONAL_GRANT, obligations=tuple(obligations))
        return BackendVerdict(verdict=verdict, raw_response=text)

    if lowered.startswith(_GRANT_ANCHOR):
        remainder = first_line[len(_GRANT_ANCHOR):].lstrip(" .:;,")
        obligations = _sentences(remainder) + tail_lines
        verdict = Verdict(kind=VerdictKind.GRANT, obligations=tuple(obligations))
        return BackendVerdict(verdict=verdict, raw_response=text)

    if lowered.startswith(_DENY_ANCHOR):
        verdict = Verdict(kind=VerdictKind.DENY, recommendations=tuple(tail_lines))
        return BackendVerdict(verdict=verdict, raw_response=text)

    if any(verb in lowered for verb in _REMEDIATION_VERBS):
        verdict = Verdict(kind=VerdictKind.DENY, recommendations=tuple(_sentences(stripped)))
        return BackendVerdict(verdict=verdict, raw_response=text)

    raise UnparseableResponse(text)


def canonical_render(verdict: Verdict) -> str:
    """Render a verdict as the canonical text parse_response round-trips."""
    if verdict.kind is VerdictKind.GRANT:
        return "\n".join(["Access granted."] + list(verdict.obligations))
    if verdict.kind is VerdictKind.CONDITIONAL_GRANT:
        return "\n".join(["Access granted with conditions."] + list(verdict.obligations))
    return "\n".join(["Access denied."] + list(verdict.recommendations))


class DeterministicBackend:
    """Rule-engine backend: channel evaluation plus the precedence lattice.

    Shares the pipeline's resolution code path, so its verdict is exactly
    what the rule engine would resolve on its own.
    """

    backend_id = "deterministic"
    supports_free_text = False

    def decide(self, request: AccessRequest, matches: Sequence[ProvisionMatch],
               context: ContextSnapshot) -> BackendVerdict:
        started = time.perf_counter()
        # ABAC reads attribute facts through the match condition states; the
        # attribute set itself is not needed to rank matches.
        channels = self._channels(request, matches, context)
        verdict = resolution_verdict(channels, matches)
        return BackendVerdict(verdict=verdict, latency_ms=(time.perf_counter() - started) * 1000.0)

    @staticmethod
    def _channels(request: AccessRequest, matches: Sequence[ProvisionMatch],
                  context: ContextSnapshot) -> tuple[ChannelVerdict, ...]:
        from .context import capture_context

        attributes, _ = capture_context(request, overrides=None, timestamp=context.timestamp)
        return (
            evaluate_ontology(matches),
            evaluate_abac(attributes, matches),
            evaluate_caac(context, matches),
        )


@dataclass(frozen=True)
class LLMConfig:
    base_url: str
    api_key: str = ""
    model: str = "gpt-4"
    timeout_ms: float = 30000.0
    max_in_flight: int = 4

    @classmethod
    def from_env(cls, env: Optional[Mapping[str, str]] = None) -> "LLMConfig":
        env = env if env is not None else os.environ
        return cls(
            base_url=env.get("ONTOGUARD_LLM_BASE_URL", ""),
            api_key=env.get("ONTOGUARD_LLM_API_KEY", ""),
            model=env.get("ONTOGUARD_LLM_MODEL", "gpt-4"),
            timeout_ms=float(env.get("ONTOGUARD_LLM_TIMEOUT_MS", "30000")),
        )


Transport = Callable[[str, dict, dict, float], str]


class TransportError(Exception):
    """Network-level failure talking to the LLM endpoint."""


def _http_transport(url: str, headers: dict, body: dict, timeout_s: float) -> str:
    try:
        response = httpx.post(url, headers=headers, json=body, timeout=timeout_s)
        response.raise_for_status()
        payload = response.json()
        return payload["choices"][0]["message"]["content"]
    except httpx.TimeoutException as exc:
        raise TimeoutError(str(exc)) from exc
    except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
        raise TransportError(str(exc)) from exc


class LLMBackend:
    """Chat-completion client with deterministic fallback.

    Never propagates a transport error: on timeout, transport failure, or an
    unparseable reply it returns the deterministic verdict with the fault
    recorded. In-flight requests are bounded by config.max_in_flight.
    """

    backend_id = "llm"
    supports_free_text = True

    def __init__(self, config: LLMConfig, transport: Optional[Transport] = None):
        self.config = config
        self._transport = transport or _http_transport
        self._fallback = DeterministicBackend()
        self._slots = threading.BoundedSemaphore(max(1, config.max_in_flight))

    def decide(self, request: AccessRequest, matches: Sequence[ProvisionMatch],
               context: ContextSnapshot) -> BackendVerdict:
        prompt = render_prompt(request, matches, context)
        url = self.config.base_url.rstrip("/") + "/v1/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        body = {"model": self.config.model, "messages": [{"role": "user", "content": prompt}]}

        started = time.perf_counter()
        raw: Optional[str] = None
        fault: Optional[str] = None
        try:
            with self._slots:
                raw = self._transport(url, headers, body, self.config.timeout_ms / 1000.0)
            parsed = parse_response(raw)
            return BackendVerdict(
                verdict=parsed.verdict,
                raw_response=raw,
                latency_ms=(time.perf_counter() - started) * 1000.0,
            )
        except TimeoutError as exc:
            fault = f"Timeout: {exc}"
        except TransportError as exc:
            fault = f"TransportError: {exc}"
        except UnparseableResponse as exc:
            fault = f"UnparseableResponse: {exc.text[:120]!r}"

        fallback = self._fallback.decide(request, matches, context)
        return BackendVerdict(
            verdict=fallback.verdict,
            raw_response=raw,
            latency_ms=(time.perf_counter() - started) * 1000.0,
            fault=fault,
        )


class ScriptedBackend:
    """Mock backend replaying scripted response text keyed by request id.

    Unscripted requests fall back to the deterministic backend with the gap
    recorded, mirroring the LLM fault path. Deterministic for identical
    inputs.
    """

    backend_id = "mock"
    supports_free_text = True

    def __init__(self, script: Mapping[str, str], default: Optional[str] = None):
        self._script = dict(script)
        self._default = default
        self._fallback = DeterministicBackend()

    @classmethod
    def from_file(cls, path: str) -> "ScriptedBackend":
        with open(path, encoding="utf-8") as handle:
            doc = json.load(handle)
        return cls(script=doc.get("responses", {}), default=doc.get("default"))

    def decide(self, request: AccessRequest, matches: Sequence[ProvisionMatch],
               context: ContextSnapshot) -> BackendVerdict:
        text = self._script.get(request.request_id, self._default)
        if text is None:
            fallback = self._fallback.decide(request, matches, context)
            return BackendVerdict(
                verdict=fallback.verdict,
                fault=f"unscripted request {request.request_id}",
            )
        try:
            parsed = parse_response(text)
        except UnparseableResponse as exc:
            fallback = self._fallback.decide(request, matches, context)
            return BackendVerdict(
                verdict=fallback.verdict,
                raw_response=text,
                fault=f"UnparseableResponse: {exc.text[:120]!r}",
            )
        return BackendVerdict(verdict=parsed.verdict, raw_response=text)


def make_backend(name: str, llm_config: Optional[LLMConfig] = None,
                 mock_script_path: Optional[str] = None):
    """Construct a backend by configuration name."""
    if name == "deterministic":
        return DeterministicBackend()
    if name == "llm":
        return LLMBackend(llm_config or LLMConfig.from_env())
    if name == "mock":
        if mock_script_path:
            return ScriptedBackend.from_file(mock_script_path)
        return ScriptedBackend(script={})
    raise ValueError(f"unknown backend {name!r}")
