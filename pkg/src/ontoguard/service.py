"""HTTP service exposing decisions, review queue, audit trail, and evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.exceptions import RequestValidationError as BodyValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .backends import LLMConfig, make_backend
from .harness import CorpusError, load_corpus, run_evaluation
from .model import (
    ProvisionCitation,
    RequestValidationError,
    SystemClock,
    Verdict,
    VerdictKind,
    validate_request,
)
from .ontology import load_policy_dir, validate_ontology
from .oversight import (
    AlreadyClosed,
    DecisionWorkflow,
    EmptyOverrideReason,
    Journal,
    TicketNotFound,
    TicketStatus,
    audit_trail,
)


class CorpusInvalid(Exception):
    pass


class JournalUnwritable(Exception):
    pass


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    policies_dir: str = "./policies"
    journal_path: str = "./journal.jsonl"
    backend: str = "deterministic"
    mock_script_path: Optional[str] = None
    llm: LLMConfig = field(default_factory=LLMConfig.from_env)


def _error(status: int, code: str, message: str) -> HTTPException:
    return HTTPException(status_code=status, detail={"code": code, "message": message})


def _parse_verdict(raw: dict) -> Verdict:
    try:
        return Verdict(
            kind=VerdictKind(raw["kind"]),
            obligations=tuple(raw.get("obligations", [])),
            recommendations=tuple(raw.get("recommendations", [])),
            rationale=tuple(
                ProvisionCitation(c["provision_id"], c.get("condition", ""))
                for c in raw.get("rationale", [])
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise _error(400, "InvalidVerdict", str(exc)) from None


def create_app(config: ServiceConfig) -> FastAPI:
    """Build the service with its corpus validated and journal open (fail-fast)."""
    ontology = load_policy_dir(config.policies_dir)
    problems = validate_ontology(ontology)
    if problems:
        raise CorpusInvalid("; ".join(f"{p.code}: {p.detail}" for p in problems))

    try:
        journal = Journal(config.journal_path)
    except OSError as exc:
        raise JournalUnwritable(str(exc)) from exc

    backend = make_backend(config.backend, llm_config=config.llm,
                           mock_script_path=config.mock_script_path)
    workflow = DecisionWorkflow(ontology, backend, journal, clock=SystemClock())

    app = FastAPI(title="ontoguard", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.workflow = workflow
    app.state.ontology = ontology
    app.state.latest_report = None

    @app.exception_handler(HTTPException)
    async def http_error(_: Request, exc: HTTPException) -> JSONResponse:
        detail = exc.detail if isinstance(exc.detail, dict) else {"code": "Error", "message": str(exc.detail)}
        return JSONResponse(status_code=exc.status_code, content=detail)

    @app.exception_handler(BodyValidationError)
    async def body_error(_: Request, exc: BodyValidationError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"code": "InvalidBody", "message": str(exc)})

    @app.get("/v1/health")
    async def health() -> dict:
        return {
            "status": "ok",
            "act_versions": {act.value: version for act, version in sorted(ontology.act_versions.items())},
            "backend_id": backend.backend_id,
        }

    @app.post("/v1/decisions", status_code=201)
    async def post_decision(body: dict) -> dict:
        if "request" not in body:
            raise _error(400, "MissingField", "body must carry a request record")
        try:
            request = validate_request(body["request"])
        except RequestValidationError as exc:
            raise _error(400, "InvalidRequest", str(exc)) from None
        overrides = body.get("context_overrides")
        try:
            _, resolved, ticket = workflow.process(request, overrides)
        except ValueError as exc:
            raise _error(400, "InvalidContext", str(exc)) from None
        return {"decision": resolved.to_dict(), "ticket_id": ticket.ticket_id}

    @app.get("/v1/reviews")
    async def reviews(status: str = Query(default="pending")) -> dict:
        try:
            wanted = TicketStatus(status.capitalize()) if status != "signedoff" else TicketStatus.SIGNED_OFF
        except ValueError:
            raise _error(400, "UnknownStatus", status) from None
        tickets = workflow.reviews.tickets(wanted)
        return {"tickets": [t.to_dict() for t in tickets]}

    @app.post("/v1/reviews/{ticket_id}/signoff")
    async def signoff(ticket_id: str, body: dict) -> dict:
        reviewer_id = (body.get("reviewer_id") or "").strip()
        action = body.get("action")
        if not reviewer_id:
            raise _error(400, "MissingField", "reviewer_id is required")
        if action not in ("approve", "override"):
            raise _error(400, "UnknownAction", f"action must be approve or override, got {action!r}")
        verdict = None
        if action == "override":
            if "verdict" not in body:
                raise _error(400, "MissingField", "override requires a verdict")
            verdict = _parse_verdict(body["verdict"])
        try:
            final = workflow.reviews.sign_off(
                ticket_id, reviewer_id, action, verdict=verdict, reason=body.get("reason"),
            )
        except TicketNotFound:
            raise _error(404, "TicketNotFound", ticket_id) from None
        except AlreadyClosed:
            raise _error(409, "AlreadyClosed", f"{ticket_id} was already reviewed") from None
        except EmptyOverrideReason:
            raise _error(400, "EmptyOverrideReason", "override requires a non-empty reason") from None
        return {"decision": final.to_dict()}

    @app.get("/v1/audit")
    async def audit(request_id: Optional[str] = None, since: Optional[str] = None,
                    until: Optional[str] = None) -> dict:
        records = audit_trail(journal, request_id=request_id, since=since, until=until)
        return {"records": [r.to_dict() for r in records]}

    @app.post("/v1/evaluate")
    async def evaluate(body: dict) -> dict:
        corpus_path = body.get("corpus_path")
        if not corpus_path:
            raise _error(400, "MissingField", "corpus_path is required")
        backend_name = body.get("backend", config.backend)
        try:
            corpus = load_corpus(corpus_path)
            eval_backend = make_backend(backend_name, llm_config=config.llm,
                                        mock_script_path=config.mock_script_path)
        except CorpusError as exc:
            raise _error(400, exc.code, exc.detail) from None
        except ValueError as exc:
            raise _error(400, "UnknownBackend", str(exc)) from None
        report = run_evaluation(
            ontology, corpus, eval_backend, timestamp=SystemClock()(),
        )
        app.state.latest_report = report
        return report.to_dict()

    @app.get("/v1/metrics/latest")
    async def latest_metrics() -> dict:
        report = app.state.latest_report
        if report is None:
            raise _error(404, "NoReport", "no evaluation has run yet")
        return report.to_dict()

    return app


def serve(config: ServiceConfig) -> None:
    """Run the service until interrupted; journal flushes on every append."""
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
