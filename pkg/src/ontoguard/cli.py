"""Operator entry points: validate policies, decide, evaluate, serve.

All subcommand output is machine-readable JSON on stdout; human diagnostics
go to stderr. Exit codes: 0 success, 1 policy/corpus invalid, 2 input
invalid, 3 backend failure.
"""

from __future__ import annotations

import json
import os
import sys
from typing import Optional

import click

from .backends import LLMConfig, make_backend
from .harness import CorpusError, load_corpus, run_evaluation
from .model import LogicalClock, RequestValidationError, validate_request
from .ontology import PolicyLoadError, load_policy_dir, validate_ontology
from .oversight import DecisionWorkflow, Journal
from .pipeline import BackendUnavailable, NoProvisionCorpus

EXIT_OK = 0
EXIT_POLICY_INVALID = 1
EXIT_INPUT_INVALID = 2
EXIT_BACKEND_FAILURE = 3


def _emit(payload: dict) -> None:
    click.echo(json.dumps(payload, indent=2, ensure_ascii=False))


def _diag(message: str) -> None:
    click.echo(message, err=True)


@click.group()
@click.option("--policies", "policies_dir", default="./policies", show_default=True,
              help="Directory of per-Act provision files.")
@click.option("--journal", "journal_path", default=None,
              help="Audit journal path (in-memory when omitted for offline commands).")
@click.pass_context
def main(ctx: click.Context, policies_dir: str, journal_path: Optional[str]) -> None:
    """Policy-grounded access decision engine."""
    ctx.ensure_object(dict)
    ctx.obj["policies_dir"] = policies_dir
    ctx.obj["journal_path"] = journal_path


@main.command("validate-policies")
@click.pass_context
def cmd_validate_policies(ctx: click.Context) -> None:
    """Load the provision files and report structural problems."""
    try:
        ontology = load_policy_dir(ctx.obj["policies_dir"])
    except PolicyLoadError as exc:
        _emit({"ok": False, "problems": [{"code": exc.code, "detail": exc.detail}]})
        sys.exit(EXIT_POLICY_INVALID)
    problems = validate_ontology(ontology)
    payload = {
        "ok": not problems,
        "acts": len(ontology.act_versions),
        "provisions": len(ontology.provisions),
        "act_versions": {act.value: v for act, v in sorted(ontology.act_versions.items())},
        "problems": [p.to_dict() for p in problems],
    }
    _emit(payload)
    if problems:
        _diag(f"{len(problems)} problem(s) found")
        sys.exit(EXIT_POLICY_INVALID)


def _load_ontology_or_exit(ctx: click.Context):
    try:
        ontology = load_policy_dir(ctx.obj["policies_dir"])
    except PolicyLoadError as exc:
        _diag(str(exc))
        sys.exit(EXIT_POLICY_INVALID)
    problems = validate_ontology(ontology)
    if problems:
        for p in problems:
            _diag(f"{p.code}: {p.detail}")
        sys.exit(EXIT_POLICY_INVALID)
    return ontology


@main.command("decide")
@click.option("--request", "request_path", required=True, type=click.Path(exists=False),
              help="JSON file holding one request record.")
@click.option("--backend", "backend_name", default="deterministic", show_default=True,
              type=click.Choice(["deterministic", "llm", "mock"]))
@click.option("--context", "context_json", default=None,
              help="Structured context overrides as inline JSON or a file path.")
@click.option("--mock-script", "mock_script_path", default=None,
              help="Scripted responses file for the mock backend.")
@click.option("--auto-approve", "auto_approve_reviewer", default=None,
              help="Sign off immediately under this reviewer id and print the final decision.")
@click.pass_context
def cmd_decide(ctx: click.Context, request_path: str, backend_name: str,
               context_json: Optional[str], mock_script_path: Optional[str],
               auto_approve_reviewer: Optional[str]) -> None:
    """Decide a single request and print the resolved (or final) decision."""
    try:
        with open(request_path, encoding="utf-8") as handle:
            candidate = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        _diag(f"cannot read request file: {exc}")
        sys.exit(EXIT_INPUT_INVALID)

    overrides = None
    if context_json:
        try:
            if os.path.exists(context_json):
                with open(context_json, encoding="utf-8") as handle:
                    overrides = json.load(handle)
            else:
                overrides = json.loads(context_json)
        except (OSError, json.JSONDecodeError) as exc:
            _diag(f"cannot parse context overrides: {exc}")
            sys.exit(EXIT_INPUT_INVALID)

    try:
        request = validate_request(candidate)
    except RequestValidationError as exc:
        _diag(f"invalid request: {exc}")
        sys.exit(EXIT_INPUT_INVALID)

    ontology = _load_ontology_or_exit(ctx)
    try:
        backend = make_backend(backend_name, llm_config=LLMConfig.from_env(),
                               mock_script_path=mock_script_path)
    except (ValueError, OSError) as exc:
        _diag(f"backend unavailable: {exc}")
        sys.exit(EXIT_BACKEND_FAILURE)

    journal = Journal(ctx.obj["journal_path"])
    workflow = DecisionWorkflow(ontology, backend, journal, clock=LogicalClock())
    try:
        _, resolved, ticket = workflow.process(request, overrides)
    except (BackendUnavailable, NoProvisionCorpus) as exc:
        _diag(str(exc))
        sys.exit(EXIT_BACKEND_FAILURE)
    except ValueError as exc:
        _diag(f"invalid input: {exc}")
        sys.exit(EXIT_INPUT_INVALID)

    if auto_approve_reviewer:
        final = workflow.reviews.sign_off(ticket.ticket_id, auto_approve_reviewer, "approve")
        _emit({"decision": final.to_dict(), "ticket_id": ticket.ticket_id})
    else:
        _emit({"decision": resolved.to_dict(), "ticket_id": ticket.ticket_id})


@main.command("evaluate")
@click.option("--corpus", "corpus_dir", required=True, help="Scenario corpus directory.")
@click.option("--backend", "backend_name", default="deterministic", show_default=True,
              type=click.Choice(["deterministic", "llm", "mock"]))
@click.option("--report", "report_path", required=True, help="Where to write the metric report JSON.")
@click.option("--csv", "csv_path", default=None, help="Optional per-scenario score CSV.")
@click.option("--mock-script", "mock_script_path", default=None,
              help="Scripted responses file for the mock backend.")
@click.option("--jobs", type=int, default=lambda: os.cpu_count() or 1,
              show_default="number of cores", help="Parallel scenario runs.")
@click.pass_context
def cmd_evaluate(ctx: click.Context, corpus_dir: str, backend_name: str, report_path: str,
                 csv_path: Optional[str], mock_script_path: Optional[str], jobs: int) -> None:
    """Run the evaluation harness over a corpus and write the report."""
    ontology = _load_ontology_or_exit(ctx)
    try:
        corpus = load_corpus(corpus_dir)
    except CorpusError as exc:
        _diag(str(exc))
        sys.exit(EXIT_INPUT_INVALID)
    try:
        backend = make_backend(backend_name, llm_config=LLMConfig.from_env(),
                               mock_script_path=mock_script_path)
    except (ValueError, OSError) as exc:
        _diag(f"backend unavailable: {exc}")
        sys.exit(EXIT_BACKEND_FAILURE)

    report = run_evaluation(
        ontology, corpus, backend,
        report_path=report_path,
        csv_path=csv_path,
        jobs=max(1, jobs),
        journal_path=ctx.obj["journal_path"],
    )
    _emit(report.to_dict())


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8080, show_default=True)
@click.option("--backend", "backend_name", default="deterministic", show_default=True,
              type=click.Choice(["deterministic", "llm", "mock"]))
@click.option("--mock-script", "mock_script_path", default=None)
@click.pass_context
def cmd_serve(ctx: click.Context, host: str, port: int, backend_name: str,
              mock_script_path: Optional[str]) -> None:
    """Run the HTTP decision service."""
    from .service import CorpusInvalid, JournalUnwritable, ServiceConfig, serve

    config = ServiceConfig(
        host=host,
        port=port,
        policies_dir=ctx.obj["policies_dir"],
        journal_path=ctx.obj["journal_path"] or "./journal.jsonl",
        backend=backend_name,
        mock_script_path=mock_script_path,
    )
    try:
        serve(config)
    except (CorpusInvalid, PolicyLoadError) as exc:
        _diag(f"corpus invalid: {exc}")
        sys.exit(EXIT_POLICY_INVALID)
    except JournalUnwritable as exc:
        _diag(f"journal unwritable: {exc}")
        sys.exit(EXIT_INPUT_INVALID)


if __name__ == "__main__":
    main()
