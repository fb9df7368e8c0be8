"""Human sign-off and the append-only audit journal."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping, Optional

from .model import AccessRequest, Decision, LogicalClock, Stage, Verdict
from .ontology import Ontology
from .pipeline import DecisionBackendProtocol, InvalidStage, PipelineRun, decide, resolve


class AuditEvent(str, Enum):
    SUBMITTED = "Submitted"
    DRAFTED = "Drafted"
    RESOLVED = "Resolved"
    REVIEW_OPENED = "ReviewOpened"
    SIGNED_OFF = "SignedOff"
    OVERRIDDEN = "Overridden"
    ESCALATED = "Escalated"


@dataclass(frozen=True)
class AuditRecord:
    seq: int
    event: AuditEvent
    payload: dict
    at: str

    def to_dict(self) -> dict:
        # seq first so a reader can validate ordering cheaply.
        return {"seq": self.seq, "event": self.event.value, "at": self.at, "payload": self.payload}


class JournalCorrupt(Exception):
    """Gap, regression, or garbage at the given journal sequence number."""

    def __init__(self, seq: int, detail: str):
        self.seq = seq
        self.detail = detail
        super().__init__(f"journal corrupt at seq {seq}: {detail}")


class Journal:
    """Append-only audit trail; one JSON record per line, gapless seq.

    Backed by a file when a path is given, otherwise in memory. Writes are
    serialized through one lock; reads take a snapshot without it.
    """

    def __init__(self, path: Optional[str | Path] = None):
        self._path = Path(path) if path else None
        self._lock = threading.Lock()
        self._records: list[AuditRecord] = []
        self._next_seq = 1
        if self._path and self._path.exists():
            existing = self._load(validate=True)
            self._records = existing
            self._next_seq = existing[-1].seq + 1 if existing else 1
        elif self._path:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            self._path.touch()

    def append(self, event: AuditEvent, payload: dict, at: str) -> AuditRecord:
        with self._lock:
            record = AuditRecord(seq=self._next_seq, event=event, payload=payload, at=at)
            self._next_seq += 1
            self._records.append(record)
            if self._path:
                with self._path.open("a", encoding="utf-8") as handle:
                    handle.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")
                    handle.flush()
            return record

    def _load(self, validate: bool) -> list[AuditRecord]:
        assert self._path is not None
        records: list[AuditRecord] = []
        expected = 1
        for line_no, line in enumerate(self._path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                record = AuditRecord(
                    seq=int(raw["seq"]),
                    event=AuditEvent(raw["event"]),
                    payload=raw["payload"],
                    at=raw["at"],
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise JournalCorrupt(expected, f"line {line_no} unreadable: {exc}") from None
            if validate and record.seq != expected:
                raise JournalCorrupt(expected, f"found seq {record.seq}")
            expected = record.seq + 1
            records.append(record)
        return records

    def records(self) -> list[AuditRecord]:
        """Snapshot of all records, re-validating gapless ordering."""
        if self._path:
            return self._load(validate=True)
        snapshot = list(self._records)
        for i, record in enumerate(snapshot, start=1):
            if record.seq != i:
                raise JournalCorrupt(i, f"found seq {record.seq}")
        return snapshot


def audit_trail(
    journal: Journal,
    request_id: Optional[str] = None,
    since: Optional[str] = None,
    until: Optional[str] = None,
) -> list[AuditRecord]:
    """Records in seq order matching the filter; validates journal integrity."""
    out = []
    for record in journal.records():
        if request_id is not None and record.payload.get("request_id") != request_id:
            continue
        if since is not None and record.at < since:
            continue
        if until is not None and record.at > until:
            continue
        out.append(record)
    return out


class TicketStatus(str, Enum):
    PENDING = "Pending"
    SIGNED_OFF = "SignedOff"
    ESCALATED = "Escalated"


@dataclass(frozen=True)
class ReviewTicket:
    ticket_id: str
    decision: Decision
    status: TicketStatus
    created_at: str
    reviewer_verdict: Optional[Verdict] = None
    reviewer_id: Optional[str] = None
    reason: Optional[str] = None
    closed_at: Optional[str] = None

    @property
    def has_conflicts(self) -> bool:
        return bool(self.decision.conflicts)

    def to_dict(self) -> dict:
        return {
            "ticket_id": self.ticket_id,
            "status": self.status.value,
            "created_at": self.created_at,
            "closed_at": self.closed_at,
            "reviewer_id": self.reviewer_id,
            "reason": self.reason,
            "conflicts_present": self.has_conflicts,
            "decision": self.decision.to_dict(),
            "reviewer_verdict": self.reviewer_verdict.to_dict() if self.reviewer_verdict else None,
        }


class TicketNotFound(KeyError):
    pass


class AlreadyClosed(Exception):
    pass


class EmptyOverrideReason(ValueError):
    pass


@dataclass(frozen=True)
class Escalation:
    ticket_id: str
    reason: str
    opened_at: str

    def to_dict(self) -> dict:
        return {"ticket_id": self.ticket_id, "reason": self.reason, "opened_at": self.opened_at}


class ReviewCenter:
    """Review queue and sign-off state machine over one audit journal.

    Every resolved decision passes through here; there is no path that
    finalizes a decision without a reviewer action.
    """

    def __init__(self, journal: Journal, clock: Optional[Callable[[], str]] = None):
        self.journal = journal
        self._clock = clock or LogicalClock()
        self._lock = threading.Lock()
        self._tickets: dict[str, ReviewTicket] = {}
        self._escalations: list[Escalation] = []
        self._ticket_seq = 0

    def submit_for_review(self, resolved: Decision) -> ReviewTicket:
        if resolved.stage is not Stage.RESOLVED:
            raise InvalidStage(f"expected Resolved, got {resolved.stage.value}")
        with self._lock:
            self._ticket_seq += 1
            ticket = ReviewTicket(
                ticket_id=f"tkt-{self._ticket_seq:08d}",
                decision=resolved,
                status=TicketStatus.PENDING,
                created_at=self._clock(),
            )
            self._tickets[ticket.ticket_id] = ticket
        self.journal.append(
            AuditEvent.REVIEW_OPENED,
            {
                "request_id": resolved.request_id,
                "ticket_id": ticket.ticket_id,
                "conflicts_present": ticket.has_conflicts,
            },
            at=ticket.created_at,
        )
        return ticket

    def sign_off(
        self,
        ticket_id: str,
        reviewer_id: str,
        action: str,
        verdict: Optional[Verdict] = None,
        reason: Optional[str] = None,
    ) -> Decision:
        """Close a pending ticket; the reviewer's outcome is authoritative.

        action is "approve" (final verdict = resolved verdict) or "override"
        (final verdict = reviewer's; an escalation entry is opened for
        secondary review). A ticket transitions at most once.
        """
        if action not in ("approve", "override"):
            raise ValueError(f"unknown sign-off action {action!r}")
        if action == "override":
            if verdict is None:
                raise ValueError("override requires a verdict")
            if not (reason or "").strip():
                raise EmptyOverrideReason("override requires a non-empty reason")

        with self._lock:
            ticket = self._tickets.get(ticket_id)
            if ticket is None:
                raise TicketNotFound(ticket_id)
            if ticket.status is not TicketStatus.PENDING:
                raise AlreadyClosed(ticket_id)

            closed_at = self._clock()
            final_verdict = ticket.decision.verdict if action == "approve" else verdict
            final = replace(
                ticket.decision,
                stage=Stage.FINAL,
                verdict=final_verdict,
                reviewer=reviewer_id,
                produced_at=closed_at,
            )
            status = TicketStatus.SIGNED_OFF if action == "approve" else TicketStatus.ESCALATED
            updated = replace(
                ticket,
                status=status,
                reviewer_verdict=final_verdict,
                reviewer_id=reviewer_id,
                reason=reason,
                closed_at=closed_at,
            )
            self._tickets[ticket_id] = updated
            if action == "override":
                escalation = Escalation(
                    ticket_id=ticket_id,
                    reason=reason or "",
                    opened_at=closed_at,
                )
                self._escalations.append(escalation)

        request_id = final.request_id
        if action == "approve":
            self.journal.append(
                AuditEvent.SIGNED_OFF,
                {"request_id": request_id, "ticket_id": ticket_id,
                 "reviewer_id": reviewer_id, "decision": final.to_dict()},
                at=closed_at,
            )
        else:
            self.journal.append(
                AuditEvent.OVERRIDDEN,
                {"request_id": request_id, "ticket_id": ticket_id,
                 "reviewer_id": reviewer_id, "reason": reason, "decision": final.to_dict()},
                at=closed_at,
            )
            self.journal.append(
                AuditEvent.ESCALATED,
                {"request_id": request_id, "ticket_id": ticket_id, "reason": reason},
                at=closed_at,
            )
        return final

    def ticket(self, ticket_id: str) -> ReviewTicket:
        ticket = self._tickets.get(ticket_id)
        if ticket is None:
            raise TicketNotFound(ticket_id)
        return ticket

    def tickets(self, status: Optional[TicketStatus] = None) -> list[ReviewTicket]:
        snapshot = list(self._tickets.values())
        if status is not None:
            snapshot = [t for t in snapshot if t.status is status]
        # Conflict-flagged first, then oldest first.
        snapshot.sort(key=lambda t: (not t.has_conflicts, t.created_at, t.ticket_id))
        return snapshot

    def escalations(self) -> list[Escalation]:
        return list(self._escalations)


class DecisionWorkflow:
    """End-to-end journey: submit, draft, resolve, enqueue for review.

    Shared by the CLI, the HTTP service, and the evaluation harness so the
    audit lineage is identical everywhere.
    """

    def __init__(
        self,
        ontology: Ontology,
        backend: DecisionBackendProtocol,
        journal: Journal,
        clock: Optional[Callable[[], str]] = None,
    ):
        self.ontology = ontology
        self.backend = backend
        self.journal = journal
        self.clock = clock or LogicalClock()
        self.reviews = ReviewCenter(journal, clock=self.clock)

    def process(self, request: AccessRequest,
                overrides: Optional[Mapping[str, str]] = None) -> tuple[PipelineRun, Decision, ReviewTicket]:
        """Drive one request from submission to a pending review ticket."""
        self.journal.append(
            AuditEvent.SUBMITTED,
            {"request_id": request.request_id, "request": request.to_dict()},
            at=self.clock(),
        )
        run = decide(self.ontology, request, overrides, self.backend, clock=self.clock)
        self.journal.append(
            AuditEvent.DRAFTED,
            {"request_id": request.request_id, "decision": run.decision.to_dict(),
             "backend_fault": run.backend_fault},
            at=self.clock(),
        )
        resolved = resolve(run, clock=self.clock)
        self.journal.append(
            AuditEvent.RESOLVED,
            {"request_id": request.request_id, "decision": resolved.to_dict()},
            at=self.clock(),
        )
        ticket = self.reviews.submit_for_review(resolved)
        return run, resolved, ticket
