// Console view-model: queue ordering, sign-off validation, and state
// transitions. Pure logic, no DOM; the app layer renders from this.

import type { ApiClient, DecisionView, MetricReport, Ticket } from "./api.js";

export function sortPending(tickets: Ticket[]): Ticket[] {
  // Conflict-flagged first, then oldest first; ticket id as tiebreak.
  return [...tickets].sort((a, b) => {
    if (a.conflicts_present !== b.conflicts_present) {
      return a.conflicts_present ? -1 : 1;
    }
    if (a.created_at !== b.created_at) {
      return a.created_at < b.created_at ? -1 : 1;
    }
    return a.ticket_id < b.ticket_id ? -1 : 1;
  });
}

export function validateSignoff(action: "approve" | "override", reviewerId: string, reason: string): string | null {
  if (!reviewerId.trim()) {
    return "Enter a reviewer identity before signing off.";
  }
  if (action === "override" && !reason.trim()) {
    return "An override requires a written reason.";
  }
  return null;
}

export interface Toast {
  kind: "info" | "error" | "conflict";
  message: string;
}

export interface ConsoleSnapshot {
  offline: boolean;
  tickets: Ticket[];
  selected: Ticket | null;
  selectedNarrative: string | null;
  finalDecision: DecisionView | null;
  metrics: MetricReport | null;
  toast: Toast | null;
}

export class ConsoleStore {
  offline = false;
  tickets: Ticket[] = [];
  selected: Ticket | null = null;
  selectedNarrative: string | null = null;
  finalDecision: DecisionView | null = null;
  metrics: MetricReport | null = null;
  toast: Toast | null = null;

  constructor(private api: ApiClient) {}

  snapshot(): ConsoleSnapshot {
    return {
      offline: this.offline,
      tickets: this.tickets,
      selected: this.selected,
      selectedNarrative: this.selectedNarrative,
      finalDecision: this.finalDecision,
      metrics: this.metrics,
      toast: this.toast,
    };
  }

  async refresh(): Promise<void> {
    try {
      this.tickets = sortPending(await this.api.pendingReviews());
      this.offline = false;
      if (this.selected && !this.tickets.some((t) => t.ticket_id === this.selected!.ticket_id)) {
        // Ticket disappeared from the queue (reviewed elsewhere).
        this.selected = null;
        this.selectedNarrative = null;
      }
    } catch {
      this.offline = true;
    }
  }

  async refreshMetrics(): Promise<void> {
    try {
      this.metrics = await this.api.latestMetrics();
      this.offline = false;
    } catch {
      this.offline = true;
    }
  }

  async select(ticketId: string): Promise<void> {
    this.selected = this.tickets.find((t) => t.ticket_id === ticketId) ?? null;
    this.finalDecision = null;
    this.selectedNarrative = null;
    if (!this.selected) {
      return;
    }
    try {
      // The submission audit record carries the original request narrative.
      const records = await this.api.audit(this.selected.decision.request_id);
      const submitted = records.find((r) => r.event === "Submitted");
      const request = submitted?.payload?.request as { raw_narrative?: string } | undefined;
      this.selectedNarrative = request?.raw_narrative ?? null;
    } catch {
      this.selectedNarrative = null;
    }
  }

  async signoff(action: "approve" | "override", reviewerId: string, reason: string,
                overrideVerdictKind?: "Grant" | "ConditionalGrant" | "Deny"): Promise<void> {
    if (!this.selected) {
      this.toast = { kind: "error", message: "Select a ticket first." };
      return;
    }
    const validation = validateSignoff(action, reviewerId, reason);
    if (validation) {
      this.toast = { kind: "error", message: validation };
      return;
    }
    const ticketId = this.selected.ticket_id;
    const result = await this.api.signoff(
      ticketId,
      action === "approve"
        ? { action: "approve", reviewer_id: reviewerId }
        : {
            action: "override",
            reviewer_id: reviewerId,
            verdict: { kind: overrideVerdictKind ?? "Deny", obligations: [], recommendations: [], rationale: [] },
            reason,
          },
    );
    if (result.ok) {
      this.finalDecision = result.decision;
      this.toast = { kind: "info", message: `Ticket ${ticketId} finalized: ${result.decision.verdict.kind}` };
      this.tickets = this.tickets.filter((t) => t.ticket_id !== ticketId);
      this.selected = null;
      this.selectedNarrative = null;
    } else if (result.status === 409) {
      this.toast = { kind: "conflict", message: `Ticket ${ticketId} was already reviewed elsewhere.` };
      await this.refresh();
    } else {
      this.toast = { kind: "error", message: result.message };
    }
  }
}
