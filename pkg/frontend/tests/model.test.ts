import { describe, expect, it } from "vitest";

import type { DecisionView, SignoffResult, Ticket } from "../src/api.js";
import { ConsoleStore, sortPending, validateSignoff } from "../src/model.js";

function ticket(id: string, createdAt: string, conflicts = false): Ticket {
  const decision: DecisionView = {
    stage: "Resolved",
    verdict: { kind: "ConditionalGrant", obligations: [], recommendations: [], rationale: [] },
    conflicts: conflicts ? [{ between: ["ABAC", "Ontology"], kind: "StanceDisagreement", detail: "x" }] : [],
    channels: [],
    backend_id: "deterministic",
    request_id: `req-${id}`,
    reviewer: null,
    produced_at: createdAt,
  };
  return {
    ticket_id: id,
    status: "Pending",
    created_at: createdAt,
    closed_at: null,
    reviewer_id: null,
    reason: null,
    conflicts_present: conflicts,
    decision,
    reviewer_verdict: null,
  };
}

describe("sortPending", () => {
  it("puts conflict-flagged tickets first, then oldest first", () => {
    const tickets = [
      ticket("tkt-3", "2026-01-03T00:00:00Z"),
      ticket("tkt-1", "2026-01-01T00:00:00Z"),
      ticket("tkt-2", "2026-01-02T00:00:00Z", true),
    ];
    expect(sortPending(tickets).map((t) => t.ticket_id)).toEqual(["tkt-2", "tkt-1", "tkt-3"]);
  });
});

describe("validateSignoff", () => {
  it("requires a reviewer identity", () => {
    expect(validateSignoff("approve", "  ", "")).toMatch(/reviewer identity/);
  });
  it("blocks override without a reason client-side", () => {
    expect(validateSignoff("override", "dr-lee", "  ")).toMatch(/reason/);
  });
  it("passes a well-formed approve", () => {
    expect(validateSignoff("approve", "dr-lee", "")).toBeNull();
  });
});

// Fake ApiClient: just the methods ConsoleStore touches.
class FakeApi {
  tickets: Ticket[] = [];
  signoffResult: SignoffResult = {
    ok: true,
    decision: {
      stage: "Final",
      verdict: { kind: "ConditionalGrant", obligations: [], recommendations: [], rationale: [] },
      conflicts: [],
      channels: [],
      backend_id: "deterministic",
      request_id: "req-tkt-1",
      reviewer: "dr-lee",
      produced_at: "t",
    },
  };
  failPending = false;

  async pendingReviews(): Promise<Ticket[]> {
    if (this.failPending) throw new Error("offline");
    return this.tickets;
  }
  async latestMetrics() {
    return null;
  }
  async audit() {
    return [
      { seq: 1, event: "Submitted", at: "t", payload: { request: { raw_narrative: "the narrative" } } },
    ];
  }
  async signoff(): Promise<SignoffResult> {
    return this.signoffResult;
  }
}

function storeWith(api: FakeApi): ConsoleStore {
  return new ConsoleStore(api as never);
}

describe("ConsoleStore", () => {
  it("refresh pulls and sorts the queue; select loads the narrative", async () => {
    const api = new FakeApi();
    api.tickets = [ticket("tkt-2", "2026-01-02T00:00:00Z"), ticket("tkt-1", "2026-01-01T00:00:00Z")];
    const store = storeWith(api);
    await store.refresh();
    expect(store.tickets.map((t) => t.ticket_id)).toEqual(["tkt-1", "tkt-2"]);
    await store.select("tkt-1");
    expect(store.selectedNarrative).toBe("the narrative");
  });

  it("approve removes the ticket and records the final verdict", async () => {
    const api = new FakeApi();
    api.tickets = [ticket("tkt-1", "t1")];
    const store = storeWith(api);
    await store.refresh();
    await store.select("tkt-1");
    await store.signoff("approve", "dr-lee", "");
    expect(store.tickets).toHaveLength(0);
    expect(store.finalDecision?.verdict.kind).toBe("ConditionalGrant");
    expect(store.toast?.kind).toBe("info");
  });

  it("409 shows the already-reviewed toast and refreshes", async () => {
    const api = new FakeApi();
    api.tickets = [ticket("tkt-1", "t1")];
    const store = storeWith(api);
    await store.refresh();
    await store.select("tkt-1");
    api.signoffResult = { ok: false, status: 409, code: "AlreadyClosed", message: "gone" };
    api.tickets = []; // queue state after the other session won
    await store.signoff("approve", "dr-lee", "");
    expect(store.toast?.kind).toBe("conflict");
    expect(store.tickets).toHaveLength(0);
    expect(store.finalDecision).toBeNull();
  });

  it("override without reason never reaches the API", async () => {
    const api = new FakeApi();
    api.tickets = [ticket("tkt-1", "t1")];
    const store = storeWith(api);
    await store.refresh();
    await store.select("tkt-1");
    api.signoffResult = { ok: false, status: 500, code: "Boom", message: "should not be called" };
    await store.signoff("override", "dr-lee", "   ");
    expect(store.toast?.kind).toBe("error");
    expect(store.tickets).toHaveLength(1); // nothing changed
  });

  it("transport failure flips the offline banner", async () => {
    const api = new FakeApi();
    api.failPending = true;
    const store = storeWith(api);
    await store.refresh();
    expect(store.offline).toBe(true);
    api.failPending = false;
    await store.refresh();
    expect(store.offline).toBe(false);
  });
});
