// Typed client for the decision service. The console displays only what the
// API returns; nothing is recomputed client-side.

export interface ProvisionCitation {
  provision_id: string;
  condition: string;
}

export interface Verdict {
  kind: "Grant" | "ConditionalGrant" | "Deny";
  obligations: string[];
  recommendations: string[];
  rationale: ProvisionCitation[];
}

export interface ChannelVerdict {
  channel: "Ontology" | "ABAC" | "CAAC";
  stance: string;
  conditions: string[];
  basis: string[];
}

export interface Conflict {
  between: [string, string];
  kind: string;
  detail: string;
}

export interface DecisionView {
  stage: "Draft" | "Resolved" | "Final";
  verdict: Verdict;
  conflicts: Conflict[];
  channels: ChannelVerdict[];
  backend_id: string;
  request_id: string;
  reviewer: string | null;
  produced_at: string;
}

export interface Ticket {
  ticket_id: string;
  status: string;
  created_at: string;
  closed_at: string | null;
  reviewer_id: string | null;
  reason: string | null;
  conflicts_present: boolean;
  decision: DecisionView;
  reviewer_verdict: Verdict | null;
}

export interface AuditRecord {
  seq: number;
  event: string;
  at: string;
  payload: Record<string, unknown>;
}

export interface BoxStats {
  min: number;
  q1: number;
  median: number;
  q3: number;
  max: number;
}

export interface MetricReport {
  compliance_rate: number;
  conflict_resolution_efficiency: number | null;
  adaptability: number | null;
  per_category: Record<string, BoxStats>;
  meta: { backend_id: string; corpus_hash: string; timestamp: string | null; scenario_count: number };
}

export interface HealthInfo {
  status: string;
  act_versions: Record<string, string>;
  backend_id: string;
}

export type SignoffAction =
  | { action: "approve"; reviewer_id: string }
  | { action: "override"; reviewer_id: string; verdict: Partial<Verdict> & { kind: Verdict["kind"] }; reason: string };

export type SignoffResult =
  | { ok: true; decision: DecisionView }
  | { ok: false; status: number; code: string; message: string };

export class ApiClient {
  constructor(private baseUrl: string, private fetchFn: typeof fetch = fetch) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetchFn(this.url(path));
    if (!response.ok) {
      throw new Error(`GET ${path} -> ${response.status}`);
    }
    return (await response.json()) as T;
  }

  async health(): Promise<HealthInfo> {
    return this.getJson<HealthInfo>("/v1/health");
  }

  async pendingReviews(): Promise<Ticket[]> {
    const body = await this.getJson<{ tickets: Ticket[] }>("/v1/reviews?status=pending");
    return body.tickets;
  }

  async audit(requestId: string): Promise<AuditRecord[]> {
    const body = await this.getJson<{ records: AuditRecord[] }>(
      `/v1/audit?request_id=${encodeURIComponent(requestId)}`,
    );
    return body.records;
  }

  async latestMetrics(): Promise<MetricReport | null> {
    const response = await this.fetchFn(this.url("/v1/metrics/latest"));
    if (response.status === 404) {
      return null;
    }
    if (!response.ok) {
      throw new Error(`GET /v1/metrics/latest -> ${response.status}`);
    }
    return (await response.json()) as MetricReport;
  }

  async signoff(ticketId: string, action: SignoffAction): Promise<SignoffResult> {
    const response = await this.fetchFn(this.url(`/v1/reviews/${ticketId}/signoff`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(action),
    });
    if (response.ok) {
      const body = (await response.json()) as { decision: DecisionView };
      return { ok: true, decision: body.decision };
    }
    let code = "Error";
    let message = `signoff failed with ${response.status}`;
    try {
      const body = (await response.json()) as { code?: string; message?: string };
      code = body.code ?? code;
      message = body.message ?? message;
    } catch {
      // non-JSON error body; keep defaults
    }
    return { ok: false, status: response.status, code, message };
  }

  async postDecision(request: Record<string, unknown>, overrides?: Record<string, string>): Promise<{ decision: DecisionView; ticket_id: string }> {
    const body: Record<string, unknown> = { request };
    if (overrides) {
      body.context_overrides = overrides;
    }
    const response = await this.fetchFn(this.url("/v1/decisions"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) {
      throw new Error(`POST /v1/decisions -> ${response.status}`);
    }
    return (await response.json()) as { decision: DecisionView; ticket_id: string };
  }
}

// Acts are keyed by the provision id prefix; versions come from /v1/health.
const ACT_PREFIXES: Record<string, string> = {
  "pa-1988": "privacy-act-1988",
  "mhra-2012": "my-health-records-act-2012",
  "hra-2001": "health-records-act-2001",
};

export function actOfProvision(provisionId: string): string | null {
  const prefix = provisionId.split("/")[0];
  return ACT_PREFIXES[prefix] ?? null;
}
