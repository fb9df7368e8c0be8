// DOM wiring for the reviewer console: polling queue, detail pane with full
// rationale, sign-off actions, metrics dashboard.

import { ApiClient, actOfProvision, type DecisionView, type HealthInfo } from "./api.js";
import { boxPlotSvg, gaugeHtml } from "./boxplot.js";
import { ConsoleStore } from "./model.js";

const REFRESH_MS = 4000; // stays under the 5s freshness budget

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function verdictBadge(kind: string): string {
  const cls = kind === "Grant" ? "grant" : kind === "ConditionalGrant" ? "conditional" : "deny";
  return `<span class="badge ${cls}">${kind}</span>`;
}

function renderQueue(store: ConsoleStore): void {
  const list = el<HTMLUListElement>("queue");
  if (store.tickets.length === 0) {
    list.innerHTML = `<li class="empty">No pending reviews.</li>`;
    return;
  }
  list.innerHTML = store.tickets
    .map((t) => {
      const conflict = t.conflicts_present ? `<span class="badge conflict">conflicts</span>` : "";
      const selected = store.selected?.ticket_id === t.ticket_id ? "selected" : "";
      return (
        `<li class="ticket ${selected}" data-ticket="${t.ticket_id}">` +
        `<span class="ticket-id">${t.ticket_id}</span> ${conflict} ` +
        `${verdictBadge(t.decision.verdict.kind)} ` +
        `<span class="muted">${t.created_at}</span></li>`
      );
    })
    .join("");
}

function renderRationale(decision: DecisionView, actVersions: Record<string, string>): string {
  const rows = decision.verdict.rationale
    .map((citation) => {
      const act = actOfProvision(citation.provision_id);
      const version = act ? actVersions[act] ?? "" : "";
      return (
        `<tr><td>${citation.provision_id}</td>` +
        `<td>${act ?? "—"}${version ? ` (${version})` : ""}</td>` +
        `<td>${citation.condition}</td></tr>`
      );
    })
    .join("");
  return `<table class="rationale"><thead><tr><th>provision</th><th>act</th><th>conditions</th></tr></thead><tbody>${rows}</tbody></table>`;
}

function renderDetail(store: ConsoleStore, actVersions: Record<string, string>): void {
  const pane = el<HTMLDivElement>("detail");
  const t = store.selected;
  if (!t) {
    pane.innerHTML = store.finalDecision
      ? `<h3>Finalized</h3>${verdictBadge(store.finalDecision.verdict.kind)} by ${store.finalDecision.reviewer}`
      : `<p class="empty">Select a ticket to review.</p>`;
    return;
  }
  const d = t.decision;
  const channels = d.channels
    .map((c) => `<li><strong>${c.channel}</strong>: ${c.stance} <span class="muted">${c.basis.join("; ")}</span></li>`)
    .join("");
  const conflicts = d.conflicts.length
    ? `<ul class="conflicts">${d.conflicts.map((c) => `<li>${c.between.join(" vs ")}: ${c.detail}</li>`).join("")}</ul>`
    : `<p class="muted">No conflicts detected.</p>`;
  const duties = d.verdict.obligations.length
    ? `<p><strong>Obligations:</strong> ${d.verdict.obligations.join("; ")}</p>`
    : "";
  const advice = d.verdict.recommendations.length
    ? `<p><strong>Recommendations:</strong> ${d.verdict.recommendations.join("; ")}</p>`
    : "";
  pane.innerHTML = [
    `<h3>${t.ticket_id} ${verdictBadge(d.verdict.kind)}</h3>`,
    `<p><strong>Request:</strong> ${store.selectedNarrative ?? "(narrative unavailable)"}</p>`,
    duties,
    advice,
    `<h4>Provision citations</h4>`,
    renderRationale(d, actVersions),
    `<h4>Channel stances</h4><ul>${channels}</ul>`,
    `<h4>Conflicts</h4>${conflicts}`,
  ].join("\n");
}

function renderMetrics(store: ConsoleStore): void {
  const pane = el<HTMLDivElement>("metrics");
  const report = store.metrics;
  if (!report) {
    pane.innerHTML = `<p class="empty">No evaluation report yet.</p>`;
    return;
  }
  const categories = Object.entries(report.per_category).map(([name, stats]) => ({ name, stats }));
  pane.innerHTML = [
    gaugeHtml("Compliance", report.compliance_rate),
    gaugeHtml("Conflict resolution efficiency", report.conflict_resolution_efficiency),
    boxPlotSvg(categories),
    `<p class="muted">backend ${report.meta.backend_id}, corpus ${report.meta.corpus_hash.slice(0, 12)}…</p>`,
  ].join("\n");
}

function renderToast(store: ConsoleStore): void {
  const node = el<HTMLDivElement>("toast");
  if (!store.toast) {
    node.className = "toast hidden";
    node.textContent = "";
    return;
  }
  node.className = `toast ${store.toast.kind}`;
  node.textContent = store.toast.message;
}

function renderOffline(store: ConsoleStore): void {
  el<HTMLDivElement>("offline-banner").className = store.offline ? "banner" : "banner hidden";
}

async function start(): Promise<void> {
  const baseUrl = (document.body.dataset.baseUrl as string) || "http://127.0.0.1:8080";
  const api = new ApiClient(baseUrl);
  const store = new ConsoleStore(api);
  let actVersions: Record<string, string> = {};

  try {
    const health: HealthInfo = await api.health();
    actVersions = health.act_versions;
  } catch {
    store.offline = true;
  }

  const redraw = () => {
    renderOffline(store);
    renderQueue(store);
    renderDetail(store, actVersions);
    renderMetrics(store);
    renderToast(store);
  };

  el<HTMLUListElement>("queue").addEventListener("click", async (event) => {
    const item = (event.target as HTMLElement).closest<HTMLElement>("[data-ticket]");
    if (item?.dataset.ticket) {
      await store.select(item.dataset.ticket);
      redraw();
    }
  });

  const reviewerInput = el<HTMLInputElement>("reviewer-id");
  const reasonInput = el<HTMLInputElement>("override-reason");
  const verdictSelect = el<HTMLSelectElement>("override-verdict");

  el<HTMLButtonElement>("approve").addEventListener("click", async () => {
    await store.signoff("approve", reviewerInput.value, "");
    redraw();
  });
  el<HTMLButtonElement>("override").addEventListener("click", async () => {
    await store.signoff(
      "override",
      reviewerInput.value,
      reasonInput.value,
      verdictSelect.value as "Grant" | "ConditionalGrant" | "Deny",
    );
    redraw();
  });

  await store.refresh();
  await store.refreshMetrics();
  redraw();

  setInterval(async () => {
    await store.refresh();
    await store.refreshMetrics();
    redraw();
  }, REFRESH_MS);
}

start();
