/**
 * Review queue rendering plus the pure helpers that decide which clusters
 * count as newly surfaced after a recompute.
 */

import { badges, escapeHtml } from "./html.js";
import type { ClusterSummary, QueuePage } from "./types.js";

export const QUEUE_FILTERS: readonly string[] = ["ad_campaign", "malicious", "suspicious"];

export interface QueueView {
  label: string;
  newIds?: ReadonlySet<number>;
}

/** Ids that are suspicious now but were not in the previous queue snapshot. */
export function newlySurfaced(
  before: readonly ClusterSummary[],
  after: readonly ClusterSummary[],
): Set<number> {
  const was = new Set(before.filter((c) => c.suspicious).map((c) => c.id));
  return new Set(after.filter((c) => c.suspicious && !was.has(c.id)).map((c) => c.id));
}

/** Move freshly surfaced clusters to the front, keeping server order otherwise. */
export function prependNew(
  items: readonly ClusterSummary[],
  newIds: ReadonlySet<number>,
): ClusterSummary[] {
  const fresh = items.filter((c) => newIds.has(c.id));
  const rest = items.filter((c) => !newIds.has(c.id));
  return [...fresh, ...rest];
}

export function queueHash(page: number, label: string): string {
  return label ? `#/queue/${page}/${label}` : `#/queue/${page}`;
}

function filterNav(active: string): string {
  const links = QUEUE_FILTERS.map((label) => {
    const cls = label === active ? "filter active" : "filter";
    return `<a class="${cls}" href="${queueHash(1, label)}">${escapeHtml(label)}</a>`;
  });
  const allCls = active === "" ? "filter active" : "filter";
  return `<nav class="filters"><a class="${allCls}" href="${queueHash(1, "")}">all</a> ${links.join(" ")}</nav>`;
}

function pager(page: QueuePage, label: string): string {
  if (page.pages <= 1) {
    return "";
  }
  const prev =
    page.page > 1
      ? `<a class="pager-link" href="${queueHash(page.page - 1, label)}">newer</a>`
      : "<span class='pager-link disabled'>newer</span>";
  const next =
    page.page < page.pages
      ? `<a class="pager-link" href="${queueHash(page.page + 1, label)}">older</a>`
      : "<span class='pager-link disabled'>older</span>";
  return `<footer class="pager">${prev} <span>page ${page.page} of ${page.pages}</span> ${next}</footer>`;
}

function card(item: ClusterSummary, isNew: boolean): string {
  const classes = ["cluster-card"];
  if (item.suspicious) {
    classes.push("suspicious");
  }
  if (isNew) {
    classes.push("new");
  }
  const samples = item.messages
    .map(
      (m) =>
        `<li><strong>${escapeHtml(m.title)}</strong> <span class="body">${escapeHtml(m.body)}</span></li>`,
    )
    .join("");
  const newBadge = isNew ? '<span class="badge new">newly surfaced</span> ' : "";
  return `
<article class="${classes.join(" ")}" data-cluster="${item.id}">
  <header>
    <a class="cluster-link" href="#/cluster/${item.id}">cluster ${item.id}</a>
    <span class="size">${item.size} messages</span>
    ${newBadge}${badges(item.labels)}
  </header>
  <p class="domains">
    <span>sources: ${escapeHtml(item.source_domains.join(", ") || "none")}</span>
    <span>landing: ${escapeHtml(item.landing_domains.join(", ") || "none")}</span>
  </p>
  <ul class="samples">${samples}</ul>
</article>`;
}

export function renderQueue(page: QueuePage, view: QueueView = { label: "" }): string {
  const newIds = view.newIds ?? new Set<number>();
  const header = `
<header class="queue-header">
  <h1>Review queue</h1>
  <span class="total">${page.total} cluster(s)</span>
  <button data-action="recompute">Recompute labels</button>
  <a class="report-link" href="#/report">pipeline report</a>
</header>
${filterNav(view.label)}`;
  if (page.items.length === 0) {
    return `${header}\n<p class="empty">Nothing to review.</p>`;
  }
  const cards = page.items.map((item) => card(item, newIds.has(item.id))).join("\n");
  return `${header}\n<section class="queue">${cards}</section>\n${pager(page, view.label)}`;
}
