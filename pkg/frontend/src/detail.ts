/**
 * Cluster detail view: every member message, label provenance, the manual
 * review checklist, and the verdict form.
 */

import { badges, escapeHtml } from "./html.js";
import type { ClusterDetail, ClusterMember, ProvenanceEntry } from "./types.js";

/**
 * What a human reviewer checks before calling a campaign malicious.  The
 * UI only displays the list; the judgement stays with the analyst.
 */
export const REVIEW_CHECKLIST: readonly string[] = [
  "Landing page layout matches a page already confirmed as bad",
  "Same message text was seen before pointing at a different landing site",
  "Offer or warning is implausible on its face (free prizes, urgent account scares)",
  "Landing domain shares hosting, registration, or naming traits with confirmed-bad sites",
];

function memberRow(member: ClusterMember): string {
  const landing = member.landing_url
    ? `<a href="${escapeHtml(member.landing_url)}" target="_blank" rel="noopener noreferrer">${escapeHtml(member.landing_url)}</a>`
    : "<span class='muted'>none</span>";
  const flags = [
    member.clicked ? "clicked" : "",
    member.vetoed ? "vetoed" : "",
  ]
    .filter(Boolean)
    .join(", ");
  return `
<tr data-record="${escapeHtml(member.id)}">
  <td class="title">${escapeHtml(member.title)}</td>
  <td class="body">${escapeHtml(member.body)}</td>
  <td>${escapeHtml(member.source_domain)}</td>
  <td class="landing">${landing}</td>
  <td>${escapeHtml(member.platform)}</td>
  <td>${badges(member.labels)}</td>
  <td class="flags">${escapeHtml(flags)}</td>
</tr>`;
}

function provenanceRow(entry: ProvenanceEntry): string {
  return `
<tr>
  <td>${entry.seq}</td>
  <td>${escapeHtml(entry.rule)}</td>
  <td>${escapeHtml(entry.target_kind)} ${escapeHtml(entry.target_id)}</td>
  <td>${escapeHtml(entry.label)}</td>
  <td>${escapeHtml(entry.detail)}</td>
</tr>`;
}

function verdictForm(detail: ClusterDetail): string {
  const recordOptions = detail.members
    .map(
      (m) =>
        `<option value="record:${escapeHtml(m.id)}">only ${escapeHtml(m.id)}</option>`,
    )
    .join("");
  return `
<form data-verdict>
  <h2>Verdict</h2>
  <label>Target
    <select name="target">
      <option value="cluster:${detail.id}">whole cluster (${detail.size} messages)</option>
      ${recordOptions}
    </select>
  </label>
  <label>Status
    <select name="status">
      <option value="malicious">malicious</option>
      <option value="benign">benign</option>
    </select>
  </label>
  <label>Analyst
    <input name="analyst" required placeholder="analyst id">
  </label>
  <button type="submit">Submit verdict</button>
  <button type="button" data-action="recompute">Recompute labels</button>
</form>`;
}

export function renderDetail(detail: ClusterDetail): string {
  const metaLink =
    detail.meta_id === null
      ? "<span class='muted'>no meta-cluster</span>"
      : `<a href="#/meta/${detail.meta_id}">meta-cluster ${detail.meta_id}</a>`;
  const checklist = REVIEW_CHECKLIST.map(
    (item) => `<li><label><input type="checkbox"> ${escapeHtml(item)}</label></li>`,
  ).join("");
  const members = detail.members.map(memberRow).join("");
  const provenance =
    detail.provenance.length === 0
      ? "<p class='muted'>no label history yet</p>"
      : `<table class="provenance">
  <thead><tr><th>#</th><th>rule</th><th>target</th><th>label</th><th>detail</th></tr></thead>
  <tbody>${detail.provenance.map(provenanceRow).join("")}</tbody>
</table>`;
  return `
<header class="detail-header">
  <a href="#/queue/1">back to queue</a>
  <h1>Cluster ${detail.id}</h1>
  <span class="size">${detail.size} messages</span>
  ${badges(detail.labels)}
  ${metaLink}
</header>
<p class="domains">
  <span>sources: ${escapeHtml(detail.source_domains.join(", ") || "none")}</span>
  <span>landing: ${escapeHtml(detail.landing_domains.join(", ") || "none")}</span>
</p>
<section class="review">
  <h2>Manual review checklist</h2>
  <ul class="checklist">${checklist}</ul>
  ${verdictForm(detail)}
</section>
<section class="members">
  <h2>Messages</h2>
  <table>
    <thead><tr><th>title</th><th>body</th><th>source</th><th>landing URL</th><th>platform</th><th>labels</th><th>flags</th></tr></thead>
    <tbody>${members}</tbody>
  </table>
</section>
<section class="history">
  <h2>Label provenance</h2>
  ${provenance}
</section>`;
}
