import { escapeHtml } from "./html.js";
import type { PipelineReport } from "./types.js";

export function renderReport(report: PipelineReport): string {
  const counts = Object.keys(report.counts)
    .sort()
    .map(
      (key) =>
        `<tr><td>${escapeHtml(key)}</td><td class="num">${report.counts[key]}</td></tr>`,
    )
    .join("");
  const silhouette =
    report.mean_silhouette === null ? "n/a" : report.mean_silhouette.toFixed(4);
  return `
<header class="detail-header">
  <a href="#/queue/1">back to queue</a>
  <h1>Pipeline report</h1>
  <span class="muted">config ${escapeHtml(report.config_hash)}, seed ${report.seed}</span>
</header>
<section class="report">
  <h2>Stage counts</h2>
  <table><tbody>${counts}</tbody></table>
  <h2>Clustering quality</h2>
  <p>mean silhouette: ${silhouette}</p>
  <h2>Spend estimate</h2>
  <table><tbody>
    <tr><td>CPM rate</td><td class="num">${escapeHtml(report.cost.cpm)}</td></tr>
    <tr><td>max clicks on one domain</td><td class="num">${report.cost.max_domain_clicks}</td></tr>
    <tr><td>max cost for one domain</td><td class="num">${escapeHtml(report.cost.max_domain_cost)}</td></tr>
    <tr><td>mean cost per domain</td><td class="num">${escapeHtml(report.cost.mean_domain_cost)}</td></tr>
  </tbody></table>
</section>`;
}
