/**
 * Bipartite meta-cluster view: clusters in the left column, landing
 * domains in the right column, one line per sharing edge.  Plain SVG,
 * no layout library.
 */

import { badges, escapeHtml } from "./html.js";
import type { MetaclusterDetail, Subgraph } from "./types.js";

const MARGIN = 40;
const LEFT_X = 120;
const RIGHT_PAD = 160;

export interface GraphLayout {
  width: number;
  height: number;
  clusters: { id: number; x: number; y: number }[];
  domains: { name: string; x: number; y: number }[];
  edges: { x1: number; y1: number; x2: number; y2: number }[];
}

export function layoutBipartite(sub: Subgraph, width = 560, rowGap = 48): GraphLayout {
  const rows = Math.max(sub.clusters.length, sub.domains.length, 1);
  const height = MARGIN * 2 + (rows - 1) * rowGap;
  const rightX = width - RIGHT_PAD;
  // shorter column sits vertically centered against the taller one
  const rowY = (count: number, index: number): number =>
    MARGIN + (index + (rows - count) / 2) * rowGap;
  const clusters = sub.clusters.map((id, i) => ({
    id,
    x: LEFT_X,
    y: rowY(sub.clusters.length, i),
  }));
  const domains = sub.domains.map((name, i) => ({
    name,
    x: rightX,
    y: rowY(sub.domains.length, i),
  }));
  const clusterY = new Map(clusters.map((node) => [node.id, node.y]));
  const domainY = new Map(domains.map((node) => [node.name, node.y]));
  const edges = sub.edges
    .filter(([cid, domain]) => clusterY.has(cid) && domainY.has(domain))
    .map(([cid, domain]) => ({
      x1: LEFT_X,
      y1: clusterY.get(cid) as number,
      x2: rightX,
      y2: domainY.get(domain) as number,
    }));
  return { width, height, clusters, domains, edges };
}

export function renderGraph(meta: MetaclusterDetail): string {
  const layout = layoutBipartite(meta.subgraph);
  const lines = layout.edges
    .map(
      (e) =>
        `<line class="edge" x1="${e.x1}" y1="${e.y1}" x2="${e.x2}" y2="${e.y2}"></line>`,
    )
    .join("");
  const clusterNodes = layout.clusters
    .map(
      (n) => `
<a href="#/cluster/${n.id}">
  <circle class="cluster-node" cx="${n.x}" cy="${n.y}" r="14"></circle>
  <text class="node-label" x="${n.x - 22}" y="${n.y + 4}" text-anchor="end">cluster ${n.id}</text>
</a>`,
    )
    .join("");
  const domainNodes = layout.domains
    .map(
      (n) => `
<g>
  <rect class="domain-node" x="${n.x - 10}" y="${n.y - 10}" width="20" height="20"></rect>
  <text class="node-label" x="${n.x + 18}" y="${n.y + 4}">${escapeHtml(n.name)}</text>
</g>`,
    )
    .join("");
  return `
<header class="detail-header">
  <a href="#/queue/1">back to queue</a>
  <h1>Meta-cluster ${meta.id}</h1>
  <span class="size">${meta.cluster_ids.length} cluster(s), ${meta.domains.length} shared domain(s)</span>
  ${badges(meta.labels)}
</header>
<section class="graph">
  <svg viewBox="0 0 ${layout.width} ${layout.height}" width="${layout.width}" height="${layout.height}" role="img">
    ${lines}
    ${clusterNodes}
    ${domainNodes}
  </svg>
</section>`;
}
