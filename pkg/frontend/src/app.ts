/**
 * View wiring: hash routing, fetch-render cycle, verdict submission, and
 * the recompute loop that surfaces newly suspicious clusters.
 *
 * All session state lives on the server or in the URL hash, so a page
 * refresh lands the analyst exactly where they were.
 */

import { ApiError, TriageApi } from "./api.js";
import { renderDetail } from "./detail.js";
import { renderGraph } from "./graph.js";
import { escapeHtml } from "./html.js";
import { newlySurfaced, prependNew, renderQueue } from "./queue.js";
import { renderReport } from "./report.js";
import type { ClusterSummary, RecomputeDelta, TargetKind, VerdictStatus } from "./types.js";

export type Route =
  | { view: "queue"; page: number; label: string }
  | { view: "cluster"; id: number }
  | { view: "meta"; id: number }
  | { view: "report" };

export function parseRoute(hash: string): Route {
  const parts = hash.replace(/^#\/?/, "").split("/").filter(Boolean);
  if (parts[0] === "cluster" && parts.length >= 2) {
    const id = Number(parts[1]);
    if (Number.isInteger(id) && id >= 0) {
      return { view: "cluster", id };
    }
  }
  if (parts[0] === "meta" && parts.length >= 2) {
    const id = Number(parts[1]);
    if (Number.isInteger(id) && id >= 0) {
      return { view: "meta", id };
    }
  }
  if (parts[0] === "report") {
    return { view: "report" };
  }
  if (parts[0] === "queue") {
    const page = Number(parts[1] ?? "1");
    if (Number.isInteger(page) && page >= 1) {
      return { view: "queue", page, label: parts[2] ?? "" };
    }
  }
  return { view: "queue", page: 1, label: "" };
}

export function routeHash(route: Route): string {
  if (route.view === "cluster") {
    return `#/cluster/${route.id}`;
  }
  if (route.view === "meta") {
    return `#/meta/${route.id}`;
  }
  if (route.view === "report") {
    return "#/report";
  }
  return route.label ? `#/queue/${route.page}/${route.label}` : `#/queue/${route.page}`;
}

export function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    return err.status === 0
      ? `service unreachable: ${err.message}`
      : `request failed (${err.status}): ${err.message}`;
  }
  return String(err);
}

export function deltaNotice(delta: RecomputeDelta): string {
  const parts = [
    `${delta.applied_entries} verdict(s) applied`,
    `${delta.newly_malicious} record(s) newly malicious`,
    `${delta.detail.clusters_newly_suspicious.length} cluster(s) newly suspicious`,
  ];
  if (delta.cleared > 0) {
    parts.push(`${delta.cleared} record(s) cleared`);
  }
  return parts.join(", ");
}

export class App {
  private readonly api: TriageApi;
  private readonly root: HTMLElement;
  private lastQueue: ClusterSummary[] = [];
  private newIds: ReadonlySet<number> = new Set();
  private notice = "";

  constructor(api: TriageApi, root: HTMLElement) {
    this.api = api;
    this.root = root;
  }

  start(): void {
    window.addEventListener("hashchange", () => void this.render());
    void this.render();
  }

  async render(): Promise<void> {
    this.ensureScaffold();
    const route = parseRoute(window.location.hash);
    let body: string;
    try {
      body = await this.view(route);
    } catch (err) {
      // previous view stays in place; hash and server state are untouched
      this.banner(describeError(err), "error", () => void this.render());
      return;
    }
    const slot = this.root.querySelector("[data-view]");
    if (slot) {
      slot.innerHTML = body;
    }
    if (this.notice) {
      this.banner(this.notice, "notice");
      this.notice = "";
    } else {
      this.clearBanner();
    }
    this.bind();
  }

  private async view(route: Route): Promise<string> {
    if (route.view === "cluster") {
      return renderDetail(await this.api.cluster(route.id));
    }
    if (route.view === "meta") {
      return renderGraph(await this.api.metacluster(route.id));
    }
    if (route.view === "report") {
      return renderReport(await this.api.report());
    }
    const page = await this.api.queue(route.page, route.label);
    const html = renderQueue(
      { ...page, items: prependNew(page.items, this.newIds) },
      { label: route.label, newIds: this.newIds },
    );
    this.lastQueue = page.items;
    return html;
  }

  private ensureScaffold(): void {
    if (!this.root.querySelector("[data-view]")) {
      this.root.innerHTML = "<div data-banner></div><div data-view></div>";
    }
  }

  private banner(message: string, kind: "notice" | "error", retry?: () => void): void {
    const slot = this.root.querySelector("[data-banner]");
    if (!slot) {
      return;
    }
    const button = retry ? ' <button data-action="retry">Retry</button>' : "";
    slot.innerHTML = `<div class="banner ${kind}">${escapeHtml(message)}${button}</div>`;
    if (retry) {
      slot.querySelector("[data-action=retry]")?.addEventListener("click", retry);
    }
  }

  private clearBanner(): void {
    const slot = this.root.querySelector("[data-banner]");
    if (slot) {
      slot.innerHTML = "";
    }
  }

  private bind(): void {
    const form = this.root.querySelector<HTMLFormElement>("form[data-verdict]");
    if (form) {
      form.addEventListener("submit", (event) => {
        event.preventDefault();
        void this.handleVerdict(form);
      });
    }
    this.root.querySelectorAll("[data-action=recompute]").forEach((button) => {
      button.addEventListener("click", () => void this.handleRecompute());
    });
  }

  private async handleVerdict(form: HTMLFormElement): Promise<void> {
    const data = new FormData(form);
    const target = String(data.get("target") ?? "");
    const split = target.indexOf(":");
    const kind = target.slice(0, split) as TargetKind;
    const rawId = target.slice(split + 1);
    try {
      const receipt = await this.api.submitVerdict({
        target_kind: kind,
        target_id: kind === "cluster" ? Number(rawId) : rawId,
        status: String(data.get("status") ?? "") as VerdictStatus,
        analyst: String(data.get("analyst") ?? ""),
      });
      this.banner(
        `verdict #${receipt.entry.seq} recorded; ${receipt.pending_entries} pending until recompute`,
        "notice",
      );
    } catch (err) {
      // form stays in the DOM with its values; retry re-submits as-is
      this.banner(describeError(err), "error", () => void this.handleVerdict(form));
    }
  }

  private async handleRecompute(): Promise<void> {
    try {
      const delta = await this.api.recompute();
      const fresh = await this.api.queue(1, "");
      this.newIds = newlySurfaced(this.lastQueue, fresh.items);
      this.lastQueue = fresh.items;
      this.notice = deltaNotice(delta);
    } catch (err) {
      this.banner(describeError(err), "error", () => void this.handleRecompute());
      return;
    }
    if (window.location.hash === "#/queue/1") {
      void this.render();
    } else {
      window.location.hash = "#/queue/1";
    }
  }
}
