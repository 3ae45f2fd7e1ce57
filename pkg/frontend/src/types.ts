/**
 * Mirrors of the versioned `v1.*` payloads served by the triage API.
 *
 * These are plain data shapes; the client renders exactly what the server
 * sends and never derives labels or verdict state locally.
 */

export type VerdictStatus = "malicious" | "benign";
export type TargetKind = "cluster" | "record";

export interface SampleMessage {
  record_id: string;
  title: string;
  body: string;
}

export interface ClusterSummary {
  id: number;
  size: number;
  labels: string[];
  suspicious: boolean;
  source_domains: string[];
  landing_domains: string[];
  messages: SampleMessage[];
  meta_id: number | null;
}

export interface QueuePage {
  schema: "v1.clusters";
  page: number;
  pages: number;
  total: number;
  page_size: number;
  items: ClusterSummary[];
}

export interface ClusterMember {
  id: string;
  title: string;
  body: string;
  source_domain: string;
  landing_url: string | null;
  clicked: boolean;
  platform: string;
  labels: string[];
  vetoed: boolean;
}

export interface ProvenanceEntry {
  seq: number;
  rule: string;
  target_kind: string;
  target_id: string;
  label: string;
  detail: string;
}

export interface ClusterDetail extends ClusterSummary {
  schema: "v1.cluster";
  members: ClusterMember[];
  provenance: ProvenanceEntry[];
}

export interface Subgraph {
  clusters: number[];
  domains: string[];
  edges: [number, string][];
}

export interface MetaclusterDetail {
  schema: "v1.metacluster";
  id: number;
  labels: string[];
  cluster_ids: number[];
  domains: string[];
  subgraph: Subgraph;
}

export interface VerdictRequest {
  target_kind: TargetKind;
  target_id: number | string;
  status: VerdictStatus;
  analyst: string;
}

export interface JournalEntry {
  seq: number;
  at: string;
  analyst: string;
  target_kind: string;
  target_id: string;
  status: string;
  urls: string[];
}

export interface VerdictReceipt {
  schema: "v1.verdict";
  entry: JournalEntry;
  pending_entries: number;
}

export interface RecomputeDelta {
  schema: "v1.recompute";
  journal_head: number;
  applied_entries: number;
  newly_malicious: number;
  newly_suspicious: number;
  cleared: number;
  detail: {
    records_newly_malicious: string[];
    clusters_newly_suspicious: number[];
    records_cleared: string[];
    clusters_cleared: number[];
  };
}

export interface CostSummary {
  cpm: string;
  max_domain_clicks: number;
  max_domain_cost: string;
  mean_domain_cost: string;
}

export interface PipelineReport {
  schema: "v1.report";
  format: string;
  version: number;
  config_hash: string;
  seed: number;
  counts: Record<string, number>;
  mean_silhouette: number | null;
  cost: CostSummary;
}
