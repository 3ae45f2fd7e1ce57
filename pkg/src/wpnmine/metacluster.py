"""Cluster-to-landing-domain bipartite graph and its components.

Clusters sharing any landing eTLD+1 end up in the same connected
component (meta-cluster). Ad labels spread across a component when it
holds at least one campaign cluster; suspicion spreads when the
component touches a domain of a known-malicious URL or contains a
campaign cluster advertising across multiple landing domains.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .clustering import WpnCluster, landing_etld1
from .errors import ConfigError
from .labeling import LabelState
from .model import WpnRecord
from .psl import PublicSuffixList

META_LABELS = ("ad_related", "suspicious")


@dataclass(frozen=True, slots=True)
class BipartiteGraph:
    cluster_ids: tuple[int, ...]
    domains: tuple[str, ...]
    edges: tuple[tuple[int, str], ...]


@dataclass(frozen=True, slots=True)
class MetaCluster:
    id: int
    cluster_ids: tuple[int, ...]
    domains: frozenset[str]
    labels: frozenset[str] = frozenset()

    def with_labels(self, labels: Iterable[str]) -> "MetaCluster":
        return replace(self, labels=frozenset(labels))


def build_bipartite(clusters: Sequence[WpnCluster]) -> BipartiteGraph:
    """One node per cluster, one per distinct landing domain, edges
    wherever a cluster member lands on the domain."""
    edges: list[tuple[int, str]] = []
    domains: set[str] = set()
    for cluster in clusters:
        for domain in sorted(cluster.landing_domains):
            edges.append((cluster.id, domain))
            domains.add(domain)
    return BipartiteGraph(
        cluster_ids=tuple(c.id for c in clusters),
        domains=tuple(sorted(domains)),
        edges=tuple(edges),
    )


class _UnionFind:
    def __init__(self) -> None:
        self.parent: dict = {}

    def find(self, x):
        root = x
        while self.parent.setdefault(root, root) != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def connected_components(graph: BipartiteGraph) -> list[MetaCluster]:
    """Maximal components, ids assigned by smallest member cluster id."""
    uf = _UnionFind()
    for cid in graph.cluster_ids:
        uf.find(("c", cid))
    for domain in graph.domains:
        uf.find(("d", domain))
    for cid, domain in graph.edges:
        uf.union(("c", cid), ("d", domain))

    groups: dict[object, tuple[list[int], set[str]]] = {}
    for cid in graph.cluster_ids:
        root = uf.find(("c", cid))
        groups.setdefault(root, ([], set()))[0].append(cid)
    for domain in graph.domains:
        root = uf.find(("d", domain))
        if root in groups:
            groups[root][1].add(domain)

    ordered = sorted(groups.values(), key=lambda g: min(g[0]))
    return [
        MetaCluster(id=index, cluster_ids=tuple(sorted(cids)), domains=frozenset(doms))
        for index, (cids, doms) in enumerate(ordered)
    ]


def propagate_ad_label(
    metaclusters: Sequence[MetaCluster],
    clusters_by_id: Mapping[int, WpnCluster],
    state: LabelState,
) -> tuple[list[MetaCluster], LabelState]:
    """Everything in a component with a campaign cluster is an ad."""
    out: list[MetaCluster] = []
    for meta in metaclusters:
        campaign_ids = [
            cid for cid in meta.cluster_ids if state.cluster_has(cid, "ad_campaign")
        ]
        if not campaign_ids:
            out.append(meta)
            continue
        out.append(meta.with_labels(meta.labels | {"ad_related"}))
        for cid in meta.cluster_ids:
            for rid in clusters_by_id[cid].members:
                state.add_record_label(
                    rid,
                    "ad",
                    rule="meta-ad",
                    detail=f"meta-cluster {meta.id} via campaign cluster(s) "
                    f"{', '.join(map(str, campaign_ids[:5]))}",
                )
    return out, state


def duplicate_ad_clusters(
    clusters: Iterable[WpnCluster], state: LabelState, threshold: int = 2
) -> set[int]:
    """Campaign clusters whose ads land on several distinct domains."""
    if threshold < 2:
        raise ConfigError(f"duplicate-ads threshold must be >= 2, got {threshold}")
    return {
        c.id
        for c in clusters
        if state.cluster_has(c.id, "ad_campaign") and len(c.landing_domains) >= threshold
    }


def suspicious_domains(
    records: Iterable[WpnRecord], state: LabelState, psl: PublicSuffixList | None = None
) -> set[str]:
    """Landing eTLD+1s of every known-malicious record."""
    out: set[str] = set()
    for record in records:
        if record.landing_url is not None and state.record_has(record.id, "known_malicious"):
            out.add(landing_etld1(record, psl))
    return out


def flag_suspicious(
    metaclusters: Sequence[MetaCluster],
    clusters_by_id: Mapping[int, WpnCluster],
    records: Sequence[WpnRecord],
    state: LabelState,
    *,
    duplicate_threshold: int = 2,
    psl: PublicSuffixList | None = None,
) -> tuple[list[MetaCluster], LabelState]:
    """Mark suspicious components and their unlabeled contents.

    A component is suspicious when it touches a domain hosting a
    known-malicious URL, or contains a duplicate-ads campaign cluster.
    Records already malicious, and records under a manual benign veto,
    are left alone.
    """
    bad_domains = suspicious_domains(records, state, psl)
    duplicates = duplicate_ad_clusters(clusters_by_id.values(), state, duplicate_threshold)

    out: list[MetaCluster] = []
    for meta in metaclusters:
        domain_hit = bool(meta.domains & bad_domains)
        duplicate_hit = any(cid in duplicates for cid in meta.cluster_ids)
        if not (domain_hit or duplicate_hit):
            out.append(meta)
            continue
        reason = []
        if domain_hit:
            reason.append("touches domain of a known-malicious URL")
        if duplicate_hit:
            reason.append("contains duplicate-ads campaign cluster")
        detail = "; ".join(reason)
        out.append(meta.with_labels(meta.labels | {"suspicious"}))
        for cid in meta.cluster_ids:
            if not state.cluster_has(cid, "malicious"):
                state.add_cluster_label(cid, "suspicious", rule="meta-suspicious", detail=detail)
            for rid in clusters_by_id[cid].members:
                if state.record_has(rid, "malicious") or rid in state.vetoed_records:
                    continue
                state.add_record_label(rid, "suspicious", rule="meta-suspicious", detail=detail)
    return out, state


_MC_MAGIC = "wpnmine-metaclusters"


def save_metaclusters(
    metaclusters: Sequence[MetaCluster], graph: BipartiteGraph, path: str | Path
) -> None:
    """Write the documented meta-cluster file (JSON, one object)."""
    payload = {
        "format": _MC_MAGIC,
        "version": 1,
        "graph": {
            "cluster_ids": list(graph.cluster_ids),
            "domains": list(graph.domains),
            "edges": [[cid, domain] for cid, domain in graph.edges],
        },
        "metaclusters": [
            {
                "id": m.id,
                "cluster_ids": list(m.cluster_ids),
                "domains": sorted(m.domains),
                "labels": sorted(m.labels),
            }
            for m in metaclusters
        ],
    }
    Path(path).write_text(
        json.dumps(payload, ensure_ascii=False, indent=1, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def load_metaclusters(path: str | Path) -> tuple[list[MetaCluster], BipartiteGraph]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != _MC_MAGIC or payload.get("version") != 1:
        raise ConfigError(f"not a meta-cluster file: {path}")
    graph = BipartiteGraph(
        cluster_ids=tuple(payload["graph"]["cluster_ids"]),
        domains=tuple(payload["graph"]["domains"]),
        edges=tuple((cid, domain) for cid, domain in payload["graph"]["edges"]),
    )
    metas = [
        MetaCluster(
            id=m["id"],
            cluster_ids=tuple(m["cluster_ids"]),
            domains=frozenset(m["domains"]),
            labels=frozenset(m["labels"]),
        )
        for m in payload["metaclusters"]
    ]
    return metas, graph
