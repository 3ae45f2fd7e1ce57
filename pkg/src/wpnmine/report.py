"""Pipeline orchestration, the summary report, and the click-cost model.

``run_pipeline`` chains every stage and persists all artifacts into an
output directory. The report payload is fully deterministic for a
given (inputs, config) pair; volatile run metadata (timings, load
timestamps) goes to a separate side file so report bytes can be
compared directly.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation, ROUND_DOWN
from pathlib import Path
from typing import Sequence

from . import _kernels
from .clustering import ClusteringResult, cluster_wpns, save_clusters
from .config import PipelineConfig
from .embeddings import (
    EmbeddingTable,
    SgnsParams,
    TermSimilarityMatrix,
    build_vocab,
    save_embeddings,
    save_term_similarity,
    term_similarity,
    train_skipgram,
)
from .errors import ConfigError, PipelineError, WpnMineError
from .ingest import Dataset, dedup, load_dataset, save_dataset
from .labeling import LabelState, apply_campaign_labels, mark_known_malicious, propagate_malicious
from .metacluster import (
    MetaCluster,
    build_bipartite,
    connected_components,
    flag_suspicious,
    propagate_ad_label,
    save_metaclusters,
)
from .model import parse_url
from .psl import PublicSuffixList, bundled_psl
from .similarity import save_distance_matrix
from .verdicts import (
    FileStubScanner,
    LocalListProvider,
    ManualBlacklist,
    Verdict,
    VerdictStore,
    resolve_all,
)


def estimate_click_cost(clicks: int, cpm) -> Decimal:
    """Dollar cost of ``clicks`` ad clicks at the given CPM, truncated
    to whole cents (never rounded up)."""
    try:
        rate = Decimal(str(cpm))
    except InvalidOperation:
        raise ConfigError(f"invalid CPM value: {cpm!r}") from None
    if clicks < 0 or rate < 0:
        raise ConfigError("clicks and CPM must be non-negative")
    cost = Decimal(clicks) * rate / Decimal(1000)
    return cost.quantize(Decimal("0.01"), rounding=ROUND_DOWN)


@dataclass(frozen=True, slots=True)
class PipelineReport:
    """Stage counts plus the cost summary; schema mirrors the run
    artifacts, not any external table."""

    config_hash: str
    seed: int
    total_records: int
    clusterable_records: int
    dedup_removed: int
    clusters: int
    singletons: int
    selected_k: int
    mean_silhouette: float
    ad_campaigns: int
    ad_records: int
    known_malicious_records: int
    malicious_records: int
    malicious_clusters: int
    suspicious_records: int
    suspicious_clusters: int
    metaclusters: int
    ad_related_metaclusters: int
    suspicious_metaclusters: int
    cpm: str
    max_domain_clicks: int
    max_domain_cost: str
    mean_domain_cost: str

    def to_json(self) -> dict:
        return {
            "format": "wpnmine-report",
            "version": 1,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "counts": {
                "total_records": self.total_records,
                "clusterable_records": self.clusterable_records,
                "dedup_removed": self.dedup_removed,
                "clusters": self.clusters,
                "singletons": self.singletons,
                "selected_k": self.selected_k,
                "ad_campaigns": self.ad_campaigns,
                "ad_records": self.ad_records,
                "known_malicious_records": self.known_malicious_records,
                "malicious_records": self.malicious_records,
                "malicious_clusters": self.malicious_clusters,
                "suspicious_records": self.suspicious_records,
                "suspicious_clusters": self.suspicious_clusters,
                "metaclusters": self.metaclusters,
                "ad_related_metaclusters": self.ad_related_metaclusters,
                "suspicious_metaclusters": self.suspicious_metaclusters,
            },
            "mean_silhouette": self.mean_silhouette,
            "cost": {
                "cpm": self.cpm,
                "max_domain_clicks": self.max_domain_clicks,
                "max_domain_cost": self.max_domain_cost,
                "mean_domain_cost": self.mean_domain_cost,
            },
        }

    @classmethod
    def from_json(cls, payload: dict) -> "PipelineReport":
        if payload.get("format") != "wpnmine-report" or payload.get("version") != 1:
            raise ConfigError("not a report payload")
        counts = payload["counts"]
        cost = payload["cost"]
        return cls(
            config_hash=payload["config_hash"],
            seed=payload["seed"],
            total_records=counts["total_records"],
            clusterable_records=counts["clusterable_records"],
            dedup_removed=counts["dedup_removed"],
            clusters=counts["clusters"],
            singletons=counts["singletons"],
            selected_k=counts["selected_k"],
            mean_silhouette=payload["mean_silhouette"],
            ad_campaigns=counts["ad_campaigns"],
            ad_records=counts["ad_records"],
            known_malicious_records=counts["known_malicious_records"],
            malicious_records=counts["malicious_records"],
            malicious_clusters=counts["malicious_clusters"],
            suspicious_records=counts["suspicious_records"],
            suspicious_clusters=counts["suspicious_clusters"],
            metaclusters=counts["metaclusters"],
            ad_related_metaclusters=counts["ad_related_metaclusters"],
            suspicious_metaclusters=counts["suspicious_metaclusters"],
            cpm=cost["cpm"],
            max_domain_clicks=cost["max_domain_clicks"],
            max_domain_cost=cost["max_domain_cost"],
            mean_domain_cost=cost["mean_domain_cost"],
        )

    def canonical_bytes(self) -> bytes:
        return (
            json.dumps(self.to_json(), ensure_ascii=False, indent=1, sort_keys=True) + "\n"
        ).encode("utf-8")

    def table(self) -> str:
        counts = self.to_json()["counts"]
        width = max(len(k) for k in counts)
        lines = [f"{'stage count':<{width}}  value"]
        for key, value in counts.items():
            lines.append(f"{key:<{width}}  {value}")
        lines.append("")
        lines.append(
            f"cost model: cpm={self.cpm}, max domain cost ${self.max_domain_cost} "
            f"({self.max_domain_clicks} clicks), mean ${self.mean_domain_cost}"
        )
        return "\n".join(lines)


@dataclass(frozen=True, slots=True)
class PipelineArtifacts:
    dataset: Dataset
    embeddings: EmbeddingTable
    term_sim: TermSimilarityMatrix
    clustering: ClusteringResult
    metaclusters: list[MetaCluster]
    label_state: LabelState
    verdict_snapshot: dict[str, Verdict]
    report: PipelineReport


def _click_costs(dataset: Dataset, cpm: str, psl: PublicSuffixList | None):
    clicks: dict[str, int] = {}
    for record in dataset.records:
        if record.clicked and record.landing_url is not None:
            domain = parse_url(record.landing_url, psl).etld1
            clicks[domain] = clicks.get(domain, 0) + 1
    if not clicks:
        return 0, estimate_click_cost(0, cpm), estimate_click_cost(0, cpm)
    max_clicks = max(clicks.values())
    costs = [estimate_click_cost(c, cpm) for c in clicks.values()]
    mean = (sum(costs) / len(costs)).quantize(Decimal("0.01"), rounding=ROUND_DOWN)
    return max_clicks, estimate_click_cost(max_clicks, cpm), mean


def build_providers(config: PipelineConfig):
    providers = []
    if config.manual_blacklist:
        providers.append(ManualBlacklist(config.manual_blacklist))
    if config.local_blacklist:
        providers.append(LocalListProvider.from_file(config.local_blacklist))
    if config.scanner_stub_dir:
        providers.append(FileStubScanner(config.scanner_stub_dir, min_hits=config.min_engine_hits))
    return providers


def run_pipeline(
    config: PipelineConfig,
    inputs: Sequence[str | Path] | None = None,
    out_dir: str | Path | None = None,
    *,
    dataset: Dataset | None = None,
    verdict_snapshot: dict[str, Verdict] | None = None,
    now=None,
) -> PipelineArtifacts:
    """Run ingest through meta-labeling and assemble the report.

    Either ``inputs`` (JSONL paths) or a preloaded ``dataset`` must be
    given. When ``out_dir`` is set, every artifact is written there
    after the run completes; nothing is persisted on failure. A
    pre-resolved ``verdict_snapshot`` bypasses the provider chain,
    which is how a persisted snapshot replays to identical labels.
    """
    psl = (
        PublicSuffixList.from_file(config.psl_path) if config.psl_path else bundled_psl()
    )
    timings: dict[str, float] = {}

    def staged(stage: str, fn, *args, **kwargs):
        start = time.perf_counter()
        try:
            result = fn(*args, **kwargs)
        except WpnMineError:
            raise
        except Exception as exc:
            raise PipelineError(stage, str(exc)) from exc
        timings[stage] = timings.get(stage, 0.0) + (time.perf_counter() - start)
        return result

    if dataset is None:
        if not inputs:
            raise ConfigError("run_pipeline needs input paths or a dataset")
        dataset = staged("ingest", load_dataset, inputs, psl)
    total_records = dataset.total_count

    deduped, removed = staged("dedup", dedup, dataset.records)
    dataset = Dataset(records=tuple(deduped), provenance=dataset.provenance)

    vocab = staged("embed", build_vocab, dataset.records, config.min_count)
    params = SgnsParams(
        dim=config.dim,
        window=config.window,
        negatives=config.negatives,
        epochs=config.epochs,
        lr=config.lr,
        seed=config.seed,
    )
    table = staged("embed", train_skipgram, dataset.records, vocab, params)
    sim = staged("embed", term_similarity, table, config.sim_threshold, config.sim_top_k)

    clusterable = dataset.clusterable
    if len(clusterable) < 2:
        raise PipelineError(
            "cluster", f"need at least 2 clusterable records, got {len(clusterable)}"
        )
    clustering = staged(
        "cluster",
        cluster_wpns,
        clusterable,
        sim,
        vocab,
        method=config.linkage,
        text_weight=config.text_weight,
        k_values=list(config.k_values) or None,
        psl=psl,
    )

    if verdict_snapshot is None:
        providers = build_providers(config)
        store = VerdictStore()
        urls = [r.landing_url for r in clusterable]
        verdict_snapshot = staged(
            "verdicts",
            resolve_all,
            urls,
            providers,
            store,
            ttl_days=config.verdict_ttl_days,
            now=now,
        )

    state = LabelState()
    staged("label", apply_campaign_labels, clustering.clusters, state)
    staged("label", mark_known_malicious, clusterable, verdict_snapshot, state)
    staged("label", propagate_malicious, clustering.clusters, state)

    clusters_by_id = {c.id: c for c in clustering.clusters}
    graph = staged("meta", build_bipartite, clustering.clusters)
    metas = staged("meta", connected_components, graph)
    metas, state = staged("meta", propagate_ad_label, metas, clusters_by_id, state)
    metas, state = staged(
        "meta",
        flag_suspicious,
        metas,
        clusters_by_id,
        clusterable,
        state,
        duplicate_threshold=config.duplicate_ads_threshold,
        psl=psl,
    )

    labeled_clusters = tuple(
        c.with_labels(state.cluster_labels.get(c.id, ())) for c in clustering.clusters
    )
    clustering = dataclasses.replace(clustering, clusters=labeled_clusters)

    max_clicks, max_cost, mean_cost = _click_costs(dataset, config.cpm, psl)

    malicious_records = state.records_with("malicious")
    suspicious_records = state.records_with("suspicious")
    if malicious_records & suspicious_records:
        raise PipelineError("report", "a record is both malicious and suspicious")
    known = state.records_with("known_malicious")
    if not known <= malicious_records:
        raise PipelineError("report", "known_malicious outside malicious set")

    report = PipelineReport(
        config_hash=config.hash(),
        seed=config.seed,
        total_records=total_records,
        clusterable_records=len(clusterable),
        dedup_removed=removed,
        clusters=len(clustering.clusters),
        singletons=sum(1 for c in clustering.clusters if len(c.members) == 1),
        selected_k=clustering.k,
        mean_silhouette=clustering.mean_silhouette,
        ad_campaigns=len(state.clusters_with("ad_campaign")),
        ad_records=len(state.records_with("ad")),
        known_malicious_records=len(known),
        malicious_records=len(malicious_records),
        malicious_clusters=len(state.clusters_with("malicious")),
        suspicious_records=len(suspicious_records),
        suspicious_clusters=len(state.clusters_with("suspicious")),
        metaclusters=len(metas),
        ad_related_metaclusters=sum(1 for m in metas if "ad_related" in m.labels),
        suspicious_metaclusters=sum(1 for m in metas if "suspicious" in m.labels),
        cpm=config.cpm,
        max_domain_clicks=max_clicks,
        max_domain_cost=str(max_cost),
        mean_domain_cost=str(mean_cost),
    )

    artifacts = PipelineArtifacts(
        dataset=dataset,
        embeddings=table,
        term_sim=sim,
        clustering=clustering,
        metaclusters=metas,
        label_state=state,
        verdict_snapshot=verdict_snapshot,
        report=report,
    )
    if out_dir is not None:
        persist_artifacts(artifacts, config, Path(out_dir), graph=graph, timings=timings)
    return artifacts


def persist_artifacts(
    artifacts: PipelineArtifacts,
    config: PipelineConfig,
    out_dir: Path,
    *,
    graph=None,
    timings: dict[str, float] | None = None,
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    save_dataset(artifacts.dataset, out_dir / "dataset.jsonl")
    save_embeddings(artifacts.embeddings, out_dir / "embeddings.bin")
    save_term_similarity(artifacts.term_sim, out_dir / "term_similarity.bin")
    if artifacts.clustering.matrix is not None:
        save_distance_matrix(artifacts.clustering.matrix, out_dir / "distances.bin")
    save_clusters(artifacts.clustering, out_dir / "clusters.json")
    if graph is None:
        graph = build_bipartite(artifacts.clustering.clusters)
    save_metaclusters(artifacts.metaclusters, graph, out_dir / "metaclusters.json")
    artifacts.label_state.save(out_dir / "labels.json")
    snapshot = {
        "format": "wpnmine-verdicts",
        "version": 1,
        "verdicts": {u: v.to_json() for u, v in sorted(artifacts.verdict_snapshot.items())},
    }
    (out_dir / "verdicts.json").write_text(
        json.dumps(snapshot, ensure_ascii=False, indent=1, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    (out_dir / "report.json").write_bytes(artifacts.report.canonical_bytes())
    (out_dir / "config.txt").write_text(config.to_text(), encoding="utf-8")
    run_meta = {
        "backend": _kernels.BACKEND_NAME,
        "timings_s": {k: round(v, 6) for k, v in (timings or {}).items()},
        "loaded_at": artifacts.dataset.provenance.loaded_at,
        "sources": list(artifacts.dataset.provenance.sources),
    }
    (out_dir / "run_meta.json").write_text(
        json.dumps(run_meta, ensure_ascii=False, indent=1, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def load_report(path: str | Path) -> PipelineReport:
    return PipelineReport.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def load_verdict_snapshot(path: str | Path) -> dict[str, Verdict]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != "wpnmine-verdicts" or payload.get("version") != 1:
        raise ConfigError(f"not a verdict snapshot: {path}")
    return {u: Verdict.from_json(v) for u, v in payload["verdicts"].items()}
