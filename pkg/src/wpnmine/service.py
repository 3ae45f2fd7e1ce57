"""Analyst triage HTTP service.

Serves pipeline artifacts for review and accepts manual verdicts that
feed back into label propagation. The verdict journal is the only
mutable persistent state: it is append-only JSONL, and the current
label state is always reproducible by replaying it over the immutable
artifacts (labels up to the last recompute head; later entries stay
pending until the next explicit recompute).

Writes are serialized through a non-blocking mutation lock; a busy
lock answers 409 so the client can retry. Recompute relabels from
scratch on a snapshot and swaps the result in atomically.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .clustering import WpnCluster, load_clusters
from .config import PipelineConfig
from .ingest import Dataset, load_dataset
from .labeling import (
    CLUSTER_LABELS,
    LabelState,
    apply_campaign_labels,
    mark_known_malicious,
    propagate_malicious,
)
from .metacluster import (
    MetaCluster,
    build_bipartite,
    connected_components,
    flag_suspicious,
    propagate_ad_label,
)
from .psl import PublicSuffixList, bundled_psl
from .report import load_report, load_verdict_snapshot
from .verdicts import Verdict, canonicalize_url

PAGE_SIZE = 10
JOURNAL_NAME = "triage_journal.jsonl"
RECOMPUTE_LOG_NAME = "recompute_log.jsonl"

VERDICT_STATUSES = ("malicious", "benign")
TARGET_KINDS = ("cluster", "record")


@dataclass(frozen=True, slots=True)
class JournalEntry:
    seq: int
    at: str
    analyst: str
    target_kind: str
    target_id: str
    status: str
    urls: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "seq": self.seq,
            "at": self.at,
            "analyst": self.analyst,
            "target_kind": self.target_kind,
            "target_id": self.target_id,
            "status": self.status,
            "urls": list(self.urls),
        }

    @classmethod
    def from_json(cls, payload: dict) -> "JournalEntry":
        return cls(
            seq=payload["seq"],
            at=payload["at"],
            analyst=payload["analyst"],
            target_kind=payload["target_kind"],
            target_id=payload["target_id"],
            status=payload["status"],
            urls=tuple(payload["urls"]),
        )


class ApiError(Exception):
    def __init__(self, status_code: int, message: str) -> None:
        super().__init__(message)
        self.status_code = status_code
        self.message = message


def _now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class TriageService:
    """Owns the loaded artifacts, the journal, and the label state.

    Base artifacts (dataset, clustering, verdict snapshot) never change
    after load; only labels are derived and re-derived.
    """

    def __init__(self, artifact_dir: str | Path, config: PipelineConfig | None = None) -> None:
        self.dir = Path(artifact_dir)
        self.config = config or PipelineConfig()
        self.psl: PublicSuffixList = (
            PublicSuffixList.from_file(self.config.psl_path)
            if self.config.psl_path
            else bundled_psl()
        )
        self.mutation_lock = threading.Lock()
        self.journal: list[JournalEntry] = []
        self.applied_head = 0
        self.ready = False
        self.dataset: Dataset | None = None
        self._load()

    # -- loading and relabeling ------------------------------------

    def _load(self) -> None:
        dataset_path = self.dir / "dataset.jsonl"
        clusters_path = self.dir / "clusters.json"
        if not dataset_path.exists() or not clusters_path.exists():
            return
        self.dataset = load_dataset([dataset_path], self.psl)
        self.records_by_id = self.dataset.by_id()
        result = load_clusters(clusters_path)
        # strip any labels persisted by the pipeline; labels are derived here
        self.base_clusters: tuple[WpnCluster, ...] = tuple(
            c.with_labels(()) for c in result.clusters
        )
        self.clusters_by_id = {c.id: c for c in self.base_clusters}
        self.graph = build_bipartite(self.base_clusters)
        snapshot_path = self.dir / "verdicts.json"
        self.base_verdicts: dict[str, Verdict] = (
            load_verdict_snapshot(snapshot_path) if snapshot_path.exists() else {}
        )
        report_path = self.dir / "report.json"
        self.report = load_report(report_path) if report_path.exists() else None

        journal_path = self.dir / JOURNAL_NAME
        if journal_path.exists():
            with journal_path.open(encoding="utf-8") as fh:
                self.journal = [JournalEntry.from_json(json.loads(line)) for line in fh if line.strip()]
        self.applied_head = self._last_recompute_head()
        self.state, self.metas = self._relabel(self.applied_head)
        self.ready = True

    def _last_recompute_head(self) -> int:
        path = self.dir / RECOMPUTE_LOG_NAME
        if not path.exists():
            return 0
        head = 0
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    head = json.loads(line)["journal_head"]
        return head

    def _relabel(self, head: int) -> tuple[LabelState, list[MetaCluster]]:
        """Labels derived from artifacts plus journal entries up to head."""
        assert self.dataset is not None
        applied = [e for e in self.journal if e.seq <= head]

        snapshot = dict(self.base_verdicts)
        for entry in applied:
            verdict_status = entry.status
            for url in entry.urls:
                canonical = canonicalize_url(url)
                snapshot[canonical] = Verdict(
                    url=canonical,
                    status=verdict_status,
                    source="manual",
                    engine_hits=0,
                    fetched_at=entry.at,
                    note=f"analyst {entry.analyst}",
                )

        # last write per target decides the explicit veto, covering
        # records that have no landing URL for the snapshot to carry
        final: dict[tuple[str, str], JournalEntry] = {}
        for entry in applied:
            final[(entry.target_kind, entry.target_id)] = entry

        state = LabelState()
        apply_campaign_labels(self.base_clusters, state)
        mark_known_malicious(self.dataset.clusterable, snapshot, state)
        for (kind, target_id), entry in sorted(final.items(), key=lambda kv: kv[1].seq):
            if entry.status != "benign":
                continue
            record_ids = (
                self.clusters_by_id[int(target_id)].members
                if kind == "cluster" and int(target_id) in self.clusters_by_id
                else (target_id,)
            )
            for rid in record_ids:
                state.veto_record(rid, rule="triage:benign", detail=f"journal seq {entry.seq}")
        propagate_malicious(self.base_clusters, state)

        metas = connected_components(self.graph)
        metas, state = propagate_ad_label(metas, self.clusters_by_id, state)
        metas, state = flag_suspicious(
            metas,
            self.clusters_by_id,
            self.dataset.clusterable,
            state,
            duplicate_threshold=self.config.duplicate_ads_threshold,
            psl=self.psl,
        )
        return state, metas

    # -- queue and payloads ------------------------------------------

    def queue_order(self) -> list[WpnCluster]:
        def key(c: WpnCluster):
            suspicious = self.state.cluster_has(c.id, "suspicious")
            return (0 if suspicious else 1, -len(c.members), c.id)

        return sorted(self.base_clusters, key=key)

    def _meta_of(self, cluster_id: int) -> int | None:
        for meta in self.metas:
            if cluster_id in meta.cluster_ids:
                return meta.id
        return None

    def cluster_summary(self, cluster: WpnCluster) -> dict:
        assert self.dataset is not None
        by_id = self.records_by_id
        messages = [
            {"record_id": rid, "title": by_id[rid].title, "body": by_id[rid].body}
            for rid in cluster.members[:3]
        ]
        labels = sorted(self.state.cluster_labels.get(cluster.id, ()))
        return {
            "id": cluster.id,
            "size": len(cluster.members),
            "labels": labels,
            "suspicious": "suspicious" in labels,
            "source_domains": sorted(cluster.source_domains),
            "landing_domains": sorted(cluster.landing_domains),
            "messages": messages,
            "meta_id": self._meta_of(cluster.id),
        }

    def cluster_detail(self, cluster: WpnCluster) -> dict:
        assert self.dataset is not None
        by_id = self.records_by_id
        members = []
        for rid in cluster.members:
            record = by_id[rid]
            members.append(
                {
                    "id": rid,
                    "title": record.title,
                    "body": record.body,
                    "source_domain": record.source_etld1,
                    "landing_url": record.landing_url,
                    "clicked": record.clicked,
                    "platform": record.platform,
                    "labels": sorted(self.state.record_labels.get(rid, ())),
                    "vetoed": rid in self.state.vetoed_records,
                }
            )
        member_set = set(cluster.members)
        provenance = [
            {"seq": e.seq, "rule": e.rule, "target_kind": e.target_kind,
             "target_id": e.target_id, "label": e.label, "detail": e.detail}
            for e in self.state.log
            if (e.target_kind == "cluster" and e.target_id == str(cluster.id))
            or (e.target_kind == "record" and e.target_id in member_set)
        ]
        summary = self.cluster_summary(cluster)
        summary.update({"members": members, "provenance": provenance})
        return summary

    def metacluster_detail(self, meta: MetaCluster) -> dict:
        cluster_ids = sorted(meta.cluster_ids)
        id_set = set(cluster_ids)
        edges = [[cid, domain] for cid, domain in self.graph.edges if cid in id_set]
        return {
            "id": meta.id,
            "labels": sorted(meta.labels),
            "cluster_ids": cluster_ids,
            "domains": sorted(meta.domains),
            "subgraph": {
                "clusters": cluster_ids,
                "domains": sorted(meta.domains),
                "edges": edges,
            },
        }

    # -- mutations -----------------------------------------------------

    def append_verdict(self, payload: dict) -> JournalEntry:
        assert self.dataset is not None
        kind = payload.get("target_kind")
        status = payload.get("status")
        analyst = payload.get("analyst")
        target_id = payload.get("target_id")
        if kind not in TARGET_KINDS:
            raise ApiError(400, f"target_kind must be one of {TARGET_KINDS}")
        if status not in VERDICT_STATUSES:
            raise ApiError(400, f"status must be one of {VERDICT_STATUSES}")
        if not isinstance(analyst, str) or not analyst.strip():
            raise ApiError(400, "analyst must be a non-empty string")

        urls: list[str] = []
        if kind == "cluster":
            try:
                cluster = self.clusters_by_id[int(target_id)]
            except (KeyError, TypeError, ValueError):
                raise ApiError(404, f"unknown cluster {target_id!r}")
            by_id = self.records_by_id
            urls = [
                by_id[rid].landing_url
                for rid in cluster.members
                if by_id[rid].landing_url is not None
            ]
            target_id = str(cluster.id)
        else:
            if not isinstance(target_id, str) or target_id not in self.records_by_id:
                raise ApiError(404, f"unknown record {target_id!r}")
            landing = self.records_by_id[target_id].landing_url
            urls = [landing] if landing is not None else []

        entry = JournalEntry(
            seq=(self.journal[-1].seq + 1) if self.journal else 1,
            at=_now_iso(),
            analyst=analyst.strip(),
            target_kind=kind,
            target_id=target_id,
            status=status,
            urls=tuple(urls),
        )
        with (self.dir / JOURNAL_NAME).open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry.to_json(), ensure_ascii=False) + "\n")
        self.journal.append(entry)
        return entry

    def recompute(self) -> dict:
        head = self.journal[-1].seq if self.journal else 0
        if head == self.applied_head:
            return self._delta_payload(head, 0, [], [], [], [])

        previous = self.state
        state, metas = self._relabel(head)

        def diff(label: str, old: dict, new: dict, keys) -> tuple[list, list]:
            gained = [k for k in keys if label in new.get(k, ()) and label not in old.get(k, ())]
            lost = [k for k in keys if label in old.get(k, ()) and label not in new.get(k, ())]
            return gained, lost

        record_ids = sorted(set(previous.record_labels) | set(state.record_labels))
        cluster_ids = sorted(set(previous.cluster_labels) | set(state.cluster_labels))
        rec_gained, rec_lost = diff(
            "malicious", previous.record_labels, state.record_labels, record_ids
        )
        sus_gained, sus_lost = diff(
            "suspicious", previous.cluster_labels, state.cluster_labels, cluster_ids
        )

        applied = head - self.applied_head
        self.state, self.metas = state, metas
        self.applied_head = head
        payload = self._delta_payload(head, applied, rec_gained, sus_gained, rec_lost, sus_lost)
        with (self.dir / RECOMPUTE_LOG_NAME).open("a", encoding="utf-8") as fh:
            fh.write(
                json.dumps(
                    {
                        "at": _now_iso(),
                        "journal_head": head,
                        "newly_malicious": payload["newly_malicious"],
                        "newly_suspicious": payload["newly_suspicious"],
                        "cleared": payload["cleared"],
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
        return payload

    @staticmethod
    def _delta_payload(head, applied, rec_gained, sus_gained, rec_lost, sus_lost) -> dict:
        return {
            "schema": "v1.recompute",
            "journal_head": head,
            "applied_entries": applied,
            "newly_malicious": len(rec_gained),
            "newly_suspicious": len(sus_gained),
            "cleared": len(rec_lost) + len(sus_lost),
            "detail": {
                "records_newly_malicious": rec_gained,
                "clusters_newly_suspicious": sus_gained,
                "records_cleared": rec_lost,
                "clusters_cleared": sus_lost,
            },
        }


def create_app(
    artifact_dir: str | Path,
    config: PipelineConfig | None = None,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    service = TriageService(artifact_dir, config)
    app = FastAPI(title="wpnmine triage", docs_url=None, redoc_url=None)
    app.state.service = service

    def fail(status_code: int, message: str) -> JSONResponse:
        return JSONResponse({"error": message}, status_code=status_code)

    def guard():
        if not service.ready:
            raise ApiError(409, "artifacts missing; run the pipeline first")

    @app.exception_handler(ApiError)
    async def _api_error(_request, exc: ApiError):
        return fail(exc.status_code, exc.message)

    @app.get("/api/clusters")
    def list_clusters(label: str = "", page: int = 1):
        guard()
        if label and label not in CLUSTER_LABELS:
            raise ApiError(400, f"unknown label filter {label!r}; known: {CLUSTER_LABELS}")
        if page < 1:
            raise ApiError(400, "page must be >= 1")
        ordered = service.queue_order()
        if label:
            ordered = [c for c in ordered if service.state.cluster_has(c.id, label)]
        total = len(ordered)
        pages = (total + PAGE_SIZE - 1) // PAGE_SIZE
        start = (page - 1) * PAGE_SIZE
        items = [service.cluster_summary(c) for c in ordered[start : start + PAGE_SIZE]]
        return {
            "schema": "v1.clusters",
            "page": page,
            "pages": pages,
            "total": total,
            "page_size": PAGE_SIZE,
            "items": items,
        }

    @app.get("/api/clusters/{cluster_id}")
    def get_cluster(cluster_id: int):
        guard()
        cluster = service.clusters_by_id.get(cluster_id)
        if cluster is None:
            raise ApiError(404, f"unknown cluster {cluster_id}")
        payload = service.cluster_detail(cluster)
        payload["schema"] = "v1.cluster"
        return payload

    @app.get("/api/metaclusters/{meta_id}")
    def get_metacluster(meta_id: int):
        guard()
        for meta in service.metas:
            if meta.id == meta_id:
                payload = service.metacluster_detail(meta)
                payload["schema"] = "v1.metacluster"
                return payload
        raise ApiError(404, f"unknown meta-cluster {meta_id}")

    @app.post("/api/verdicts")
    async def post_verdict(request: Request):
        guard()
        try:
            payload = await request.json()
        except Exception:
            raise ApiError(400, "body must be JSON")
        if not isinstance(payload, dict):
            raise ApiError(400, "body must be a JSON object")
        if not service.mutation_lock.acquire(blocking=False):
            raise ApiError(409, "another mutation is in progress; retry")
        try:
            entry = service.append_verdict(payload)
        finally:
            service.mutation_lock.release()
        pending = entry.seq - service.applied_head
        return {"schema": "v1.verdict", "entry": entry.to_json(), "pending_entries": pending}

    @app.post("/api/recompute")
    def post_recompute():
        guard()
        if not service.mutation_lock.acquire(blocking=False):
            raise ApiError(409, "another mutation is in progress; retry")
        try:
            return service.recompute()
        finally:
            service.mutation_lock.release()

    @app.get("/api/report")
    def get_report():
        guard()
        if service.report is None:
            raise ApiError(404, "no report artifact")
        payload = service.report.to_json()
        payload["schema"] = "v1.report"
        return payload

    static_dir = Path(ui_dir) if ui_dir else Path("frontend") / "dist"
    if static_dir.is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
