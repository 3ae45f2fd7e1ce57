"""Campaign and maliciousness labels with provenance.

Labels only ever accumulate; the single exception is the manual benign
veto, which does not remove labels but blocks future propagation onto
that record. Provenance entries use logical sequence numbers rather
than wall-clock time so identical runs serialize identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .clustering import WpnCluster
from .errors import ConfigError
from .model import WpnRecord
from .verdicts import Verdict, canonicalize_url

RECORD_LABELS = ("known_malicious", "malicious", "suspicious", "ad")
CLUSTER_LABELS = ("ad_campaign", "malicious", "suspicious")


@dataclass(frozen=True, slots=True)
class ProvenanceEntry:
    seq: int
    rule: str
    target_kind: str  # "record" or "cluster"
    target_id: str
    label: str
    detail: str = ""


class LabelState:
    """Single-owner mutable label store.

    Readers get plain copies; all mutation goes through the add/veto
    methods so every label carries at least one provenance entry.
    """

    def __init__(self) -> None:
        self.record_labels: dict[str, set[str]] = {}
        self.cluster_labels: dict[int, set[str]] = {}
        self.vetoed_records: set[str] = set()
        self.log: list[ProvenanceEntry] = []

    def _append(self, rule: str, kind: str, target: str, label: str, detail: str) -> None:
        self.log.append(
            ProvenanceEntry(
                seq=len(self.log),
                rule=rule,
                target_kind=kind,
                target_id=target,
                label=label,
                detail=detail,
            )
        )

    def add_record_label(self, record_id: str, label: str, rule: str, detail: str = "") -> bool:
        if label not in RECORD_LABELS:
            raise ConfigError(f"unknown record label {label!r}")
        labels = self.record_labels.setdefault(record_id, set())
        if label in labels:
            return False
        labels.add(label)
        self._append(rule, "record", record_id, label, detail)
        if label == "known_malicious" and "malicious" not in labels:
            labels.add("malicious")
            self._append(rule, "record", record_id, "malicious", "implied by known_malicious")
        return True

    def add_cluster_label(self, cluster_id: int, label: str, rule: str, detail: str = "") -> bool:
        if label not in CLUSTER_LABELS:
            raise ConfigError(f"unknown cluster label {label!r}")
        labels = self.cluster_labels.setdefault(cluster_id, set())
        if label in labels:
            return False
        labels.add(label)
        self._append(rule, "cluster", str(cluster_id), label, detail)
        return True

    def veto_record(self, record_id: str, rule: str, detail: str = "") -> bool:
        if record_id in self.vetoed_records:
            return False
        self.vetoed_records.add(record_id)
        self._append(rule, "record", record_id, "benign_veto", detail)
        return True

    def record_has(self, record_id: str, label: str) -> bool:
        return label in self.record_labels.get(record_id, ())

    def cluster_has(self, cluster_id: int, label: str) -> bool:
        return label in self.cluster_labels.get(cluster_id, ())

    def records_with(self, label: str) -> set[str]:
        return {rid for rid, labels in self.record_labels.items() if label in labels}

    def clusters_with(self, label: str) -> set[int]:
        return {cid for cid, labels in self.cluster_labels.items() if label in labels}

    def to_json(self) -> dict:
        return {
            "format": "wpnmine-labels",
            "version": 1,
            "records": {rid: sorted(labels) for rid, labels in sorted(self.record_labels.items())},
            "clusters": {
                str(cid): sorted(labels) for cid, labels in sorted(self.cluster_labels.items())
            },
            "vetoed_records": sorted(self.vetoed_records),
            "log": [
                {
                    "seq": e.seq,
                    "rule": e.rule,
                    "target_kind": e.target_kind,
                    "target_id": e.target_id,
                    "label": e.label,
                    "detail": e.detail,
                }
                for e in self.log
            ],
        }

    @classmethod
    def from_json(cls, payload: dict) -> "LabelState":
        if payload.get("format") != "wpnmine-labels" or payload.get("version") != 1:
            raise ConfigError("not a label-state payload")
        state = cls()
        state.record_labels = {rid: set(v) for rid, v in payload["records"].items()}
        state.cluster_labels = {int(cid): set(v) for cid, v in payload["clusters"].items()}
        state.vetoed_records = set(payload["vetoed_records"])
        state.log = [
            ProvenanceEntry(
                seq=e["seq"],
                rule=e["rule"],
                target_kind=e["target_kind"],
                target_id=e["target_id"],
                label=e["label"],
                detail=e.get("detail", ""),
            )
            for e in payload["log"]
        ]
        return state

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json(), ensure_ascii=False, indent=1, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "LabelState":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def is_ad_campaign(cluster: WpnCluster) -> bool:
    """A cluster pushed from more than one distinct source domain."""
    return len(cluster.source_domains) > 1


def apply_campaign_labels(clusters: Iterable[WpnCluster], state: LabelState) -> LabelState:
    for cluster in clusters:
        if is_ad_campaign(cluster):
            state.add_cluster_label(
                cluster.id,
                "ad_campaign",
                rule="multi-source",
                detail=f"{len(cluster.source_domains)} distinct source domains",
            )
    return state


def mark_known_malicious(
    records: Sequence[WpnRecord],
    verdicts: Mapping[str, Verdict],
    state: LabelState | None = None,
) -> LabelState:
    """Apply full-URL verdicts to records.

    ``verdicts`` maps canonical landing URL to a resolved verdict.
    Only an exact landing-URL match counts; domain siblings stay
    unlabeled. A manual benign verdict registers a propagation veto
    for the record.
    """
    state = state or LabelState()
    for record in records:
        if record.landing_url is None:
            continue
        verdict = verdicts.get(canonicalize_url(record.landing_url))
        if verdict is None:
            continue
        if verdict.status == "malicious":
            state.add_record_label(
                record.id,
                "known_malicious",
                rule=f"verdict:{verdict.source}",
                detail=record.landing_url,
            )
        elif verdict.status == "benign" and verdict.source == "manual":
            state.veto_record(record.id, rule="verdict:manual", detail=record.landing_url)
    return state


def propagate_malicious(clusters: Iterable[WpnCluster], state: LabelState) -> LabelState:
    """Guilt by association within a cluster.

    A cluster with any known-malicious member becomes malicious, and
    then so does every member except benign-vetoed ones. Re-running is
    a no-op.
    """
    for cluster in clusters:
        seeds = [rid for rid in cluster.members if state.record_has(rid, "known_malicious")]
        if not seeds:
            continue
        state.add_cluster_label(
            cluster.id,
            "malicious",
            rule="propagation",
            detail=f"seeded by {len(seeds)} known-malicious member(s): {', '.join(seeds[:5])}",
        )
        for rid in cluster.members:
            if rid in state.vetoed_records:
                continue
            state.add_record_label(
                rid, "malicious", rule="propagation", detail=f"cluster {cluster.id}"
            )
    return state
