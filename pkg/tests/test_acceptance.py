"""Go/no-go gate: one test per headline guarantee of the package.

The module suites cover the fine grain; each test here re-checks one
externally visible contract end to end, at the tolerance the package
commits to. Every test is a single pass/fail line under ``pytest -v``.
"""

from __future__ import annotations

import random
import time
from datetime import datetime, timezone
from decimal import Decimal

import numpy as np
import pytest
from fastapi.testclient import TestClient
from sklearn.metrics import adjusted_rand_score

from wpnmine.clustering import linkage, silhouette
from wpnmine.config import PipelineConfig
from wpnmine.embeddings import TermSimilarityMatrix
from wpnmine.filterlist import RuleSet, audit_dataset, parse_filter_list
from wpnmine.ingest import CampaignPlan, SyntheticPlan, generate_synthetic
from wpnmine.labeling import LabelState, apply_campaign_labels, mark_known_malicious, propagate_malicious
from wpnmine.metacluster import build_bipartite, connected_components, duplicate_ad_clusters
from wpnmine.model import BagOfWords
from wpnmine.report import estimate_click_cost, load_verdict_snapshot, run_pipeline
from wpnmine.service import TriageService, create_app
from wpnmine.similarity import (
    combined_distance,
    jaccard_distance,
    soft_cosine,
    text_distance,
    url_path_distance,
)
from wpnmine.verdicts import FileStubScanner, Verdict, VerdictStore, canonicalize_url, rescan

from conftest import random_bag, shared_domain_corpus
from test_clustering import dm_from_square, naive_linkage, random_square, silhouette_oracle
from test_filterlist import MATCH_TABLE, RULES_TEXT
from test_metacluster import brute_components, mk_cluster
from test_service import cluster_ids_by_size
from test_similarity import VOCAB_TOKENS, classical_cosine, flat_vocab, random_record

NOW = datetime(2024, 3, 15, 12, 0, 0, tzinfo=timezone.utc)

SNAPSHOT = __file__.rsplit("/", 1)[0] + "/data/easylist_snapshot.txt"


def corpus_plan(index: int) -> tuple[SyntheticPlan, tuple[str, str], str]:
    """Three planted campaigns: large multi-source, mid multi-source,
    small single-source. Returns (plan, multi-source names, single name)."""
    scale = (2, 3, 4, 5)[index % 4]
    giveaway = f"giveaway-{index}"
    alert = f"account-alert-{index}"
    bank = f"bank-notice-{index}"
    campaigns = (
        CampaignPlan(
            name=giveaway,
            title="Congratulations you won a prize",
            body="Claim your free gift card reward now before the offer expires",
            n_messages=40 * scale,
            n_source_domains=12,
            n_landing_domains=2,
            path_template="prize/claim.php",
        ),
        CampaignPlan(
            name=alert,
            title="Account alert verify now",
            body="Unusual sign in detected please verify your account today",
            n_messages=12 * scale,
            n_source_domains=4,
            n_landing_domains=1,
            path_template="secure/verify.php",
        ),
        CampaignPlan(
            name=bank,
            title="Branch notice statement ready",
            body="Your monthly statement is ready to download from the portal",
            n_messages=4 * scale,
            n_source_domains=1,
            n_landing_domains=1,
            path_template="docs/statement.html",
        ),
    )
    plan = SyntheticPlan(campaigns=campaigns, n_noise=1, n_unclustered=0, seed=100 + index)
    return plan, (giveaway, alert), bank


@pytest.fixture(scope="module")
def recovered_corpora():
    """Twenty seeded corpora run through the full pipeline, with timings."""
    runs = []
    for index in range(20):
        plan, multi, single = corpus_plan(index)
        result = generate_synthetic(plan)
        started = time.perf_counter()
        artifacts = run_pipeline(PipelineConfig(), dataset=result.dataset, now=NOW)
        elapsed = time.perf_counter() - started
        runs.append(
            {
                "index": index,
                "dataset": result.dataset,
                "truth": result.truth,
                "artifacts": artifacts,
                "elapsed": elapsed,
                "multi": multi,
                "single": single,
            }
        )
    return runs


def test_click_cost_exact_and_fast():
    assert estimate_click_cost(444, 2.54) == Decimal("1.12")
    assert estimate_click_cost(18, 2.54) == Decimal("0.04")
    started = time.perf_counter()
    for _ in range(2000):
        estimate_click_cost(444, 2.54)
    per_call = (time.perf_counter() - started) / 2000
    assert per_call < 0.001


def test_soft_cosine_reduces_to_classical_cosine_under_identity():
    vocab = flat_vocab()
    identity = TermSimilarityMatrix.identity(len(vocab))
    rng = random.Random(20240)
    worst = 0.0
    for _ in range(1000):
        x = random_bag(rng, list(VOCAB_TOKENS))
        y = random_bag(rng, list(VOCAB_TOKENS))
        got = soft_cosine(BagOfWords(x), BagOfWords(y), identity, vocab)
        worst = max(worst, abs(got - classical_cosine(x, y, vocab)))
    assert worst < 1e-9


def test_distances_bounded_symmetric_with_zero_self_distance():
    vocab = flat_vocab()
    identity = TermSimilarityMatrix.identity(len(vocab))
    rng = random.Random(515)
    pool = [random_record(rng, f"a{i}") for i in range(150)]
    for _ in range(10_000):
        a, b = rng.choice(pool), rng.choice(pool)
        for fn in (
            lambda: text_distance(a, b, identity, vocab),
            lambda: url_path_distance(a, b),
            lambda: combined_distance(a, b, identity, vocab),
        ):
            d = fn()
            assert 0.0 <= d <= 1.0
        assert abs(text_distance(a, b, identity, vocab) - text_distance(b, a, identity, vocab)) < 1e-12
        assert url_path_distance(a, b) == url_path_distance(b, a)
    for record in pool[:40]:
        assert text_distance(record, record, identity, vocab) == 0.0
        assert url_path_distance(record, record) == 0.0
        assert combined_distance(record, record, identity, vocab) == 0.0

    universe = list(range(30))
    for _ in range(1000):
        a, b, c = (frozenset(rng.sample(universe, rng.randint(0, 12))) for _ in range(3))
        assert jaccard_distance(a, c) <= jaccard_distance(a, b) + jaccard_distance(b, c) + 1e-12


def test_linkage_and_silhouette_match_independent_oracles():
    rng = random.Random(31337)
    for _ in range(100):
        n = rng.randint(3, 20)
        square = random_square(rng, n)
        dendrogram = linkage(dm_from_square(square), method="average")
        for step, (i, j, height, count) in zip(dendrogram.steps, naive_linkage(square, "average")):
            assert (step.left, step.right) == (i, j)
            assert step.height == float(height)
            assert step.size == count

    for _ in range(100):
        n = rng.randint(4, 30)
        square = random_square(rng, n)
        labels = [rng.randrange(rng.randint(2, n - 1)) for _ in range(n)]
        while len(set(labels)) < 2:
            labels = [rng.randrange(2) for _ in range(n)]
        got = silhouette(dm_from_square(square), labels)
        assert abs(got - silhouette_oracle(square, labels)) < 1e-9


def test_planted_campaigns_recovered_perfectly_on_20_corpora(recovered_corpora):
    assert len(recovered_corpora) == 20
    for run in recovered_corpora:
        clustering = run["artifacts"].clustering
        n = run["dataset"].total_count
        assert 100 <= n <= 300

        truth = [run["truth"][rid] for rid in clustering.record_ids]
        assert adjusted_rand_score(truth, list(clustering.assignment)) == 1.0

        expected_flags = {
            c.id
            for c in clustering.clusters
            if {run["truth"][rid] for rid in c.members} & set(run["multi"])
        }
        flagged = set(run["artifacts"].label_state.clusters_with("ad_campaign"))
        assert flagged == expected_flags
        assert len(flagged) == 2

        assert run["elapsed"] < 60.0, f"corpus {run['index']} took {run['elapsed']:.1f}s"


def test_known_malicious_spreads_to_whole_cluster_idempotently(recovered_corpora):
    for run in recovered_corpora:
        dataset = run["dataset"]
        clusters = run["artifacts"].clustering.clusters
        _, alert_name = run["multi"]
        seed_id = next(rid for rid, name in sorted(run["truth"].items()) if name == alert_name)
        landing = dataset.by_id()[seed_id].landing_url
        canonical = canonicalize_url(landing)
        snapshot = {canonical: Verdict(url=canonical, status="malicious", source="local_list")}

        state = LabelState()
        apply_campaign_labels(clusters, state)
        mark_known_malicious(dataset.clusterable, snapshot, state)
        propagate_malicious(clusters, state)

        seeded = [c for c in clusters if any(state.record_has(r, "known_malicious") for r in c.members)]
        assert seeded, "the planted verdict must land in some cluster"
        spread = set()
        for cluster in seeded:
            for rid in cluster.members:
                assert state.record_has(rid, "malicious")
                spread.add(rid)
        assert set(state.records_with("malicious")) == spread

        before = state.to_json()
        propagate_malicious(clusters, state)
        assert state.to_json() == before


def test_components_match_bruteforce_and_duplicate_ads_exact():
    rng = random.Random(606)
    for trial in range(100):
        n_clusters = rng.randint(1, 100)
        n_domains = rng.randint(1, 200 - n_clusters)
        pool = [f"d{i}.net" for i in range(n_domains)]
        clusters = [
            mk_cluster(cid, [f"r{cid}"], rng.sample(pool, rng.randint(0, min(3, n_domains))))
            for cid in range(n_clusters)
        ]
        graph = build_bipartite(clusters)
        got = connected_components(graph)
        want = brute_components(graph)
        assert len(got) == len(want), f"trial {trial}"
        for meta, (cids, domains) in zip(got, want):
            assert list(meta.cluster_ids) == cids
            assert set(meta.domains) == domains

    clusters = [
        mk_cluster(0, ["a"], ["one.com", "two.com"], sources=("s1.com", "s2.com")),
        mk_cluster(1, ["b"], ["one.com"], sources=("s3.com", "s4.com")),
        mk_cluster(2, ["c"], ["x.com", "y.com", "z.com"]),
        mk_cluster(3, ["d"], ["u.com", "v.com"], sources=("s5.com", "s6.com")),
    ]
    state = LabelState()
    for cid in (0, 1, 3):
        state.add_cluster_label(cid, "ad_campaign", rule="multi-source", detail="")
    assert duplicate_ad_clusters(clusters, state, threshold=2) == {0, 3}


def test_identical_runs_produce_byte_identical_artifacts(tmp_path):
    blobs = []
    for run_dir in (tmp_path / "one", tmp_path / "two"):
        plan, _, _ = corpus_plan(0)
        dataset = generate_synthetic(plan).dataset
        run_pipeline(PipelineConfig(), dataset=dataset, out_dir=run_dir, now=NOW)
        blobs.append(
            {
                "report": (run_dir / "report.json").read_bytes(),
                "labels": (run_dir / "labels.json").read_bytes(),
            }
        )
    assert blobs[0]["report"] == blobs[1]["report"]
    assert blobs[0]["labels"] == blobs[1]["labels"]


def test_filter_semantics_audit_and_snapshot_accounting():
    parsed = parse_filter_list(RULES_TEXT)
    ruleset = RuleSet(parsed.rules)
    assert len(MATCH_TABLE) == 30
    for url, doc, outcome, winner in MATCH_TABLE:
        decision = ruleset.match(url, doc)
        assert decision.outcome == outcome, (url, doc)
        assert (decision.rule.raw if decision.rule else None) == winner

    plan, _, _ = corpus_plan(1)
    dataset = generate_synthetic(plan).dataset
    audit = audit_dataset(dataset, ruleset)
    assert audit.sw_scripts_total > 0
    assert audit.sw_scripts_blocked == 0
    assert audit.sw_requests_blocked == 0
    assert audit.blocked_script_urls == ()

    with open(SNAPSHOT, encoding="utf-8") as handle:
        text = handle.read()
    snapshot = parse_filter_list(text)
    assert snapshot.total_lines == len(text.splitlines())
    assert len(snapshot.rules) + len(snapshot.ignored) == snapshot.total_lines
    assert sum(snapshot.ignored_by_reason.values()) == len(snapshot.ignored)
    assert all(entry.reason for entry in snapshot.ignored)


def test_verdict_snapshot_replay_and_rescan_partition(tmp_path):
    plan, (_, alert_name), _ = corpus_plan(2)
    dataset = generate_synthetic(plan).dataset
    stub_dir = tmp_path / "stub"
    stub = FileStubScanner(stub_dir)
    flagged = 0
    for rid in sorted(r.id for r in dataset.records):
        record = dataset.by_id()[rid]
        if record.landing_url and "secure/verify" in record.landing_url and flagged < 3:
            stub.seed(record.landing_url, engine_hits=4)
            flagged += 1
    config = PipelineConfig(scanner_stub_dir=str(stub_dir))

    first_dir = tmp_path / "first"
    first = run_pipeline(config, dataset=dataset, out_dir=first_dir, now=NOW)
    assert len(first.label_state.records_with("known_malicious")) == 3

    snapshot = load_verdict_snapshot(first_dir / "verdicts.json")
    second = run_pipeline(config, dataset=dataset, verdict_snapshot=snapshot, now=NOW)
    assert second.label_state.to_json() == first.label_state.to_json()
    assert second.report.to_json() == first.report.to_json()

    urls = [f"https://spot-{i}.example/p?x={i}" for i in range(60)]
    rng = random.Random(9)
    for i, url in enumerate(urls):
        if i % 3 == 0:
            stub.seed(url, engine_hits=rng.randint(1, 9))
    store = VerdictStore(tmp_path / "cache.json")
    for url in urls[:5]:
        canon = canonicalize_url(url)
        store.put(Verdict(url=canon, status="benign", source="manual", fetched_at="2024-01-01T00:00:00Z"))
    delta = rescan(urls, stub, store, now=NOW)
    changed_urls = {u for u, _, _ in delta.changed}
    unchanged_urls = set(delta.unchanged)
    assert changed_urls | unchanged_urls == {canonicalize_url(u) for u in urls}
    assert changed_urls & unchanged_urls == set()
    assert len(delta.changed) + len(delta.unchanged) == len(urls)


def test_triage_loop_flags_siblings_and_replays_journal(tmp_path):
    artifact_dir = tmp_path / "artifacts"
    corpus = shared_domain_corpus(seed=11, share=("giveaway", "security-alert", "newsletter"))
    run_pipeline(PipelineConfig(), dataset=corpus.dataset, out_dir=artifact_dir, now=NOW)

    client = TestClient(create_app(artifact_dir))
    ids = cluster_ids_by_size(client)
    giveaway, alert, newsletter = ids[12], ids[8], ids[6]
    meta = client.get("/api/clusters").json()["items"][0]["meta_id"]
    component = client.get(f"/api/metaclusters/{meta}").json()
    assert sorted(component["cluster_ids"]) == sorted([giveaway, alert, newsletter])

    posted = client.post(
        "/api/verdicts",
        json={"target_kind": "cluster", "target_id": giveaway, "status": "malicious", "analyst": "kim"},
    )
    assert posted.status_code == 200

    delta = client.post("/api/recompute").json()
    assert delta["newly_malicious"] == 12
    assert sorted(delta["detail"]["clusters_newly_suspicious"]) == sorted([alert, newsletter])

    queue = client.get("/api/clusters").json()["items"]
    assert [item["id"] for item in queue] == [alert, newsletter, giveaway]
    assert queue[0]["suspicious"] and queue[1]["suspicious"]
    for sibling in (alert, newsletter):
        detail = client.get(f"/api/clusters/{sibling}").json()
        assert all("suspicious" in member["labels"] for member in detail["members"])

    live = client.app.state.service
    replayed = TriageService(artifact_dir)
    assert replayed.applied_head == live.applied_head
    assert replayed.state.to_json() == live.state.to_json()
