"""Cost model, config file handling, pipeline orchestration, reports."""

import json
import time
from datetime import datetime, timezone
from decimal import Decimal

import pytest

from wpnmine.config import PipelineConfig, dump_config_json, load_config, parse_config
from wpnmine.errors import ConfigError, PipelineError
from wpnmine.report import (
    PipelineReport,
    estimate_click_cost,
    load_report,
    load_verdict_snapshot,
    run_pipeline,
)

from conftest import small_synthetic

NOW = datetime(2024, 3, 15, 12, 0, 0, tzinfo=timezone.utc)


class TestClickCost:
    @pytest.mark.parametrize(
        "clicks,cpm,expected",
        [
            (444, "2.54", "1.12"),
            (18, "2.54", "0.04"),
            (0, "2.54", "0.00"),
            (1000, "2.54", "2.54"),
            (393, "2.54", "0.99"),
            (1, "2.54", "0.00"),
            (999999, "2.54", "2539.99"),
            (444, 2.54, "1.12"),
            (10, "1", "0.01"),
            (10, "0", "0.00"),
        ],
    )
    def test_exact_truncation(self, clicks, cpm, expected):
        assert estimate_click_cost(clicks, cpm) == Decimal(expected)

    def test_never_rounds_up(self):
        # 7 * 2.54 / 1000 = 0.01778: the half-cent must not push to 0.02
        assert estimate_click_cost(7, "2.54") == Decimal("0.01")

    def test_rejects_negative(self):
        with pytest.raises(ConfigError):
            estimate_click_cost(-1, "2.54")
        with pytest.raises(ConfigError):
            estimate_click_cost(1, "-2.54")

    def test_rejects_garbage_cpm(self):
        with pytest.raises(ConfigError):
            estimate_click_cost(1, "not-a-number")

    def test_sub_millisecond(self):
        start = time.perf_counter()
        for _ in range(1000):
            estimate_click_cost(444, "2.54")
        per_call = (time.perf_counter() - start) / 1000
        assert per_call < 1e-3


class TestConfig:
    def test_defaults_roundtrip(self):
        config = PipelineConfig()
        assert parse_config(config.to_text()) == config

    def test_parse_overrides(self):
        config = parse_config("seed = 7\nk_values = 2, 3, 5\nlinkage = complete\n")
        assert config.seed == 7
        assert config.k_values == (2, 3, 5)
        assert config.linkage == "complete"

    def test_comments_and_blanks_skipped(self):
        assert parse_config("# note\n\nseed = 3\n") == PipelineConfig(seed=3)

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config("velocity = 9\n")

    def test_bad_int(self):
        with pytest.raises(ConfigError, match="integer"):
            parse_config("seed = fast\n")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="key = value"):
            parse_config("seed 7\n")

    def test_hash_tracks_content(self):
        base = PipelineConfig()
        assert base.hash() == PipelineConfig().hash()
        assert base.hash() != base.with_overrides(seed=2).hash()

    def test_load_config_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.cfg")
        assert load_config(None) == PipelineConfig()

    def test_dump_json(self):
        payload = json.loads(dump_config_json(PipelineConfig(k_values=(2, 3))))
        assert payload["k_values"] == [2, 3]


def quick_config(**overrides) -> PipelineConfig:
    return PipelineConfig(**overrides)


class TestRunPipeline:
    def test_counts_and_invariants(self):
        result = small_synthetic(seed=31, n_noise=1, n_unclustered=2)
        artifacts = run_pipeline(quick_config(), dataset=result.dataset, now=NOW)
        report = artifacts.report
        assert report.total_records == result.dataset.total_count
        assert report.clusterable_records == result.dataset.clusterable_count
        assert report.selected_k == artifacts.clustering.k
        assert report.clusters == len(artifacts.clustering.clusters)
        assert report.ad_campaigns == 2  # giveaway and account-alert
        assert report.known_malicious_records == 0
        assert report.metaclusters == len(artifacts.metaclusters)

    def test_labels_attached_to_clusters(self):
        result = small_synthetic(seed=32)
        artifacts = run_pipeline(quick_config(), dataset=result.dataset, now=NOW)
        campaign_sizes = sorted(
            len(c.members) for c in artifacts.clustering.clusters if "ad_campaign" in c.labels
        )
        assert campaign_sizes == [10, 20]

    def test_needs_input_or_dataset(self):
        with pytest.raises(ConfigError):
            run_pipeline(quick_config())

    def test_too_few_clusterable(self):
        from conftest import make_record
        from wpnmine.ingest import Dataset, Provenance

        records = tuple(
            make_record(landing_url=None, body=f"offer deal offer deal variant {i}")
            for i in range(3)
        )
        dataset = Dataset(records, Provenance(("test",), "2024-03-01T00:00:00Z"))
        with pytest.raises(PipelineError, match="clusterable"):
            run_pipeline(quick_config(), dataset=dataset, now=NOW)

    def test_blacklist_drives_propagation(self, tmp_path):
        result = small_synthetic(seed=34)
        target = next(r for r in result.dataset.records if result.truth[r.id] == "giveaway")
        listing = tmp_path / "bad.txt"
        listing.write_text(target.landing_url + "\n")
        config = quick_config(local_blacklist=str(listing))
        artifacts = run_pipeline(config, dataset=result.dataset, now=NOW)
        report = artifacts.report
        assert report.known_malicious_records == 1
        giveaway_size = sum(1 for t in result.truth.values() if t == "giveaway")
        assert report.malicious_records == giveaway_size
        assert report.malicious_clusters == 1
        # the whole component is already malicious, so nothing is left
        # to mark suspicious; the meta-cluster itself still carries it
        assert report.suspicious_records == 0
        assert report.suspicious_metaclusters >= 1
        state = artifacts.label_state
        assert state.records_with("malicious") & state.records_with("suspicious") == set()

    def test_verdict_snapshot_replays_identically(self, tmp_path):
        result = small_synthetic(seed=35)
        target = result.dataset.records[0]
        listing = tmp_path / "bad.txt"
        listing.write_text(target.landing_url + "\n")
        config = quick_config(local_blacklist=str(listing))

        first_dir = tmp_path / "first"
        first = run_pipeline(config, dataset=result.dataset, out_dir=first_dir, now=NOW)
        snapshot = load_verdict_snapshot(first_dir / "verdicts.json")
        replay = run_pipeline(
            quick_config(), dataset=result.dataset, verdict_snapshot=snapshot, now=NOW
        )
        assert replay.label_state.to_json() == first.label_state.to_json()

    def test_persisted_artifacts(self, tmp_path):
        result = small_synthetic(seed=36)
        out = tmp_path / "out"
        artifacts = run_pipeline(quick_config(), dataset=result.dataset, out_dir=out, now=NOW)
        names = {p.name for p in out.iterdir()}
        assert names == {
            "dataset.jsonl",
            "embeddings.bin",
            "term_similarity.bin",
            "distances.bin",
            "clusters.json",
            "metaclusters.json",
            "labels.json",
            "verdicts.json",
            "report.json",
            "config.txt",
            "run_meta.json",
        }
        assert load_report(out / "report.json") == artifacts.report
        meta = json.loads((out / "run_meta.json").read_text())
        assert set(meta) == {"backend", "timings_s", "loaded_at", "sources"}
        # volatile run data stays out of the report payload
        assert "timings_s" not in artifacts.report.to_json()
        assert "backend" not in artifacts.report.to_json()

    def test_byte_identical_across_runs(self, tmp_path):
        result = small_synthetic(seed=37)
        config = quick_config()
        dirs = []
        for name in ("a", "b"):
            out = tmp_path / name
            run_pipeline(config, dataset=result.dataset, out_dir=out, now=NOW)
            dirs.append(out)
        stable = [
            "dataset.jsonl",
            "embeddings.bin",
            "term_similarity.bin",
            "distances.bin",
            "clusters.json",
            "metaclusters.json",
            "labels.json",
            "verdicts.json",
            "report.json",
            "config.txt",
        ]
        for name in stable:
            assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes(), name

    def test_cost_fields(self):
        result = small_synthetic(seed=38)
        artifacts = run_pipeline(quick_config(), dataset=result.dataset, now=NOW)
        report = artifacts.report
        clicked = [r for r in result.dataset.records if r.clicked and r.landing_url]
        if not clicked:
            assert report.max_domain_clicks == 0
            assert report.max_domain_cost == "0.00"
        else:
            assert report.max_domain_clicks >= 1
        assert report.cpm == "2.54"


class TestReportPayload:
    def roundtrip_report(self):
        result = small_synthetic(seed=39)
        return run_pipeline(quick_config(), dataset=result.dataset, now=NOW).report

    def test_json_roundtrip(self):
        report = self.roundtrip_report()
        assert PipelineReport.from_json(report.to_json()) == report

    def test_rejects_wrong_magic(self):
        with pytest.raises(ConfigError):
            PipelineReport.from_json({"format": "other", "version": 1})

    def test_canonical_bytes_stable(self):
        report = self.roundtrip_report()
        assert report.canonical_bytes() == report.canonical_bytes()
        assert report.canonical_bytes().endswith(b"\n")

    def test_table_mentions_costs(self):
        report = self.roundtrip_report()
        table = report.table()
        assert "cost model: cpm=2.54" in table
        assert "total_records" in table
