"""Command-line entry point.

Subcommands run individual stages against an artifact directory or the
whole pipeline at once. Exit codes: 0 success, 1 usage or
configuration error, 2 data or pipeline error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import _kernels
from .clustering import cluster_wpns, load_clusters, save_clusters
from .config import PipelineConfig, load_config
from .embeddings import (
    SgnsParams,
    build_vocab,
    load_embeddings,
    load_term_similarity,
    save_embeddings,
    save_term_similarity,
    term_similarity,
    train_skipgram,
)
from .errors import ConfigError, WpnMineError
from .filterlist import RuleSet, audit_dataset, parse_filter_list, save_audit
from .ingest import CampaignPlan, SyntheticPlan, dedup, generate_synthetic, load_dataset, save_dataset, Dataset
from .labeling import LabelState, apply_campaign_labels, mark_known_malicious, propagate_malicious
from .metacluster import (
    build_bipartite,
    connected_components,
    flag_suspicious,
    propagate_ad_label,
    save_metaclusters,
)
from .psl import PublicSuffixList, bundled_psl
from .report import build_providers, load_verdict_snapshot, run_pipeline
from .verdicts import VerdictStore, rescan, resolve_all

USAGE_EXIT = 1
DATA_EXIT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="wpnmine", description="Web push notification campaign miner.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, inputs: bool = False) -> None:
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--out", required=True, help="artifact directory")
        p.add_argument("--seed", type=int, help="override config seed")
        if inputs:
            p.add_argument("--input", nargs="+", required=True, help="input JSONL file(s)")

    p = sub.add_parser("ingest", help="load, validate, and deduplicate raw records")
    common(p, inputs=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset with ground truth")
    common(p)
    p.add_argument("--noise", type=int, default=1, help="number of noise singletons")
    p.add_argument("--unclustered", type=int, default=0, help="records without landing URL")

    p = sub.add_parser("embed", help="train embeddings and the term-similarity matrix")
    common(p)

    p = sub.add_parser("cluster", help="distance matrix, linkage, silhouette cut")
    common(p)

    p = sub.add_parser("label", help="campaign labels, verdicts, malicious propagation")
    common(p)

    p = sub.add_parser("meta", help="meta-clusters and ad/suspicious propagation")
    common(p)

    p = sub.add_parser("rescan", help="re-query landing URLs and report the verdict delta")
    common(p)

    p = sub.add_parser("filtercheck", help="match SW and request URLs against a filter list")
    common(p)
    p.add_argument("--filters", required=True, help="Adblock-style filter list file")

    p = sub.add_parser("report", help="run the full pipeline and emit the report")
    common(p, inputs=True)

    p = sub.add_parser("serve", help="serve triage API and UI over artifacts")
    common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8750)
    p.add_argument("--ui", help="built UI bundle directory (default: ./frontend/dist)")

    return parser


def _load_setup(args) -> tuple[PipelineConfig, Path]:
    config = load_config(args.config)
    if args.seed is not None:
        config = config.with_overrides(seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return config, out


def _psl_for(config: PipelineConfig) -> PublicSuffixList:
    return PublicSuffixList.from_file(config.psl_path) if config.psl_path else bundled_psl()


def _dataset(out: Path, psl: PublicSuffixList) -> Dataset:
    path = out / "dataset.jsonl"
    if not path.exists():
        raise ConfigError(f"no dataset at {path}; run ingest or synth first")
    return load_dataset([path], psl)


def _cmd_ingest(args) -> int:
    config, out = _load_setup(args)
    psl = _psl_for(config)
    dataset = load_dataset(args.input, psl)
    records, removed = dedup(dataset.records)
    deduped = Dataset(records=tuple(records), provenance=dataset.provenance)
    save_dataset(deduped, out / "dataset.jsonl")
    print(
        f"loaded {dataset.total_count} records "
        f"({dataset.clusterable_count} clusterable), removed {removed} duplicates"
    )
    return 0


_DEFAULT_CAMPAIGNS = (
    CampaignPlan(
        name="giveaway",
        title="Congratulations you won",
        body="Claim your free gift card now before the offer expires",
        n_messages=40,
        n_source_domains=12,
        n_landing_domains=2,
        path_template="prize/claim.php",
    ),
    CampaignPlan(
        name="account-alert",
        title="Account alert verify now",
        body="Unusual sign in detected please verify your account today",
        n_messages=12,
        n_source_domains=4,
        n_landing_domains=1,
        path_template="secure/verify.php",
    ),
    CampaignPlan(
        name="newsletter",
        title="Weekly savings inside",
        body="Your weekly deals newsletter has arrived open for coupons",
        n_messages=4,
        n_source_domains=1,
        n_landing_domains=1,
        path_template="news/latest.html",
    ),
)


def _cmd_synth(args) -> int:
    config, out = _load_setup(args)
    plan = SyntheticPlan(
        campaigns=_DEFAULT_CAMPAIGNS,
        n_noise=args.noise,
        n_unclustered=args.unclustered,
        seed=config.seed,
    )
    result = generate_synthetic(plan)
    save_dataset(result.dataset, out / "dataset.jsonl")
    (out / "truth.json").write_text(
        json.dumps(result.truth, ensure_ascii=False, indent=1, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    print(f"wrote {result.dataset.total_count} synthetic records and ground truth")
    return 0


def _cmd_embed(args) -> int:
    config, out = _load_setup(args)
    dataset = _dataset(out, _psl_for(config))
    vocab = build_vocab(dataset.records, config.min_count)
    params = SgnsParams(
        dim=config.dim,
        window=config.window,
        negatives=config.negatives,
        epochs=config.epochs,
        lr=config.lr,
        seed=config.seed,
    )
    table = train_skipgram(dataset.records, vocab, params)
    sim = term_similarity(table, config.sim_threshold, config.sim_top_k)
    save_embeddings(table, out / "embeddings.bin")
    save_term_similarity(sim, out / "term_similarity.bin")
    print(
        f"trained {len(vocab)}x{config.dim} embeddings "
        f"({_kernels.BACKEND_NAME} backend), {int(sim.indptr[-1])} similarity entries"
    )
    return 0


def _cmd_cluster(args) -> int:
    config, out = _load_setup(args)
    psl = _psl_for(config)
    dataset = _dataset(out, psl)
    table = load_embeddings(out / "embeddings.bin")
    sim = load_term_similarity(out / "term_similarity.bin")
    result = cluster_wpns(
        dataset.clusterable,
        sim,
        table.vocab,
        method=config.linkage,
        text_weight=config.text_weight,
        k_values=list(config.k_values) or None,
        psl=psl,
    )
    save_clusters(result, out / "clusters.json")
    singletons = sum(1 for c in result.clusters if len(c.members) == 1)
    print(
        f"k={result.k} clusters={len(result.clusters)} singletons={singletons} "
        f"silhouette={result.mean_silhouette:.4f}"
    )
    return 0


def _cmd_label(args) -> int:
    config, out = _load_setup(args)
    psl = _psl_for(config)
    dataset = _dataset(out, psl)
    result = load_clusters(out / "clusters.json")
    providers = build_providers(config)
    store = VerdictStore(out / "verdict_cache.json")
    urls = [r.landing_url for r in dataset.clusterable]
    snapshot = resolve_all(urls, providers, store, ttl_days=config.verdict_ttl_days)

    state = LabelState()
    apply_campaign_labels(result.clusters, state)
    mark_known_malicious(dataset.clusterable, snapshot, state)
    propagate_malicious(result.clusters, state)
    state.save(out / "labels.json")
    print(
        f"ad campaigns: {len(state.clusters_with('ad_campaign'))}, "
        f"known malicious: {len(state.records_with('known_malicious'))}, "
        f"malicious after propagation: {len(state.records_with('malicious'))}"
    )
    return 0


def _cmd_meta(args) -> int:
    config, out = _load_setup(args)
    psl = _psl_for(config)
    dataset = _dataset(out, psl)
    result = load_clusters(out / "clusters.json")
    state = LabelState.load(out / "labels.json")
    clusters_by_id = {c.id: c for c in result.clusters}
    graph = build_bipartite(result.clusters)
    metas = connected_components(graph)
    metas, state = propagate_ad_label(metas, clusters_by_id, state)
    metas, state = flag_suspicious(
        metas,
        clusters_by_id,
        dataset.clusterable,
        state,
        duplicate_threshold=config.duplicate_ads_threshold,
        psl=psl,
    )
    save_metaclusters(metas, graph, out / "metaclusters.json")
    state.save(out / "labels.json")
    print(
        f"meta-clusters: {len(metas)}, ad-related: "
        f"{sum(1 for m in metas if 'ad_related' in m.labels)}, suspicious: "
        f"{sum(1 for m in metas if 'suspicious' in m.labels)}"
    )
    return 0


def _cmd_rescan(args) -> int:
    config, out = _load_setup(args)
    dataset = _dataset(out, _psl_for(config))
    providers = build_providers(config)
    if not providers:
        raise ConfigError("rescan needs a verdict provider (see config keys *_blacklist, scanner_stub_dir)")
    store = VerdictStore(out / "verdict_cache.json")
    urls = sorted({r.landing_url for r in dataset.clusterable})
    delta = rescan(urls, providers[-1], store)
    payload = {
        "format": "wpnmine-rescan",
        "version": 1,
        "changed": [list(c) for c in delta.changed],
        "unchanged": list(delta.unchanged),
    }
    (out / "rescan_delta.json").write_text(
        json.dumps(payload, ensure_ascii=False, indent=1, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    print(
        f"rescanned {len(urls)} URLs: {len(delta.changed)} changed "
        f"({delta.change_ratio:.2%}), {len(delta.unchanged)} unchanged"
    )
    return 0


def _cmd_filtercheck(args) -> int:
    config, out = _load_setup(args)
    dataset = _dataset(out, _psl_for(config))
    text = Path(args.filters).read_text(encoding="utf-8")
    parsed = parse_filter_list(text)
    audit = audit_dataset(dataset, RuleSet(parsed.rules))
    save_audit(audit, parsed, out / "filter_audit.json")
    print(
        f"parsed {len(parsed.rules)} rules, ignored {len(parsed.ignored)} lines "
        f"({json.dumps(parsed.ignored_by_reason, sort_keys=True)})"
    )
    print(audit.table())
    return 0


def _cmd_report(args) -> int:
    config, out = _load_setup(args)
    snapshot_path = out / "verdicts.json"
    snapshot = load_verdict_snapshot(snapshot_path) if snapshot_path.exists() else None
    artifacts = run_pipeline(config, args.input, out, verdict_snapshot=snapshot)
    print(artifacts.report.table())
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config, out = _load_setup(args)
    app = create_app(out, config, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "synth": _cmd_synth,
    "embed": _cmd_embed,
    "cluster": _cmd_cluster,
    "label": _cmd_label,
    "meta": _cmd_meta,
    "rescan": _cmd_rescan,
    "filtercheck": _cmd_filtercheck,
    "report": _cmd_report,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"wpnmine: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except WpnMineError as exc:
        print(f"wpnmine: {exc}", file=sys.stderr)
        return DATA_EXIT
    except OSError as exc:
        print(f"wpnmine: {exc}", file=sys.stderr)
        return DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())
