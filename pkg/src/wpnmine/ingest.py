"""Dataset loading, validation, deduplication, and synthetic corpora.

Input is UTF-8 JSON lines, one notification per line, with exactly the
fields listed in ``REQUIRED_FIELDS``. Loading is strict: a malformed
line raises a :class:`~wpnmine.errors.SchemaError` naming the file,
line, and offending field.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from random import Random
from typing import Iterable

from .errors import ConfigError, HostParseError, SchemaError, UrlParseError
from .model import PLATFORMS, WpnRecord, parse_url
from .psl import PublicSuffixList

REQUIRED_FIELDS = (
    "id",
    "source_url",
    "sw_script_url",
    "title",
    "body",
    "icon_url",
    "landing_url",
    "redirect_chain",
    "platform",
    "collected_at",
    "clicked",
)

_RFC3339_RE = re.compile(
    r"^\d{4}-\d{2}-\d{2}[Tt ]\d{2}:\d{2}:\d{2}(\.\d+)?([Zz]|[+-]\d{2}:\d{2})$"
)


@dataclass(frozen=True, slots=True)
class Provenance:
    sources: tuple[str, ...]
    loaded_at: str


@dataclass(frozen=True, slots=True)
class Dataset:
    records: tuple[WpnRecord, ...]
    provenance: Provenance

    @property
    def total_count(self) -> int:
        return len(self.records)

    @property
    def clusterable(self) -> tuple[WpnRecord, ...]:
        return tuple(r for r in self.records if r.clusterable)

    @property
    def clusterable_count(self) -> int:
        return sum(1 for r in self.records if r.clusterable)

    def by_id(self) -> dict[str, WpnRecord]:
        return {r.id: r for r in self.records}


def _require_str(obj: dict, key: str, *, source: str, line: int) -> str:
    value = obj[key]
    if not isinstance(value, str):
        raise SchemaError(f"field {key!r} must be a string", source=source, line=line, field=key)
    return value


def _validate_timestamp(value: str, *, source: str, line: int) -> str:
    if not _RFC3339_RE.match(value):
        raise SchemaError(
            f"collected_at not an RFC-3339 timestamp: {value!r}",
            source=source,
            line=line,
            field="collected_at",
        )
    try:
        datetime.fromisoformat(value.replace("Z", "+00:00").replace("z", "+00:00"))
    except ValueError:
        raise SchemaError(
            f"collected_at not a valid timestamp: {value!r}",
            source=source,
            line=line,
            field="collected_at",
        ) from None
    return value


def parse_record(
    obj: dict,
    *,
    source: str = "<memory>",
    line: int = 0,
    psl: PublicSuffixList | None = None,
) -> WpnRecord:
    """Validate one decoded JSON object and build a record.

    ``source_etld1`` is derived here from ``source_url``; it is never
    read from the input.
    """
    if not isinstance(obj, dict):
        raise SchemaError("record is not an object", source=source, line=line)
    missing = [f for f in REQUIRED_FIELDS if f not in obj]
    if missing:
        raise SchemaError(
            f"missing required field {missing[0]!r}", source=source, line=line, field=missing[0]
        )
    unknown = sorted(set(obj) - set(REQUIRED_FIELDS))
    if unknown:
        raise SchemaError(
            f"unknown field {unknown[0]!r}", source=source, line=line, field=unknown[0]
        )

    rec_id = _require_str(obj, "id", source=source, line=line)
    if not rec_id:
        raise SchemaError("empty id", source=source, line=line, field="id")

    source_url = _require_str(obj, "source_url", source=source, line=line)
    try:
        source_etld1 = parse_url(source_url, psl).etld1
    except (UrlParseError, HostParseError) as exc:
        raise SchemaError(str(exc), source=source, line=line, field="source_url") from exc

    sw_script_url = _require_str(obj, "sw_script_url", source=source, line=line)
    title = _require_str(obj, "title", source=source, line=line)
    body = _require_str(obj, "body", source=source, line=line)

    icon_url = obj["icon_url"]
    if icon_url is not None and not isinstance(icon_url, str):
        raise SchemaError("icon_url must be a string or null", source=source, line=line, field="icon_url")

    landing_url = obj["landing_url"]
    if landing_url is not None:
        if not isinstance(landing_url, str):
            raise SchemaError(
                "landing_url must be a string or null", source=source, line=line, field="landing_url"
            )
        try:
            parse_url(landing_url, psl)
        except (UrlParseError, HostParseError) as exc:
            raise SchemaError(str(exc), source=source, line=line, field="landing_url") from exc

    chain = obj["redirect_chain"]
    if not isinstance(chain, list) or any(not isinstance(u, str) for u in chain):
        raise SchemaError(
            "redirect_chain must be an array of URL strings",
            source=source,
            line=line,
            field="redirect_chain",
        )

    platform = obj["platform"]
    if platform not in PLATFORMS:
        raise SchemaError(
            f"platform must be one of {list(PLATFORMS)}, got {platform!r}",
            source=source,
            line=line,
            field="platform",
        )

    collected_at = _require_str(obj, "collected_at", source=source, line=line)
    _validate_timestamp(collected_at, source=source, line=line)

    clicked = obj["clicked"]
    if not isinstance(clicked, bool):
        raise SchemaError("clicked must be a boolean", source=source, line=line, field="clicked")

    return WpnRecord(
        id=rec_id,
        source_url=source_url,
        source_etld1=source_etld1,
        sw_script_url=sw_script_url,
        title=title,
        body=body,
        icon_url=icon_url,
        landing_url=landing_url,
        redirect_chain=tuple(chain),
        platform=platform,
        collected_at=collected_at,
        clicked=clicked,
    )


def load_dataset(paths: Iterable[str | Path], psl: PublicSuffixList | None = None) -> Dataset:
    """Load and validate JSONL files; duplicate ids are rejected."""
    records: list[WpnRecord] = []
    seen_ids: dict[str, tuple[str, int]] = {}
    sources: list[str] = []
    for path in paths:
        path = Path(path)
        sources.append(str(path))
        with path.open("r", encoding="utf-8") as handle:
            for lineno, raw in enumerate(handle, start=1):
                if not raw.strip():
                    continue
                try:
                    obj = json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise SchemaError(
                        f"invalid JSON: {exc.msg}", source=str(path), line=lineno
                    ) from exc
                record = parse_record(obj, source=str(path), line=lineno, psl=psl)
                if record.id in seen_ids:
                    first_source, first_line = seen_ids[record.id]
                    raise SchemaError(
                        f"duplicate id {record.id!r} (first seen at {first_source}:{first_line})",
                        source=str(path),
                        line=lineno,
                        field="id",
                    )
                seen_ids[record.id] = (str(path), lineno)
                records.append(record)
    loaded_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return Dataset(records=tuple(records), provenance=Provenance(tuple(sources), loaded_at))


def record_to_json(record: WpnRecord) -> dict:
    """Serializable form in the exact input schema (derived fields omitted)."""
    return {
        "id": record.id,
        "source_url": record.source_url,
        "sw_script_url": record.sw_script_url,
        "title": record.title,
        "body": record.body,
        "icon_url": record.icon_url,
        "landing_url": record.landing_url,
        "redirect_chain": list(record.redirect_chain),
        "platform": record.platform,
        "collected_at": record.collected_at,
        "clicked": record.clicked,
    }


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for record in dataset.records:
            handle.write(json.dumps(record_to_json(record), ensure_ascii=False))
            handle.write("\n")


def dedup(records: Iterable[WpnRecord]) -> tuple[list[WpnRecord], int]:
    """Drop exact duplicates, keeping the first occurrence.

    Two records are duplicates when they agree on source_etld1, title,
    body, landing_url, and platform. Returns the surviving records in
    input order and the number removed.
    """
    seen: set[tuple] = set()
    kept: list[WpnRecord] = []
    removed = 0
    for record in records:
        key = (record.source_etld1, record.title, record.body, record.landing_url, record.platform)
        if key in seen:
            removed += 1
            continue
        seen.add(key)
        kept.append(record)
    return kept, removed


@dataclass(frozen=True, slots=True)
class CampaignPlan:
    """One planted campaign for the synthetic generator.

    ``title``, ``body``, and ``path_template`` may contain ``{i}``,
    replaced with the message index within the campaign; without it all
    messages share the text verbatim.
    """

    name: str
    title: str
    body: str
    n_messages: int
    n_source_domains: int = 1
    n_landing_domains: int = 1
    path_template: str = "offer/claim.php"


@dataclass(frozen=True, slots=True)
class SyntheticPlan:
    campaigns: tuple[CampaignPlan, ...]
    n_noise: int = 0
    n_unclustered: int = 0
    seed: int = 0


@dataclass(frozen=True, slots=True)
class SyntheticResult:
    dataset: Dataset
    truth: dict[str, str]  # record id -> ground-truth group name


_NOISE_WORDS = (
    "weather sports recipe garden travel music cinema puzzle history nature "
    "coffee market stocks soccer tennis novel poetry camera hiking bakery "
    "museum physics biology chemistry astronomy painting theater jazz opera "
    "cycling rowing chess gardening knitting pottery origami calligraphy"
).split()


def _slug(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-") or "c"


def generate_synthetic(plan: SyntheticPlan) -> SyntheticResult:
    """Produce a deterministic dataset with known ground truth.

    Campaign messages reuse their campaign's source and landing domains
    round-robin; landing URLs differ only in a query value so exact
    dedup keeps every message. Noise messages are mutually unrelated
    singletons; unclustered messages carry no landing URL at all.
    """
    if not plan.campaigns and plan.n_noise == 0:
        raise ConfigError("synthetic plan needs at least one campaign or noise message")
    for campaign in plan.campaigns:
        if campaign.n_messages < 1 or campaign.n_source_domains < 1 or campaign.n_landing_domains < 1:
            raise ConfigError(f"campaign {campaign.name!r} has a non-positive size")

    rng = Random(plan.seed)
    base_time = datetime(2024, 1, 1, tzinfo=timezone.utc)
    records: list[WpnRecord] = []
    truth: dict[str, str] = {}

    def stamp(index: int) -> str:
        moment = base_time + timedelta(seconds=index)
        return moment.strftime("%Y-%m-%dT%H:%M:%SZ")

    idx = 0
    for campaign in plan.campaigns:
        slug = _slug(campaign.name)
        sources = [f"news-{slug}-{k}.com" for k in range(campaign.n_source_domains)]
        landings = [f"land-{slug}-{k}.com" for k in range(campaign.n_landing_domains)]
        for i in range(campaign.n_messages):
            rec_id = f"syn-{idx:05d}"
            source_domain = sources[i % len(sources)]
            landing_domain = landings[i % len(landings)]
            path = campaign.path_template.format(i=i).strip("/")
            landing_url = f"https://{landing_domain}/{path}?uid={idx}"
            records.append(
                WpnRecord(
                    id=rec_id,
                    source_url=f"https://www.{source_domain}/index.html",
                    source_etld1=source_domain,
                    sw_script_url=f"https://www.{source_domain}/sw.js",
                    title=campaign.title.format(i=i),
                    body=campaign.body.format(i=i),
                    icon_url=f"https://www.{source_domain}/icon.png",
                    landing_url=landing_url,
                    redirect_chain=(f"https://go-{slug}.com/r?to={idx}", landing_url),
                    platform=PLATFORMS[i % 2],
                    collected_at=stamp(idx),
                    clicked=True,
                )
            )
            truth[rec_id] = campaign.name
            idx += 1

    for j in range(plan.n_noise):
        rec_id = f"syn-{idx:05d}"
        words = rng.sample(_NOISE_WORDS, 8)
        domain = f"site-{j}.net"
        landing_domain = f"dest-{j}.net"
        landing_url = f"https://{landing_domain}/{words[6]}/{words[7]}.html"
        records.append(
            WpnRecord(
                id=rec_id,
                source_url=f"https://www.{domain}/read.html",
                source_etld1=domain,
                sw_script_url=f"https://www.{domain}/sw.js",
                title=" ".join(words[:3]).capitalize(),
                body=" ".join(words[3:6]),
                icon_url=None,
                landing_url=landing_url,
                redirect_chain=(landing_url,),
                platform=PLATFORMS[j % 2],
                collected_at=stamp(idx),
                clicked=True,
            )
        )
        truth[rec_id] = f"noise-{j}"
        idx += 1

    for j in range(plan.n_unclustered):
        rec_id = f"syn-{idx:05d}"
        words = rng.sample(_NOISE_WORDS, 5)
        domain = f"quiet-{j}.org"
        records.append(
            WpnRecord(
                id=rec_id,
                source_url=f"https://www.{domain}/page.html",
                source_etld1=domain,
                sw_script_url=f"https://www.{domain}/sw.js",
                title=" ".join(words[:2]).capitalize(),
                body=" ".join(words[2:]),
                icon_url=None,
                landing_url=None,
                redirect_chain=(),
                platform=PLATFORMS[j % 2],
                collected_at=stamp(idx),
                clicked=False,
            )
        )
        idx += 1

    provenance = Provenance(sources=(f"synthetic:seed={plan.seed}",), loaded_at=stamp(idx))
    return SyntheticResult(dataset=Dataset(tuple(records), provenance), truth=truth)
