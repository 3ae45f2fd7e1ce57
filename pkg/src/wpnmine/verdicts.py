"""URL verdict providers, caching, and rescan deltas.

Verdicts are keyed by the full canonical URL, never by domain. The
provider chain is manual blacklist, then local list files, then a
remote scanner; the first non-unknown answer wins and is cached under
a TTL. Remote failures degrade to an annotated unknown verdict instead
of failing the pipeline.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Protocol, Sequence
from urllib.parse import urlsplit, urlunsplit

import httpx

from .errors import UrlParseError

STATUSES = ("malicious", "benign", "unknown")
SOURCES = ("manual", "local_list", "remote_scanner", "none")

DEFAULT_TTL_DAYS = 30


def canonicalize_url(url: str) -> str:
    """Lowercase scheme and host, strip default ports, keep the rest.

    Path, query, and fragment are preserved verbatim: verdict services
    key on full URLs and sibling paths carry independent verdicts.
    """
    try:
        split = urlsplit(url)
    except ValueError as exc:
        raise UrlParseError(f"unparseable URL: {url!r}") from exc
    if not split.scheme or split.hostname is None:
        raise UrlParseError(f"not an absolute URL: {url!r}")
    scheme = split.scheme.lower()
    host = split.hostname.lower()
    port = split.port
    if port is not None and not (
        (scheme == "http" and port == 80) or (scheme == "https" and port == 443)
    ):
        host = f"{host}:{port}"
    userinfo = ""
    if split.username:
        userinfo = split.username
        if split.password:
            userinfo += f":{split.password}"
        userinfo += "@"
    return urlunsplit((scheme, userinfo + host, split.path, split.query, split.fragment))


def url_key(url: str) -> str:
    """Stable cache/stub key: SHA-256 of the canonical URL."""
    return hashlib.sha256(canonicalize_url(url).encode("utf-8")).hexdigest()


@dataclass(frozen=True, slots=True)
class Verdict:
    url: str
    status: str
    source: str
    engine_hits: int = 0
    fetched_at: str = ""
    note: str = ""

    def __post_init__(self) -> None:
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if self.source == "remote_scanner" and self.status == "malicious" and self.engine_hits < 1:
            raise ValueError("remote malicious verdict needs at least one engine hit")

    def to_json(self) -> dict:
        return {
            "url": self.url,
            "status": self.status,
            "source": self.source,
            "engine_hits": self.engine_hits,
            "fetched_at": self.fetched_at,
            "note": self.note,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "Verdict":
        return cls(
            url=payload["url"],
            status=payload["status"],
            source=payload["source"],
            engine_hits=payload.get("engine_hits", 0),
            fetched_at=payload.get("fetched_at", ""),
            note=payload.get("note", ""),
        )


class Provider(Protocol):
    source: str

    def lookup(self, canonical_url: str) -> Verdict: ...


def _now_iso(now: datetime | None = None) -> str:
    moment = now or datetime.now(timezone.utc)
    return moment.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class LocalListProvider:
    """Plain-text blacklist: one canonical URL per line, # comments."""

    source = "local_list"

    def __init__(self, urls: Iterable[str]):
        self._listed = {canonicalize_url(u) for u in urls}

    @classmethod
    def from_file(cls, path: str | Path) -> "LocalListProvider":
        urls = []
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            line = raw.strip()
            if line and not line.startswith("#"):
                urls.append(line)
        return cls(urls)

    def lookup(self, canonical_url: str) -> Verdict:
        if canonical_url in self._listed:
            return Verdict(url=canonical_url, status="malicious", source=self.source, engine_hits=1)
        return Verdict(url=canonical_url, status="unknown", source=self.source)


class ManualBlacklist:
    """Append-only analyst log; the last entry per URL wins."""

    source = "manual"

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path is not None else None
        self._latest: dict[str, Verdict] = {}
        self._lock = threading.Lock()
        if self._path is not None and self._path.exists():
            for raw in self._path.read_text(encoding="utf-8").splitlines():
                if raw.strip():
                    entry = json.loads(raw)
                    self._apply(entry)

    def _apply(self, entry: dict) -> None:
        canonical = canonicalize_url(entry["url"])
        self._latest[canonical] = Verdict(
            url=canonical,
            status=entry["status"],
            source=self.source,
            fetched_at=entry.get("at", ""),
            note=f"analyst={entry.get('analyst', '')}",
        )

    def add(self, url: str, status: str, analyst: str, now: datetime | None = None) -> dict:
        if status not in ("malicious", "benign"):
            raise ValueError(f"manual verdicts are malicious or benign, got {status!r}")
        entry = {
            "url": canonicalize_url(url),
            "status": status,
            "analyst": analyst,
            "at": _now_iso(now),
        }
        with self._lock:
            if self._path is not None:
                with self._path.open("a", encoding="utf-8") as handle:
                    handle.write(json.dumps(entry, ensure_ascii=False) + "\n")
            self._apply(entry)
        return entry

    def lookup(self, canonical_url: str) -> Verdict:
        with self._lock:
            verdict = self._latest.get(canonical_url)
        if verdict is not None:
            return verdict
        return Verdict(url=canonical_url, status="unknown", source=self.source)


class RateBudget:
    """Global requests-per-minute budget shared across threads."""

    def __init__(self, per_minute: int, clock=time.monotonic, sleep=time.sleep):
        if per_minute < 1:
            raise ValueError("per_minute must be >= 1")
        self.per_minute = per_minute
        self._clock = clock
        self._sleep = sleep
        self._stamps: list[float] = []
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self._stamps = [t for t in self._stamps if now - t < 60.0]
                if len(self._stamps) < self.per_minute:
                    self._stamps.append(now)
                    return
                wait = 60.0 - (now - self._stamps[0])
            self._sleep(max(wait, 0.01))


class RemoteScannerClient:
    """HTTP verdict client: GET {base}/v1/urls/{sha256(canonical)}.

    Expected response: JSON {"engine_hits": n}. 404 means the scanner
    has never seen the URL; timeouts and 5xx responses degrade to an
    annotated unknown verdict.
    """

    source = "remote_scanner"

    def __init__(
        self,
        base_url: str,
        *,
        per_minute: int = 60,
        timeout: float = 5.0,
        min_hits: int = 1,
        transport: httpx.BaseTransport | None = None,
    ):
        self.min_hits = min_hits
        self._budget = RateBudget(per_minute)
        self._client = httpx.Client(base_url=base_url, timeout=timeout, transport=transport)

    def lookup(self, canonical_url: str) -> Verdict:
        self._budget.acquire()
        key = hashlib.sha256(canonical_url.encode("utf-8")).hexdigest()
        try:
            response = self._client.get(f"/v1/urls/{key}")
        except httpx.HTTPError as exc:
            return Verdict(
                url=canonical_url,
                status="unknown",
                source=self.source,
                note=f"transport error: {type(exc).__name__}",
            )
        if response.status_code == 404:
            return Verdict(url=canonical_url, status="unknown", source=self.source)
        if response.status_code >= 500:
            return Verdict(
                url=canonical_url,
                status="unknown",
                source=self.source,
                note=f"server error: {response.status_code}",
            )
        try:
            hits = int(response.json()["engine_hits"])
        except (ValueError, KeyError, json.JSONDecodeError):
            return Verdict(
                url=canonical_url, status="unknown", source=self.source, note="malformed response"
            )
        status = "malicious" if hits >= self.min_hits else "benign"
        return Verdict(url=canonical_url, status=status, source=self.source, engine_hits=hits)

    def close(self) -> None:
        self._client.close()


class FileStubScanner:
    """Directory of canned responses keyed by URL hash; counts lookups.

    Each file is {sha256(canonical)}.json holding {"engine_hits": n}.
    Stands in for the remote scanner in tests and offline runs.
    """

    source = "remote_scanner"

    def __init__(self, directory: str | Path, min_hits: int = 1):
        self._dir = Path(directory)
        self.min_hits = min_hits
        self.calls = 0

    def seed(self, url: str, engine_hits: int) -> None:
        self._dir.mkdir(parents=True, exist_ok=True)
        key = url_key(url)
        (self._dir / f"{key}.json").write_text(
            json.dumps({"engine_hits": engine_hits}), encoding="utf-8"
        )

    def lookup(self, canonical_url: str) -> Verdict:
        self.calls += 1
        key = hashlib.sha256(canonical_url.encode("utf-8")).hexdigest()
        path = self._dir / f"{key}.json"
        if not path.exists():
            return Verdict(url=canonical_url, status="unknown", source=self.source)
        hits = int(json.loads(path.read_text(encoding="utf-8"))["engine_hits"])
        status = "malicious" if hits >= self.min_hits else "benign"
        return Verdict(url=canonical_url, status=status, source=self.source, engine_hits=hits)


class VerdictStore:
    """File-backed verdict cache keyed by canonical URL."""

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path is not None else None
        self._entries: dict[str, Verdict] = {}
        self._lock = threading.Lock()
        if self._path is not None and self._path.exists():
            payload = json.loads(self._path.read_text(encoding="utf-8"))
            self._entries = {u: Verdict.from_json(v) for u, v in payload.get("verdicts", {}).items()}

    def get(self, canonical_url: str) -> Verdict | None:
        with self._lock:
            return self._entries.get(canonical_url)

    def put(self, verdict: Verdict) -> None:
        with self._lock:
            self._entries[verdict.url] = verdict
            self._flush()

    def _flush(self) -> None:
        if self._path is None:
            return
        payload = {
            "format": "wpnmine-verdicts",
            "version": 1,
            "verdicts": {u: v.to_json() for u, v in sorted(self._entries.items())},
        }
        self._path.write_text(
            json.dumps(payload, ensure_ascii=False, indent=1, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    def snapshot(self) -> dict[str, Verdict]:
        with self._lock:
            return dict(self._entries)

    def __len__(self) -> int:
        return len(self._entries)


def _is_fresh(verdict: Verdict, ttl_days: float, now: datetime) -> bool:
    if not verdict.fetched_at:
        return False
    fetched = datetime.fromisoformat(verdict.fetched_at.replace("Z", "+00:00"))
    return now - fetched < timedelta(days=ttl_days)


def query(
    url: str,
    providers: Sequence[Provider],
    cache: VerdictStore,
    *,
    ttl_days: float = DEFAULT_TTL_DAYS,
    now: datetime | None = None,
) -> Verdict:
    """Resolve one URL through the provider chain with caching.

    Providers are tried in the given order (callers pass manual, then
    local, then remote); the first non-unknown verdict is cached and
    returned. All-unknown results are cached too, so repeat queries
    within the TTL make no provider calls at all.
    """
    moment = now or datetime.now(timezone.utc)
    canonical = canonicalize_url(url)
    cached = cache.get(canonical)
    if cached is not None and _is_fresh(cached, ttl_days, moment):
        return cached
    result: Verdict | None = None
    for provider in providers:
        verdict = provider.lookup(canonical)
        if verdict.status != "unknown":
            result = verdict
            break
    if result is None:
        result = Verdict(url=canonical, status="unknown", source="none")
    result = replace(result, fetched_at=_now_iso(moment))
    cache.put(result)
    return result


def resolve_all(
    urls: Iterable[str],
    providers: Sequence[Provider],
    cache: VerdictStore,
    *,
    ttl_days: float = DEFAULT_TTL_DAYS,
    now: datetime | None = None,
) -> dict[str, Verdict]:
    """Verdict snapshot for a set of URLs, keyed by canonical URL."""
    out: dict[str, Verdict] = {}
    for url in urls:
        verdict = query(url, providers, cache, ttl_days=ttl_days, now=now)
        out[verdict.url] = verdict
    return out


@dataclass(frozen=True, slots=True)
class RescanDelta:
    """Partition of a rescan: URLs whose status changed and the rest."""

    changed: tuple[tuple[str, str, str], ...]  # (canonical url, old, new)
    unchanged: tuple[str, ...]

    @property
    def change_ratio(self) -> float:
        total = len(self.changed) + len(self.unchanged)
        return len(self.changed) / total if total else 0.0


def rescan(
    urls: Iterable[str],
    provider: Provider,
    cache: VerdictStore,
    *,
    now: datetime | None = None,
) -> RescanDelta:
    """Re-query every URL against one provider, ignoring the TTL.

    The cache is updated with any non-unknown result; a URL whose
    fresh lookup comes back unknown keeps its previous status.
    """
    moment = now or datetime.now(timezone.utc)
    changed: list[tuple[str, str, str]] = []
    unchanged: list[str] = []
    for url in urls:
        canonical = canonicalize_url(url)
        cached = cache.get(canonical)
        old_status = cached.status if cached is not None else "unknown"
        fresh = provider.lookup(canonical)
        new_status = fresh.status if fresh.status != "unknown" else old_status
        if fresh.status != "unknown":
            cache.put(replace(fresh, fetched_at=_now_iso(moment)))
        if new_status != old_status:
            changed.append((canonical, old_status, new_status))
        else:
            unchanged.append(canonical)
    return RescanDelta(changed=tuple(changed), unchanged=tuple(unchanged))
