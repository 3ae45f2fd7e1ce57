"""Domain types shared by every pipeline stage.

Push-notification records, URL decomposition, and the two tokenizers
(message text and landing-URL path) live here. Everything is immutable
after construction and safe to share across threads.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from urllib.parse import parse_qsl, urlsplit

from .errors import UrlParseError
from .psl import PublicSuffixList, etld_plus_one, normalize_host

PLATFORMS = ("desktop", "mobile")

# alphanumeric runs, Unicode-aware, underscore treated as a separator
_TOKEN_RE = re.compile(r"[^\W_]+")


@dataclass(frozen=True, slots=True)
class UrlParts:
    """Structured view of an absolute URL.

    Query string values are dropped at parse time and never stored;
    only parameter names survive.
    """

    scheme: str
    host: str
    etld1: str
    path_segments: tuple[str, ...]
    page_name: str
    query_param_names: frozenset[str]


def parse_url(url: str, psl: PublicSuffixList | None = None) -> UrlParts:
    """Decompose an absolute http(s) URL into :class:`UrlParts`."""
    try:
        split = urlsplit(url)
    except ValueError as exc:
        raise UrlParseError(f"unparseable URL: {url!r}") from exc
    if split.scheme not in ("http", "https") or not split.hostname:
        raise UrlParseError(f"not an absolute http(s) URL: {url!r}")
    host = normalize_host(split.hostname)
    etld1 = etld_plus_one(host, psl)
    raw_segments = [seg for seg in split.path.split("/") if seg]
    page = raw_segments[-1] if raw_segments else ""
    params = frozenset(
        name for name, _ in parse_qsl(split.query, keep_blank_values=True) if name
    )
    return UrlParts(
        scheme=split.scheme,
        host=host,
        etld1=etld1,
        path_segments=tuple(raw_segments),
        page_name=page,
        query_param_names=params,
    )


def tokenize_url_path(url: str, psl: PublicSuffixList | None = None) -> frozenset[str]:
    """Token set drawn from the URL path and parameter names only.

    Directory segments, the page name, and each query parameter name
    contribute one token apiece; the domain and all query values are
    excluded, so two URLs differing only there tokenize identically.
    """
    parts = parse_url(url, psl)
    tokens = set(parts.path_segments)
    if parts.page_name:
        tokens.add(parts.page_name)
    tokens |= parts.query_param_names
    return frozenset(tokens)


@dataclass(frozen=True, slots=True)
class BagOfWords:
    counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for token, count in self.counts.items():
            if count < 1:
                raise ValueError(f"non-positive count for token {token!r}")

    def __len__(self) -> int:
        return len(self.counts)

    def total(self) -> int:
        return sum(self.counts.values())

    def tokens(self) -> list[str]:
        return sorted(self.counts)


def token_sequence(title: str, body: str) -> list[str]:
    """Tokens of title then body in reading order.

    Lowercase, NFC-normalize, split on any non-alphanumeric run, keep
    tokens of length two or more.
    """
    out: list[str] = []
    for text in (title, body):
        normalized = unicodedata.normalize("NFC", text).lower()
        for token in _TOKEN_RE.findall(normalized):
            if len(token) >= 2:
                out.append(token)
    return out


def tokenize_text(title: str, body: str) -> BagOfWords:
    """Bag of words over the concatenated title and body."""
    counts: dict[str, int] = {}
    for token in token_sequence(title, body):
        counts[token] = counts.get(token, 0) + 1
    return BagOfWords(counts)


@dataclass(frozen=True, slots=True)
class WpnRecord:
    """One captured web push notification."""

    id: str
    source_url: str
    source_etld1: str
    sw_script_url: str
    title: str
    body: str
    icon_url: str | None
    landing_url: str | None
    redirect_chain: tuple[str, ...]
    platform: str
    collected_at: str
    clicked: bool

    def __post_init__(self) -> None:
        if self.platform not in PLATFORMS:
            raise ValueError(f"unknown platform: {self.platform!r}")

    @property
    def clusterable(self) -> bool:
        return self.landing_url is not None

    def text_bag(self) -> BagOfWords:
        return tokenize_text(self.title, self.body)

    def landing_path_tokens(self, psl: PublicSuffixList | None = None) -> frozenset[str]:
        if self.landing_url is None:
            return frozenset()
        return tokenize_url_path(self.landing_url, psl)
