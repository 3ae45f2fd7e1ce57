"""Adblock-style filter parsing and URL matching, small subset.

Supported: ``||`` domain anchors, ``|`` start/end anchors, plain
substrings, ``*`` wildcards, ``^`` separators, ``@@`` exceptions, and
the ``$domain=`` option. Every unsupported line is reported with a
reason instead of being silently dropped, so an audit over a real
filter snapshot accounts for the whole file.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .ingest import Dataset

_SEPARATOR_CLASS = r"(?:[^0-9a-z_\-.%]|$)"
_SCHEME_PREFIX = r"^[a-z][a-z0-9+.\-]*://(?:[^/?#]*\.)?"

KINDS = ("anchor_domain", "start_anchor", "plain")


@dataclass(frozen=True, slots=True)
class FilterRule:
    raw: str
    index: int
    exception: bool
    kind: str
    pattern: str
    end_anchor: bool
    include_domains: tuple[str, ...] = ()
    exclude_domains: tuple[str, ...] = ()
    regex: re.Pattern = field(compare=False, repr=False, default=None)  # type: ignore[assignment]

    def serialize(self) -> str:
        """Reconstruct canonical rule text from the parsed fields."""
        out = "@@" if self.exception else ""
        if self.kind == "anchor_domain":
            out += "||"
        elif self.kind == "start_anchor":
            out += "|"
        out += self.pattern
        if self.end_anchor:
            out += "|"
        domains = [*self.include_domains, *(f"~{d}" for d in self.exclude_domains)]
        if domains:
            out += "$domain=" + "|".join(domains)
        return out

    def applies_to(self, doc_domain: str | None) -> bool:
        if doc_domain is None:
            return not self.include_domains
        doc = doc_domain.lower()

        def hit(rule_domain: str) -> bool:
            return doc == rule_domain or doc.endswith("." + rule_domain)

        if any(hit(d) for d in self.exclude_domains):
            return False
        if self.include_domains:
            return any(hit(d) for d in self.include_domains)
        return True


@dataclass(frozen=True, slots=True)
class IgnoredLine:
    line: int
    reason: str
    text: str


@dataclass(frozen=True, slots=True)
class ParseReport:
    rules: tuple[FilterRule, ...]
    ignored: tuple[IgnoredLine, ...]
    total_lines: int

    @property
    def ignored_by_reason(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for entry in self.ignored:
            counts[entry.reason] = counts.get(entry.reason, 0) + 1
        return counts


def _compile(kind: str, pattern: str, end_anchor: bool) -> re.Pattern:
    parts: list[str] = []
    for ch in pattern:
        if ch == "*":
            parts.append(".*")
        elif ch == "^":
            parts.append(_SEPARATOR_CLASS)
        else:
            parts.append(re.escape(ch))
    body = "".join(parts)
    if kind == "anchor_domain":
        body = _SCHEME_PREFIX + body
    elif kind == "start_anchor":
        body = "^" + body
    if end_anchor:
        body += "$"
    return re.compile(body)


def _parse_line(text: str, line_no: int, index: int) -> FilterRule | IgnoredLine:
    line = text.strip()
    if not line:
        return IgnoredLine(line_no, "empty", text)
    if line.startswith("!") or line.startswith("[Adblock"):
        return IgnoredLine(line_no, "comment", text)
    if any(marker in line for marker in ("##", "#@#", "#?#", "#$#")):
        return IgnoredLine(line_no, "element-hiding", text)
    if len(line) > 1 and line.startswith("/") and line.endswith("/"):
        return IgnoredLine(line_no, "regex-rule", text)

    exception = line.startswith("@@")
    if exception:
        line = line[2:]

    include: list[str] = []
    exclude: list[str] = []
    if "$" in line:
        line, _, option_text = line.rpartition("$")
        for option in option_text.split(","):
            option = option.strip()
            if not option:
                return IgnoredLine(line_no, "malformed-option", text)
            name, eq, value = option.partition("=")
            if name != "domain" or not eq:
                return IgnoredLine(line_no, "unsupported-option", text)
            for dom in value.split("|"):
                dom = dom.strip().lower()
                if not dom:
                    return IgnoredLine(line_no, "malformed-option", text)
                if dom.startswith("~"):
                    exclude.append(dom[1:])
                else:
                    include.append(dom)

    if line.startswith("||"):
        kind = "anchor_domain"
        line = line[2:]
    elif line.startswith("|"):
        kind = "start_anchor"
        line = line[1:]
    else:
        kind = "plain"
    end_anchor = line.endswith("|")
    if end_anchor:
        line = line[:-1]
    if not line:
        return IgnoredLine(line_no, "empty-pattern", text)

    pattern = line.lower()
    return FilterRule(
        raw=text.strip(),
        index=index,
        exception=exception,
        kind=kind,
        pattern=pattern,
        end_anchor=end_anchor,
        include_domains=tuple(include),
        exclude_domains=tuple(exclude),
        regex=_compile(kind, pattern, end_anchor),
    )


def parse_filter_list(text: str) -> ParseReport:
    """Parse the supported subset; everything else is ignored-with-reason."""
    rules: list[FilterRule] = []
    ignored: list[IgnoredLine] = []
    lines = text.splitlines()
    for line_no, raw in enumerate(lines, start=1):
        outcome = _parse_line(raw, line_no, len(rules))
        if isinstance(outcome, FilterRule):
            rules.append(outcome)
        else:
            ignored.append(outcome)
    return ParseReport(rules=tuple(rules), ignored=tuple(ignored), total_lines=len(lines))


@dataclass(frozen=True, slots=True)
class MatchDecision:
    outcome: str  # "blocked" | "allowed" | "unmatched"
    rule: FilterRule | None = None


class RuleSet:
    """Compiled rules split into block and exception classes.

    Within each class the first matching rule (by parse order) wins;
    a matching exception always overrides a matching block.
    """

    def __init__(self, rules: Iterable[FilterRule]):
        ordered = sorted(rules, key=lambda r: r.index)
        self.blocks = tuple(r for r in ordered if not r.exception)
        self.exceptions = tuple(r for r in ordered if r.exception)

    def match(self, url: str, doc_domain: str | None = None) -> MatchDecision:
        target = url.lower()
        block = None
        for rule in self.blocks:
            if rule.applies_to(doc_domain) and rule.regex.search(target):
                block = rule
                break
        if block is None:
            return MatchDecision("unmatched")
        for rule in self.exceptions:
            if rule.applies_to(doc_domain) and rule.regex.search(target):
                return MatchDecision("allowed", rule)
        return MatchDecision("blocked", block)


def match_url(url: str, rules: Iterable[FilterRule], doc_domain: str | None = None) -> MatchDecision:
    return RuleSet(rules).match(url, doc_domain)


@dataclass(frozen=True, slots=True)
class FilterAudit:
    sw_scripts_total: int
    sw_scripts_blocked: int
    sw_requests_total: int
    sw_requests_blocked: int
    blocked_script_urls: tuple[str, ...]
    blocked_request_urls: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "sw_scripts": {"blocked": self.sw_scripts_blocked, "total": self.sw_scripts_total},
            "sw_requests": {"blocked": self.sw_requests_blocked, "total": self.sw_requests_total},
            "blocked_script_urls": list(self.blocked_script_urls),
            "blocked_request_urls": list(self.blocked_request_urls),
        }

    def table(self) -> str:
        rows = [
            ("Service worker scripts", self.sw_scripts_blocked, self.sw_scripts_total),
            ("Service worker requests", self.sw_requests_blocked, self.sw_requests_total),
        ]
        width = max(len(r[0]) for r in rows)
        lines = [f"{'URL class':<{width}}  Blocked  Total"]
        for name, blocked, total in rows:
            lines.append(f"{name:<{width}}  {blocked:>7}  {total:>5}")
        return "\n".join(lines)


def audit_dataset(dataset: Dataset, ruleset: RuleSet) -> FilterAudit:
    """Check service-worker script and redirect-request URLs.

    Distinct URLs are counted once; the document domain used for
    $domain= options is the source eTLD+1 of the first record carrying
    the URL.
    """
    scripts: dict[str, str] = {}
    requests: dict[str, str] = {}
    for record in dataset.records:
        if record.sw_script_url and record.sw_script_url not in scripts:
            scripts[record.sw_script_url] = record.source_etld1
        for url in record.redirect_chain:
            if url not in requests:
                requests[url] = record.source_etld1

    blocked_scripts = [
        url for url, doc in scripts.items() if ruleset.match(url, doc).outcome == "blocked"
    ]
    blocked_requests = [
        url for url, doc in requests.items() if ruleset.match(url, doc).outcome == "blocked"
    ]
    return FilterAudit(
        sw_scripts_total=len(scripts),
        sw_scripts_blocked=len(blocked_scripts),
        sw_requests_total=len(requests),
        sw_requests_blocked=len(blocked_requests),
        blocked_script_urls=tuple(blocked_scripts),
        blocked_request_urls=tuple(blocked_requests),
    )


def save_audit(audit: FilterAudit, ignored: ParseReport, path: str | Path) -> None:
    """Write the structured audit report."""
    payload = {
        "format": "wpnmine-filter-audit",
        "version": 1,
        "audit": audit.to_json(),
        "rules_parsed": len(ignored.rules),
        "lines_total": ignored.total_lines,
        "ignored_by_reason": dict(sorted(ignored.ignored_by_reason.items())),
    }
    Path(path).write_text(
        json.dumps(payload, ensure_ascii=False, indent=1, sort_keys=True) + "\n",
        encoding="utf-8",
    )
