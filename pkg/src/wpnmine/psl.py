"""Public-suffix handling and registrable-domain (eTLD+1) extraction.

A static suffix snapshot is bundled with the package; deployments that
need a fresher list point the pipeline config at their own file. The
snapshot format is the usual one: one suffix per line, ``//`` comments,
``*.`` wildcard rules and ``!`` exception rules.
"""

from __future__ import annotations

import ipaddress
import re
from importlib import resources
from pathlib import Path

from .errors import HostParseError

_LABEL_RE = re.compile(r"^[a-z0-9_]([a-z0-9_-]*[a-z0-9_])?$", re.IGNORECASE)


class PublicSuffixList:
    """Suffix rules with wildcard/exception lookup."""

    def __init__(self, rules: set[str], wildcards: set[str], exceptions: set[str]):
        self.rules = rules
        self.wildcards = wildcards  # stored without the "*." prefix
        self.exceptions = exceptions  # stored without the "!" prefix

    @classmethod
    def from_text(cls, text: str) -> "PublicSuffixList":
        rules: set[str] = set()
        wildcards: set[str] = set()
        exceptions: set[str] = set()
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("//"):
                continue
            line = line.split()[0].lower()
            if line.startswith("!"):
                exceptions.add(line[1:])
            elif line.startswith("*."):
                wildcards.add(line[2:])
            else:
                rules.add(line)
        return cls(rules, wildcards, exceptions)

    @classmethod
    def from_file(cls, path: str | Path) -> "PublicSuffixList":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def suffix_length(self, labels: list[str]) -> int:
        """Number of trailing labels that form the public suffix.

        Longest-match wins; exception rules shorten the matched wildcard
        by one label; an unmatched host falls back to the one-label
        default rule.
        """
        best = 1  # implicit "*" default rule
        for i in range(len(labels)):
            candidate = ".".join(labels[i:])
            length = len(labels) - i
            if candidate in self.exceptions:
                # exception: the suffix is the rule minus its first label
                return length - 1
            if candidate in self.rules and length > best:
                best = length
            if length >= 2 and ".".join(labels[i + 1:]) in self.wildcards:
                if length > best:
                    best = length
            # a wildcard can also extend past the host itself
            if candidate in self.wildcards and length + 1 > best:
                # "*.foo" with host exactly "foo": the whole host is
                # inside the suffix zone
                best = length
        return best


_BUNDLED: PublicSuffixList | None = None


def bundled_psl() -> PublicSuffixList:
    """The snapshot shipped inside the package (cached)."""
    global _BUNDLED
    if _BUNDLED is None:
        text = resources.files("wpnmine.data").joinpath("public_suffix_list.dat").read_text("utf-8")
        _BUNDLED = PublicSuffixList.from_text(text)
    return _BUNDLED


def _is_ip_literal(host: str) -> bool:
    try:
        ipaddress.ip_address(host.strip("[]"))
        return True
    except ValueError:
        return False


def normalize_host(host: str) -> str:
    """Lowercase and strip the optional trailing dot; validate labels."""
    if not host or host != host.strip():
        raise HostParseError(f"malformed host: {host!r}")
    h = host.lower().rstrip(".")
    if not h:
        raise HostParseError(f"malformed host: {host!r}")
    if _is_ip_literal(h):
        return h
    for label in h.split("."):
        if not label or len(label) > 63 or not _LABEL_RE.match(label):
            raise HostParseError(f"malformed host: {host!r} (label {label!r})")
    return h


def etld_plus_one(host: str, psl: PublicSuffixList | None = None) -> str:
    """Registrable domain of ``host``: public suffix plus one label.

    IP literals and hosts that are themselves a public suffix are
    returned unchanged.
    """
    psl = psl or bundled_psl()
    h = normalize_host(host)
    if _is_ip_literal(h):
        return h
    labels = h.split(".")
    n_suffix = psl.suffix_length(labels)
    if n_suffix >= len(labels):
        return h
    return ".".join(labels[len(labels) - n_suffix - 1:])
