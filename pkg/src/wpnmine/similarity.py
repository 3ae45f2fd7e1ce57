"""Pairwise notification distance.

Text side: soft cosine over term weights with the sparse term
similarity matrix. URL side: Jaccard distance over landing-path token
sets. The combined distance is a weighted mean, 50/50 by default.

Scalar functions here accumulate in the same order as the batch kernel,
so a brute-force pairwise loop reproduces ``distance_matrix`` output
bit-for-bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import sqrt
from pathlib import Path
from typing import Sequence

import numpy as np

from ._kernels import combined_distances
from .embeddings import TermSimilarityMatrix, Vocabulary
from .errors import ConfigError, PipelineError
from .model import BagOfWords, WpnRecord, tokenize_url_path
from .psl import PublicSuffixList


def _bag_to_sparse(bag: BagOfWords, vocab: Vocabulary) -> tuple[list[int], list[float]]:
    pairs = sorted(
        (vocab.index[t], float(c)) for t, c in bag.counts.items() if t in vocab.index
    )
    return [i for i, _ in pairs], [w for _, w in pairs]


def _qform(
    ix: list[int],
    wx: list[float],
    y_weights: dict[int, float],
    sim: TermSimilarityMatrix,
) -> float:
    indptr = sim.indptr
    indices = sim.indices
    data = sim.data
    acc = 0.0
    for a, wa in zip(ix, wx):
        for p in range(indptr[a], indptr[a + 1]):
            wb = y_weights.get(int(indices[p]), 0.0)
            if wb != 0.0:
                acc += wa * float(data[p]) * wb
    return acc


def soft_cosine(x: BagOfWords, y: BagOfWords, sim: TermSimilarityMatrix, vocab: Vocabulary) -> float:
    """Similarity in [0,1]; a bag with zero quadratic form counts as empty.

    Two empty bags are fully similar (1.0); empty against non-empty is
    0.0. Values are clamped to [0,1] because the sparsified matrix is
    not guaranteed positive semi-definite.
    """
    ix, wx = _bag_to_sparse(x, vocab)
    iy, wy = _bag_to_sparse(y, vocab)
    xd = dict(zip(ix, wx))
    yd = dict(zip(iy, wy))
    qx = _qform(ix, wx, xd, sim)
    qy = _qform(iy, wy, yd, sim)
    if qx == 0.0 and qy == 0.0:
        return 1.0
    if qx == 0.0 or qy == 0.0:
        return 0.0
    s = _qform(ix, wx, yd, sim) / sqrt(qx * qy)
    if s < 0.0:
        return 0.0
    if s > 1.0:
        return 1.0
    return s


def text_distance(a: WpnRecord, b: WpnRecord, sim: TermSimilarityMatrix, vocab: Vocabulary) -> float:
    return 1.0 - soft_cosine(a.text_bag(), b.text_bag(), sim, vocab)


def jaccard_distance(a: frozenset, b: frozenset) -> float:
    """Jaccard distance over arbitrary token sets; both empty gives 0."""
    if not a and not b:
        return 0.0
    inter = len(a & b)
    return 1.0 - inter / (len(a) + len(b) - inter)


def url_path_distance(a: WpnRecord, b: WpnRecord, psl: PublicSuffixList | None = None) -> float:
    if a.landing_url is None or b.landing_url is None:
        raise PipelineError("distance", f"records {a.id!r}/{b.id!r} lack a landing_url")
    return jaccard_distance(a.landing_path_tokens(psl), b.landing_path_tokens(psl))


def combined_distance(
    a: WpnRecord,
    b: WpnRecord,
    sim: TermSimilarityMatrix,
    vocab: Vocabulary,
    text_weight: float = 0.5,
    psl: PublicSuffixList | None = None,
) -> float:
    path_weight = 1.0 - text_weight
    return text_weight * text_distance(a, b, sim, vocab) + path_weight * url_path_distance(
        a, b, psl
    )


@dataclass(frozen=True, slots=True)
class DistanceMatrix:
    """Condensed pairwise distances with the record-id row order."""

    ids: tuple[str, ...]
    condensed: np.ndarray

    @property
    def n(self) -> int:
        return len(self.ids)

    def get(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        if i > j:
            i, j = j, i
        n = self.n
        return float(self.condensed[n * i - i * (i + 1) // 2 + (j - i - 1)])


def distance_matrix(
    records: Sequence[WpnRecord],
    sim: TermSimilarityMatrix,
    vocab: Vocabulary,
    text_weight: float = 0.5,
    psl: PublicSuffixList | None = None,
) -> DistanceMatrix:
    """All unordered pair distances over clusterable records."""
    n = len(records)
    if n < 2:
        raise PipelineError("distance", f"need at least 2 clusterable records, got {n}")
    if not 0.0 <= text_weight <= 1.0:
        raise ConfigError(f"text_weight must be in [0,1], got {text_weight}")
    for record in records:
        if record.landing_url is None:
            raise PipelineError("distance", f"record {record.id!r} lacks a landing_url")

    term_idx: list[int] = []
    term_wt: list[float] = []
    term_off = [0]
    for record in records:
        ix, wx = _bag_to_sparse(record.text_bag(), vocab)
        term_idx.extend(ix)
        term_wt.extend(wx)
        term_off.append(len(term_idx))

    path_sets = [record.landing_path_tokens(psl) for record in records]
    token_id = {t: i for i, t in enumerate(sorted(set().union(*path_sets)))}
    path_idx: list[int] = []
    path_off = [0]
    for tokens in path_sets:
        path_idx.extend(sorted(token_id[t] for t in tokens))
        path_off.append(len(path_idx))

    condensed = combined_distances(
        np.asarray(term_idx, dtype=np.int64),
        np.asarray(term_wt, dtype=np.float64),
        np.asarray(term_off, dtype=np.int64),
        np.asarray(path_idx, dtype=np.int64),
        np.asarray(path_off, dtype=np.int64),
        sim.indptr,
        sim.indices,
        sim.data,
        sim.n,
        text_weight,
        1.0 - text_weight,
    )
    return DistanceMatrix(ids=tuple(r.id for r in records), condensed=condensed)


_DM_MAGIC = "wpnmine-distances"


def save_distance_matrix(matrix: DistanceMatrix, path: str | Path) -> None:
    """Write the documented distance file.

    Layout: one UTF-8 JSON header line (magic, version, n, ids), then
    n*(n-1)/2 little-endian float64 condensed values.
    """
    header = {"format": _DM_MAGIC, "version": 1, "n": matrix.n, "ids": list(matrix.ids)}
    with Path(path).open("wb") as handle:
        handle.write(json.dumps(header, ensure_ascii=False).encode("utf-8"))
        handle.write(b"\n")
        handle.write(np.ascontiguousarray(matrix.condensed, dtype="<f8").tobytes())


def load_distance_matrix(path: str | Path) -> DistanceMatrix:
    with Path(path).open("rb") as handle:
        header = json.loads(handle.readline().decode("utf-8"))
        if header.get("format") != _DM_MAGIC or header.get("version") != 1:
            raise ConfigError(f"not a distance file: {path}")
        n = header["n"]
        condensed = np.frombuffer(handle.read(n * (n - 1) // 2 * 8), dtype="<f8").copy()
    return DistanceMatrix(ids=tuple(header["ids"]), condensed=condensed)
