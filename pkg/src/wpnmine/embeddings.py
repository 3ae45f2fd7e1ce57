"""Word embeddings over notification texts and the term-similarity matrix.

The trainer is single-threaded skip-gram with negative sampling and a
fixed 64-bit LCG word RNG, so results are reproducible bit-for-bit for
a given seed. Sparsified cosine similarities between embedding rows
feed the soft-cosine text distance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._kernels import sgns_train
from ._kernels.pykernels import _LCG_ADD, _LCG_MASK, _LCG_MULT
from .errors import ConfigError
from .model import WpnRecord, token_sequence

_NEG_TABLE_SIZE = 1 << 20
_NEG_POWER = 0.75


@dataclass(frozen=True, slots=True)
class Vocabulary:
    """Token index with corpus and document frequencies.

    Indices are dense, ordered by corpus frequency descending then
    token lexicographic, which fixes every downstream iteration order.
    """

    tokens: tuple[str, ...]
    corpus_freq: tuple[int, ...]
    doc_freq: tuple[int, ...]
    min_count: int
    index: dict[str, int] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not self.index:
            object.__setattr__(self, "index", {t: i for i, t in enumerate(self.tokens)})

    def __len__(self) -> int:
        return len(self.tokens)


def build_vocab(records: Iterable[WpnRecord], min_count: int = 2) -> Vocabulary:
    """Count tokens over title+body of every record and index the survivors."""
    corpus: dict[str, int] = {}
    docs: dict[str, int] = {}
    any_record = False
    for record in records:
        any_record = True
        seq = token_sequence(record.title, record.body)
        for token in seq:
            corpus[token] = corpus.get(token, 0) + 1
        for token in set(seq):
            docs[token] = docs.get(token, 0) + 1
    if not any_record:
        raise ConfigError("cannot build a vocabulary from an empty dataset")
    kept = [t for t, c in corpus.items() if c >= min_count]
    if not kept:
        raise ConfigError(f"no token reaches min_count={min_count}; vocabulary empty")
    kept.sort(key=lambda t: (-corpus[t], t))
    return Vocabulary(
        tokens=tuple(kept),
        corpus_freq=tuple(corpus[t] for t in kept),
        doc_freq=tuple(docs[t] for t in kept),
        min_count=min_count,
    )


@dataclass(frozen=True, slots=True)
class SgnsParams:
    dim: int = 64
    window: int = 5
    negatives: int = 5
    epochs: int = 15
    lr: float = 0.025
    seed: int = 1

    def validate(self) -> None:
        if self.dim < 2:
            raise ConfigError(f"embedding dim must be >= 2, got {self.dim}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.window < 1 or self.negatives < 0 or self.lr <= 0:
            raise ConfigError("window must be >= 1, negatives >= 0, lr > 0")


@dataclass(frozen=True, slots=True)
class EmbeddingTable:
    vocab: Vocabulary
    vectors: np.ndarray  # (V, dim), rows unit L2 norm
    params: SgnsParams


def _lcg(state: int) -> int:
    return (state * _LCG_MULT + _LCG_ADD) & _LCG_MASK


def _init_syn0(n_rows: int, dim: int, state: int) -> tuple[np.ndarray, int]:
    # classic word2vec init: uniform in [-0.5/dim, 0.5/dim) from the LCG
    flat = np.zeros(n_rows * dim, dtype=np.float64)
    buf = flat.tolist()
    for i in range(n_rows * dim):
        state = _lcg(state)
        buf[i] = ((state & 0xFFFF) / 65536.0 - 0.5) / dim
    flat[:] = buf
    return flat, state


def _negative_table(corpus_freq: Sequence[int]) -> np.ndarray:
    pow_sum = sum(c ** _NEG_POWER for c in corpus_freq)
    table = np.zeros(_NEG_TABLE_SIZE, dtype=np.int64)
    word = 0
    cumulative = corpus_freq[0] ** _NEG_POWER / pow_sum
    buf = table.tolist()
    for slot in range(_NEG_TABLE_SIZE):
        buf[slot] = word
        if (slot + 1) / _NEG_TABLE_SIZE > cumulative and word < len(corpus_freq) - 1:
            word += 1
            cumulative += corpus_freq[word] ** _NEG_POWER / pow_sum
    table[:] = buf
    return table


def corpus_sentences(records: Iterable[WpnRecord], vocab: Vocabulary) -> list[list[int]]:
    """Per-record token-index sequences with OOV tokens dropped."""
    sentences = []
    for record in records:
        sent = [vocab.index[t] for t in token_sequence(record.title, record.body) if t in vocab.index]
        if sent:
            sentences.append(sent)
    return sentences


def train_skipgram(
    records: Sequence[WpnRecord],
    vocab: Vocabulary,
    params: SgnsParams = SgnsParams(),
) -> EmbeddingTable:
    """Train embeddings; deterministic for a fixed seed and record order."""
    params.validate()
    n_rows = len(vocab)
    syn0, state = _init_syn0(n_rows, params.dim, params.seed)
    syn1 = np.zeros(n_rows * params.dim, dtype=np.float64)

    sentences = corpus_sentences(records, vocab)
    flat = [w for sent in sentences for w in sent]
    if n_rows >= 2 and flat:
        offsets = [0]
        for sent in sentences:
            offsets.append(offsets[-1] + len(sent))
        sgns_train(
            np.asarray(flat, dtype=np.int64),
            np.asarray(offsets, dtype=np.int64),
            syn0,
            syn1,
            _negative_table(vocab.corpus_freq),
            params.dim,
            params.window,
            params.negatives,
            params.epochs,
            params.lr,
            state,
        )

    vectors = syn0.reshape(n_rows, params.dim)
    norms = np.sqrt((vectors * vectors).sum(axis=1))
    for i in range(n_rows):
        if norms[i] == 0.0:
            vectors[i, 0] = 1.0  # degenerate all-zero row
            norms[i] = 1.0
    vectors = vectors / norms[:, None]
    return EmbeddingTable(vocab=vocab, vectors=vectors, params=params)


@dataclass(frozen=True, slots=True)
class TermSimilarityMatrix:
    """Sparse symmetric matrix of clipped term cosines, CSR layout.

    Unit diagonal is always stored; off-diagonal entries survive only
    when they reach the threshold and sit in either endpoint's top-k
    neighbor list.
    """

    n: int
    indptr: np.ndarray  # int64, len n+1
    indices: np.ndarray  # int64, column ids sorted within each row
    data: np.ndarray  # float64 in (0, 1]
    threshold: float
    top_k: int

    @classmethod
    def identity(cls, n: int) -> "TermSimilarityMatrix":
        return cls(
            n=n,
            indptr=np.arange(n + 1, dtype=np.int64),
            indices=np.arange(n, dtype=np.int64),
            data=np.ones(n, dtype=np.float64),
            threshold=1.0,
            top_k=0,
        )

    def entry(self, i: int, j: int) -> float:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        pos = np.searchsorted(self.indices[lo:hi], j)
        if pos < hi - lo and self.indices[lo + pos] == j:
            return float(self.data[lo + pos])
        return 0.0

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=np.float64)
        for i in range(self.n):
            for p in range(self.indptr[i], self.indptr[i + 1]):
                out[i, self.indices[p]] = self.data[p]
        return out


def term_similarity(
    table: EmbeddingTable, threshold: float = 0.5, top_k: int = 10
) -> TermSimilarityMatrix:
    """Sparsify pairwise row cosines into a symmetric CSR matrix."""
    vectors = table.vectors
    n = vectors.shape[0]
    cos = vectors @ vectors.T
    np.clip(cos, 0.0, 1.0, out=cos)

    entries: set[tuple[int, int]] = set()
    for i in range(n):
        row = cos[i]
        candidates = [(float(row[j]), j) for j in range(n) if j != i and row[j] >= threshold]
        candidates.sort(key=lambda t: (-t[0], t[1]))
        for value, j in candidates[:top_k]:
            a, b = (i, j) if i < j else (j, i)
            entries.add((a, b))

    rows: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for a, b in entries:
        value = float(cos[a, b])
        rows[a].append((b, value))
        rows[b].append((a, value))
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for i in range(n):
        cells = rows[i] + [(i, 1.0)]
        cells.sort()
        for j, value in cells:
            indices.append(j)
            data.append(value)
        indptr.append(len(indices))
    return TermSimilarityMatrix(
        n=n,
        indptr=np.asarray(indptr, dtype=np.int64),
        indices=np.asarray(indices, dtype=np.int64),
        data=np.asarray(data, dtype=np.float64),
        threshold=threshold,
        top_k=top_k,
    )


_EMB_MAGIC = "wpnmine-embeddings"
_SIM_MAGIC = "wpnmine-termsim"


def save_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    """Write the documented embeddings file.

    Layout: one UTF-8 JSON header line (magic, version, V, dim, params,
    vocabulary with frequencies), then V*dim little-endian float64
    values row-major.
    """
    header = {
        "format": _EMB_MAGIC,
        "version": 1,
        "v": len(table.vocab),
        "dim": table.params.dim,
        "params": {
            "dim": table.params.dim,
            "window": table.params.window,
            "negatives": table.params.negatives,
            "epochs": table.params.epochs,
            "lr": table.params.lr,
            "seed": table.params.seed,
        },
        "min_count": table.vocab.min_count,
        "tokens": list(table.vocab.tokens),
        "corpus_freq": list(table.vocab.corpus_freq),
        "doc_freq": list(table.vocab.doc_freq),
    }
    with Path(path).open("wb") as handle:
        handle.write(json.dumps(header, ensure_ascii=False).encode("utf-8"))
        handle.write(b"\n")
        handle.write(np.ascontiguousarray(table.vectors, dtype="<f8").tobytes())


def load_embeddings(path: str | Path) -> EmbeddingTable:
    with Path(path).open("rb") as handle:
        header = json.loads(handle.readline().decode("utf-8"))
        if header.get("format") != _EMB_MAGIC or header.get("version") != 1:
            raise ConfigError(f"not an embeddings file: {path}")
        v, dim = header["v"], header["dim"]
        payload = handle.read(v * dim * 8)
    vectors = np.frombuffer(payload, dtype="<f8").reshape(v, dim).copy()
    params = SgnsParams(**header["params"])
    vocab = Vocabulary(
        tokens=tuple(header["tokens"]),
        corpus_freq=tuple(header["corpus_freq"]),
        doc_freq=tuple(header["doc_freq"]),
        min_count=header["min_count"],
    )
    return EmbeddingTable(vocab=vocab, vectors=vectors, params=params)


def save_term_similarity(sim: TermSimilarityMatrix, path: str | Path) -> None:
    """Write the documented term-similarity file.

    Layout: one UTF-8 JSON header line (magic, version, n, nnz,
    threshold, top_k), then indptr as n+1 little-endian int64, indices
    as nnz int64, data as nnz float64.
    """
    header = {
        "format": _SIM_MAGIC,
        "version": 1,
        "n": sim.n,
        "nnz": int(sim.indptr[-1]),
        "threshold": sim.threshold,
        "top_k": sim.top_k,
    }
    with Path(path).open("wb") as handle:
        handle.write(json.dumps(header, ensure_ascii=False).encode("utf-8"))
        handle.write(b"\n")
        handle.write(np.ascontiguousarray(sim.indptr, dtype="<i8").tobytes())
        handle.write(np.ascontiguousarray(sim.indices, dtype="<i8").tobytes())
        handle.write(np.ascontiguousarray(sim.data, dtype="<f8").tobytes())


def load_term_similarity(path: str | Path) -> TermSimilarityMatrix:
    with Path(path).open("rb") as handle:
        header = json.loads(handle.readline().decode("utf-8"))
        if header.get("format") != _SIM_MAGIC or header.get("version") != 1:
            raise ConfigError(f"not a term-similarity file: {path}")
        n, nnz = header["n"], header["nnz"]
        indptr = np.frombuffer(handle.read((n + 1) * 8), dtype="<i8").copy()
        indices = np.frombuffer(handle.read(nnz * 8), dtype="<i8").copy()
        data = np.frombuffer(handle.read(nnz * 8), dtype="<f8").copy()
    return TermSimilarityMatrix(
        n=n,
        indptr=indptr,
        indices=indices,
        data=data,
        threshold=header["threshold"],
        top_k=header["top_k"],
    )
