"""Pure-Python reference kernels.

These are the fallback for the compiled extension. Loop structure and
operation order are fixed: the compiled twin performs the same IEEE
double operations in the same order, so both backends return
bit-identical results (verified by parity tests).
"""

from __future__ import annotations

from math import exp, sqrt

import numpy as np

BACKEND_NAME = "pure"

_LCG_MULT = 25214903917
_LCG_ADD = 11
_LCG_MASK = (1 << 64) - 1


def _condensed_size(n: int) -> int:
    return n * (n - 1) // 2


def combined_distances(
    term_idx: np.ndarray,
    term_wt: np.ndarray,
    term_off: np.ndarray,
    path_idx: np.ndarray,
    path_off: np.ndarray,
    s_indptr: np.ndarray,
    s_indices: np.ndarray,
    s_data: np.ndarray,
    n_terms: int,
    text_weight: float,
    path_weight: float,
) -> np.ndarray:
    """Condensed pairwise combined distance.

    Text part: soft cosine over term weights with the sparse term
    similarity matrix (CSR); the similarity is clamped to [0,1] and a
    document with zero quadratic form is treated as empty (distance 0 to
    other empty documents, 1 to everything else). Path part: Jaccard
    distance over sorted token-id arrays, both-empty giving 0. The two
    are averaged.
    """
    tidx = term_idx.tolist()
    twt = term_wt.tolist()
    toff = term_off.tolist()
    pidx = path_idx.tolist()
    poff = path_off.tolist()
    sptr = s_indptr.tolist()
    sind = s_indices.tolist()
    sdat = s_data.tolist()

    n = len(toff) - 1
    out = [0.0] * _condensed_size(n)
    dense = [0.0] * n_terms

    def qform(i: int, j: int) -> float:
        # x_i^T S x_j with doc j scattered into the dense scratch
        for p in range(toff[j], toff[j + 1]):
            dense[tidx[p]] = twt[p]
        acc = 0.0
        for p in range(toff[i], toff[i + 1]):
            a = tidx[p]
            wa = twt[p]
            for q in range(sptr[a], sptr[a + 1]):
                wb = dense[sind[q]]
                if wb != 0.0:
                    acc += wa * sdat[q] * wb
        for p in range(toff[j], toff[j + 1]):
            dense[tidx[p]] = 0.0
        return acc

    norms = [qform(i, i) for i in range(n)]

    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            qi = norms[i]
            qj = norms[j]
            if qi == 0.0 and qj == 0.0:
                s = 1.0
            elif qi == 0.0 or qj == 0.0:
                s = 0.0
            else:
                s = qform(i, j) / sqrt(qi * qj)
                if s < 0.0:
                    s = 0.0
                elif s > 1.0:
                    s = 1.0
            d_text = 1.0 - s

            pa, pa_end = poff[i], poff[i + 1]
            pb, pb_end = poff[j], poff[j + 1]
            na = pa_end - pa
            nb = pb_end - pb
            if na == 0 and nb == 0:
                d_path = 0.0
            else:
                inter = 0
                x, y = pa, pb
                while x < pa_end and y < pb_end:
                    if pidx[x] == pidx[y]:
                        inter += 1
                        x += 1
                        y += 1
                    elif pidx[x] < pidx[y]:
                        x += 1
                    else:
                        y += 1
                d_path = 1.0 - inter / (na + nb - inter)

            out[k] = text_weight * d_text + path_weight * d_path
            k += 1
    return np.asarray(out, dtype=np.float64)


def sgns_train(
    sent_idx: np.ndarray,
    sent_off: np.ndarray,
    syn0: np.ndarray,
    syn1: np.ndarray,
    neg_table: np.ndarray,
    dim: int,
    window: int,
    negative: int,
    epochs: int,
    lr: float,
    state: int,
) -> int:
    """Skip-gram negative-sampling epochs over the whole corpus.

    ``syn0``/``syn1`` are flat V*dim arrays updated in place. The word
    RNG is the classic 64-bit LCG; ``state`` is its entry state and the
    post-training state is returned so callers can chain draws.
    """
    words = sent_idx.tolist()
    offs = sent_off.tolist()
    v0 = syn0.tolist()
    v1 = syn1.tolist()
    table = neg_table.tolist()
    table_size = len(table)

    n_sent = len(offs) - 1
    total = len(words) * epochs
    min_alpha = lr * 1e-4
    processed = 0
    neu1e = [0.0] * dim

    for _ in range(epochs):
        for s in range(n_sent):
            start, end = offs[s], offs[s + 1]
            for pos in range(start, end):
                w = words[pos]
                alpha = lr * (1.0 - processed / total)
                if alpha < min_alpha:
                    alpha = min_alpha
                processed += 1
                state = (state * _LCG_MULT + _LCG_ADD) & _LCG_MASK
                b = state % window
                for cpos in range(pos - window + b, pos + window - b + 1):
                    if cpos == pos or cpos < start or cpos >= end:
                        continue
                    ctx = words[cpos] * dim
                    for j in range(dim):
                        neu1e[j] = 0.0
                    for k in range(negative + 1):
                        if k == 0:
                            target = w
                            label = 1.0
                        else:
                            state = (state * _LCG_MULT + _LCG_ADD) & _LCG_MASK
                            target = table[(state >> 16) % table_size]
                            if target == w:
                                continue
                            label = 0.0
                        trow = target * dim
                        f = 0.0
                        for j in range(dim):
                            f += v0[ctx + j] * v1[trow + j]
                        if f > 6.0:
                            g = (label - 1.0) * alpha
                        elif f < -6.0:
                            g = label * alpha
                        else:
                            g = (label - 1.0 / (1.0 + exp(-f))) * alpha
                        for j in range(dim):
                            neu1e[j] += g * v1[trow + j]
                        for j in range(dim):
                            v1[trow + j] += g * v0[ctx + j]
                    for j in range(dim):
                        v0[ctx + j] += neu1e[j]

    syn0[:] = v0
    syn1[:] = v1
    return state


def silhouette_samples(
    dist: np.ndarray,
    labels: np.ndarray,
    n: int,
    n_labels: int,
) -> np.ndarray:
    """Per-point silhouette from a condensed distance matrix.

    Labels are dense ints in [0, n_labels). Points in singleton
    clusters score 0; so does a point with a == b == 0.
    """
    d = dist.tolist()
    lab = labels.tolist()

    sizes = [0] * n_labels
    for c in lab:
        sizes[c] += 1

    out = [0.0] * n
    sums = [0.0] * n_labels
    for i in range(n):
        for c in range(n_labels):
            sums[c] = 0.0
        for j in range(n):
            if j == i:
                continue
            if i < j:
                k = n * i - i * (i + 1) // 2 + (j - i - 1)
            else:
                k = n * j - j * (j + 1) // 2 + (i - j - 1)
            sums[lab[j]] += d[k]
        own = lab[i]
        if sizes[own] <= 1:
            out[i] = 0.0
            continue
        a = sums[own] / (sizes[own] - 1)
        b = -1.0
        for c in range(n_labels):
            if c == own or sizes[c] == 0:
                continue
            mean_c = sums[c] / sizes[c]
            if b < 0.0 or mean_c < b:
                b = mean_c
        m = a if a > b else b
        out[i] = 0.0 if m == 0.0 else (b - a) / m
    return np.asarray(out, dtype=np.float64)
