# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels.

Mirror of the pure-Python module: same loop structure, same operation
order, so results are bit-identical. Compiled with contraction off to
keep IEEE double semantics aligned.
"""

from libc.math cimport exp, sqrt
from libc.stdlib cimport free, malloc

import numpy as np

BACKEND_NAME = "compiled"


def combined_distances(
    term_idx,
    term_wt,
    term_off,
    path_idx,
    path_off,
    s_indptr,
    s_indices,
    s_data,
    int n_terms,
    double text_weight,
    double path_weight,
):
    cdef long long[::1] tidx = np.ascontiguousarray(term_idx, dtype=np.int64)
    cdef double[::1] twt = np.ascontiguousarray(term_wt, dtype=np.float64)
    cdef long long[::1] toff = np.ascontiguousarray(term_off, dtype=np.int64)
    cdef long long[::1] pidx = np.ascontiguousarray(path_idx, dtype=np.int64)
    cdef long long[::1] poff = np.ascontiguousarray(path_off, dtype=np.int64)
    cdef long long[::1] sptr = np.ascontiguousarray(s_indptr, dtype=np.int64)
    cdef long long[::1] sind = np.ascontiguousarray(s_indices, dtype=np.int64)
    cdef double[::1] sdat = np.ascontiguousarray(s_data, dtype=np.float64)

    cdef Py_ssize_t n = toff.shape[0] - 1
    out_arr = np.zeros(n * (n - 1) // 2, dtype=np.float64)
    cdef double[::1] out = out_arr
    dense_arr = np.zeros(n_terms, dtype=np.float64)
    cdef double[::1] dense = dense_arr
    norms_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] norms = norms_arr

    cdef Py_ssize_t i, j, k, x, y
    cdef long long pa, pa_end, pb, pb_end
    cdef long long na, nb, inter
    cdef double qi, qj, s, d_text, d_path

    for i in range(n):
        norms[i] = _qform(i, i, tidx, twt, toff, sptr, sind, sdat, dense)

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
                s = _qform(i, j, tidx, twt, toff, sptr, sind, sdat, dense) / sqrt(qi * qj)
                if s < 0.0:
                    s = 0.0
                elif s > 1.0:
                    s = 1.0
            d_text = 1.0 - s

            pa = poff[i]
            pa_end = poff[i + 1]
            pb = poff[j]
            pb_end = poff[j + 1]
            na = pa_end - pa
            nb = pb_end - pb
            if na == 0 and nb == 0:
                d_path = 0.0
            else:
                inter = 0
                x = pa
                y = pb
                while x < pa_end and y < pb_end:
                    if pidx[x] == pidx[y]:
                        inter += 1
                        x += 1
                        y += 1
                    elif pidx[x] < pidx[y]:
                        x += 1
                    else:
                        y += 1
                d_path = 1.0 - (<double> inter) / (<double> (na + nb - inter))

            out[k] = text_weight * d_text + path_weight * d_path
            k += 1
    return out_arr


cdef double _qform(
    Py_ssize_t i,
    Py_ssize_t j,
    long long[::1] tidx,
    double[::1] twt,
    long long[::1] toff,
    long long[::1] sptr,
    long long[::1] sind,
    double[::1] sdat,
    double[::1] dense,
):
    cdef long long p, q, a
    cdef double wa, wb
    cdef double acc = 0.0
    for p in range(toff[j], toff[j + 1]):
        dense[tidx[p]] = twt[p]
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


def sgns_train(
    sent_idx,
    sent_off,
    syn0,
    syn1,
    neg_table,
    int dim,
    int window,
    int negative,
    int epochs,
    double lr,
    unsigned long long state,
):
    cdef long long[::1] words = np.ascontiguousarray(sent_idx, dtype=np.int64)
    cdef long long[::1] offs = np.ascontiguousarray(sent_off, dtype=np.int64)
    cdef double[::1] v0 = syn0
    cdef double[::1] v1 = syn1
    cdef long long[::1] table = np.ascontiguousarray(neg_table, dtype=np.int64)

    cdef Py_ssize_t table_size = table.shape[0]
    cdef Py_ssize_t n_sent = offs.shape[0] - 1
    cdef long long total = words.shape[0] * epochs
    cdef double min_alpha = lr * 1e-4
    cdef long long processed = 0
    cdef double alpha, label, f, g
    cdef Py_ssize_t e, s, pos, cpos, j, k
    cdef long long start, end, w, target, ctx, trow, b

    cdef double* neu1e = <double*> malloc(dim * sizeof(double))
    if neu1e == NULL:
        raise MemoryError()

    try:
        for e in range(epochs):
            for s in range(n_sent):
                start = offs[s]
                end = offs[s + 1]
                for pos in range(start, end):
                    w = words[pos]
                    alpha = lr * (1.0 - (<double> processed) / (<double> total))
                    if alpha < min_alpha:
                        alpha = min_alpha
                    processed += 1
                    state = state * 25214903917ULL + 11ULL
                    b = <long long> (state % <unsigned long long> window)
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
                                state = state * 25214903917ULL + 11ULL
                                target = table[<Py_ssize_t> ((state >> 16) % <unsigned long long> table_size)]
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
    finally:
        free(neu1e)
    return state


def silhouette_samples(dist, labels, Py_ssize_t n, Py_ssize_t n_labels):
    cdef double[::1] d = np.ascontiguousarray(dist, dtype=np.float64)
    cdef long long[::1] lab = np.ascontiguousarray(labels, dtype=np.int64)

    sizes_arr = np.zeros(n_labels, dtype=np.int64)
    cdef long long[::1] sizes = sizes_arr
    out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    sums_arr = np.zeros(n_labels, dtype=np.float64)
    cdef double[::1] sums = sums_arr

    cdef Py_ssize_t i, j, c, k, own
    cdef double a, b, mean_c, m

    for i in range(n):
        sizes[lab[i]] += 1

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
        a = sums[own] / (<double> (sizes[own] - 1))
        b = -1.0
        for c in range(n_labels):
            if c == own or sizes[c] == 0:
                continue
            mean_c = sums[c] / (<double> sizes[c])
            if b < 0.0 or mean_c < b:
                b = mean_c
        m = a if a > b else b
        out[i] = 0.0 if m == 0.0 else (b - a) / m
    return out_arr
