# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled CBOW negative-sampling kernel.

Releases the GIL for the whole block, so several threads may train disjoint
sentence ranges against the shared weight matrices (unsynchronized updates).
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log
from libc.stdint cimport uint64_t, int32_t, int64_t
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef uint64_t LCG_MUL = 25214903917ULL
cdef uint64_t LCG_ADD = 11ULL


def train_block(float[:, ::1] syn0, float[:, ::1] syn1neg,
                const int64_t[::1] sub_ptr, const int32_t[::1] sub_idx,
                const int32_t[::1] tokens, const int64_t[::1] sent_ptr,
                Py_ssize_t sent_lo, Py_ssize_t sent_hi,
                const int32_t[::1] neg_table, int window, int negatives,
                double alpha0, double min_alpha, long long work_done, long long total_work,
                object state):
    cdef uint64_t rng = <uint64_t>(int(state) & 0xFFFFFFFFFFFFFFFF)
    cdef Py_ssize_t dim = syn0.shape[1]
    cdef Py_ssize_t table_size = neg_table.shape[0]
    cdef double *h = <double *>malloc(dim * sizeof(double))
    cdef double *neu1e = <double *>malloc(dim * sizeof(double))
    cdef int32_t *ctx = <int32_t *>malloc((2 * window + 1) * sizeof(int32_t))
    cdef double loss = 0.0
    cdef long long seen = 0
    cdef Py_ssize_t s, a, n, pos, j, k, lo, hi, n_ctx, ci, d, r
    cdef int shrink
    cdef int32_t word, target, c
    cdef int64_t g0, g1
    cdef double alpha, f, sig, g, e, label, inv
    if h == NULL or neu1e == NULL or ctx == NULL:
        free(h); free(neu1e); free(ctx)
        raise MemoryError()
    with nogil:
        for s in range(sent_lo, sent_hi):
            a = sent_ptr[s]
            n = sent_ptr[s + 1] - a
            for pos in range(n):
                alpha = alpha0 - (alpha0 - min_alpha) * (<double>(work_done + seen)) / total_work
                if alpha < min_alpha:
                    alpha = min_alpha
                seen += 1
                rng = rng * LCG_MUL + LCG_ADD
                shrink = <int>((rng >> 16) % <uint64_t>window)
                lo = pos - window + shrink
                if lo < 0:
                    lo = 0
                hi = pos + window + 1 - shrink
                if hi > n:
                    hi = n
                n_ctx = 0
                for j in range(lo, hi):
                    if j != pos:
                        ctx[n_ctx] = tokens[a + j]
                        n_ctx += 1
                if n_ctx == 0:
                    continue

                for k in range(dim):
                    h[k] = 0.0
                for ci in range(n_ctx):
                    c = ctx[ci]
                    for k in range(dim):
                        h[k] += syn0[c, k]
                    g0 = sub_ptr[c]
                    g1 = sub_ptr[c + 1]
                    if g1 > g0:
                        inv = 1.0 / (g1 - g0)
                        for k in range(dim):
                            e = 0.0
                            for r in range(g0, g1):
                                e += syn0[sub_idx[r], k]
                            h[k] += e * inv
                for k in range(dim):
                    h[k] /= n_ctx

                word = tokens[a + pos]
                for k in range(dim):
                    neu1e[k] = 0.0
                for d in range(negatives + 1):
                    if d == 0:
                        target = word
                        label = 1.0
                    else:
                        rng = rng * LCG_MUL + LCG_ADD
                        target = neg_table[(rng >> 16) % <uint64_t>table_size]
                        if target == word:
                            continue
                        label = 0.0
                    f = 0.0
                    for k in range(dim):
                        f += h[k] * syn1neg[target, k]
                    if f >= 0:
                        sig = 1.0 / (1.0 + exp(-f))
                    else:
                        e = exp(f)
                        sig = e / (1.0 + e)
                    if label > 0:
                        loss -= log(sig if sig > 1e-300 else 1e-300)
                    else:
                        loss -= log((1.0 - sig) if (1.0 - sig) > 1e-300 else 1e-300)
                    g = (label - sig) * alpha
                    for k in range(dim):
                        neu1e[k] += g * syn1neg[target, k]
                        syn1neg[target, k] = syn1neg[target, k] + <float>(g * h[k])

                for ci in range(n_ctx):
                    c = ctx[ci]
                    for k in range(dim):
                        syn0[c, k] = syn0[c, k] + <float>neu1e[k]
                    g0 = sub_ptr[c]
                    g1 = sub_ptr[c + 1]
                    if g1 > g0:
                        for k in range(dim):
                            e = neu1e[k] / (g1 - g0)
                            for r in range(g0, g1):
                                syn0[sub_idx[r], k] = syn0[sub_idx[r], k] + <float>e
    free(h)
    free(neu1e)
    free(ctx)
    return int(rng), loss, seen
