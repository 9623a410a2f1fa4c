"""Pure numpy CBOW negative-sampling kernel.

Same update rule and random stream as the compiled ``_cbow_ext`` kernel.
Results agree to float32 rounding, not bit for bit, because numpy reduces
dot products in a different order.
"""
import math

import numpy as np

_MASK64 = (1 << 64) - 1
_LCG_MUL = 25214903917
_LCG_ADD = 11


def _next(state):
    return (state * _LCG_MUL + _LCG_ADD) & _MASK64


def train_block(syn0, syn1neg, sub_ptr, sub_idx, tokens, sent_ptr, sent_lo, sent_hi,
                neg_table, window, negatives, alpha0, min_alpha, work_done, total_work, state):
    """Train on sentences ``sent_lo:sent_hi``; returns (rng state, loss, tokens seen)."""
    dim = syn0.shape[1]
    table_size = len(neg_table)
    loss = 0.0
    seen = 0
    for s in range(sent_lo, sent_hi):
        a, b = int(sent_ptr[s]), int(sent_ptr[s + 1])
        sent = tokens[a:b]
        n = b - a
        for pos in range(n):
            alpha = alpha0 - (alpha0 - min_alpha) * (work_done + seen) / total_work
            if alpha < min_alpha:
                alpha = min_alpha
            seen += 1
            state = _next(state)
            shrink = (state >> 16) % window
            lo = max(0, pos - window + shrink)
            hi = min(n, pos + window + 1 - shrink)
            ctx = [int(sent[j]) for j in range(lo, hi) if j != pos]
            if not ctx:
                continue

            h = np.zeros(dim, dtype=np.float64)
            for c in ctx:
                h += syn0[c]
                g0, g1 = sub_ptr[c], sub_ptr[c + 1]
                if g1 > g0:
                    h += syn0[sub_idx[g0:g1]].astype(np.float64).sum(axis=0) / (g1 - g0)
            h /= len(ctx)

            word = int(sent[pos])
            neu1e = np.zeros(dim, dtype=np.float64)
            for d in range(negatives + 1):
                if d == 0:
                    target, label = word, 1.0
                else:
                    state = _next(state)
                    target = int(neg_table[(state >> 16) % table_size])
                    if target == word:
                        continue
                    label = 0.0
                f = float(np.dot(h, syn1neg[target].astype(np.float64)))
                if f >= 0:
                    sig = 1.0 / (1.0 + math.exp(-f))
                else:
                    e = math.exp(f)
                    sig = e / (1.0 + e)
                loss -= math.log(max(sig if label else 1.0 - sig, 1e-300))
                g = (label - sig) * alpha
                neu1e += g * syn1neg[target].astype(np.float64)
                syn1neg[target] += (g * h).astype(np.float32)

            upd = neu1e.astype(np.float32)
            for c in ctx:
                syn0[c] += upd
                g0, g1 = sub_ptr[c], sub_ptr[c + 1]
                if g1 > g0:
                    part = (neu1e / (g1 - g0)).astype(np.float32)
                    for r in sub_idx[g0:g1]:
                        syn0[r] += part
    return state, loss, seen
