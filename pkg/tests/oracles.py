"""Independent brute-force reference implementations used by the tests.

Each oracle recomputes a quantity directly from its textbook definition with
plain Python loops, sharing no code with the package.
"""
import itertools
import math


def ngrams_by_window(tokens, lo, hi):
    grams = []
    for n in range(lo, hi + 1):
        start = 0
        while start + n <= len(tokens):
            grams.append(" ".join(tokens[start:start + n]))
            start += 1
    return grams


def char_grams_by_window(tokens, lo, hi):
    grams = []
    for tok in tokens:
        for n in range(lo, hi + 1):
            for start in range(0, len(tok) - n + 1):
                grams.append(tok[start:start + n])
    return grams


def vocabulary(term_lists, min_df, max_df_frac, max_features):
    n = len(term_lists)
    all_terms = set(t for terms in term_lists for t in terms)
    rows = []
    for t in all_terms:
        df = sum(1 for terms in term_lists if t in terms)
        total = sum(terms.count(t) for terms in term_lists)
        if df >= min_df and df <= max_df_frac * n:
            rows.append((total, t, df))
    rows.sort(key=lambda r: r[1])
    rows.sort(key=lambda r: r[0], reverse=True)
    kept = rows[:max_features]
    return sorted(t for _, t, _ in kept), {t: df for _, t, df in kept}


def tfidf_matrix(term_lists_fit, term_lists_apply, min_df, max_df_frac, max_features):
    terms, df = vocabulary(term_lists_fit, min_df, max_df_frac, max_features)
    n = len(term_lists_fit)
    idf = {t: math.log((1 + n) / (1 + df[t])) + 1 for t in terms}
    rows = []
    for doc in term_lists_apply:
        row = []
        for t in terms:
            tf = doc.count(t) / len(doc) if doc else 0.0
            row.append(tf * idf[t])
        norm = math.sqrt(sum(v * v for v in row))
        rows.append([v / norm if norm > 0 else 0.0 for v in row])
    return terms, idf, rows


def stat_vector(text):
    import unicodedata
    chars = list(text)
    words, cur = [], ""
    for ch in chars:
        if ch.isspace():
            if cur:
                words.append(cur)
            cur = ""
        else:
            cur += ch
    if cur:
        words.append(cur)
    punct = 0
    digits = 0
    for ch in chars:
        if ch == "।" or unicodedata.category(ch)[0] == "P":
            punct += 1
        if unicodedata.category(ch) == "Nd":
            digits += 1
    sentences, content = 0, False
    for ch in chars:
        if ch in "।?!.":
            sentences += content
            content = False
        elif not ch.isspace():
            content = True
    sentences += content
    nw = len(words)
    nc = len(chars)
    return [nc, nw, sentences, (sum(len(w) for w in words) / nw) if nw else 0.0, punct, digits,
            (nc / nw) if nw else 0.0, (punct / nc) if nc else 0.0]


def anova_f(column, labels):
    groups = {}
    for v, y in zip(column, labels):
        groups.setdefault(y, []).append(v)
    n = len(column)
    k = len(groups)
    grand = sum(column) / n
    ssb = sum(len(g) * (sum(g) / len(g) - grand) ** 2 for g in groups.values())
    ssw = sum(sum((v - sum(g) / len(g)) ** 2 for v in g) for g in groups.values())
    if ssw == 0:
        return 0.0 if ssb == 0 else math.inf
    return (ssb / (k - 1)) / (ssw / (n - k))


def chi_square(column, labels):
    total = sum(column)
    if total == 0:
        return math.nan
    n = len(labels)
    stat = 0.0
    for cls in sorted(set(labels)):
        observed = sum(v for v, y in zip(column, labels) if y == cls)
        expected = total * sum(1 for y in labels if y == cls) / n
        stat += (observed - expected) ** 2 / expected
    return stat


def mutual_info(a, b):
    n = len(a)
    joint, pa, pb = {}, {}, {}
    for x, y in zip(a, b):
        joint[(x, y)] = joint.get((x, y), 0) + 1
        pa[x] = pa.get(x, 0) + 1
        pb[y] = pb.get(y, 0) + 1
    return sum(c / n * math.log((c / n) / ((pa[x] / n) * (pb[y] / n))) for (x, y), c in joint.items())


def pearson(x, y):
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    if sxx == 0 or syy == 0:
        return math.nan
    return sxy / math.sqrt(sxx * syy)


def all_subsets(names, k_min=1):
    out = []
    for k in range(k_min, len(names) + 1):
        out.extend(itertools.combinations(names, k))
    return out
