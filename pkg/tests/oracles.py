"""Independent reference implementations used to check the library.

Each oracle is written from the stated rules without calling the code it
checks, so agreement means two separate derivations match.
"""
import itertools
import math
import re
from collections import Counter
from datetime import date

import numpy as np
from scipy import stats

from memanchor.text import STOPWORDS

_WORD = re.compile(r"[^\W_]+")


def fnv1a64(data: bytes) -> int:
    h = 14695981039346656037
    for b in data:
        h = ((h ^ b) * 1099511628211) % 2**64
    return h


def naive_embedding(text, dims=256):
    counts = Counter(fnv1a64(t.encode()) % dims for t in _WORD.findall(text.lower()))
    vec = np.zeros(dims)
    for bucket, n in counts.items():
        vec[bucket] = n
    return vec / np.linalg.norm(vec)


def naive_cosine(a, b):
    return float(naive_embedding(a) @ naive_embedding(b))


def sort_then_truncate(pairs, k, sigma):
    """pairs: (id, similarity). Keep s >= sigma, sort by (-s, id), take k."""
    ranked = sorted((p for p in pairs if p[1] >= sigma), key=lambda p: (-p[1], p[0]))
    return ranked[:k]


def _words(text):
    return {w for w in _WORD.findall((text or "").lower()) if w not in STOPWORDS}


def _jac(a, b):
    return len(a & b) / len(a | b) if a | b else 0.0


def _when_key(ev):
    if ev.when.absolute:
        try:
            return ("abs", date.fromisoformat(ev.when.absolute.strip()[:10]))
        except ValueError:
            return ("abs", " ".join(ev.when.absolute.lower().split()))
    if ev.when.relative:
        return ("rel", " ".join(ev.when.relative.lower().split()))
    return None


def oracle_score(a, b):
    who = _jac({w.casefold() for w in a.who}, {w.casefold() for w in b.who})
    what = _jac(_words(a.what), _words(b.what))
    ka, kb = _when_key(a), _when_key(b)
    when = 1.0 if ka is not None and ka == kb else 0.0
    wa = " ".join(a.where.casefold().split()) if a.where else None
    wb = " ".join(b.where.casefold().split()) if b.where else None
    where = 1.0 if wa is not None and wa == wb else 0.0
    return (who + what + when + where) / 4


def all_pairs_clusters(events, tau):
    """Connected components of the graph with an edge wherever score > tau."""
    parent = list(range(len(events)))

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i

    for i, j in itertools.combinations(range(len(events)), 2):
        if oracle_score(events[i], events[j]) > tau:
            parent[find(i)] = find(j)
    groups = {}
    for i in range(len(events)):
        groups.setdefault(find(i), set()).add(events[i].event_id)
    return {frozenset(g) for g in groups.values()}


def ols(x, y):
    """Slope, intercept, R^2 and two-sided slope p-value via scipy."""
    res = stats.linregress(x, y)
    return res.slope, res.intercept, res.rvalue ** 2, res.pvalue


def nested_f(x, y, groups):
    """Common slope vs per-group slopes (shared intercept) from explicit RSS."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    labels = sorted(set(groups))
    g = np.asarray(groups)
    X0 = np.column_stack([np.ones_like(x), x])
    X1 = np.column_stack([np.ones_like(x)] + [x * (g == lab) for lab in labels])

    def rss(X):
        beta = np.linalg.solve(X.T @ X, X.T @ y)
        r = y - X @ beta
        return float(r @ r)

    n = len(x)
    df1 = X1.shape[1] - X0.shape[1]
    df2 = n - X1.shape[1]
    f = ((rss(X0) - rss(X1)) / df1) / (rss(X1) / df2)
    return f, df1, df2, float(stats.f.sf(f, df1, df2))


def round_robin(lists, budget):
    """Plain round-robin over distinct strings, one per list per round."""
    out, seen = [], set()
    iters = [iter(lst) for lst in lists]
    live = list(range(len(lists)))
    while live and len(out) < budget:
        for i in list(live):
            if len(out) >= budget:
                break
            for q in iters[i]:
                if q not in seen:
                    seen.add(q)
                    out.append((i, q))
                    break
            else:
                live.remove(i)
    return out


def noisy_or(*cs):
    return 1 - math.prod(1 - c for c in cs)
