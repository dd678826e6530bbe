"""Slow, loop-based reference implementations used as test oracles."""

import math
from collections import defaultdict


def children(tree):
    kids = defaultdict(list)
    for i in range(1, tree.n_nodes):
        kids[int(tree.parent[i])].append(i)
    return kids


def expectation(vals, probs):
    return sum(v * p for v, p in zip(vals, probs))


def quantile(vals, probs, alpha):
    """Smallest value whose cumulative probability reaches ``alpha``."""
    cum = 0.0
    pairs = sorted(zip(vals, probs))
    for v, p in pairs:
        cum += p
        if cum >= alpha - 1e-12:
            return v
    return pairs[-1][0]


def solve(tree, op, d):
    """Backward-forward recursion node by node; ``op(vals, probs)`` is the step operator."""
    kids = children(tree)
    n = tree.n_nodes
    z = [0.0] * n
    for i in reversed(range(n)):
        if not kids[i]:
            z[i] = d[i] if isinstance(d, dict) else d
            continue
        vals = [z[c] * tree.s[c] for c in kids[i]]
        psi = op(i, vals, [tree.prob[c] for c in kids[i]])
        z[i] = psi / (tree.s[i] + psi)
    a = [0.0] * n
    x = [0.0] * n
    for i in range(n):
        par = int(tree.parent[i])
        a[i] = tree.s[0] if par < 0 else (a[par] - x[par]) * tree.s[i] / tree.s[par]
        x[i] = z[i] * a[i]
    return z, x, a


def rates_recursion(a, a_terminal):
    """Deterministic rates by the backward recursion ``z_{k-1} = a z_k / (1 + a z_k)``."""
    z = [a_terminal]
    for ak in reversed(list(a)):
        z.insert(0, ak * z[0] / (1.0 + ak * z[0]))
    return z


def perpetual_bound(a, k):
    """``prod_{i<k} a_i / (1 + sum_{i<k} prod_{j=i}^{k-1} a_j)`` by direct loops."""
    num = 1.0
    for i in range(k):
        num *= a[i]
    den = 1.0
    for i in range(k):
        prod = 1.0
        for j in range(i, k):
            prod *= a[j]
        den += prod
    return num / den


def norm_cdf(x):
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def inv_norm_bisect(p):
    lo, hi = -40.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if norm_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
