"""Random scenario trees for property tests."""

import numpy as np
from hypothesis import strategies as st

from phpp.lattice import ScenarioTree


def tree_from_spec(s0, levels):
    """``levels[k]`` lists, per epoch-k node, ``(probs, factors)`` for its children."""
    parent, prob, s = [-1], [1.0], [s0]
    frontier = [0]
    for level in levels:
        nxt = []
        for node, (probs, factors) in zip(frontier, level):
            for p, f in zip(probs, factors):
                parent.append(node)
                prob.append(p)
                s.append(s[node] * f)
                nxt.append(len(s) - 1)
        frontier = nxt
    return ScenarioTree(parent, prob, s)


def _normalise(w):
    w = np.asarray(w, dtype=float)
    p = w / w.sum()
    p[-1] = 1.0 - p[:-1].sum()
    return p


def random_tree(rng, max_k=4, max_branch=4, factor_range=(0.6, 1.6)):
    K = int(rng.integers(1, max_k + 1))
    s0 = float(rng.uniform(1.0, 1e4))
    levels, width = [], 1
    for _ in range(K):
        level = []
        for _ in range(width):
            b = int(rng.integers(1, max_branch + 1))
            level.append((_normalise(rng.uniform(0.05, 1.0, b)), rng.uniform(*factor_range, b)))
        levels.append(level)
        width = sum(len(p) for p, _ in level)
    return tree_from_spec(s0, levels)


@st.composite
def trees(draw, max_k=4, max_branch=4):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_tree(np.random.default_rng(seed), max_k, max_branch)


@st.composite
def regular_paths(draw, n=6):
    """Strictly positive ``s`` and regular ``x`` on ``n`` epochs, with their rates."""
    s = np.array(draw(st.lists(st.floats(0.1, 1e4), min_size=n, max_size=n)))
    z = np.array(draw(st.lists(st.floats(0.0, 1.0), min_size=n, max_size=n)))
    return s, z
