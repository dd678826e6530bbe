"""Finite filtered probability spaces as scenario trees.

Nodes are stored in a canonical breadth-first order: all epoch-0 nodes, then
all epoch-1 nodes, and so on, with the children of a node kept contiguous
and in the order they were supplied.  A random variable measurable at
epoch ``k`` is just a 1-D array over the nodes of that epoch, in this
order.  ``tree.epoch_ids(k)`` gives the matching external node ids.
"""

from __future__ import annotations

import json
from collections import defaultdict

import numpy as np

from .errors import CapacityError, DomainError, InputError

PROB_TOL = 1e-12
DEFAULT_MAX_NODES = 2**22
# path probabilities switch to log-space accumulation above this horizon
LOG_PATH_HORIZON = 30


class ScenarioTree:
    """Non-recombining scenario tree carrying a strictly positive process.

    Parameters are arrays in canonical order (see module docstring);
    ``parent`` holds canonical parent indices (-1 for the root) and ``prob``
    the branch probability conditional on the parent.  Use
    :meth:`from_nodes` or :func:`build_binomial` to build one from
    arbitrary input.
    """

    def __init__(self, parent, prob, s, ids=None):
        self.parent = np.asarray(parent, dtype=np.int64)
        self.prob = np.asarray(prob, dtype=float)
        self.s = np.asarray(s, dtype=float)
        n = len(self.parent)
        if not (len(self.prob) == len(self.s) == n) or n == 0:
            raise InputError("parent, prob and s must be non-empty and of equal length")
        self.ids = list(range(n)) if ids is None else list(ids)
        if len(self.ids) != n:
            raise InputError("ids must match node count")
        self._index_epochs()
        self._validate()
        for arr in (self.parent, self.prob, self.s, self.epoch, self.offsets):
            arr.setflags(write=False)

    def _index_epochs(self):
        parent = self.parent
        if parent[0] != -1 or np.any(parent[1:] < 0):
            raise InputError("node 0 must be the only root")
        if np.any(parent[1:] >= np.arange(1, len(parent))) or np.any(np.diff(parent[1:]) < 0):
            raise InputError("nodes are not in canonical order")
        epoch = np.zeros(len(parent), dtype=np.int64)
        cur = parent.copy()
        while np.any(cur >= 0):
            alive = cur >= 0
            epoch += alive
            cur[alive] = parent[cur[alive]]
        if np.any(np.diff(epoch) < 0):
            raise InputError("nodes are not in canonical order")
        self.epoch = epoch
        self.K = int(epoch[-1])
        self.offsets = np.searchsorted(epoch, np.arange(self.K + 2))

    def _validate(self):
        if not np.all(np.isfinite(self.s)) or np.any(self.s <= 0):
            raise DomainError("tree values must be strictly positive")
        if np.any(self.prob <= 0) or np.any(self.prob > 1):
            raise DomainError("branch probabilities must lie in (0, 1]")
        children = np.bincount(self.parent[1:], minlength=len(self.parent))
        internal = self.epoch < self.K
        if np.any(children[internal] == 0):
            raise InputError("every leaf must sit at the final epoch")
        totals = np.bincount(self.parent[1:], weights=self.prob[1:], minlength=len(self.parent))
        if np.any(np.abs(totals[internal] - 1.0) > PROB_TOL):
            bad = int(np.flatnonzero(internal & (np.abs(totals - 1.0) > PROB_TOL))[0])
            raise InputError(f"child probabilities of node {self.ids[bad]!r} sum to {totals[bad]!r}")

    # ------------------------------------------------------------------ access

    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    def epoch_slice(self, k: int) -> slice:
        if not 0 <= k <= self.K:
            raise InputError(f"epoch {k} outside 0..{self.K}")
        return slice(int(self.offsets[k]), int(self.offsets[k + 1]))

    def n_at(self, k: int) -> int:
        sl = self.epoch_slice(k)
        return sl.stop - sl.start

    def epoch_ids(self, k: int) -> list:
        sl = self.epoch_slice(k)
        return self.ids[sl]

    def s_at(self, k: int) -> np.ndarray:
        return self.s[self.epoch_slice(k)]

    def parent_local(self, k: int) -> np.ndarray:
        """For each epoch-``k`` node, the position of its parent within epoch ``k-1``."""
        if k < 1:
            raise InputError("the root has no parent")
        return self.parent[self.epoch_slice(k)] - self.offsets[k - 1]

    def split(self, values) -> list[np.ndarray]:
        """Split a full per-node array into one array per epoch."""
        values = np.asarray(values)
        if values.shape[0] != self.n_nodes:
            raise InputError("per-node array has wrong length")
        return [values[self.epoch_slice(k)] for k in range(self.K + 1)]

    def index_of(self, node_id) -> int:
        try:
            return self._id_index[node_id]
        except AttributeError:
            self._id_index = {nid: i for i, nid in enumerate(self.ids)}
            return self._id_index[node_id]

    def path(self, index: int) -> np.ndarray:
        """Canonical indices from the root to node ``index``."""
        out = []
        i = int(index)
        while i >= 0:
            out.append(i)
            i = int(self.parent[i])
        return np.array(out[::-1])

    def path_probabilities(self) -> np.ndarray:
        """Unconditional probability of reaching each node."""
        if self.K <= LOG_PATH_HORIZON:
            out = np.empty(self.n_nodes)
            out[0] = 1.0
            for k in range(1, self.K + 1):
                sl = self.epoch_slice(k)
                out[sl] = out[self.parent[sl]] * self.prob[sl]
            return out
        logp = np.empty(self.n_nodes)
        logp[0] = 0.0
        for k in range(1, self.K + 1):
            sl = self.epoch_slice(k)
            logp[sl] = logp[self.parent[sl]] + np.log(self.prob[sl])
        return np.exp(logp)

    def with_values(self, s) -> "ScenarioTree":
        """Same filtration, different value process."""
        return ScenarioTree(self.parent, self.prob, s, self.ids)

    # ------------------------------------------------------------- operators

    def _child_values(self, values, k):
        if not 0 <= k < self.K:
            raise InputError(f"no epoch {k + 1} to project from (horizon {self.K})")
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_at(k + 1),):
            raise InputError(
                f"expected {self.n_at(k + 1)} values at epoch {k + 1}, got shape {values.shape}"
            )
        return values

    def cond_expectation(self, values, k: int) -> np.ndarray:
        """E[values | F_k] for ``values`` measurable at epoch ``k+1``."""
        values = self._child_values(values, k)
        p = self.prob[self.epoch_slice(k + 1)]
        return np.bincount(self.parent_local(k + 1), weights=p * values, minlength=self.n_at(k))

    def cond_quantile(self, values, alpha: float, k: int) -> np.ndarray:
        """Lower conditional ``alpha``-quantile over each node's children.

        Per epoch-``k`` node: the smallest child value ``y`` with
        ``P(values <= y | node) >= alpha``.
        """
        if not 0 < alpha <= 1:
            raise DomainError("alpha must lie in (0, 1]")
        values = self._child_values(values, k)
        group = self.parent_local(k + 1)
        p = self.prob[self.epoch_slice(k + 1)]
        order = np.lexsort((values, group))
        g = group[order]
        ps = p[order]
        pos = np.arange(len(g)) - np.searchsorted(g, g, side="left")
        # cumulative probability inside each parent's group, no cross-group drift
        within = ps.copy()
        for r in range(1, int(pos.max()) + 1):
            idx = np.flatnonzero(pos >= r)
            within[idx] += ps[idx - r]
        hit = within >= alpha - PROB_TOL
        last = np.r_[g[1:] != g[:-1], True]
        hit |= last
        first = np.unique(g[hit], return_index=True)[1]
        return values[order][np.flatnonzero(hit)[first]]

    # -------------------------------------------------------- serialization

    def to_dict(self) -> dict:
        nodes = []
        for i in range(self.n_nodes):
            par = int(self.parent[i])
            nodes.append({
                "id": self.ids[i],
                "k": int(self.epoch[i]),
                "parent": None if par < 0 else self.ids[par],
                "p": float(self.prob[i]),
                "s": float(self.s[i]),
            })
        return {"nodes": nodes, "K": self.K}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_nodes(cls, nodes, K=None) -> "ScenarioTree":
        """Build from records ``{id, k, parent, p, s}`` in any order."""
        try:
            by_id = {}
            for rec in nodes:
                if rec["id"] in by_id:
                    raise InputError(f"duplicate node id {rec['id']!r}")
                by_id[rec["id"]] = rec
            kids = defaultdict(list)
            roots = []
            for rec in nodes:
                if rec.get("parent") is None:
                    roots.append(rec)
                else:
                    if rec["parent"] not in by_id:
                        raise InputError(f"unknown parent {rec['parent']!r}")
                    kids[rec["parent"]].append(rec)
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed node record: {exc}") from None
        if len(roots) != 1:
            raise InputError(f"expected exactly one root, found {len(roots)}")

        order, parent = [roots[0]], [-1]
        head = 0
        while head < len(order):
            rec = order[head]
            for child in kids[rec["id"]]:
                order.append(child)
                parent.append(head)
            head += 1
        if len(order) != len(by_id):
            raise InputError("some nodes are unreachable from the root")

        try:
            prob = [1.0] + [float(r["p"]) for r in order[1:]]
            s = [float(r["s"]) for r in order]
            stated_k = [int(r.get("k", -1)) for r in order]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed node record: {exc}") from None
        tree = cls(parent, prob, s, [r["id"] for r in order])
        for i, k in enumerate(stated_k):
            if k != -1 and k != tree.epoch[i]:
                raise InputError(f"node {tree.ids[i]!r} states epoch {k}, tree depth is {tree.epoch[i]}")
        if K is not None and int(K) != tree.K:
            raise InputError(f"stated horizon K={K} but leaves sit at epoch {tree.K}")
        return tree

    @classmethod
    def from_dict(cls, data) -> "ScenarioTree":
        if not isinstance(data, dict) or "nodes" not in data:
            raise InputError("tree JSON must be an object with a 'nodes' list")
        return cls.from_nodes(data["nodes"], data.get("K"))

    @classmethod
    def from_json(cls, text: str) -> "ScenarioTree":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"cannot parse tree JSON: {exc}") from None
        return cls.from_dict(data)

    def __repr__(self):
        return f"ScenarioTree(K={self.K}, n_nodes={self.n_nodes})"


def build_binomial(s0, u1, u2, p, K, max_nodes=DEFAULT_MAX_NODES) -> ScenarioTree:
    """Non-recombining binomial tree: each step multiplies by ``u1`` (prob ``p``) or ``u2``.

    The ``u1`` child is listed first, so the all-``u1`` path ends at the
    first leaf and the all-``u2`` path at the last.
    """
    if not s0 > 0:
        raise DomainError("s0 must be positive")
    if not 0 < u1 < u2:
        raise DomainError("need 0 < u1 < u2")
    if not 0 < p < 1:
        raise DomainError("p must lie in (0, 1)")
    K = int(K)
    if K < 0:
        raise DomainError("K must be non-negative")
    n = 2 ** (K + 1) - 1
    if n > max_nodes:
        raise CapacityError(f"binomial tree with K={K} needs {n} nodes, budget is {max_nodes}")

    s = np.empty(n)
    prob = np.empty(n)
    parent = np.empty(n, dtype=np.int64)
    s[0], prob[0], parent[0] = s0, 1.0, -1
    for k in range(K):
        lo, hi = 2**k - 1, 2 ** (k + 1) - 1
        clo, chi = hi, 2 ** (k + 2) - 1
        level = s[lo:hi]
        s[clo:chi] = (level[:, None] * np.array([u1, u2])).ravel()
        prob[clo:chi] = np.tile([p, 1.0 - p], hi - lo)
        parent[clo:chi] = np.repeat(np.arange(lo, hi), 2)
    return ScenarioTree(parent, prob, s)


def cond_expectation(tree: ScenarioTree, values, k: int) -> np.ndarray:
    return tree.cond_expectation(values, k)


def cond_quantile(tree: ScenarioTree, values, alpha: float, k: int) -> np.ndarray:
    return tree.cond_quantile(values, alpha, k)
