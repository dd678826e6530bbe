"""Projection-property specs and the backward-forward solver on scenario trees."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .core import REGULARITY_TOL
from .errors import DomainError, InputError, NotExtractableError, RegularityError
from .lattice import ScenarioTree

PROJECTION_RTOL = 1e-9
TERMINAL_ATOL = 1e-12

SOLUTION_COLUMNS = ("node_id", "k", "prob", "s", "z", "x", "a")


# ------------------------------------------------------------------ operators


@dataclass(frozen=True)
class ConditionalExpectation:
    """``psi_k(Y) = c E[Y | F_k]``; ``c = 1`` gives martingale consumption."""

    c: float = 1.0
    kind = "expectation"

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError(f"expectation scale c must be positive, got {self.c}")

    def apply(self, tree, values, k):
        return self.c * tree.cond_expectation(values, k)

    def to_dict(self):
        return {"kind": self.kind, "c": self.c}


@dataclass(frozen=True)
class ConditionalQuantile:
    """``psi_k(Y) = q_alpha(Y | F_k)``: next-period consumption exceeds the
    current one with conditional probability at least ``1 - alpha``."""

    alpha: float
    kind = "quantile"

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha}")

    def apply(self, tree, values, k):
        return tree.cond_quantile(values, self.alpha, k)

    def to_dict(self):
        return {"kind": self.kind, "alpha": self.alpha}


@dataclass(frozen=True, eq=False)
class ScaledExpectationRatio:
    """``psi_k(Y) = X_k E[Y | F_k] / E[X_{k+1} | F_k]`` for a target process ``X``.

    ``current`` holds ``X_k`` on the epoch-``k`` nodes and ``following``
    holds ``X_{k+1}`` on the epoch-``k+1`` nodes, both in canonical order.
    """

    current: np.ndarray
    following: np.ndarray
    kind = "ratio"

    def __post_init__(self):
        object.__setattr__(self, "current", np.asarray(self.current, dtype=float))
        object.__setattr__(self, "following", np.asarray(self.following, dtype=float))
        if np.any(self.current < 0) or np.any(self.following <= 0):
            raise DomainError("ratio targets need X_k >= 0 and X_{k+1} > 0")

    def ratio(self, tree, k):
        return self.current / tree.cond_expectation(self.following, k)

    def apply(self, tree, values, k):
        if len(self.current) != tree.n_at(k) or len(self.following) != tree.n_at(k + 1):
            raise InputError(f"ratio operator at epoch {k} was built for a different tree")
        return self.ratio(tree, k) * tree.cond_expectation(values, k)

    def to_dict(self):
        return {"kind": self.kind, "current": self.current.tolist(), "next": self.following.tolist()}


_STEP_KINDS = {
    "expectation": lambda d: ConditionalExpectation(float(d["c"])),
    "quantile": lambda d: ConditionalQuantile(float(d["alpha"])),
    "ratio": lambda d: ScaledExpectationRatio(d["current"], d["next"]),
}


@dataclass(frozen=True, eq=False)
class PHPPSpec:
    """Step operators ``psi_0..psi_{K-1}`` plus the terminal fraction ``psi_K``.

    ``terminal`` is a constant in [0, 1] or an array over the leaves.
    """

    steps: tuple
    terminal: float | np.ndarray = 1.0

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        term = self.terminal
        if np.ndim(term) == 0:
            term = float(term)
        else:
            term = np.asarray(term, dtype=float)
        if np.any(np.asarray(term) < 0) or np.any(np.asarray(term) > 1) or np.any(np.isnan(term)):
            raise DomainError("terminal fraction must lie in [0, 1]")
        object.__setattr__(self, "terminal", term)

    @property
    def horizon(self) -> int:
        return len(self.steps)

    @classmethod
    def expectation(cls, K, c=1.0, d=1.0) -> "PHPPSpec":
        return cls((ConditionalExpectation(c),) * K, d)

    @classmethod
    def quantile(cls, K, alpha, d=1.0) -> "PHPPSpec":
        return cls((ConditionalQuantile(alpha),) * K, d)

    def terminal_at(self, tree) -> np.ndarray:
        n = tree.n_at(tree.K)
        if np.ndim(self.terminal) == 0:
            return np.full(n, self.terminal)
        if self.terminal.shape != (n,):
            raise InputError(f"terminal has {self.terminal.size} leaf values, tree has {n} leaves")
        return self.terminal

    def to_dict(self) -> dict:
        if np.ndim(self.terminal) == 0:
            term = {"d": self.terminal}
        else:
            term = {"leaf_values": self.terminal.tolist()}
        return {"steps": [s.to_dict() for s in self.steps], "terminal": term}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data) -> "PHPPSpec":
        try:
            steps = [_STEP_KINDS[s["kind"]](s) for s in data["steps"]]
            term = data.get("terminal", {"d": 1.0})
            terminal = term["d"] if "d" in term else term["leaf_values"]
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed PHPP spec: missing or unknown {exc}") from None
        return cls(steps, terminal)

    @classmethod
    def from_json(cls, text) -> "PHPPSpec":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"cannot parse spec JSON: {exc}") from None
        return cls.from_dict(data)


# ------------------------------------------------------------------ solution


@dataclass(frozen=True, eq=False)
class ConsumptionSolution:
    """Relative rates ``z``, consumption ``x`` and account ``a`` per tree node."""

    tree: ScenarioTree
    z: np.ndarray
    x: np.ndarray
    a: np.ndarray

    def at(self, k):
        sl = self.tree.epoch_slice(k)
        return self.z[sl], self.x[sl], self.a[sl]

    def along(self, index):
        """``(s, z, x, a)`` arrays along the path from the root to node ``index``."""
        p = self.tree.path(index)
        return self.tree.s[p], self.z[p], self.x[p], self.a[p]

    def rows(self):
        prob = self.tree.path_probabilities()
        for i in range(self.tree.n_nodes):
            yield (self.tree.ids[i], int(self.tree.epoch[i]), prob[i],
                   self.tree.s[i], self.z[i], self.x[i], self.a[i])

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SOLUTION_COLUMNS)
        for row in self.rows():
            w.writerow([row[0], row[1]] + [repr(float(v)) for v in row[2:]])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def solve(tree: ScenarioTree, spec: PHPPSpec) -> ConsumptionSolution:
    """The unique non-negative consumption process with property ``spec``.

    Relative rates are computed backwards from the terminal fraction,
    ``Z_{k-1} = psi(Z_k S_k) / (S_{k-1} + psi(Z_k S_k))``; consumption and
    account then follow forwards, node by node.
    """
    if spec.horizon != tree.K:
        raise InputError(f"spec has {spec.horizon} step operators, tree horizon is {tree.K}")
    s = tree.s
    z = np.empty(tree.n_nodes)
    z[tree.epoch_slice(tree.K)] = spec.terminal_at(tree)
    for k in range(tree.K, 0, -1):
        sl, prev = tree.epoch_slice(k), tree.epoch_slice(k - 1)
        psi = np.asarray(spec.steps[k - 1].apply(tree, z[sl] * s[sl], k - 1), dtype=float)
        if np.any(psi < 0) or not np.all(np.isfinite(psi)):
            raise DomainError(f"operator at epoch {k - 1} returned a negative or non-finite value")
        z[prev] = psi / (s[prev] + psi)

    x = np.empty_like(z)
    a = np.empty_like(z)
    a[0] = s[0]
    x[0] = z[0] * a[0]
    for k in range(1, tree.K + 1):
        sl = tree.epoch_slice(k)
        par = tree.parent[sl]
        a[sl] = (a[par] - x[par]) * s[sl] / s[par]
        x[sl] = z[sl] * a[sl]
    return ConsumptionSolution(tree, z, x, a)


def tree_account(tree: ScenarioTree, x) -> np.ndarray:
    """Account before consumption at every node for per-node consumption ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (tree.n_nodes,):
        raise InputError("per-node consumption has wrong length")
    a = np.empty_like(x)
    a[0] = tree.s[0]
    for k in range(1, tree.K + 1):
        sl = tree.epoch_slice(k)
        par = tree.parent[sl]
        a[sl] = (a[par] - x[par]) * tree.s[sl] / tree.s[par]
    return a


# -------------------------------------------------------------- verification


@dataclass(frozen=True)
class Violation:
    check: str
    node_id: object
    k: int
    detail: str


@dataclass
class VerificationReport:
    violations: list = field(default_factory=list)
    n_nodes: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def by_check(self, check):
        return [v for v in self.violations if v.check == check]

    def summary(self, limit=10) -> str:
        if self.ok:
            return f"verification passed: {self.n_nodes} nodes, no violations"
        lines = [f"verification FAILED: {len(self.violations)} violation(s)"]
        for v in self.violations[:limit]:
            lines.append(f"  [{v.check}] node {v.node_id!r} (k={v.k}): {v.detail}")
        if len(self.violations) > limit:
            lines.append(f"  ... {len(self.violations) - limit} more")
        return "\n".join(lines)


def verify(tree: ScenarioTree, spec: PHPPSpec, solution: ConsumptionSolution) -> VerificationReport:
    """Check a solution against the projection and terminal identities.

    The account is recomputed from ``solution.x``; stored ``a`` and ``z``
    are checked against it rather than trusted.
    """
    report = VerificationReport(n_nodes=tree.n_nodes)
    add = report.violations.append
    x = np.asarray(solution.x, dtype=float)
    if x.shape != (tree.n_nodes,) or spec.horizon != tree.K:
        add(Violation("shape", None, -1, "solution or spec does not match the tree"))
        return report

    a = tree_account(tree, x)
    reg_tol = REGULARITY_TOL * tree.s[0]
    floor = np.maximum(np.abs(a), reg_tol)

    def flag(check, mask, detail):
        for i in np.flatnonzero(mask):
            add(Violation(check, tree.ids[i], int(tree.epoch[i]), detail(i)))

    flag("account", np.abs(solution.a - a) > PROJECTION_RTOL * floor,
         lambda i: f"stored a={solution.a[i]:.12g}, recomputed {a[i]:.12g}")
    flag("rates", np.abs(solution.z * a - x) > PROJECTION_RTOL * floor,
         lambda i: f"x={x[i]:.12g} but z*a={solution.z[i] * a[i]:.12g}")

    inner = tree.epoch < tree.K
    psi = np.zeros(tree.n_nodes)
    for k in range(tree.K):
        psi[tree.epoch_slice(k)] = spec.steps[k].apply(tree, x[tree.epoch_slice(k + 1)], k)
    flag("projection", inner & (np.abs(x - psi) > PROJECTION_RTOL * floor),
         lambda i: f"x={x[i]:.12g}, psi(x_next)={psi[i]:.12g}")

    target = np.zeros(tree.n_nodes)
    target[tree.epoch_slice(tree.K)] = spec.terminal_at(tree)
    target *= a
    flag("terminal", ~inner & (np.abs(x - target) > TERMINAL_ATOL * floor),
         lambda i: f"x={x[i]:.12g}, psi_K*a={target[i]:.12g}")

    flag("regularity", (x < -reg_tol) | (x > a + reg_tol),
         lambda i: f"x={x[i]:.12g} outside [0, a={a[i]:.12g}]")
    flag("positivity", a <= 0, lambda i: f"a={a[i]:.12g} not positive")
    with np.errstate(divide="ignore", invalid="ignore"):
        zz = np.where(a > 0, x / a, np.inf)
    flag("strict", inner & (zz >= 1.0), lambda i: f"z={zz[i]:.12g} not below 1 before the horizon")
    return report


# ----------------------------------------------------------- inverse problem


def phpp_from_process(tree: ScenarioTree, x) -> PHPPSpec:
    """A projection property whose solution on ``tree`` is ``x``.

    ``x`` must be strictly regular before the horizon and positive at it.
    Uses the linear operators ``psi_k(Y) = X_k E[Y|F_k] / E[X_{k+1}|F_k]``
    and terminal fractions ``X_K / A_K``.
    """
    x = np.asarray(x, dtype=float)
    a = tree_account(tree, x)
    reg_tol = REGULARITY_TOL * tree.s[0]
    if np.any(x < -reg_tol) or np.any(x > a + reg_tol):
        raise RegularityError("consumption process is not regular")
    inner = tree.epoch < tree.K
    zero = np.flatnonzero(x <= 0)
    if zero.size:
        i = int(zero[0])
        raise NotExtractableError(
            f"zero consumption at node {tree.ids[i]!r} (k={int(tree.epoch[i])}); "
            "no projection property can reproduce it"
        )
    full = np.flatnonzero(inner & (x >= a))
    if full.size:
        i = int(full[0])
        raise NotExtractableError(f"account exhausted before the horizon at node {tree.ids[i]!r}")

    parts = tree.split(x)
    steps = [ScaledExpectationRatio(parts[k], parts[k + 1]) for k in range(tree.K)]
    leaves = tree.epoch_slice(tree.K)
    terminal = np.clip(x[leaves] / a[leaves], 0.0, 1.0)
    return PHPPSpec(steps, terminal)
