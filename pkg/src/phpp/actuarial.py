"""Income drawdown benchmarking and smooth bonus for a closed with-profits fund."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import bisect

from .engine import PHPPSpec, solve
from .errors import DegeneratePlanError, DomainError, InfeasibleError, InputError
from .iid import ProjectionConstants, consumption_coefficients, x_closed_form
from .lattice import ScenarioTree
from .stochastic import mean_growth_constant

BISECT_MAXITER = 200
LIMIT_RTOL = 1e-9


def annuity_certain(i, n) -> float:
    """Present value of 1 per period, paid in advance, for ``n`` periods."""
    if not i > -1:
        raise DomainError("interest rate must exceed -1")
    n = int(n)
    if n < 1:
        raise DomainError("annuity term must be at least 1")
    v = 1.0 / (1.0 + i)
    return float(np.sum(v ** np.arange(n)))


# --------------------------------------------------------------- drawdown


@dataclass(frozen=True)
class AnnuityBasis:
    """Annuity-due factor at the end of drawdown, read from a life table."""

    i: float
    life_annuity_factor: float
    age: int | None = None
    term: int | None = None

    def __post_init__(self):
        if not self.i > -1:
            raise DomainError("interest rate must exceed -1")
        if not self.life_annuity_factor > 0:
            raise DomainError("annuity factor must be positive")


@dataclass(frozen=True)
class DrawdownPlan:
    """Fund ``s0`` drawn down over ``K`` years with ``X_k = c E[X_{k+1}|F_k]``
    and a final withdrawal of ``d`` times the remaining fund."""

    s0: float
    d: float
    model: object
    K: int
    c: float = 1.0

    def __post_init__(self):
        if not self.s0 > 0:
            raise DomainError("s0 must be positive")
        if not 0 <= self.d <= 1:
            raise DomainError("d must lie in [0, 1]")
        if not self.c > 0:
            raise DomainError("c must be positive")
        if int(self.K) < 0:
            raise DomainError("K must be non-negative")

    def constants(self) -> ProjectionConstants:
        return ProjectionConstants.constant(self.c * mean_growth_constant(self.model), self.K, self.d)


@dataclass(frozen=True)
class DrawdownResult:
    d: float
    x0: float
    expected_annuity: float


def initial_withdrawal(plan: DrawdownPlan) -> float:
    x_coef, _ = consumption_coefficients(plan.constants())
    return float(x_coef[0] * plan.s0)


def drawdown_initial_rate(plan: DrawdownPlan, basis: AnnuityBasis) -> DrawdownResult:
    """First withdrawal ``X0`` and the implied expected annuity ``X0 / (d * a_due)``."""
    if plan.d == 0:
        raise DegeneratePlanError("d = 0 consumes nothing; the expected annuity is undefined")
    x0 = initial_withdrawal(plan)
    return DrawdownResult(plan.d, x0, x0 / (plan.d * basis.life_annuity_factor))


def drawdown_solve_limit(plan: DrawdownPlan, basis: AnnuityBasis, limit: float) -> DrawdownResult:
    """Terminal fraction ``d_L`` whose first withdrawal equals ``limit``.

    The ``d`` stored in ``plan`` is ignored.  The benchmark
    ``limit / (d_L * a_due)`` is returned as ``expected_annuity``.
    """
    def x0_at(d):
        return initial_withdrawal(replace(plan, d=d))

    top = x0_at(1.0)
    if not 0 < limit <= top:
        raise InfeasibleError(
            f"limit {limit!r} is outside (0, {top:.6f}]; X0 at d=1 is {top:.6f}"
        )
    if limit == top:
        d_l = 1.0
    else:
        d_l = bisect(lambda d: x0_at(d) - limit, 0.0, 1.0,
                     xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=BISECT_MAXITER, disp=False)
    x0 = x0_at(d_l)
    if abs(x0 - limit) > LIMIT_RTOL * limit:
        raise InfeasibleError(f"bisection stopped at d={d_l!r} with X0={x0!r}, limit {limit!r}")
    return DrawdownResult(d_l, x0, limit / (d_l * basis.life_annuity_factor))


# ------------------------------------------------------------------ bonus


@dataclass(frozen=True, eq=False)
class BonusFund:
    """Closed fund of ``N_0`` endowment policies with free assets ``B`` each.

    ``r`` is the asset index (``R_0 = 1``): a 1-D path, a 2-D array of paths
    (rows) or a :class:`ScenarioTree` whose node values are ``R``.
    """

    sum_assured: float
    survivors: np.ndarray
    assurance_factors: np.ndarray
    free_assets: float
    r: object

    def __post_init__(self):
        n = np.asarray(self.survivors, dtype=float)
        f = np.asarray(self.assurance_factors, dtype=float)
        object.__setattr__(self, "survivors", n)
        object.__setattr__(self, "assurance_factors", f)
        if n.ndim != 1 or n.shape != f.shape:
            raise InputError("survivors and assurance factors need one value per epoch")
        if np.any(n <= 0):
            raise InputError("survivor counts must be positive")
        if np.any(f <= 0) or np.any(f >= 1):
            raise InputError("assurance factors must lie in (0, 1)")
        if not self.sum_assured > 0 or not self.free_assets > 0:
            raise InputError("sum assured and free assets must be positive")
        if isinstance(self.r, ScenarioTree):
            r0, K = self.r.s[0], self.r.K
        else:
            r = np.asarray(self.r, dtype=float)
            object.__setattr__(self, "r", r)
            if r.ndim not in (1, 2) or np.any(r <= 0):
                raise InputError("asset index must be a positive path or matrix of paths")
            r0, K = r[..., 0], r.shape[-1] - 1
        if np.any(np.abs(np.asarray(r0) - 1.0) > 1e-12):
            raise InputError("asset index must start at R_0 = 1")
        if K != len(n) - 1:
            raise InputError(f"asset index has horizon {K}, fund data has {len(n) - 1}")

    @property
    def K(self) -> int:
        return len(self.survivors) - 1

    @property
    def liability_factors(self) -> np.ndarray:
        """``F_k = SA * N_k * assurance_factor_k``."""
        return self.sum_assured * self.survivors * self.assurance_factors

    @property
    def initial_free_assets(self) -> float:
        return float(self.survivors[0] * self.free_assets)


@dataclass(frozen=True, eq=False)
class BonusSchedule:
    """Per-epoch bonus rates and cash flows.

    Arrays are shaped like the asset index (per path epoch, or per tree
    node).  ``account`` is the free-asset account before the bonus at
    ``k`` is paid and ``residual`` what remains after it.
    """

    k: np.ndarray
    survivors: np.ndarray
    liability: np.ndarray
    b: np.ndarray
    cash: np.ndarray
    account: np.ndarray
    residual: np.ndarray
    artificial_s: np.ndarray
    solution: object = None
    node_ids: list | None = None

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        cols = ["k", "N_k", "F_k", "b_k", "cash", "residual"]
        if self.node_ids is not None:
            w.writerow(["node_id"] + cols)
            for j, nid in enumerate(self.node_ids):
                w.writerow([nid] + self._row(j))
        elif self.b.ndim == 2:
            w.writerow(["path_id"] + cols)
            for p in range(self.b.shape[0]):
                for j in range(self.b.shape[1]):
                    w.writerow([p] + self._row((p, j)))
        else:
            w.writerow(cols)
            for j in range(len(self.b)):
                w.writerow(self._row(j))

    def _row(self, idx):
        kk = int(self.k[idx[-1] if isinstance(idx, tuple) else idx])
        return [kk, repr(float(self.survivors[kk])), repr(float(self.liability[kk])),
                repr(float(self.b[idx])), repr(float(self.cash[idx])), repr(float(self.residual[idx]))]


def bonus_constants(fund: BonusFund, growth: float, d=1.0) -> ProjectionConstants:
    """Constants on the artificial value process from the asset constant ``growth``.

    ``growth = psi(R_{k+1}/R_k)``, e.g. ``c * mean_growth_constant(model)``;
    the deterministic ``F`` ratio factors out: ``a_k = growth * F_k / F_{k+1}``.
    """
    f = fund.liability_factors
    return ProjectionConstants(growth * f[:-1] / f[1:], d)


def bonus_schedule(fund: BonusFund, spec) -> BonusSchedule:
    """Bonus rates ``b`` consuming from ``S_k = N_0 B R_k / F_k`` and the cash ``F_k b_k``.

    A tree asset index needs a :class:`PHPPSpec`; path indices need
    :class:`ProjectionConstants`.
    """
    f = fund.liability_factors
    base = fund.initial_free_assets
    if isinstance(fund.r, ScenarioTree):
        if not isinstance(spec, PHPPSpec):
            raise InputError("a tree asset index needs a PHPPSpec")
        tree = fund.r
        k = tree.epoch.copy()
        art = tree.with_values(base * tree.s / f[k])
        sol = solve(art, spec)
        fk = f[k]
        b, acct = sol.x, fk * sol.a
        return BonusSchedule(k, fund.survivors, f, b, fk * b, acct, acct - fk * b,
                             art.s, sol, list(tree.ids))
    if not isinstance(spec, ProjectionConstants):
        raise InputError("a path asset index needs ProjectionConstants")
    if spec.K != fund.K:
        raise InputError(f"constants cover {spec.K} steps, fund horizon is {fund.K}")
    s = base * fund.r / f
    b, a = x_closed_form(spec, s)
    cash, acct = f * b, f * a
    k = np.arange(fund.K + 1)
    return BonusSchedule(k, fund.survivors, f, b, cash, acct, acct - cash, s)


# ------------------------------------------------------------- life tables


def _read_rows(fh, key, value):
    reader = csv.DictReader(fh)
    if reader.fieldnames is None or key not in reader.fieldnames or value not in reader.fieldnames:
        raise InputError(f"life-table CSV needs columns {key!r} and {value!r}")
    out = {}
    for row in reader:
        try:
            out[int(row[key])] = float(row[value])
        except (TypeError, ValueError) as exc:
            raise InputError(f"bad life-table row {row}: {exc}") from None
    return out


def read_annuity_factors(fh) -> dict:
    """``{age: annuity_due_factor}`` from a CSV with those two columns."""
    return _read_rows(fh, "age", "annuity_due_factor")


def read_assurance_factors(fh) -> np.ndarray:
    """Assurance factors indexed ``k = 0..K`` from a CSV with columns ``k, assurance_factor``."""
    rows = _read_rows(fh, "k", "assurance_factor")
    if sorted(rows) != list(range(len(rows))):
        raise InputError("assurance factors must cover k = 0..K without gaps")
    return np.array([rows[k] for k in range(len(rows))])
