"""Deterministic relative consumption rates for i.i.d. growth factors.

When every step operator maps the one-period growth factor to a constant,
``psi_k(S_{k+1}/S_k) = a_k``, the relative rates are deterministic and the
whole strategy reduces to per-epoch coefficients on ``S_k``; no tree is
needed.  The perpetual (infinite horizon) variant lives here too.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from numbers import Real

import numpy as np

from .errors import DomainError, InfeasibleError, InputError, NotRepresentableError

# beyond this horizon products and sums are accumulated in log space
LOG_SPACE_HORIZON = 50
DEFAULT_PROBE = 10_000


@dataclass(frozen=True, eq=False)
class ProjectionConstants:
    """``a[k] = psi_k(S_{k+1}/S_k)`` for ``k < K`` and ``a_terminal = psi_K``."""

    a: np.ndarray
    a_terminal: float = 1.0

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        if a.ndim != 1:
            raise InputError("projection constants must be one-dimensional")
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            raise DomainError("projection constants must be finite and non-negative")
        if not 0 <= self.a_terminal <= 1:
            raise DomainError("terminal constant must lie in [0, 1]")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "a_terminal", float(self.a_terminal))

    @classmethod
    def constant(cls, a, K, a_terminal=1.0) -> "ProjectionConstants":
        return cls(np.full(int(K), float(a)), a_terminal)

    @property
    def K(self) -> int:
        return len(self.a)

    def full(self) -> np.ndarray:
        return np.append(self.a, self.a_terminal)


def _log_tail(pc: ProjectionConstants):
    """``log P_k`` and ``log D_k`` for k = 0..K.

    ``P_k = prod_{j=k}^{K} a_j`` (terminal included) and
    ``D_k = 1 + sum_{j=k}^{K-1} P_j``.
    """
    K = pc.K
    with np.errstate(divide="ignore"):
        log_a = np.log(pc.full())
    log_p = np.cumsum(log_a[::-1])[::-1]
    log_d = np.zeros(K + 1)
    if K:
        tail = np.logaddexp.accumulate(log_p[:K][::-1])[::-1]
        log_d[:K] = np.logaddexp(0.0, tail)
    return log_p, log_d


def _tail(pc: ProjectionConstants):
    K = pc.K
    p = np.cumprod(pc.full()[::-1])[::-1]
    d = np.ones(K + 1)
    d[:K] += np.cumsum(p[:K][::-1])[::-1]
    return p, d


def consumption_coefficients(pc: ProjectionConstants):
    """Deterministic ``(X_k/S_k, A_k/S_k)`` for k = 0..K."""
    if pc.K > LOG_SPACE_HORIZON:
        log_p, log_d = _log_tail(pc)
        return np.exp(log_p - log_d[0]), np.exp(log_d - log_d[0])
    p, d = _tail(pc)
    return p / d[0], d / d[0]


def rates_from_constants(pc: ProjectionConstants) -> np.ndarray:
    """Relative rates ``z_k = P_k / D_k``; ``z_K`` equals the terminal constant."""
    if pc.K > LOG_SPACE_HORIZON:
        log_p, log_d = _log_tail(pc)
        z = np.exp(log_p - log_d)
    else:
        p, d = _tail(pc)
        z = p / d
    z[-1] = pc.a_terminal
    return z


def x_closed_form(pc: ProjectionConstants, s_path):
    """Consumption and account along one path (1-D) or many paths (rows of a 2-D array)."""
    s = np.asarray(s_path, dtype=float)
    if s.shape[-1:] != (pc.K + 1,):
        raise InputError(f"path needs {pc.K + 1} epochs, got shape {s.shape}")
    if np.any(s <= 0):
        raise DomainError("path values must be strictly positive")
    x_coef, a_coef = consumption_coefficients(pc)
    return x_coef * s, a_coef * s


def constants_from_rates(z) -> ProjectionConstants:
    """Projection constants that reproduce deterministic rates ``z``.

    Zeros are only allowed as a prefix ``z_0..z_{k0}``; constants below
    ``k0`` are free and set to 0.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size == 0:
        raise InputError("rates must be a non-empty 1-D sequence")
    K = z.size - 1
    if np.any(z[:K] < 0) or np.any(z[:K] >= 1) or not 0 <= z[K] <= 1:
        raise DomainError("need z_k in [0, 1) before the horizon and z_K in [0, 1]")
    zero = np.flatnonzero(z == 0)
    k0 = int(zero[-1]) if zero.size else -1
    if zero.size != k0 + 1:
        raise NotRepresentableError(
            "zero rate after a positive one; backward recursion forces zeros to form a prefix"
        )
    a = np.zeros(K)
    if k0 < K:
        ks = np.arange(max(k0, 0), K)
        a[ks] = z[ks] / ((1.0 - z[ks]) * z[ks + 1])
    return ProjectionConstants(a, z[K])


# ------------------------------------------------------------------ perpetual


def _a_stream(a_values):
    if isinstance(a_values, Real):
        return itertools.repeat(float(a_values))
    if callable(a_values):
        return (float(a_values(k)) for k in itertools.count())
    return (float(v) for v in a_values)


class PerpetualPlan:
    """Deterministic relative rates for an unbounded horizon, started at ``z0``.

    Iterating yields ``z_0, z_1, ...`` via ``z_{k+1} = z_k / ((1 - z_k) a_k)``.
    An iterator is single-consumer; call ``iter()`` again for a fresh pass.
    """

    def __init__(self, a_values, z0):
        if not 0 < z0 < 1:
            raise DomainError("z0 must lie in (0, 1)")
        self.a_values = a_values
        self.z0 = float(z0)

    def __iter__(self):
        z = self.z0
        for k, a in enumerate(itertools.chain(_a_stream(self.a_values), [None])):
            if not 0 < z < 1:
                raise InfeasibleError(
                    f"z0={self.z0!r} is infeasible: rate at k={k} would be {z!r}", k=k
                )
            yield z
            if a is None:
                return
            if not a > 0:
                raise DomainError(f"a_{k} must be strictly positive, got {a}")
            z = z / ((1.0 - z) * a)

    def take(self, n) -> np.ndarray:
        return np.fromiter(itertools.islice(iter(self), n), dtype=float)

    def closed_form(self, n) -> np.ndarray:
        """``z_k = z0 / (prod_{i<k} a_i - z0 sum_{i<k} prod_{j=i}^{k-1} a_j)``, k < n.

        Evaluated after dividing through by ``prod_{i<k} a_i``.
        """
        out = []
        w, sigma = 1.0, 0.0
        stream = _a_stream(self.a_values)
        for _ in range(n):
            out.append(self.z0 * w / (1.0 - self.z0 * sigma))
            a = next(stream, None)
            if a is None:
                break
            sigma += w
            w /= a
        return np.array(out)


def perpetual_z_sequence(a_values, z0):
    """Lazy iterator over ``z_k``; raises :class:`InfeasibleError` at the first bad ``k``."""
    return iter(PerpetualPlan(a_values, z0))


@dataclass(frozen=True)
class Z0Max:
    value: float
    attained: bool
    probe: int
    analytic: float | None = None


def perpetual_bounds(a_values, horizon_probe=DEFAULT_PROBE) -> np.ndarray:
    """Upper bounds on ``z0`` from each horizon ``k = 0..horizon_probe``.

    ``bound_k = prod_{i<k} a_i / (1 + sum_{i<k} prod_{j=i}^{k-1} a_j)``,
    evaluated as ``1 / (w_k + sigma_k)`` after dividing through by the
    product.  A finite sequence of constants stops the probe at its length.
    """
    bounds = [1.0]
    w, sigma = 1.0, 0.0
    for a in itertools.islice(_a_stream(a_values), horizon_probe):
        if not a > 0:
            raise DomainError("perpetual projection constants must be strictly positive")
        sigma += w
        w /= a
        bounds.append(1.0 / (w + sigma))
    return np.array(bounds)


def perpetual_z0_max(a_values, horizon_probe=DEFAULT_PROBE) -> Z0Max:
    """Supremum of feasible initial rates, truncated at ``horizon_probe``.

    For strictly positive constants ``w_k + sigma_k`` grows by
    ``w_k / a_k > 0`` each step, so the bounds decrease strictly and their
    infimum is never reached at a finite ``k``: ``attained`` is False and
    ``z0 = value`` is itself feasible.  The value is the smallest probed
    bound.  For a constant ``a`` the analytic limit ``max(1 - 1/a, 0)`` is
    reported and used instead.
    """
    if horizon_probe < 1:
        raise InputError("probe horizon must be at least 1")
    bounds = perpetual_bounds(a_values, horizon_probe)
    probe = len(bounds) - 1
    if isinstance(a_values, Real):
        limit = max(1.0 - 1.0 / float(a_values), 0.0)
        return Z0Max(limit, False, probe, analytic=limit)
    return Z0Max(float(bounds.min()), False, probe)


def fixed_point_rate(a) -> float:
    """Constant perpetual rate ``1 - 1/a`` for a constant ``a > 1``."""
    if not a > 1:
        raise InfeasibleError("a constant perpetual rate needs a > 1")
    return 1.0 - 1.0 / a

