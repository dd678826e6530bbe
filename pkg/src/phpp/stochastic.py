"""Growth-factor models, the inverse normal CDF and Monte Carlo paths.

Seeding contract: path ``i`` of a simulation with seed ``seed`` draws from
``numpy.random.Philox(key=seed, counter=[0, 0, 0, i])`` wrapped in a
``numpy.random.Generator``.  A path therefore depends only on
``(model, s0, K, seed, i)``; neither the number of paths nor the order or
thread in which paths are generated changes it.  Normal increments come
from ``Generator.standard_normal`` and two-point steps from
``Generator.random() < p``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DomainError, InputError

DEFAULT_SEED = 20090101
DEFAULT_MAX_CELLS = 50_000_000

# Acklam's rational approximation, relative error below 1.2e-9
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _lower_half(p):
    # p <= 0.5
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        x = num / den
    else:
        q = p - 0.5
        r = q * q
        num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        x = num / den
    # one Newton step against the erfc-based CDF
    density = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return x - (norm_cdf(x) - p) / density


def inv_norm_cdf(alpha: float) -> float:
    """Standard normal quantile; ``inv_norm_cdf(1 - a) == -inv_norm_cdf(a)``."""
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {alpha}")
    if alpha == 0.5:
        return 0.0
    if alpha > 0.5:
        return -_lower_half(1.0 - alpha)
    return _lower_half(alpha)


# ---------------------------------------------------------------- models


@dataclass(frozen=True)
class TwoPoint:
    """Growth factor ``u1`` with probability ``p``, else ``u2``."""

    u1: float
    u2: float
    p: float

    def __post_init__(self):
        if not 0 < self.u1 < self.u2:
            raise DomainError("need 0 < u1 < u2")
        if not 0 < self.p < 1:
            raise DomainError("p must lie in (0, 1)")

    def mean(self):
        return self.p * self.u1 + (1.0 - self.p) * self.u2

    def quantile(self, alpha):
        return self.u1 if self.p >= alpha else self.u2

    def factors(self, rng, K):
        return np.where(rng.random(K) < self.p, self.u1, self.u2)


@dataclass(frozen=True)
class LogNormal:
    """Growth factor ``exp(mu + sigma * N(0, 1))`` per period (GBM sampled at integers)."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("sigma must be positive")

    def mean(self):
        return math.exp(self.mu + 0.5 * self.sigma**2)

    def quantile(self, alpha):
        return math.exp(self.mu + self.sigma * inv_norm_cdf(alpha))

    def factors(self, rng, K):
        return np.exp(self.mu + self.sigma * rng.standard_normal(K))


@dataclass(frozen=True)
class FixedRate:
    """Deterministic growth ``1 + i`` per period."""

    i: float

    def __post_init__(self):
        if not self.i > -1:
            raise DomainError("interest rate must exceed -1")

    def mean(self):
        return 1.0 + self.i

    def quantile(self, alpha):
        return 1.0 + self.i

    def factors(self, rng, K):
        return np.full(K, 1.0 + self.i)


def mean_growth_constant(model) -> float:
    return model.mean()


def quantile_growth_constant(model, alpha: float) -> float:
    """``q_alpha`` of the one-period growth factor, e.g. ``exp(mu + sigma * Phi^-1(alpha))``."""
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    return model.quantile(alpha)


# ------------------------------------------------------------- simulation


@dataclass(frozen=True, eq=False)
class SimulatedPaths:
    s0: float
    paths: np.ndarray
    seed: int
    model: object = None

    @property
    def K(self) -> int:
        return self.paths.shape[1] - 1

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]


def path_generator(seed: int, path_id: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, path_id]))


def simulate_paths(model, s0, K, n_paths, seed=DEFAULT_SEED, max_cells=DEFAULT_MAX_CELLS):
    """Simulate ``n_paths`` value paths over epochs ``0..K``, one row per path."""
    K, n_paths, seed = int(K), int(n_paths), int(seed)
    if K < 1 or n_paths < 1:
        raise InputError("need K >= 1 and n_paths >= 1")
    if not s0 > 0:
        raise DomainError("s0 must be positive")
    if seed < 0:
        raise InputError("seed must be non-negative")
    if n_paths * (K + 1) > max_cells:
        raise CapacityError(f"{n_paths} paths x {K + 1} epochs exceeds the budget of {max_cells} cells")

    factors = np.empty((n_paths, K))
    if isinstance(model, FixedRate):
        factors[:] = 1.0 + model.i
    else:
        for i in range(n_paths):
            factors[i] = model.factors(path_generator(seed, i), K)
    paths = np.empty((n_paths, K + 1))
    paths[:, 0] = s0
    paths[:, 1:] = s0 * np.cumprod(factors, axis=1)
    return SimulatedPaths(float(s0), paths, seed, model)


def increase_frequency(x) -> float:
    """Pooled share of steps with ``X_{k+1} > X_k`` over all paths and epochs."""
    x = np.atleast_2d(x)
    return float(np.mean(x[:, 1:] > x[:, :-1]))


def path_summary(sim: SimulatedPaths, x, a) -> dict:
    x = np.atleast_2d(x)
    n = x.shape[0]
    freq = increase_frequency(x)
    return {
        "n_paths": n,
        "K": sim.K,
        "seed": sim.seed,
        "epochs": [
            {
                "k": k,
                "mean_s": float(sim.paths[:, k].mean()),
                "sd_s": float(sim.paths[:, k].std(ddof=1)) if n > 1 else 0.0,
                "mean_x": float(x[:, k].mean()),
                "sd_x": float(x[:, k].std(ddof=1)) if n > 1 else 0.0,
                "mean_a": float(np.atleast_2d(a)[:, k].mean()),
            }
            for k in range(sim.K + 1)
        ],
        "increase_frequency": freq,
        "increase_frequency_se": math.sqrt(freq * (1.0 - freq) / (n * sim.K)),
    }


def write_paths_csv(fh, sim: SimulatedPaths, x, a):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("path_id", "k", "s", "x", "a"))
    x = np.atleast_2d(x)
    a = np.atleast_2d(a)
    for i in range(sim.n_paths):
        for k in range(sim.K + 1):
            w.writerow((i, k, repr(float(sim.paths[i, k])), repr(float(x[i, k])), repr(float(a[i, k]))))
