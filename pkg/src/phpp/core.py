"""Account algebra for a money account with consumption.

All functions work along the last axis, so a 1-D array is one path over
epochs ``0..K`` and a 2-D array is a batch of paths (rows) over epochs
(columns).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InputError, RegularityError

# absolute tolerance on currency values after scaling S_0 to 1
REGULARITY_TOL = 1e-9


@dataclass(frozen=True)
class AccountState:
    """Value process ``s``, consumption ``x`` and account with consumption ``a``."""

    s: np.ndarray
    x: np.ndarray
    a: np.ndarray

    @property
    def residual(self) -> np.ndarray:
        """Account value immediately after consumption, ``a - x``."""
        return self.a - self.x


def _as_pair(s, x):
    s = np.asarray(s, dtype=float)
    x = np.asarray(x, dtype=float)
    if s.shape != x.shape:
        raise InputError(f"shape mismatch: S has {s.shape}, X has {x.shape}")
    if s.ndim == 0 or s.shape[-1] == 0:
        raise InputError("need at least one epoch")
    return s, x


def _check_positive(s, what="S"):
    if not np.all(s > 0):
        raise DomainError(f"{what} must be strictly positive")


def evolve_account(s, x) -> np.ndarray:
    """Account value before consumption at each epoch.

    ``A_0 = S_0`` and ``A_{k+1} = (A_k - X_k) S_{k+1} / S_k``.
    """
    s, x = _as_pair(s, x)
    _check_positive(s)
    a = np.empty_like(s)
    a[..., 0] = s[..., 0]
    for k in range(s.shape[-1] - 1):
        a[..., k + 1] = (a[..., k] - x[..., k]) * s[..., k + 1] / s[..., k]
    return a


def account_closed_form(s, x) -> np.ndarray:
    """``A_k = (1 - sum_{i<k} X_i/S_i) S_k``; same result as :func:`evolve_account`."""
    s, x = _as_pair(s, x)
    _check_positive(s)
    spent = np.cumsum(x / s, axis=-1)
    before = np.concatenate([np.zeros_like(spent[..., :1]), spent[..., :-1]], axis=-1)
    return (1.0 - before) * s


def regularity_violations(s, x, a=None, tol=REGULARITY_TOL) -> np.ndarray:
    """Boolean mask of epochs where ``0 <= X_k <= A_k`` fails beyond ``tol``.

    ``tol`` is absolute in units of ``S_0`` of the respective path.
    """
    s, x = _as_pair(s, x)
    if a is None:
        a = evolve_account(s, x)
    scale = np.abs(s[..., :1]) * tol
    return (x < -scale) | (x > a + scale)


def is_regular(s, x, tol=REGULARITY_TOL) -> bool:
    return not regularity_violations(s, x, tol=tol).any()


def check_regular(s, x, a=None, tol=REGULARITY_TOL):
    bad = regularity_violations(s, x, a, tol)
    if bad.any():
        idx = np.argwhere(bad)[0]
        raise RegularityError(f"consumption not regular at index {tuple(int(i) for i in idx)}")


def relative_from_absolute(s, x) -> np.ndarray:
    """Relative rates ``Z_k = X_k / A_k``, with ``Z_k = 0`` where the account is empty."""
    s, x = _as_pair(s, x)
    a = evolve_account(s, x)
    check_regular(s, x, a)
    # rounding in A_k scales with S_k, so emptiness is judged per epoch
    empty = a <= np.abs(s) * REGULARITY_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(empty, 0.0, x / np.where(empty, 1.0, a))
    return np.clip(z, 0.0, 1.0)


def absolute_from_relative(s, z) -> AccountState:
    """Consumption ``X_k = Z_k prod_{i<k}(1 - Z_i) S_k`` from relative rates."""
    s, z = _as_pair(s, z)
    _check_positive(s)
    if np.any(z < 0) or np.any(z > 1) or np.any(np.isnan(z)):
        raise DomainError("relative rates must lie in [0, 1]")
    kept = np.cumprod(1.0 - z, axis=-1)
    before = np.concatenate([np.ones_like(kept[..., :1]), kept[..., :-1]], axis=-1)
    a = before * s
    return AccountState(s=s, x=z * a, a=a)


def rescale(f, s, x):
    """Multiply value process and consumption by a positive factor process.

    Returns ``(f*s, f*x, a_tilde)`` where ``a_tilde`` is the account of the
    rescaled pair; it equals ``f * evolve_account(s, x)``.
    """
    s, x = _as_pair(s, x)
    f = np.broadcast_to(np.asarray(f, dtype=float), s.shape)
    _check_positive(f, "scaling factors")
    s_t = f * s
    x_t = f * x
    return s_t, x_t, evolve_account(s_t, x_t)
