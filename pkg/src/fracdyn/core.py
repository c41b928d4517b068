"""Fractional-calculus primitives.

Memory coefficients of the Grünwald-Letnikov expansion, the weighted history
sum that drives every fractional update, and the GL difference operator.
All per-state quantities are applied component-wise (diagonal matrices are
stored as vectors).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import DomainError, HistoryLengthError

__all__ = [
    "FractionalOrderVector",
    "MemoryCoefficients",
    "psi_coefficient",
    "psi_table",
    "memory_sum",
    "gl_difference",
]


def _check_order(alpha):
    a = np.asarray(alpha, dtype=float)
    if not np.all(np.isfinite(a)) or np.any(a <= 0.0) or np.any(a > 1.0):
        raise DomainError(f"fractional orders must lie in (0, 1], got {alpha!r}")
    return a


def psi_coefficient(alpha: float, j: int) -> float:
    """Memory coefficient ``psi(alpha, j) = Gamma(j - alpha) / (Gamma(-alpha) Gamma(j + 1))``.

    Evaluated with the product recursion ``psi(j) = psi(j-1) * (j-1-alpha) / j``,
    which stays exact at ``alpha = 1`` where the Gamma form is singular.
    """
    alpha = float(_check_order(alpha))
    if j < 0 or int(j) != j:
        raise DomainError(f"j must be a nonnegative integer, got {j!r}")
    value = 1.0
    for i in range(1, int(j) + 1):
        value *= (i - 1 - alpha) / i
    return value


def psi_table(alpha, j_max: int) -> np.ndarray:
    """``psi(alpha_i, j)`` for ``j = 0..j_max``; shape ``(j_max + 1, n)``."""
    a = np.atleast_1d(_check_order(alpha))
    table = np.empty((j_max + 1, a.size))
    table[0] = 1.0
    for j in range(1, j_max + 1):
        table[j] = table[j - 1] * ((j - 1 - a) / j)
    return table


@dataclass(frozen=True)
class FractionalOrderVector:
    """Per-state fractional orders, each in ``(0, 1]``."""

    orders: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(_check_order(self.orders)).astype(float).copy()
        if a.ndim != 1:
            raise DomainError("orders must be a vector")
        a.setflags(write=False)
        object.__setattr__(self, "orders", a)

    @classmethod
    def uniform(cls, alpha: float, n: int) -> "FractionalOrderVector":
        return cls(np.full(n, float(alpha)))

    @classmethod
    def coerce(cls, alpha, n: int) -> "FractionalOrderVector":
        """Accept a scalar, a sequence or an existing instance of length ``n``."""
        if isinstance(alpha, cls):
            out = alpha
        elif np.ndim(alpha) == 0:
            out = cls.uniform(float(alpha), n)
        else:
            out = cls(alpha)
        if len(out) != n:
            raise DomainError(f"expected {n} fractional orders, got {len(out)}")
        return out

    def __len__(self):
        return self.orders.size

    def __iter__(self):
        return iter(self.orders.tolist())

    def __eq__(self, other):
        if not isinstance(other, FractionalOrderVector):
            return NotImplemented
        return np.array_equal(self.orders, other.orders)

    def __hash__(self):
        return hash(self.orders.tobytes())

    def __repr__(self):
        return f"FractionalOrderVector({self.orders.tolist()})"

    @property
    def is_integer(self) -> bool:
        return bool(np.all(self.orders == 1.0))

    def psi(self, j: int) -> np.ndarray:
        """Diagonal of ``psi(alpha, j)``."""
        return psi_table(self.orders, j)[j]

    def step_gain(self, h: float) -> np.ndarray:
        """Diagonal of ``h**alpha``."""
        return float(h) ** self.orders

    def tolist(self):
        return self.orders.tolist()


class MemoryCoefficients:
    """Precomputed, read-only table of ``psi(alpha_i, j)``.

    Rows cover ``j = 0 .. k_max + 1`` so a history of up to ``k_max + 1``
    states (``x(k_max) .. x(0)``) can be weighted.
    """

    def __init__(self, alpha, k_max: int):
        if not isinstance(alpha, FractionalOrderVector):
            alpha = FractionalOrderVector(alpha)
        if k_max < 0:
            raise DomainError("k_max must be nonnegative")
        self.alpha = alpha
        self.k_max = int(k_max)
        table = psi_table(alpha.orders, self.k_max + 1)
        table.setflags(write=False)
        self.table = table

    def __repr__(self):
        return f"MemoryCoefficients(alpha={self.alpha.tolist()}, k_max={self.k_max})"

    @cached_property
    def partial_sums(self) -> np.ndarray:
        """``sum_{j=1..J} psi(alpha, j)`` for ``J = 0 .. k_max + 1``."""
        s = np.concatenate([np.zeros((1, self.table.shape[1])), np.cumsum(self.table[1:], axis=0)])
        s.setflags(write=False)
        return s


def memory_sum(history, coeffs: MemoryCoefficients) -> np.ndarray:
    """Weighted history ``sum_{j=1..k+1} psi(alpha, j) x(k+1-j)``.

    Parameters
    ----------
    history : array_like, shape (k+1, ..., n)
        States ordered newest first: ``x(k), x(k-1), ..., x(0)``. Extra
        middle axes are treated as independent trajectories.
    coeffs : MemoryCoefficients
    """
    hist = np.asarray(history, dtype=float)
    length = hist.shape[0]
    if length > coeffs.k_max + 1:
        raise HistoryLengthError(
            f"history of length {length} exceeds coefficient table (k_max={coeffs.k_max})"
        )
    w = coeffs.table[1 : length + 1]
    w = w.reshape((length,) + (1,) * (hist.ndim - 2) + (w.shape[1],))
    return np.sum(w * hist, axis=0)


def gl_difference(trajectory, alpha, k: int) -> np.ndarray:
    """Grünwald-Letnikov difference ``sum_{j=0..k} psi(alpha, j) x(k-j)``.

    ``trajectory`` is ordered oldest first, ``x(0), x(1), ...``.
    """
    traj = np.asarray(trajectory, dtype=float)
    if traj.ndim == 1:
        traj = traj[:, None]
    if not 0 <= k < traj.shape[0]:
        raise IndexError(f"step {k} out of range for trajectory of length {traj.shape[0]}")
    a = alpha.orders if isinstance(alpha, FractionalOrderVector) else alpha
    table = psi_table(np.broadcast_to(np.asarray(a, dtype=float), traj.shape[1:]).ravel(), k)
    table = table.reshape((k + 1,) + traj.shape[1:])
    return np.sum(table * traj[k::-1], axis=0)
