"""Orthonormal basis functions on a box and regression-row assembly.

The default family is the tensor product of normalised Legendre polynomials
rescaled to the box, orthonormal under the (unnormalised) Lebesgue measure::

    phi_a(x) = prod_i sqrt((2 a_i + 1) / (b_i - l_i)) P_{a_i}(t_i),
    t_i = (2 x_i - l_i - b_i) / (b_i - l_i).

Multi-indices are enumerated by total degree; within one degree they are in
descending lexicographic order, so ``x1`` precedes ``x2``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import legendre

from .exceptions import ParameterError, UsageError

__all__ = [
    "BasisSpec",
    "BasisExpansion",
    "graded_indices",
    "eval_basis",
    "build_design_row",
    "orthonormality_check",
]

LEGENDRE = "legendre-tensor"
USER = "user-supplied"


def graded_indices(n: int, count: int) -> list[tuple[int, ...]]:
    """First ``count`` multi-indices in ``n`` variables, graded by total degree."""
    out: list[tuple[int, ...]] = []
    degree = 0
    while len(out) < count:
        level = [a for a in itertools.product(range(degree + 1), repeat=n) if sum(a) == degree]
        out.extend(sorted(level, reverse=True))
        degree += 1
    return out[:count]


@dataclass(frozen=True, eq=False)
class BasisSpec:
    """``L`` ordered basis functions on a box domain."""

    L: int
    domain: np.ndarray
    family: str = LEGENDRE
    functions: Sequence[Callable[[np.ndarray], np.ndarray]] | None = field(default=None, repr=False)

    def __post_init__(self):
        dom = np.array(self.domain, dtype=float).reshape(-1, 2)
        if np.any(dom[:, 1] <= dom[:, 0]):
            raise ParameterError(f"degenerate basis domain {dom.tolist()}")
        dom.setflags(write=False)
        object.__setattr__(self, "domain", dom)
        if self.family == USER:
            if not self.functions:
                raise ParameterError("a user-supplied family needs its functions")
            object.__setattr__(self, "L", len(self.functions))
        elif self.family != LEGENDRE:
            raise ParameterError(f"unknown basis family {self.family!r}")
        if int(self.L) != self.L or self.L < 1:
            raise ParameterError(f"L must be a positive integer, got {self.L}")
        object.__setattr__(self, "L", int(self.L))

    @property
    def n(self) -> int:
        return self.domain.shape[0]

    @property
    def volume(self) -> float:
        return float(np.prod(self.domain[:, 1] - self.domain[:, 0]))

    @property
    def indices(self) -> list[tuple[int, ...]]:
        return graded_indices(self.n, self.L) if self.family == LEGENDRE else []

    def in_domain(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.domain[:, 0]) & (x <= self.domain[:, 1]), axis=-1)

    def to_dict(self) -> dict:
        return {"family": self.family, "L": self.L, "domain": self.domain.tolist()}

    @classmethod
    def from_dict(cls, d) -> "BasisSpec":
        if d.get("family", LEGENDRE) != LEGENDRE:
            raise ParameterError("only the legendre-tensor family can be restored from a file")
        return cls(int(d["L"]), d["domain"], LEGENDRE)


def eval_basis(spec: BasisSpec, x, return_flag: bool = False):
    """Values of the ``L`` basis functions at ``x`` (shape ``(..., n)`` -> ``(..., L)``).

    Points outside the box are evaluated by polynomial continuation; with
    ``return_flag`` a boolean mask marking such points is returned as well.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.n:
        raise UsageError(f"state has {x.shape[-1]} components, basis domain has {spec.n}")
    if spec.family == USER:
        values = np.stack([np.broadcast_to(np.asarray(fn(x), dtype=float), x.shape[:-1])
                           for fn in spec.functions], axis=-1)
    else:
        lo, hi = spec.domain[:, 0], spec.domain[:, 1]
        t = (2.0 * x - lo - hi) / (hi - lo)
        idx = np.array(spec.indices)
        max_deg = int(idx.max())
        values = np.ones(x.shape[:-1] + (spec.L,))
        for i in range(spec.n):
            deg = np.arange(max_deg + 1)
            scale = np.sqrt((2.0 * deg + 1.0) / (hi[i] - lo[i]))
            ti = t[..., i]
            vander = legendre.legvander(ti, max_deg).reshape(ti.shape + (max_deg + 1,)) * scale
            values = values * vander[..., idx[:, i]]
    if return_flag:
        return values, ~spec.in_domain(x)
    return values


def build_design_row(spec: BasisSpec, x0, du) -> np.ndarray:
    """Block-diagonal regression block ``blockdiag(phi(x0), ..., phi(x0)) * du``.

    Returns shape ``(..., n, n L)``; row ``r`` holds ``phi(x0) du`` in
    columns ``r L .. (r + 1) L - 1``.
    """
    phi = eval_basis(spec, x0)
    du = np.asarray(du, dtype=float)
    n, L = spec.n, spec.L
    scaled = phi * du[..., None]
    block = np.zeros(phi.shape[:-1] + (n, n * L))
    for r in range(n):
        block[..., r, r * L:(r + 1) * L] = scaled
    return block


def orthonormality_check(spec: BasisSpec, samples: int = 1_000_000, seed: int = 0):
    """Monte-Carlo Gram matrix under uniform sampling of the box.

    Returns ``(gram, max_abs_deviation_from_identity)``.
    """
    if samples < 10 * spec.L**2:
        raise ParameterError(f"need at least {10 * spec.L**2} samples for L={spec.L}")
    rng = np.random.default_rng(seed)
    lo, hi = spec.domain[:, 0], spec.domain[:, 1]
    gram = np.zeros((spec.L, spec.L))
    chunk = 200_000
    done = 0
    while done < samples:
        size = min(chunk, samples - done)
        x = lo + (hi - lo) * rng.random((size, spec.n))
        phi = eval_basis(spec, x)
        gram += phi.T @ phi
        done += size
    gram *= spec.volume / samples
    return gram, float(np.max(np.abs(gram - np.eye(spec.L))))


@dataclass(frozen=True, eq=False)
class BasisExpansion:
    """Vector field ``x -> coef @ phi(x)`` with ``coef`` of shape ``(n_out, L)``."""

    spec: BasisSpec
    coef: np.ndarray

    def __post_init__(self):
        c = np.array(self.coef, dtype=float).reshape(-1, self.spec.L)
        c.setflags(write=False)
        object.__setattr__(self, "coef", c)

    def __call__(self, x) -> np.ndarray:
        return eval_basis(self.spec, x) @ self.coef.T

    def to_dict(self) -> dict:
        return {"basis": self.spec.to_dict(), "coef": self.coef.tolist()}

    @classmethod
    def from_dict(cls, d) -> "BasisExpansion":
        return cls(BasisSpec.from_dict(d["basis"]), np.array(d["coef"]))
