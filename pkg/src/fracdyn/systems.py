"""Control-affine systems and the four benchmark definitions.

Field evaluators are vectorised: ``drift`` maps states of shape ``(..., n)``
to ``(..., n)`` and ``control`` maps them to ``(..., n, m)``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .core import FractionalOrderVector
from .exceptions import ParameterError, UsageError

__all__ = [
    "ControlAffineSystem",
    "BenchmarkSpec",
    "make_van_der_pol",
    "make_lotka_volterra",
    "make_logistic_map",
    "make_ultra_capacitor",
    "make_polynomial_system",
    "BENCHMARKS",
    "get_benchmark",
]

CONTINUOUS = "continuous"
DISCRETE = "discrete"


@dataclass(frozen=True, eq=False)
class ControlAffineSystem:
    """``f(x) + g(x) u`` dynamics with fractional orders over a box domain."""

    state_dim: int
    input_dim: int
    drift: Callable[[np.ndarray], np.ndarray]
    control: Callable[[np.ndarray], np.ndarray]
    domain: np.ndarray
    alpha: FractionalOrderVector
    time_kind: str = CONTINUOUS
    name: str = "system"

    def __post_init__(self):
        dom = np.array(self.domain, dtype=float).reshape(self.state_dim, 2)
        if np.any(dom[:, 1] <= dom[:, 0]):
            raise ParameterError(f"degenerate domain box {dom.tolist()}")
        dom.setflags(write=False)
        object.__setattr__(self, "domain", dom)
        object.__setattr__(self, "alpha", FractionalOrderVector.coerce(self.alpha, self.state_dim))
        if self.time_kind not in (CONTINUOUS, DISCRETE):
            raise ParameterError(f"time_kind must be 'continuous' or 'discrete', got {self.time_kind!r}")

    @property
    def is_continuous(self) -> bool:
        return self.time_kind == CONTINUOUS

    def f(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.asarray(self.drift(x), dtype=float).reshape(x.shape)

    def g(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.asarray(self.control(x), dtype=float)
        return out.reshape(x.shape + (self.input_dim,))

    def rhs(self, x, u) -> np.ndarray:
        """``f(x) + g(x) u`` for matching leading shapes of ``x`` and ``u``."""
        u = np.asarray(u, dtype=float)
        return self.f(x) + np.einsum("...ij,...j->...i", self.g(x), u)

    def with_alpha(self, alpha) -> "ControlAffineSystem":
        return dataclasses.replace(self, alpha=FractionalOrderVector.coerce(alpha, self.state_dim))

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.domain[:, 0]) & (x <= self.domain[:, 1]), axis=-1)


@dataclass(frozen=True, eq=False)
class BenchmarkSpec:
    name: str
    system: ControlAffineSystem
    default_params: Mapping[str, float] = field(default_factory=dict)
    reference_alpha: FractionalOrderVector | None = None


def make_van_der_pol(epsilon: float = 0.5, alpha=0.9) -> BenchmarkSpec:
    """Fractional Van der Pol oscillator, continuous time, one input.

    The control field follows the per-field listing
    ``g = (1.2 + sin x1 sin x2, exp(sin(x2 - pi/2) - 1))``.
    """
    if epsilon == 0:
        raise ParameterError("epsilon must be nonzero")
    eps = float(epsilon)

    def drift(x):
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([eps * (x1 - x1**3 / 3.0 - x2), x1 / eps], axis=-1)

    def control(x):
        x1, x2 = x[..., 0], x[..., 1]
        g1 = 1.2 + np.sin(x1) * np.sin(x2)
        g2 = np.exp(np.sin(x2 - 0.5 * np.pi) - 1.0)
        return np.stack([g1, g2], axis=-1)[..., None]

    system = ControlAffineSystem(2, 1, drift, control, [[-2, 2], [-4, 4]], alpha, CONTINUOUS, "vanderpol")
    return BenchmarkSpec("vanderpol", system, {"epsilon": eps}, FractionalOrderVector([0.9, 0.9]))


def make_lotka_volterra(a: float = 0.5, beta: float = 0.5, delta: float = 1.3, gamma: float = 0.6,
                        alpha=0.98) -> BenchmarkSpec:
    """Fractional Lotka-Volterra predator-prey model, continuous time, one input."""
    a, beta, delta, gamma = map(float, (a, beta, delta, gamma))

    def drift(x):
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([a * x1 - beta * x1 * x2, delta * x1 * x2 - gamma * x2], axis=-1)

    def control(x):
        x1, x2 = x[..., 0], x[..., 1]
        g1 = 4.0 + np.sin(x1) * np.exp(-1.0 + np.cos(x2))
        g2 = 1.0 + np.exp(np.sin(x1) * np.cos(x2))
        return np.stack([g1, g2], axis=-1)[..., None]

    system = ControlAffineSystem(2, 1, drift, control, [[-2, 2], [-4, 4]], alpha, CONTINUOUS, "lotka")
    params = {"a": a, "beta": beta, "delta": delta, "gamma": gamma}
    return BenchmarkSpec("lotka", system, params, FractionalOrderVector([0.98, 0.98]))


def make_logistic_map(mu: float = 1.0, alpha=0.6) -> BenchmarkSpec:
    """Fractional logistic map, discrete time, scalar state and input."""
    mu = float(mu)

    def drift(x):
        return mu * x * (1.0 - x)

    def control(x):
        return (1.0 - np.cos(x) * np.exp(3.0 * (np.sin(x - 0.7 * np.pi) - 1.0)))[..., None]

    system = ControlAffineSystem(1, 1, drift, control, [[0, 8]], alpha, DISCRETE, "logistic")
    return BenchmarkSpec("logistic", system, {"mu": mu}, FractionalOrderVector([0.6]))


def make_ultra_capacitor(alpha=0.2) -> BenchmarkSpec:
    """Fractional ultra-capacitor model, discrete time, one input."""

    def drift(x):
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([x2, 0.035311 * x1 + 0.001815 * x2], axis=-1)

    def control(x):
        x1, x2 = x[..., 0], x[..., 1]
        g1 = np.exp(np.sin(x1) * np.sin(x2))
        g2 = 1.0 + (x1 + x2) ** 2
        return np.stack([g1, g2], axis=-1)[..., None]

    system = ControlAffineSystem(2, 1, drift, control, [[-1, 1], [-0.3, 0.3]], alpha, DISCRETE, "ultracap")
    return BenchmarkSpec("ultracap", system, {}, FractionalOrderVector([0.2, 0.2]))


def _monomial_evaluator(terms, n):
    """Vectorised polynomial from ``[(coef, [e1..en]), ...]``."""
    coefs = np.array([float(c) for c, _ in terms]) if terms else np.zeros(0)
    exps = np.array([list(e) for _, e in terms], dtype=int).reshape(len(terms), n)

    def evaluate(x):
        if not len(terms):
            return np.zeros(x.shape[:-1])
        mono = np.prod(x[..., None, :] ** exps, axis=-1)
        return mono @ coefs

    return evaluate


def make_polynomial_system(drift_terms, control_terms, domain, alpha, time_kind=CONTINUOUS,
                           name="polynomial") -> ControlAffineSystem:
    """System whose fields are polynomials given as monomial coefficient lists.

    Parameters
    ----------
    drift_terms : list over components i of ``[(coef, exponents), ...]``
    control_terms : list over components i, then channels l, of term lists
    """
    n = len(drift_terms)
    if n == 0 or len(control_terms) != n:
        raise UsageError("drift and control need one term list per state component")
    m = len(control_terms[0])
    if m == 0 or any(len(row) != m for row in control_terms):
        raise UsageError("every control row needs the same number of input channels")
    for terms in list(drift_terms) + [t for row in control_terms for t in row]:
        for _, e in terms:
            if len(e) != n or any(int(p) != p or p < 0 for p in e):
                raise UsageError(f"exponent vector {e!r} must hold {n} nonnegative integers")
    f_parts = [_monomial_evaluator(t, n) for t in drift_terms]
    g_parts = [[_monomial_evaluator(t, n) for t in row] for row in control_terms]

    def drift(x):
        return np.stack([p(x) for p in f_parts], axis=-1)

    def control(x):
        return np.stack([np.stack([p(x) for p in row], axis=-1) for row in g_parts], axis=-2)

    return ControlAffineSystem(n, m, drift, control, domain, alpha, time_kind, name)


BENCHMARKS = {
    "vanderpol": make_van_der_pol,
    "lotka": make_lotka_volterra,
    "logistic": make_logistic_map,
    "ultracap": make_ultra_capacitor,
}


def get_benchmark(name: str, **params) -> BenchmarkSpec:
    try:
        factory = BENCHMARKS[name]
    except KeyError:
        raise UsageError(
            f"unknown benchmark {name!r}; valid names: {', '.join(sorted(BENCHMARKS))}"
        ) from None
    return factory(**{k: v for k, v in params.items() if v is not None})
