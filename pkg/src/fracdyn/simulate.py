"""Forward simulation with full memory.

Continuous-time systems are advanced with the fractional Euler-type scheme

    x(k+1) = h^a (f(x(k)) + g(x(k)) u(k)) - sum_{j=1}^{k+1} psi(a, j) x(k+1-j)
             + (1 + sum_{j=1}^{k+1} psi(a, j)) x(0)

and discrete-time systems by the Grünwald-Letnikov recurrence

    x(k+1) = f(x(k)) + g(x(k)) u(k) - sum_{j=1}^{k+1} psi(a, j) x(k+1-j).

Inputs are held constant over each step. States may carry extra leading
axes (after the time axis) to run a batch of independent trajectories.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import MemoryCoefficients, memory_sum
from .exceptions import ParameterError, SimulationDiverged, UsageError
from .systems import CONTINUOUS, DISCRETE, ControlAffineSystem

__all__ = [
    "SimulationConfig",
    "Trajectory",
    "step_continuous",
    "step_discrete",
    "simulate_continuous",
    "simulate_discrete",
    "simulate",
    "reinitialize",
]


@dataclass(frozen=True)
class SimulationConfig:
    h: float = 0.1
    horizon: int = 1
    record_history: bool = True

    def __post_init__(self):
        if not self.h > 0:
            raise ParameterError(f"step size must be positive, got {self.h}")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ParameterError(f"horizon must be a positive integer, got {self.horizon}")


@dataclass
class Trajectory:
    """States ``x(0..K)`` and held inputs ``u(0..K-1)``."""

    states: np.ndarray
    inputs: np.ndarray
    time_kind: str = CONTINUOUS
    h: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.inputs = np.asarray(self.inputs, dtype=float)
        if self.states.ndim == 1:
            self.states = self.states[:, None]
        if self.inputs.ndim == 1:
            self.inputs = self.inputs[:, None]
        if self.states.shape[0] != self.inputs.shape[0] + 1:
            raise UsageError(
                f"{self.states.shape[0]} states need {self.states.shape[0] - 1} inputs, "
                f"got {self.inputs.shape[0]}"
            )

    @property
    def horizon(self) -> int:
        return self.inputs.shape[0]

    @property
    def times(self) -> np.ndarray:
        k = np.arange(self.states.shape[0], dtype=float)
        return k * self.h if self.time_kind == CONTINUOUS and self.h else k

    # -- persistence -----------------------------------------------------
    def _columns(self):
        n, m = self.states.shape[-1], self.inputs.shape[-1]
        return ["k", "t"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)]

    def to_csv(self, path=None) -> str:
        """Write ``k, t, x1..xn, u1..um``; the final row has empty inputs."""
        if self.states.ndim != 2:
            raise UsageError("only single trajectories can be exported")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self._columns())
        t = self.times
        m = self.inputs.shape[1]
        for k, x in enumerate(self.states):
            u = self.inputs[k] if k < self.horizon else [None] * m
            w.writerow([k, _fmt(t[k])] + [_fmt(v) for v in x] + ["" if v is None else _fmt(v) for v in u])
        text = buf.getvalue()
        if path is not None:
            _atomic_write(path, text)
        return text

    @classmethod
    def from_csv(cls, source, time_kind=CONTINUOUS, h=None) -> "Trajectory":
        text = Path(source).read_text() if _is_path(source) else source
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        xs = [i for i, c in enumerate(header) if c.startswith("x")]
        us = [i for i, c in enumerate(header) if c.startswith("u")]
        states = np.array([[float(r[i]) for i in xs] for r in body])
        inputs = np.array([[float(r[i]) for i in us] for r in body[:-1]]).reshape(len(body) - 1, len(us))
        if h is None and time_kind == CONTINUOUS and len(body) > 1:
            h = float(body[1][1])
        return cls(states, inputs, time_kind, h)

    def to_dict(self) -> dict:
        return {
            "columns": self._columns(),
            "time_kind": self.time_kind,
            "h": self.h,
            "k": list(range(self.states.shape[0])),
            "t": self.times.tolist(),
            "states": self.states.tolist(),
            "inputs": self.inputs.tolist(),
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            _atomic_write(path, text)
        return text

    @classmethod
    def from_json(cls, source) -> "Trajectory":
        text = Path(source).read_text() if _is_path(source) else source
        d = json.loads(text)
        m = len([c for c in d["columns"] if c.startswith("u")])
        inputs = np.array(d["inputs"], dtype=float).reshape(len(d["inputs"]), m)
        return cls(np.array(d["states"]), inputs, d["time_kind"], d["h"])


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _is_path(source) -> bool:
    return isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and not source.startswith("{"))


def _atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _as_history(history):
    if isinstance(history, Trajectory):
        return history.states
    hist = np.asarray(history, dtype=float)
    if hist.ndim == 1:
        hist = hist[None, :]
    if hist.shape[0] == 0:
        raise UsageError("history must contain at least x(0)")
    return hist


def _check_finite(x, step):
    if not np.all(np.isfinite(x)):
        raise SimulationDiverged(step)
    return x


def step_continuous(system: ControlAffineSystem, history, u_k, h: float,
                    coeffs: MemoryCoefficients | None = None) -> np.ndarray:
    """Next state of a continuous-time system from its full history.

    ``history`` holds ``x(0), ..., x(k)`` oldest first (a :class:`Trajectory`
    or an array of shape ``(k+1, ..., n)``).
    """
    if system.time_kind != CONTINUOUS:
        raise UsageError("step_continuous needs a continuous-time system")
    hist = _as_history(history)
    k = hist.shape[0] - 1
    if coeffs is None or coeffs.k_max < k:
        coeffs = MemoryCoefficients(system.alpha, k)
    gain = system.alpha.step_gain(h)
    with np.errstate(all="ignore"):
        rhs = system.rhs(hist[k], u_k)
        mem = memory_sum(hist[::-1], coeffs)
        comp = 1.0 + coeffs.partial_sums[k + 1]
        x_next = gain * rhs - mem + comp * hist[0]
    return _check_finite(x_next, k + 1)


def step_discrete(system: ControlAffineSystem, history, u_k,
                  coeffs: MemoryCoefficients | None = None) -> np.ndarray:
    """Next state of a discrete-time system from its full history (oldest first)."""
    if system.time_kind != DISCRETE:
        raise UsageError("step_discrete needs a discrete-time system")
    hist = _as_history(history)
    k = hist.shape[0] - 1
    if coeffs is None or coeffs.k_max < k:
        coeffs = MemoryCoefficients(system.alpha, k)
    with np.errstate(all="ignore"):
        x_next = system.rhs(hist[k], u_k) - memory_sum(hist[::-1], coeffs)
    return _check_finite(x_next, k + 1)


def _run(system, x0, inputs, stepper):
    x0 = np.asarray(x0, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    horizon = inputs.shape[0]
    states = np.empty((horizon + 1,) + x0.shape)
    states[0] = x0
    coeffs = MemoryCoefficients(system.alpha, max(horizon - 1, 0))
    for k in range(horizon):
        try:
            states[k + 1] = stepper(states[: k + 1], inputs[k], coeffs)
        except SimulationDiverged as err:
            err.partial = Trajectory(states[: k + 1], inputs[:k], system.time_kind)
            raise
    return states


def _coerce_inputs(system, inputs, horizon, batch_shape=()):
    if inputs is None:
        if horizon is None:
            raise UsageError("either inputs or a horizon is required")
        return np.zeros((horizon,) + batch_shape + (system.input_dim,))
    u = np.asarray(inputs, dtype=float)
    if u.ndim == 1 and system.input_dim == 1 and not batch_shape:
        u = u[:, None]
    if horizon is not None and u.shape[0] != horizon:
        raise UsageError(f"expected {horizon} inputs, got {u.shape[0]}")
    return u


def simulate_continuous(system: ControlAffineSystem, x0, inputs=None,
                        config: SimulationConfig | None = None) -> Trajectory:
    """Iterate :func:`step_continuous` over ``config.horizon`` steps."""
    if system.time_kind != CONTINUOUS:
        raise UsageError("simulate_continuous needs a continuous-time system")
    config = config or SimulationConfig(horizon=len(inputs))
    x0 = np.asarray(x0, dtype=float)
    u = _coerce_inputs(system, inputs, config.horizon, x0.shape[:-1])
    states = _run(system, x0, u, lambda hist, uk, c: step_continuous(system, hist, uk, config.h, c))
    return Trajectory(states, u, CONTINUOUS, config.h)


def simulate_discrete(system: ControlAffineSystem, x0, inputs=None, horizon: int | None = None) -> Trajectory:
    """Iterate :func:`step_discrete` over ``horizon`` steps."""
    if system.time_kind != DISCRETE:
        raise UsageError("simulate_discrete needs a discrete-time system")
    if horizon is None and inputs is not None:
        horizon = len(inputs)
    if horizon is None or horizon < 1:
        raise ParameterError(f"horizon must be a positive integer, got {horizon}")
    x0 = np.asarray(x0, dtype=float)
    u = _coerce_inputs(system, inputs, horizon, x0.shape[:-1])
    states = _run(system, x0, u, lambda hist, uk, c: step_discrete(system, hist, uk, c))
    return Trajectory(states, u, DISCRETE, None)


def simulate(system: ControlAffineSystem, x0, inputs=None, horizon: int | None = None,
             h: float = 0.1) -> Trajectory:
    """Dispatch on ``system.time_kind``."""
    if horizon is None:
        horizon = len(inputs)
    if system.is_continuous:
        return simulate_continuous(system, x0, inputs, SimulationConfig(h=h, horizon=horizon))
    return simulate_discrete(system, x0, inputs, horizon)


def reinitialize(trajectory, at_step: int) -> np.ndarray:
    """State ``x(at_step)`` as a fresh initial condition with no memory."""
    states = trajectory.states if isinstance(trajectory, Trajectory) else np.asarray(trajectory, dtype=float)
    if not 0 <= at_step < states.shape[0]:
        raise IndexError(f"step {at_step} outside trajectory of length {states.shape[0]}")
    return np.array(states[at_step], copy=True)
