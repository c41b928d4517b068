"""Experiment design and dataset generation.

For every initial condition ``x0[i]`` and input trial ``j = 0..N`` the system
is run from a fresh history for two (continuous) or three (discrete) steps.
The memory-reset replicas restart the system from a recorded state with an
empty history:

* ``xt2``: one step from ``x1`` with ``u1``;
* ``xt3``: one step from ``x2`` with ``u2`` (discrete only).

Arrays are indexed ``[i, j, component]``; trial ``j = 0`` is the reference
used for input differencing.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .._validation import check_positive_int
from ..exceptions import DatasetError, ParameterError, SimulationDiverged, UsageError
from ..simulate import SimulationConfig, _atomic_write, _run, step_continuous, step_discrete
from ..systems import CONTINUOUS, DISCRETE, ControlAffineSystem

__all__ = [
    "ExperimentPlan",
    "ExperimentDataset",
    "generate_dataset_continuous",
    "generate_dataset_discrete",
    "generate_dataset",
]


@dataclass(frozen=True)
class ExperimentPlan:
    """Initial conditions and random inputs for one input channel.

    ``active_channel`` counts from 1. Inputs on the active channel are drawn
    uniformly from ``input_range``; every other channel is held at zero.
    """

    M: int = 50
    N: int = 10
    input_range: tuple[float, float] = (-1.0, 1.0)
    seed: int = 0
    active_channel: int = 1

    def __post_init__(self):
        check_positive_int(self.M, "M")
        check_positive_int(self.N, "N")
        check_positive_int(self.active_channel, "active_channel")
        lo, hi = map(float, self.input_range)
        if not hi >= lo:
            raise ParameterError(f"input range {self.input_range} is empty")
        object.__setattr__(self, "input_range", (lo, hi))

    def draw(self, system: ControlAffineSystem, steps: int):
        """Initial conditions ``(M, n)`` and inputs ``(steps, M, N+1, m)``."""
        if self.active_channel > system.input_dim:
            raise UsageError(
                f"active channel {self.active_channel} exceeds input dimension {system.input_dim}"
            )
        rng = np.random.default_rng(self.seed)
        lo, hi = system.domain[:, 0], system.domain[:, 1]
        x0 = lo + (hi - lo) * rng.random((self.M, system.state_dim))
        a, b = self.input_range
        u = np.zeros((steps, self.M, self.N + 1, system.input_dim))
        u[..., self.active_channel - 1] = a + (b - a) * rng.random((steps, self.M, self.N + 1))
        return x0, u


_STATE_FIELDS = ("x1", "x2", "x3", "xt2", "xt3")
_INPUT_FIELDS = ("u0", "u1", "u2")


@dataclass
class ExperimentDataset:
    """Recorded states and inputs of one experiment plan."""

    x0: np.ndarray
    u0: np.ndarray
    u1: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    xt2: np.ndarray
    time_kind: str = CONTINUOUS
    h: float | None = None
    u2: np.ndarray | None = None
    x3: np.ndarray | None = None
    xt3: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in _STATE_FIELDS + _INPUT_FIELDS + ("x0",) and v is not None:
                setattr(self, f.name, np.asarray(v, dtype=float))
        if self.time_kind == DISCRETE and any(getattr(self, k) is None for k in ("u2", "x3", "xt3")):
            raise UsageError("discrete datasets need u2, x3 and xt3")
        M, N1, n = self.x1.shape
        if self.x0.shape != (M, n):
            raise UsageError(f"x0 has shape {self.x0.shape}, expected {(M, n)}")

    @property
    def M(self) -> int:
        return self.x1.shape[0]

    @property
    def N(self) -> int:
        return self.x1.shape[1] - 1

    @property
    def state_dim(self) -> int:
        return self.x1.shape[2]

    @property
    def input_dim(self) -> int:
        return self.u0.shape[2]

    @property
    def active_channel(self) -> int:
        """1-based channel carrying nonzero inputs (from metadata or the data)."""
        if "active_channel" in self.meta:
            return int(self.meta["active_channel"])
        live = np.flatnonzero(np.any(self.u0 != 0, axis=(0, 1)))
        if live.size != 1:
            raise UsageError("dataset does not excite exactly one input channel")
        return int(live[0]) + 1

    @property
    def domain(self):
        return self.meta.get("domain")

    def copy(self, **changes) -> "ExperimentDataset":
        out = replace(self, **changes)
        for name in _STATE_FIELDS + _INPUT_FIELDS + ("x0",):
            v = getattr(out, name)
            if v is not None and name not in changes:
                setattr(out, name, v.copy())
        out.meta = dict(self.meta)
        return out

    # -- persistence -----------------------------------------------------
    def save(self, directory) -> Path:
        """Write one CSV per array plus ``meta.json`` into ``directory``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        _atomic_write(directory / "x0.csv", _matrix_csv(self.x0, "x"))
        names = ["u0", "u1", "x1", "x2", "xt2"]
        if self.time_kind == DISCRETE:
            names += ["u2", "x3", "xt3"]
        for name in names:
            arr = getattr(self, name)
            _atomic_write(directory / f"{name}.csv", _trial_csv(arr, name[0]))
        meta = {"time_kind": self.time_kind, "h": self.h, "M": self.M, "N": self.N}
        meta.update({k: v for k, v in self.meta.items() if k not in meta})
        _atomic_write(directory / "meta.json", json.dumps(meta, indent=1, sort_keys=True))
        return directory

    @classmethod
    def load(cls, directory) -> "ExperimentDataset":
        directory = Path(directory)
        meta = json.loads((directory / "meta.json").read_text())
        M, N = int(meta["M"]), int(meta["N"])
        arrays = {"x0": _read_matrix(directory / "x0.csv")}
        names = ["u0", "u1", "x1", "x2", "xt2"]
        if meta["time_kind"] == DISCRETE:
            names += ["u2", "x3", "xt3"]
        for name in names:
            arrays[name] = _read_trials(directory / f"{name}.csv", M, N + 1)
        extra = {k: v for k, v in meta.items() if k not in ("time_kind", "h", "M", "N")}
        return cls(time_kind=meta["time_kind"], h=meta["h"], meta=extra, **arrays)


def _matrix_csv(arr, prefix):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i"] + [f"{prefix}{c + 1}" for c in range(arr.shape[1])])
    for i, row in enumerate(arr):
        w.writerow([i] + [format(v, ".17g") for v in row])
    return buf.getvalue()


def _trial_csv(arr, prefix):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", "j"] + [f"{prefix}{c + 1}" for c in range(arr.shape[2])])
    for i in range(arr.shape[0]):
        for j in range(arr.shape[1]):
            w.writerow([i, j] + [format(v, ".17g") for v in arr[i, j]])
    return buf.getvalue()


def _read_matrix(path):
    rows = list(csv.reader(io.StringIO(Path(path).read_text())))[1:]
    return np.array([[float(v) for v in r[1:]] for r in rows])


def _read_trials(path, M, N1):
    rows = list(csv.reader(io.StringIO(Path(path).read_text())))[1:]
    data = np.array([[float(v) for v in r[2:]] for r in rows])
    return data.reshape(M, N1, -1)


def _locate_failure(system, x0, u, stepper):
    """Rerun trials one at a time to find the first diverging ``(i, j)``."""
    M, N1 = u.shape[1], u.shape[2]
    for i in range(M):
        for j in range(N1):
            try:
                _run(system, x0[i], u[:, i, j], stepper)
            except SimulationDiverged as err:
                return (i, j), err
    return None, None


def _generate(system, plan, steps, stepper, replica_step):
    x0, u = plan.draw(system, steps)
    start = np.broadcast_to(x0[:, None, :], (plan.M, plan.N + 1, system.state_dim))
    try:
        states = _run(system, start, u, stepper)
        replicas = [replica_step(states[k], u[k]) for k in range(1, steps)]
    except SimulationDiverged as err:
        trial, cause = _locate_failure(system, x0, u, stepper)
        raise DatasetError(trial or (-1, -1), cause or err) from err
    return x0, u, states, replicas


def _meta(system, plan, h):
    return {
        "seed": plan.seed,
        "active_channel": plan.active_channel,
        "domain": system.domain.tolist(),
        "input_range": list(plan.input_range),
        "system": system.name,
    }


def generate_dataset_continuous(system: ControlAffineSystem, plan: ExperimentPlan,
                                config: SimulationConfig | None = None) -> ExperimentDataset:
    """Two-step experiments plus the ``xt2`` memory-reset replica."""
    if system.time_kind != CONTINUOUS:
        raise UsageError("generate_dataset_continuous needs a continuous-time system")
    h = (config or SimulationConfig()).h

    def stepper(hist, uk, coeffs):
        return step_continuous(system, hist, uk, h, coeffs)

    def replica(x_start, uk):
        return step_continuous(system, x_start[None], uk, h)

    x0, u, states, (xt2,) = _generate(system, plan, 2, stepper, replica)
    return ExperimentDataset(x0=x0, u0=u[0], u1=u[1], x1=states[1], x2=states[2], xt2=xt2,
                             time_kind=CONTINUOUS, h=h, meta=_meta(system, plan, h))


def generate_dataset_discrete(system: ControlAffineSystem, plan: ExperimentPlan) -> ExperimentDataset:
    """Three-step experiments plus the ``xt2`` and ``xt3`` memory-reset replicas."""
    if system.time_kind != DISCRETE:
        raise UsageError("generate_dataset_discrete needs a discrete-time system")

    def stepper(hist, uk, coeffs):
        return step_discrete(system, hist, uk, coeffs)

    def replica(x_start, uk):
        return step_discrete(system, x_start[None], uk)

    x0, u, states, (xt2, xt3) = _generate(system, plan, 3, stepper, replica)
    return ExperimentDataset(x0=x0, u0=u[0], u1=u[1], u2=u[2], x1=states[1], x2=states[2],
                             x3=states[3], xt2=xt2, xt3=xt3, time_kind=DISCRETE, h=None,
                             meta=_meta(system, plan, None))


def generate_dataset(system: ControlAffineSystem, plan: ExperimentPlan, h: float = 0.1) -> ExperimentDataset:
    if system.is_continuous:
        return generate_dataset_continuous(system, plan, SimulationConfig(h=h))
    return generate_dataset_discrete(system, plan)
