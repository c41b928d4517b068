"""Experiment orchestration: measurement noise, field error surfaces and
fractional-versus-integer response comparisons."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ParameterError, SimulationDiverged, UsageError
from .learn.dataset import ExperimentDataset
from .simulate import Trajectory, _atomic_write, simulate
from .systems import ControlAffineSystem

__all__ = [
    "NoiseSpec",
    "ErrorReport",
    "ComparisonReport",
    "add_noise",
    "field_error_surface",
    "compare_responses",
]


@dataclass(frozen=True)
class NoiseSpec:
    """Relative measurement noise ``x + level * |x| * v`` with ``v ~ N(0, 1)``."""

    level: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if not self.level >= 0:
            raise ParameterError(f"noise level must be nonnegative, got {self.level}")


_NOISY_FIELDS = ("x0", "x1", "x2", "x3", "xt2", "xt3")


def add_noise(data, spec: NoiseSpec):
    """Noisy copy of a :class:`Trajectory` or :class:`ExperimentDataset`.

    Every recorded state entry is perturbed independently; inputs are left
    untouched. Dataset arrays are perturbed in the fixed order
    ``x0, x1, x2, x3, xt2, xt3`` from one seeded stream.
    """
    rng = np.random.default_rng(spec.seed)

    def perturb(x):
        v = rng.standard_normal(x.shape)
        if spec.level == 0:
            return x.copy()
        return x + spec.level * np.abs(x) * v

    if isinstance(data, Trajectory):
        return Trajectory(perturb(data.states), data.inputs.copy(), data.time_kind, data.h, dict(data.meta))
    if isinstance(data, ExperimentDataset):
        changes = {k: perturb(getattr(data, k)) for k in _NOISY_FIELDS if getattr(data, k) is not None}
        out = data.copy(**changes)
        out.meta["noise"] = {"level": spec.level, "seed": spec.seed}
        return out
    raise UsageError(f"cannot add noise to {type(data).__name__}")


def _grid(domain, density):
    axes = [np.linspace(lo, hi, density) for lo, hi in np.asarray(domain)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, len(axes))


@dataclass
class ErrorReport:
    """Pointwise absolute errors of every drift and control component."""

    grid: np.ndarray
    components: list
    truth: np.ndarray
    estimate: np.ndarray

    @property
    def abs_error(self) -> np.ndarray:
        return np.abs(self.truth - self.estimate)

    @property
    def max_abs_error(self) -> float:
        return float(self.abs_error.max())

    @property
    def mean_abs_error(self) -> float:
        return float(self.abs_error.mean())

    def component_summary(self) -> dict:
        err = self.abs_error
        return {
            c: {"max_abs_error": float(err[:, k].max()), "mean_abs_error": float(err[:, k].mean())}
            for k, c in enumerate(self.components)
        }

    def field_max(self, prefix: str) -> float:
        """Largest error over components whose name starts with ``prefix`` (``"f"`` or ``"g"``)."""
        cols = [k for k, c in enumerate(self.components) if c.startswith(prefix)]
        return float(self.abs_error[:, cols].max())

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.grid.shape[1]
        w.writerow([f"x{i + 1}" for i in range(n)] + ["component", "truth", "estimate", "abs_error"])
        err = self.abs_error
        for p, x in enumerate(self.grid):
            xs = [format(v, ".17g") for v in x]
            for k, c in enumerate(self.components):
                w.writerow(xs + [c, format(self.truth[p, k], ".17g"), format(self.estimate[p, k], ".17g"),
                                 format(err[p, k], ".17g")])
        text = buf.getvalue()
        if path is not None:
            _atomic_write(path, text)
        return text

    def summary(self) -> dict:
        return {
            "points": int(self.grid.shape[0]),
            "max_abs_error": self.max_abs_error,
            "mean_abs_error": self.mean_abs_error,
            "drift_max_abs_error": self.field_max("f"),
            "control_max_abs_error": self.field_max("g"),
            "components": self.component_summary(),
        }


def field_error_surface(truth: ControlAffineSystem, model, grid_density: int = 41,
                        domain=None) -> ErrorReport:
    """Errors of ``model`` (drift and control) on a uniform grid over the box.

    ``model`` is anything exposing ``drift(x)`` and ``control(x)``, such as a
    :class:`~fracdyn.learn.LearnedModel` or another system.
    """
    if grid_density < 2:
        raise ParameterError("grid density must be at least 2")
    grid = _grid(truth.domain if domain is None else domain, grid_density)
    n, m = truth.state_dim, truth.input_dim
    est_f = model.drift(grid) if not isinstance(model, ControlAffineSystem) else model.f(grid)
    est_g = model.control(grid) if not isinstance(model, ControlAffineSystem) else model.g(grid)
    names = [f"f{i + 1}" for i in range(n)] + [f"g{i + 1}_{l + 1}" for i in range(n) for l in range(m)]
    t = np.concatenate([truth.f(grid), truth.g(grid).reshape(len(grid), n * m)], axis=1)
    e = np.concatenate([np.asarray(est_f).reshape(len(grid), n),
                        np.asarray(est_g).reshape(len(grid), n * m)], axis=1)
    return ErrorReport(grid, names, t, e)


@dataclass
class ComparisonReport:
    truth: Trajectory
    fractional: Trajectory
    integer: Trajectory
    dev_fractional: np.ndarray
    dev_integer: np.ndarray
    diverged: dict = field(default_factory=dict)

    @property
    def max_dev_fractional(self) -> float:
        return float(np.max(self.dev_fractional))

    @property
    def max_dev_integer(self) -> float:
        return float(np.max(self.dev_integer))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.truth.states.shape[1]
        head = ["k", "t"]
        for tag in ("truth", "frac", "int"):
            head += [f"x{i + 1}_{tag}" for i in range(n)]
        w.writerow(head + ["dev_frac", "dev_int"])
        t = self.truth.times
        for k in range(self.truth.states.shape[0]):
            row = [k, format(t[k], ".17g")]
            for traj in (self.truth, self.fractional, self.integer):
                row += [format(v, ".17g") for v in traj.states[k]]
            w.writerow(row + [format(self.dev_fractional[k], ".17g"), format(self.dev_integer[k], ".17g")])
        text = buf.getvalue()
        if path is not None:
            _atomic_write(path, text)
        return text

    def summary(self) -> dict:
        return {
            "steps": int(self.truth.states.shape[0] - 1),
            "max_dev_frac": self.max_dev_fractional,
            "max_dev_int": self.max_dev_integer,
            "mean_dev_frac": float(np.mean(self.dev_fractional)),
            "mean_dev_int": float(np.mean(self.dev_integer)),
            "diverged": self.diverged,
        }


def _as_system(model, name):
    return model if isinstance(model, ControlAffineSystem) else model.as_system(name)


def compare_responses(truth: ControlAffineSystem, model_fractional, model_integer, x0, inputs=None,
                      horizon: int = 200, h: float = 0.1) -> ComparisonReport:
    """Simulate truth and both learned models from the same ``x0`` and inputs.

    Per-step deviations are infinity norms against the truth. A run that
    diverges is recorded in ``diverged`` and all three trajectories are cut
    at the last step every run reached.
    """
    systems = {
        "truth": truth,
        "fractional": _as_system(model_fractional, "fractional"),
        "integer": _as_system(model_integer, "integer"),
    }
    kinds = {s.time_kind for s in systems.values()}
    dims = {(s.state_dim, s.input_dim) for s in systems.values()}
    if len(kinds) != 1 or len(dims) != 1:
        raise UsageError("truth and models must share dimensions and time kind")
    if inputs is None:
        inputs = np.zeros((horizon, truth.input_dim))
    runs, diverged = {}, {}
    for tag, system in systems.items():
        try:
            runs[tag] = simulate(system, x0, inputs, horizon, h)
        except SimulationDiverged as err:
            diverged[tag] = err.step
            runs[tag] = err.partial
    last = min(r.states.shape[0] for r in runs.values())
    cut = {tag: Trajectory(r.states[:last], np.asarray(inputs)[: last - 1].reshape(last - 1, -1),
                           truth.time_kind, h if truth.is_continuous else None)
           for tag, r in runs.items()}
    ref = cut["truth"].states
    dev_f = np.max(np.abs(cut["fractional"].states - ref), axis=1)
    dev_i = np.max(np.abs(cut["integer"].states - ref), axis=1)
    return ComparisonReport(cut["truth"], cut["fractional"], cut["integer"], dev_f, dev_i, diverged)


def write_json(obj, path):
    _atomic_write(path, json.dumps(obj, indent=1, sort_keys=True))
