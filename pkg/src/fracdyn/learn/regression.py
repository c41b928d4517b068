"""Control- and drift-field reconstruction over an orthonormal basis."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import solve_triangular

from ..basis import BasisExpansion, BasisSpec, build_design_row, eval_basis
from ..core import FractionalOrderVector
from ..exceptions import IllPosedRegression, UsageError
from ..simulate import _atomic_write
from ..systems import CONTINUOUS, ControlAffineSystem

__all__ = [
    "ControlFieldFit",
    "LearnedModel",
    "regression_problem",
    "solve_least_squares",
    "solve_normal_equations",
    "fit_control_field",
    "fit_drift_field",
    "integer_order_baseline",
]

RANK_TOL = 1e-12


@dataclass
class ControlFieldFit:
    coef: np.ndarray          # B_l, length n L
    expansion: BasisExpansion
    residual: float
    condition: float
    channel: int


def _inverse_gain(dataset, alpha: FractionalOrderVector):
    if dataset.time_kind == CONTINUOUS:
        return float(dataset.h) ** (-alpha.orders)
    return np.ones(dataset.state_dim)


def regression_problem(dataset, basis: BasisSpec, alpha_hat, reference: int = 0):
    """Stacked ``(Phi, Y)`` for the dataset's active channel.

    Rows are ordered trial-major, ``(1,1), ..., (M,1), ..., (M,N)``, and every
    trial other than ``reference`` is differenced against it.
    """
    alpha_hat = FractionalOrderVector.coerce(alpha_hat, dataset.state_dim)
    if basis.n != dataset.state_dim:
        raise UsageError(f"basis has {basis.n} variables, dataset state has {dataset.state_dim}")
    ch = dataset.active_channel - 1
    others = [j for j in range(dataset.N + 1) if j != reference]
    gain = _inverse_gain(dataset, alpha_hat)
    y = gain * (dataset.x1[:, others, :] - dataset.x1[:, [reference], :])
    du = dataset.u0[:, others, ch] - dataset.u0[:, [reference], ch]
    x0 = np.broadcast_to(dataset.x0[:, None, :], y.shape)
    rows = build_design_row(basis, x0, du)                  # (M, N, n, nL)
    Phi = np.swapaxes(rows, 0, 1).reshape(-1, basis.n * basis.L)
    Y = np.swapaxes(y, 0, 1).reshape(-1)
    return Phi, Y


def solve_least_squares(Phi, Y):
    """Householder-QR least squares; returns ``(B, residual_norm, condition)``."""
    Phi = np.asarray(Phi, dtype=float)
    if Phi.shape[0] < Phi.shape[1]:
        raise IllPosedRegression(f"{Phi.shape[0]} equations for {Phi.shape[1]} unknowns")
    Q, R = np.linalg.qr(Phi, mode="reduced")
    sv = np.linalg.svd(R, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    if sv[0] == 0 or sv[-1] <= RANK_TOL * sv[0]:
        raise IllPosedRegression("regression matrix is rank deficient", cond)
    B = solve_triangular(R, Q.T @ Y)
    return B, float(np.linalg.norm(Y - Phi @ B)), cond


def solve_normal_equations(Phi, Y):
    """Closed form ``(Phi^T Phi)^{-1} Phi^T Y``, kept as an independent check."""
    return np.linalg.solve(Phi.T @ Phi, Phi.T @ Y)


def fit_control_field(dataset, basis: BasisSpec, alpha_hat, reference: int = 0) -> ControlFieldFit:
    """Least-squares coefficients of the active channel's control column."""
    Phi, Y = regression_problem(dataset, basis, alpha_hat, reference)
    if not np.any(Phi):
        raise IllPosedRegression("input differences are all zero", float("inf"))
    B, resid, cond = solve_least_squares(Phi, Y)
    return ControlFieldFit(B, BasisExpansion(basis, B.reshape(basis.n, basis.L)), resid, cond,
                           dataset.active_channel)


def _stack_control(expansions, n, m):
    """Evaluator ``x -> g(x)`` of shape ``(..., n, m)`` from per-channel expansions."""

    def control(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (n, m))
        for ch, exp in expansions.items():
            out[..., :, ch - 1] = exp(x)
        return out

    return control


def drift_samples(dataset, control, alpha_hat):
    """Drift values at every ``x0[i]``, averaged over trials ``j = 1..N``."""
    alpha_hat = FractionalOrderVector.coerce(alpha_hat, dataset.state_dim)
    x0 = dataset.x0
    g0 = control(x0)                                         # (M, n, m)
    gu = np.einsum("inm,ijm->ijn", g0, dataset.u0[:, 1:, :])
    if dataset.time_kind == CONTINUOUS:
        gain = float(dataset.h) ** (-alpha_hat.orders)
        per_trial = gain * (dataset.x1[:, 1:, :] - x0[:, None, :]) - gu
    else:
        per_trial = dataset.x1[:, 1:, :] - gu - alpha_hat.orders * x0[:, None, :]
    return per_trial.mean(axis=1)


def fit_drift_field(dataset, g_hat, alpha_hat, basis: BasisSpec | None = None):
    """Drift samples at the initial conditions and an optional basis fit.

    ``g_hat`` is an evaluator ``x -> (..., n, m)``, a mapping of 1-based
    channel to :class:`BasisExpansion`, or a single expansion (one input).
    Returns ``(x0, f_samples, expansion_or_None)``.
    """
    control = _as_control(g_hat, dataset.state_dim, dataset.input_dim)
    f = drift_samples(dataset, control, alpha_hat)
    expansion = None
    if basis is not None:
        expansion = fit_expansion(basis, dataset.x0, f)
    return dataset.x0.copy(), f, expansion


def fit_expansion(basis: BasisSpec, x, values) -> BasisExpansion:
    """Least-squares basis expansion of sampled vector values."""
    P = eval_basis(basis, x)
    if P.shape[0] < P.shape[1]:
        raise IllPosedRegression(f"{P.shape[0]} samples for {P.shape[1]} basis functions")
    coef, *_ = np.linalg.lstsq(P, values, rcond=None)
    return BasisExpansion(basis, coef.T)


def _as_control(g_hat, n, m):
    if callable(g_hat) and not isinstance(g_hat, BasisExpansion):
        return g_hat
    if isinstance(g_hat, BasisExpansion):
        g_hat = {1: g_hat}
    return _stack_control(dict(g_hat), n, m)


@dataclass
class LearnedModel:
    """Estimated order, control-field expansions and drift estimate."""

    alpha_hat: FractionalOrderVector
    basis: BasisSpec
    g_hat: dict                      # 1-based channel -> BasisExpansion
    f_x: np.ndarray
    f_samples: np.ndarray
    f_hat: BasisExpansion | None
    time_kind: str
    h: float | None
    input_dim: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def state_dim(self) -> int:
        return len(self.alpha_hat)

    def control(self, x) -> np.ndarray:
        return _stack_control(self.g_hat, self.state_dim, self.input_dim)(x)

    def drift(self, x) -> np.ndarray:
        if self.f_hat is None:
            raise UsageError("model has drift samples only; refit with a drift basis")
        return self.f_hat(x)

    def as_system(self, name: str = "learned") -> ControlAffineSystem:
        return ControlAffineSystem(self.state_dim, self.input_dim, self.drift, self.control,
                                   self.basis.domain, self.alpha_hat, self.time_kind, name)

    def to_dict(self) -> dict:
        return {
            "alpha_hat": self.alpha_hat.tolist(),
            "time_kind": self.time_kind,
            "h": self.h,
            "input_dim": self.input_dim,
            "basis": self.basis.to_dict(),
            "B": {str(ch): exp.coef.reshape(-1).tolist() for ch, exp in sorted(self.g_hat.items())},
            "f_samples": {"x": self.f_x.tolist(), "f": self.f_samples.tolist()},
            "f_hat": None if self.f_hat is None else self.f_hat.to_dict(),
            "diagnostics": _jsonable(self.diagnostics),
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=1, sort_keys=True)
        if path is not None:
            _atomic_write(path, text)
        return text

    @classmethod
    def from_dict(cls, d) -> "LearnedModel":
        basis = BasisSpec.from_dict(d["basis"])
        g_hat = {int(ch): BasisExpansion(basis, np.array(B)) for ch, B in d["B"].items()}
        f_hat = None if d.get("f_hat") is None else BasisExpansion.from_dict(d["f_hat"])
        return cls(FractionalOrderVector(d["alpha_hat"]), basis, g_hat,
                   np.array(d["f_samples"]["x"]), np.array(d["f_samples"]["f"]), f_hat,
                   d["time_kind"], d["h"], int(d["input_dim"]), d.get("diagnostics", {}))

    @classmethod
    def from_json(cls, source) -> "LearnedModel":
        text = Path(source).read_text() if not str(source).lstrip().startswith("{") else source
        return cls.from_dict(json.loads(text))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, FractionalOrderVector):
        return obj.tolist()
    return obj


def integer_order_baseline(datasets, basis: BasisSpec, drift_basis: BasisSpec | None = None) -> LearnedModel:
    """The same reconstruction with every order forced to one (no memory)."""
    from .estimators import FractionalDynamicsLearner

    learner = FractionalDynamicsLearner(L=basis.L, drift_L=None if drift_basis is None else drift_basis.L,
                                        alpha=1.0)
    return learner.fit(datasets, basis=basis).model_
