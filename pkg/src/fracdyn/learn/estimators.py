"""Estimator front end for the learning pipelines.

:class:`LCF` learns continuous-time systems and :class:`LDF` discrete-time
ones; both follow the scikit-learn estimator protocol (constructor
hyper-parameters, ``get_params``/``set_params``, ``fit`` returning ``self``,
fitted attributes with a trailing underscore).
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .._validation import check_datasets, check_positive_int, check_states
from ..basis import BasisSpec
from ..core import FractionalOrderVector
from ..exceptions import UsageError
from ..simulate import simulate
from ..systems import CONTINUOUS, DISCRETE
from .order import estimate_order
from .regression import LearnedModel, drift_samples, fit_control_field, fit_expansion, _stack_control

__all__ = ["FractionalDynamicsLearner", "LCF", "LDF"]


class FractionalDynamicsLearner(BaseEstimator):
    """Learn order, control field and drift field from experiment datasets.

    Parameters
    ----------
    L : int
        Basis functions per state-component expansion of the control field.
    drift_L : int or None
        Basis size for the drift expansion; ``None`` reuses ``L``.
    alpha : float, sequence or None
        Fixed fractional orders. ``None`` estimates them from the data;
        ``1.0`` gives the integer-order (memoryless) baseline.
    weighting : {"none", "relative"}
        Sample weighting for order estimation.
    reference : int
        Trial index used as the differencing reference.
    """

    time_kind = None

    def __init__(self, L=5, drift_L=None, alpha=None, weighting="relative", reference=0):
        self.L = L
        self.drift_L = drift_L
        self.alpha = alpha
        self.weighting = weighting
        self.reference = reference

    def _domain(self, datasets):
        dom = datasets[0].domain
        if dom is not None:
            return np.asarray(dom, dtype=float)
        x = np.concatenate([d.x0 for d in datasets])
        return np.stack([x.min(axis=0), x.max(axis=0)], axis=1)

    def fit(self, datasets, y=None, basis: BasisSpec | None = None):
        """Fit on one dataset per input channel (a single dataset when ``m = 1``)."""
        datasets = check_datasets(datasets)
        kind = datasets[0].time_kind
        if self.time_kind is not None and kind != self.time_kind:
            raise UsageError(f"{type(self).__name__} expects {self.time_kind} data, got {kind}")
        check_positive_int(self.L, "L")
        n, m = datasets[0].state_dim, datasets[0].input_dim
        by_channel = {d.active_channel: d for d in datasets}
        if len(by_channel) != len(datasets):
            raise UsageError("two datasets excite the same input channel")

        if basis is None:
            basis = BasisSpec(self.L, self._domain(datasets))
        drift_basis = basis if self.drift_L in (None, basis.L) else BasisSpec(
            check_positive_int(self.drift_L, "drift_L"), basis.domain)

        if self.alpha is None:
            first = by_channel.get(1, datasets[0])
            self.order_report_ = estimate_order(first, self.weighting)
            self.alpha_ = self.order_report_.alpha
        else:
            self.order_report_ = None
            self.alpha_ = FractionalOrderVector.coerce(self.alpha, n)

        self.control_fits_ = {
            ch: fit_control_field(d, basis, self.alpha_, self.reference) for ch, d in sorted(by_channel.items())
        }
        g_hat = {ch: fit.expansion for ch, fit in self.control_fits_.items()}
        control = _stack_control(g_hat, n, m)
        f_x = np.concatenate([d.x0 for d in datasets])
        f_s = np.concatenate([drift_samples(d, control, self.alpha_) for d in datasets])
        f_hat = fit_expansion(drift_basis, f_x, f_s)

        diagnostics = {
            "control_residual": {ch: f.residual for ch, f in self.control_fits_.items()},
            "condition": {ch: f.condition for ch, f in self.control_fits_.items()},
            "order": None if self.order_report_ is None else self.order_report_.to_dict(),
            "drift_basis_L": drift_basis.L,
        }
        self.model_ = LearnedModel(self.alpha_, basis, g_hat, f_x, f_s, f_hat, kind,
                                   datasets[0].h, m, diagnostics)
        self.n_features_in_ = n
        return self

    def predict(self, X, U):
        """One step from memory-free initial states ``X`` under inputs ``U``."""
        check_is_fitted(self, "model_")
        model = self.model_
        X = check_states(X, model.state_dim, "X")
        U = check_states(U, model.input_dim, "U")
        rhs = model.drift(X) + np.einsum("...ij,...j->...i", model.control(X), U)
        if model.time_kind == CONTINUOUS:
            return model.h ** model.alpha_hat.orders * rhs + X
        return rhs + model.alpha_hat.orders * X

    def simulate(self, x0, inputs=None, horizon=None, h=None):
        """Full-memory trajectory of the learned system."""
        check_is_fitted(self, "model_")
        return simulate(self.model_.as_system(), x0, inputs, horizon, h or self.model_.h or 0.1)

    def score(self, datasets, y=None):
        """Coefficient of determination of one-step predictions of ``x1``."""
        datasets = check_datasets(datasets)
        truth = np.concatenate([d.x1.reshape(-1, d.state_dim) for d in datasets])
        pred = np.concatenate([
            self.predict(np.broadcast_to(d.x0[:, None, :], d.x1.shape), d.u0).reshape(-1, d.state_dim)
            for d in datasets
        ])
        ss_res = np.sum((truth - pred) ** 2)
        ss_tot = np.sum((truth - truth.mean(axis=0)) ** 2)
        return 1.0 - ss_res / ss_tot


class LCF(FractionalDynamicsLearner):
    """Learner for continuous-time fractional-order systems."""

    time_kind = CONTINUOUS


class LDF(FractionalDynamicsLearner):
    """Learner for discrete-time fractional-order systems."""

    time_kind = DISCRETE
