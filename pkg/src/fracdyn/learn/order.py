"""Fractional-order estimation from memory-reset discrepancies.

Continuous time: ``x2 - xt2 = (1 - a) (x0 - x1)`` component-wise, so each
order is one minus a regression slope through the origin.

Discrete time: ``x2 - xt2 = (a - a^2)/2 x0`` gives ``c = a - a^2`` and two
candidate roots; the cubic identity
``x3 - xt3 = (a - a^2)/2 x1 + (a^3 - 3a^2 + 2a)/6 x0`` picks between them.

Samples are pooled over the whole ``(i, j)`` grid. With ``weighting="relative"``
every sample is scaled by the magnitude of the states it was differenced
from, which matches measurement noise proportional to the state; noiseless
data give the same estimate under either weighting.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import FractionalOrderVector
from ..exceptions import InconsistentData, InsufficientExcitation, UsageError
from ..systems import CONTINUOUS, DISCRETE

__all__ = ["OrderEstimate", "estimate_order_continuous", "estimate_order_discrete", "estimate_order"]

EXCITATION_FLOOR = 1e-10
DISCRIMINANT_TOL = 1e-9


@dataclass
class OrderEstimate:
    alpha: FractionalOrderVector
    residuals: np.ndarray
    n_samples: np.ndarray
    roots: np.ndarray | None = None
    root_residuals: np.ndarray | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "alpha": self.alpha.tolist(),
            "residuals": np.asarray(self.residuals).tolist(),
            "n_samples": np.asarray(self.n_samples).tolist(),
        }
        if self.roots is not None:
            d["roots"] = self.roots.tolist()
            d["root_residuals"] = self.root_residuals.tolist()
        return d


def _diameter(dataset):
    dom = dataset.domain
    if dom is not None:
        dom = np.asarray(dom, dtype=float)
        return float(np.linalg.norm(dom[:, 1] - dom[:, 0]))
    return float(np.linalg.norm(np.ptp(dataset.x0, axis=0))) or 1.0


def _weights(weighting, *scales):
    if weighting == "none":
        return np.ones_like(scales[0])
    if weighting != "relative":
        raise UsageError(f"unknown weighting {weighting!r}")
    s = sum(np.abs(v) for v in scales)
    return 1.0 / np.maximum(s * s, np.finfo(float).tiny)


def estimate_order_continuous(dataset, weighting: str = "relative") -> OrderEstimate:
    """Least-squares order estimate from ``x2 - xt2`` against ``x0 - x1``."""
    if dataset.time_kind != CONTINUOUS:
        raise UsageError("estimate_order_continuous needs a continuous-time dataset")
    x0 = np.broadcast_to(dataset.x0[:, None, :], dataset.x1.shape)
    d = (dataset.x2 - dataset.xt2).reshape(-1, dataset.state_dim)
    e = (x0 - dataset.x1).reshape(-1, dataset.state_dim)
    w = _weights(weighting, dataset.x2, dataset.xt2).reshape(d.shape)
    floor = EXCITATION_FLOOR * _diameter(dataset)

    alpha, resid, used = [], [], []
    for c in range(dataset.state_dim):
        keep = np.abs(e[:, c]) > floor
        if not keep.any():
            raise InsufficientExcitation(f"no sample excites state component {c + 1}")
        dc, ec, wc = d[keep, c], e[keep, c], w[keep, c]
        slope = np.sum(wc * dc * ec) / np.sum(wc * ec * ec)
        alpha.append(1.0 - slope)
        resid.append(float(np.sqrt(np.mean((dc - slope * ec) ** 2))))
        used.append(int(keep.sum()))
    a = np.clip(alpha, np.finfo(float).eps, 1.0)
    return OrderEstimate(FractionalOrderVector(a), np.array(resid), np.array(used),
                         details={"raw_alpha": list(map(float, alpha))})


def cubic_coefficient(alpha):
    """``(a^3 - 3a^2 + 2a) / 6``, i.e. ``-psi(a, 3)``."""
    a = np.asarray(alpha, dtype=float)
    return (a**3 - 3.0 * a**2 + 2.0 * a) / 6.0


def estimate_order_discrete(dataset, weighting: str = "relative") -> OrderEstimate:
    """Quadratic order estimate with root selection by the cubic identity."""
    if dataset.time_kind != DISCRETE:
        raise UsageError("estimate_order_discrete needs a discrete-time dataset")
    n = dataset.state_dim
    shape = dataset.x1.shape
    x0 = np.broadcast_to(dataset.x0[:, None, :], shape).reshape(-1, n)
    x1 = dataset.x1.reshape(-1, n)
    d2 = (dataset.x2 - dataset.xt2).reshape(-1, n)
    d3 = (dataset.x3 - dataset.xt3).reshape(-1, n)
    w2 = _weights(weighting, dataset.x2, dataset.xt2).reshape(-1, n)
    w3 = _weights(weighting, dataset.x3, dataset.xt3).reshape(-1, n)
    floor = EXCITATION_FLOOR * _diameter(dataset)

    alpha, resid, used, roots, root_res, quads = [], [], [], [], [], []
    for c in range(n):
        keep = np.abs(x0[:, c]) > floor
        if not keep.any():
            raise InsufficientExcitation(f"no sample excites state component {c + 1}")
        z, y, wc = x0[keep, c], 2.0 * d2[keep, c], w2[keep, c]
        quad = np.sum(wc * y * z) / np.sum(wc * z * z)
        quads.append(float(quad))
        disc = 1.0 - 4.0 * quad
        if disc < -DISCRIMINANT_TOL:
            raise InconsistentData(
                f"component {c + 1}: a - a^2 = {quad:.6g} exceeds 1/4, no real order"
            )
        sq = np.sqrt(max(disc, 0.0))
        cand = np.array([(1.0 + sq) / 2.0, (1.0 - sq) / 2.0])
        admissible = (cand > 0.0) & (cand <= 1.0 + DISCRIMINANT_TOL)
        cand_c = np.clip(cand, np.finfo(float).eps, 1.0)
        # both roots share a - a^2, so only the cubic term separates them
        r3 = d3[keep, c] - 0.5 * quad * x1[keep, c]
        w3c = w3[keep, c]
        res = np.array([np.sum(w3c * (r3 - cubic_coefficient(a) * z) ** 2) for a in cand_c])
        score = np.where(admissible, res, np.inf)
        if not np.isfinite(score).any():
            # noise pushed both roots out of (0, 1]; fall back to the nearer boundary
            score = np.abs(cand - np.clip(cand, 0.0, 1.0))
        best = int(np.argmin(score))
        alpha.append(cand_c[best])
        resid.append(float(np.sqrt(np.mean((y - quad * z) ** 2))))
        used.append(int(keep.sum()))
        roots.append(cand)
        root_res.append(res)
    return OrderEstimate(FractionalOrderVector(alpha), np.array(resid), np.array(used),
                         np.array(roots), np.array(root_res), details={"a_minus_a2": quads})


def estimate_order(dataset, weighting: str = "relative") -> OrderEstimate:
    if dataset.time_kind == CONTINUOUS:
        return estimate_order_continuous(dataset, weighting)
    if dataset.time_kind == DISCRETE:
        return estimate_order_discrete(dataset, weighting)
    raise UsageError(f"unknown time kind {dataset.time_kind!r}")
