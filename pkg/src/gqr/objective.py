"""Check loss, group penalty and the proximal maps used by the solver."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .design import GroupedDesign, GroupPartition


def _check_tau(tau):
    t = np.asarray(tau, dtype=float)
    if not np.all((t > 0.0) & (t < 1.0)):
        raise ValueError(f"quantile level must lie in (0, 1), got {tau}")


def _no_nan(*arrays):
    for a in arrays:
        if np.any(np.isnan(a)):
            raise ValueError("NaN input")


def check_loss(u, tau):
    """rho_tau(u) = (tau - 1{u <= 0}) u, elementwise. Ties (u = 0) cost nothing."""
    _check_tau(tau)
    u = np.asarray(u, dtype=float)
    _no_nan(u)
    return np.where(u > 0, tau * u, (tau - 1.0) * u)


@dataclass(frozen=True)
class CheckLoss:
    tau: float

    def __post_init__(self):
        _check_tau(self.tau)

    def __call__(self, u):
        return check_loss(u, self.tau)

    def prox(self, v, step):
        return prox_check(v, step, self.tau)


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty level lambda and optional per-group weights.

    The default weights are ``w_1 = 0`` and ``w_k = sqrt(p_k)``; the
    effective per-group level is ``lambda_k = lambda * w_k``. When
    ``group_weights`` is given it must have one entry per group and its first
    entry must be 0.
    """

    lam: float
    group_weights: Optional[Sequence[float]] = None

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError("penalty level must be a finite nonnegative number")
        if self.group_weights is not None:
            w = np.asarray(self.group_weights, dtype=float)
            if w.ndim != 1 or w.size < 1 or w[0] != 0 or np.any(w < 0):
                raise ValueError("group weights must be nonnegative with w_1 = 0")

    def weights(self, partition: GroupPartition) -> np.ndarray:
        if self.group_weights is None:
            w = np.sqrt(partition.sizes.astype(float))
            w[0] = 0.0
            return w
        w = np.asarray(self.group_weights, dtype=float)
        if w.size != partition.q:
            raise ValueError("need one weight per group")
        return w.copy()

    def levels(self, partition: GroupPartition) -> np.ndarray:
        """lambda_k = lambda * w_k for every group."""
        return self.lam * self.weights(partition)


def objective_terms(design: GroupedDesign, y, beta, tau, penalty: PenaltySpec):
    """The two terms (mean check loss, penalty / n) of the penalized objective."""
    _check_tau(tau)
    y = np.asarray(y, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if y.shape != (design.n,) or beta.shape != (design.p,):
        raise ValueError("dimension mismatch between design, y and beta")
    loss = float(np.mean(check_loss(y - design.X @ beta, tau)))
    levels = penalty.levels(design.partition)
    norms = design.group_norms(beta)
    pen = float(levels[1:] @ norms[1:]) / design.n
    return loss, pen


def objective_value(design: GroupedDesign, y, beta, tau, penalty: PenaltySpec) -> float:
    """(1/n) sum rho_tau(y_i - x_i'beta) + (lambda/n) sum_k w_k ||Sigma_k^{1/2} beta_k||_2."""
    loss, pen = objective_terms(design, y, beta, tau, penalty)
    return loss + pen


def prox_check(v, step, tau):
    """argmin_x  step * rho_tau(x) + (x - v)^2 / 2, elementwise."""
    _check_tau(tau)
    if not step > 0:
        raise ValueError("step must be positive")
    v = np.asarray(v, dtype=float)
    hi = step * tau
    lo = -step * (1.0 - tau)
    return np.where(v > hi, v - hi, np.where(v < lo, v - lo, 0.0))


def group_soft_threshold(v, threshold):
    """Proximal map of ``threshold * ||.||_2``: max(0, 1 - threshold/||v||) v."""
    v = np.asarray(v, dtype=float)
    _no_nan(v)
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    nrm = np.linalg.norm(v)
    if nrm <= threshold:
        return np.zeros_like(v)
    return (1.0 - threshold / nrm) * v


def knight_decomposition(u, v, tau):
    """Both terms of Knight's identity, in closed form.

    rho(u - v) - rho(u) = -(tau - 1{u <= 0}) v + int_0^v (1{u <= s} - 1{u <= 0}) ds.
    The integral equals (v - u)_+ when u > 0 <= v, (u - v)_+ when u <= 0 > v,
    and 0 otherwise.
    """
    _check_tau(tau)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    _no_nan(u, v)
    neg = u <= 0
    linear = -(tau - neg.astype(float)) * v
    integral = np.where(~neg & (v >= 0), np.maximum(v - u, 0.0),
                        np.where(neg & (v < 0), np.maximum(u - v, 0.0), 0.0))
    if linear.ndim == 0:
        return float(linear), float(integral)
    return linear, integral
