"""Simulation-based choice of the penalty level.

The pivot is

    Lambda = max_k || sum_i (tau - B_i) S_k^{-1/2} x_{iG_k} / sqrt(p_k) ||_2,

with B_i i.i.d. Bernoulli(tau) drawn independently of the design. Its law given
the design is free of unknown parameters, so its (1 - theta)-quantile can be
simulated and the penalty set to ``lambda = c * quantile``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from .design import GroupedDesign
from .objective import _check_tau


@dataclass(frozen=True)
class PivotConfig:
    tau: float
    theta: float = 0.1
    c: float = 1.1
    n_sim: int = 2000
    seed: Optional[int] = 0

    def __post_init__(self):
        _check_tau(self.tau)
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if not self.c > 0:
            raise ValueError("c must be positive")
        if int(self.n_sim) != self.n_sim or self.n_sim < 1:
            raise ValueError("n_sim must be a positive integer")


@dataclass
class TuningResult:
    draws: np.ndarray
    quantile_value: float
    lam: float
    config: PivotConfig

    def summary(self) -> dict:
        return {
            "lambda": self.lam,
            "quantile_value": self.quantile_value,
            "n_draws": int(self.draws.size),
            "draw_mean": float(self.draws.mean()),
            "draw_max": float(self.draws.max()),
            "config": asdict(self.config),
        }


def _score_matrix(design: GroupedDesign):
    """Whitened design scaled by 1/sqrt(p_k), with columns laid out group by group."""
    part = design.partition
    order = np.concatenate(part.groups)
    Z = design.whitened()[:, order]
    sizes = part.sizes
    Z = Z / np.repeat(np.sqrt(sizes.astype(float)), sizes)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    return Z, starts


def pivot_values(design: GroupedDesign, xi) -> np.ndarray:
    """Pivot evaluated at given multiplier rows ``xi`` (shape (m, n) or (n,))."""
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim == 1
    xi = np.atleast_2d(xi)
    Z, starts = _score_matrix(design)
    s = xi @ Z
    norms = np.sqrt(np.add.reduceat(s * s, starts, axis=1))
    out = norms.max(axis=1)
    return float(out[0]) if single else out


def pivot_draw(design: GroupedDesign, tau, rng: np.random.Generator) -> float:
    """One draw of the pivot, using ``rng`` for the n Bernoulli(tau) variables."""
    _check_tau(tau)
    B = rng.random(design.n) < tau
    return pivot_values(design, tau - B.astype(float))


def simulate_pivot(design: GroupedDesign, tau, n_sim: int, seed) -> np.ndarray:
    """n_sim pivot draws; draw j uses its own spawned substream j of ``seed``.

    The first m draws therefore do not depend on n_sim.
    """
    _check_tau(tau)
    streams = np.random.SeedSequence(seed).spawn(int(n_sim))
    B = np.empty((len(streams), design.n))
    for j, ss in enumerate(streams):
        B[j] = np.random.Generator(np.random.PCG64(ss)).random(design.n)
    xi = tau - (B < tau).astype(float)
    out = np.empty(len(streams))
    chunk = 1000
    for lo in range(0, len(streams), chunk):
        out[lo:lo + chunk] = pivot_values(design, xi[lo:lo + chunk])
    return out


def higher_quantile(draws, level) -> float:
    """Smallest draw whose empirical CDF is >= level."""
    draws = np.asarray(draws, dtype=float)
    N = draws.size
    if N == 0:
        raise ValueError("no draws")
    k = min(max(int(math.ceil(level * N - 1e-9)), 1), N) - 1
    return float(np.partition(draws, k)[k])


def select_lambda(design: GroupedDesign, config: PivotConfig) -> TuningResult:
    """lambda = c times the simulated (1 - theta)-quantile of the pivot."""
    if config.n_sim * config.theta < 1:
        warnings.warn("n_sim * theta < 1: the tail quantile is poorly estimated", RuntimeWarning)
    draws = simulate_pivot(design, config.tau, config.n_sim, config.seed)
    qv = higher_quantile(draws, 1.0 - config.theta)
    return TuningResult(draws=draws, quantile_value=qv, lam=config.c * qv, config=config)


def theta_schedule(n, q, p_min, t) -> float:
    """theta = max(e, q^{1/p_min})^{-t^2}.

    ``n`` is accepted for call-site symmetry; the formula does not use it.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if q < 2 or p_min < 1:
        raise ValueError("need q >= 2 and p_min >= 1")
    log_base = max(1.0, math.log(q) / p_min)
    return math.exp(-t * t * log_base)
