"""Simulation designs and an experiment driver for grouped quantile regression.

Model 1 is a linear model with a Toeplitz-correlated Gaussian design and five
coefficients per group; Model 2 is a heteroscedastic additive model in 100
uniform covariates of which three matter. Three estimators are compared: the
group Lasso (``grlasso``), the l1-penalized fit (``lasso``) and unpenalized
quantile regression (``qr``).
"""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from dataclasses import dataclass, asdict
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg, stats

from .additive import AdditiveModel, build_basis, expand_design, l2_error
from .design import GroupedDesign, GroupPartition
from .objective import PenaltySpec
from .solver import QuantileFit, SolverOptions, fit, fit_unpenalized, selected_groups
from .tuning import PivotConfig, select_lambda

log = logging.getLogger(__name__)

ESTIMATORS = ("grlasso", "lasso", "qr")
# fixed stream labels, so adding an estimator never moves another one's stream
_STREAM_ID = {"grlasso": 1, "lasso": 2, "qr": 3}


@dataclass(frozen=True)
class Model1Config:
    n: int = 200
    q: int = 101
    group_size: int = 5
    tau: float = 0.5
    case: int = 1
    rho: float = 0.25
    n_reps: int = 100
    seed: int = 0
    theta: float = 0.1
    c: float = 1.1
    n_sim: int = 2000
    p: Optional[int] = None

    def __post_init__(self):
        p = 1 + (self.q - 1) * self.group_size
        if self.p is None:
            object.__setattr__(self, "p", p)
        elif self.p != p:
            raise ValueError("p must equal 1 + (q - 1) * group_size")
        if self.case not in (1, 2):
            raise ValueError("case must be 1 or 2")
        if self.case == 2 and self.q < 7:
            raise ValueError("case 2 needs at least six non-intercept groups")
        if self.group_size < 1 or self.q < 2 or self.n < 1 or self.n_reps < 1:
            raise ValueError("invalid model size")
        if not -1.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (-1, 1)")

    @property
    def partition(self) -> GroupPartition:
        return GroupPartition.from_sizes([1] + [self.group_size] * (self.q - 1))


@dataclass(frozen=True)
class Model2Config:
    n: int = 400
    d: int = 100
    tau: float = 0.5
    n_knots: int = 4
    n_reps: int = 50
    seed: int = 0
    theta: float = 0.2
    c: float = 1.0
    n_mc: int = 10000
    n_sim: int = 2000

    def __post_init__(self):
        if self.d < 3:
            raise ValueError("Model 2 needs d >= 3")
        if self.n < 1 or self.n_reps < 1 or self.n_mc < 1:
            raise ValueError("invalid model size")

    @property
    def basis(self):
        return build_basis("cubic_bspline", self.n_knots, (-1.0, 1.0))


def _noise(rng, tau, size):
    # standard normal shifted so that its tau-quantile is exactly 0
    return rng.standard_normal(size) - stats.norm.ppf(tau)


def toeplitz_cholesky(dim: int, rho: float) -> np.ndarray:
    """Lower Cholesky factor of the matrix with entries rho^|j-k|."""
    return linalg.cholesky(linalg.toeplitz(rho ** np.arange(dim)), lower=True)


def beta_bar(config: Model1Config) -> np.ndarray:
    b = np.zeros(config.p)
    b[0] = 1.0
    gs = config.group_size
    if config.case == 1:
        b[1:1 + gs] = 1.0
    else:
        b[1 + gs * np.arange(5)] = 1.0
    return b


def gen_model1(config: Model1Config, rng: np.random.Generator, chol=None):
    """Draw (X, y, beta_bar) from Model 1."""
    L = toeplitz_cholesky(config.p - 1, config.rho) if chol is None else chol
    X = np.empty((config.n, config.p))
    X[:, 0] = 1.0
    X[:, 1:] = rng.standard_normal((config.n, config.p - 1)) @ L.T
    b = beta_bar(config)
    y = X @ b + _noise(rng, config.tau, config.n)
    return X, y, b


def g1(z):
    return np.asarray(z, dtype=float)


def g2(z):
    return np.cos(np.pi * np.asarray(z, dtype=float))


def g3(z):
    return np.e * (np.exp(np.asarray(z, dtype=float)) - np.e + np.exp(-1.0))


def model2_quantile_function(Z) -> np.ndarray:
    """Conditional tau-quantile of y given z: 0.1 + g1(z1) + g2(z2) + g3(z3)."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    return 0.1 + g1(Z[:, 0]) + g2(Z[:, 1]) + g3(Z[:, 2])


def model2_sigma(Z) -> np.ndarray:
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    return np.sqrt(0.7 + 0.1 * (Z[:, 0] ** 2 + Z[:, 1] ** 2 + Z[:, 2] ** 2))


def uniform_cube_sampler(d: int) -> Callable:
    return lambda rng, n: rng.uniform(-1.0, 1.0, size=(n, d))


def gen_model2(config: Model2Config, rng: np.random.Generator):
    """Draw (Z, y, g_true) from Model 2; g_true is the conditional tau-quantile."""
    Z = rng.uniform(-1.0, 1.0, size=(config.n, config.d))
    y = model2_quantile_function(Z) + 0.5 * model2_sigma(Z) * _noise(rng, config.tau, config.n)
    return Z, y, model2_quantile_function


def coef_zero_tol(beta) -> float:
    return 1e-6 * max(1.0, float(np.max(np.abs(beta))))


def nsv_coefficients(beta) -> int:
    """Number of coefficients above 1e-6 * max(1, ||beta||_inf), intercept included."""
    beta = np.asarray(beta, dtype=float)
    return int(np.sum(np.abs(beta) > coef_zero_tol(beta)))


def nsg_groups(beta, partition: GroupPartition) -> list:
    """Selected groups (1-based, group 1 always counted) under the same threshold."""
    return selected_groups(partition, beta, coef_zero_tol(beta) * 1.0)


def metrics(fit_obj, truth, partition: Optional[GroupPartition] = None, **l2_kwargs):
    """(NSG, NSV, squared error) for one replication.

    For a coefficient fit ``truth`` is beta_bar and NSV counts coefficients.
    For an AdditiveModel ``truth`` is the true function, NSV counts selected
    covariates and the error is the squared Monte-Carlo L2 distance
    (``l2_kwargs`` go to l2_error).
    """
    if isinstance(fit_obj, AdditiveModel):
        part = GroupPartition.from_sizes([1] + [fit_obj.basis.m] * fit_obj.d)
        groups = nsg_groups(fit_obj.beta, part)
        err = l2_error(fit_obj, truth, **l2_kwargs)
        return len(groups), len(groups) - 1, err * err
    beta = fit_obj.beta if isinstance(fit_obj, QuantileFit) else np.asarray(fit_obj, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if beta.shape != truth.shape:
        raise ValueError("fit and truth have different dimensions")
    if partition is None:
        partition = GroupPartition.singletons(beta.size)
    nsg = len(nsg_groups(beta, partition))
    return nsg, nsv_coefficients(beta), float(np.sum((beta - truth) ** 2))


def cone_diagnostic(fit_obj, beta_bar_vec, partition: GroupPartition, c0: float = 4.0):
    """Check alpha = beta_hat - beta_bar against the cone
    sum_{k not in S} sqrt(p_k)||alpha_k|| <= c0 sum_{k in S} sqrt(p_k)||alpha_k||,
    with S the true support plus the intercept group.

    Returns (in_cone, lhs, rhs).
    """
    if not c0 > 3:
        raise ValueError("c0 must exceed 3")
    beta = fit_obj.beta if isinstance(fit_obj, QuantileFit) else np.asarray(fit_obj, dtype=float)
    bb = np.asarray(beta_bar_vec, dtype=float)
    alpha = beta - bb
    lhs = rhs = 0.0
    active_count = 0
    for k, g in enumerate(partition.groups):
        w = np.sqrt(g.size) * np.linalg.norm(alpha[g])
        if k == 0 or np.any(bb[g] != 0):
            rhs += w
            active_count += k > 0
        else:
            lhs += w
    rhs *= c0
    if active_count == 0:
        return True, lhs, rhs
    return bool(lhs <= rhs), float(lhs), float(rhs)


# --- experiment driver ----------------------------------------------------

@dataclass
class ExperimentReport:
    model: int
    config: dict
    estimators: list
    summary: dict
    records: list
    failures: dict
    timing: dict

    def to_dict(self) -> dict:
        return asdict(self)

    def table_rows(self) -> list:
        rows = []
        for est in self.estimators:
            s = self.summary[est]
            rows.append({"estimator": est, **{k: s[k] for k in
                         ("nsg_mean", "nsg_sd", "nsv_mean", "nsv_sd", "rmse", "rmse_sd", "n_ok", "n_failed")}})
        return rows

    def write(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
        rows = self.table_rows()
        with open(os.path.join(out_dir, "table.csv"), "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            w.writeheader()
            w.writerows(rows)


def _stream(seed: int, *key) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))


def _int_seed(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, np.uint64)[0])


def _tuned_fit(design: GroupedDesign, y, tau, theta, c, n_sim, seed, opts, weights=None):
    cfg = PivotConfig(tau=tau, theta=theta, c=c, n_sim=n_sim, seed=seed)
    tr = select_lambda(design, cfg)
    return fit(design, y, tau, PenaltySpec(tr.lam, weights), opts), tr.lam


def _model1_rep(config: Model1Config, rep: int, estimators, opts, chol):
    rng = np.random.default_rng(_stream(config.seed, rep, 0))
    X, y, bb = gen_model1(config, rng, chol)
    part = config.partition
    out, secs = {}, {}
    for est in estimators:
        t0 = time.perf_counter()
        try:
            seed = _int_seed(_stream(config.seed, rep, _STREAM_ID[est]))
            if est == "grlasso":
                qf, lam = _tuned_fit(GroupedDesign(X, part), y, config.tau, config.theta,
                                     config.c, config.n_sim, seed, opts)
            elif est == "lasso":
                qf, lam = _tuned_fit(GroupedDesign(X, GroupPartition.singletons(config.p)), y,
                                     config.tau, config.theta, config.c, config.n_sim, seed, opts)
            else:
                qf, lam = fit_unpenalized(GroupedDesign(X, part), y, config.tau, opts), 0.0
            if not qf.converged:
                raise RuntimeError(f"solver did not converge (relative gap {qf.relative_gap:.2e})")
            nsg, nsv, sq = metrics(qf, bb, part)
            in_cone, lhs, rhs = cone_diagnostic(qf, bb, part, 4.0)
            out[est] = {"ok": True, "nsg": nsg, "nsv": nsv, "sq_error": sq, "lambda": lam,
                        "iterations": qf.iterations, "relative_gap": qf.relative_gap,
                        "in_cone": in_cone, "cone_lhs": lhs, "cone_rhs": rhs}
        except Exception as exc:  # recorded, never silently dropped
            log.warning("replication %d, %s failed: %s", rep, est, exc)
            out[est] = {"ok": False, "error": repr(exc)}
        secs[est] = time.perf_counter() - t0
    return out, secs


def _model2_rep(config: Model2Config, rep: int, estimators, opts):
    rng = np.random.default_rng(_stream(config.seed, rep, 0))
    Z, y, g_true = gen_model2(config, rng)
    basis = config.basis
    design = expand_design(Z, basis)
    m, d = basis.m, config.d
    mc_seed = _int_seed(_stream(config.seed, rep, 99))
    out, secs = {}, {}
    for est in estimators:
        t0 = time.perf_counter()
        try:
            seed = _int_seed(_stream(config.seed, rep, _STREAM_ID[est]))
            if est == "grlasso":
                w = np.r_[0.0, np.full(d, np.sqrt(m))]
                qf, lam = _tuned_fit(design, y, config.tau, config.theta, config.c,
                                     config.n_sim, seed, opts, w)
            elif est == "lasso":
                qf, lam = _tuned_fit(design.with_partition(GroupPartition.singletons(design.p)), y,
                                     config.tau, config.theta, config.c, config.n_sim, seed, opts)
            else:
                qf, lam = fit_unpenalized(design, y, config.tau, opts), 0.0
            if not qf.converged:
                raise RuntimeError(f"solver did not converge (relative gap {qf.relative_gap:.2e})")
            groups = nsg_groups(qf.beta, design.partition)
            model = AdditiveModel(basis=basis, beta=qf.beta, d=d,
                                  selected_covariates=[k - 2 for k in groups if k >= 2], fit=qf, lam=lam)
            nsg, nsv, sq = metrics(model, g_true, z_sampler=uniform_cube_sampler(d),
                                   n_mc=config.n_mc, seed=mc_seed)
            out[est] = {"ok": True, "nsg": nsg, "nsv": nsv, "sq_error": sq, "lambda": lam,
                        "iterations": qf.iterations, "relative_gap": qf.relative_gap}
        except Exception as exc:
            log.warning("replication %d, %s failed: %s", rep, est, exc)
            out[est] = {"ok": False, "error": repr(exc)}
        secs[est] = time.perf_counter() - t0
    return out, secs


def _aggregate(records, seconds, estimators):
    summary, failures, timing = {}, {}, {}
    for est in estimators:
        rs = [r[est] for r in records]
        ok = [r for r in rs if r["ok"]]
        failures[est] = [{"rep": i, "error": r["error"]} for i, r in enumerate(rs) if not r["ok"]]
        secs = np.array([s[est] for s in seconds])
        timing[est] = {"total_seconds": float(secs.sum()), "mean_seconds": float(secs.mean())}
        if ok:
            nsg = np.array([r["nsg"] for r in ok], dtype=float)
            nsv = np.array([r["nsv"] for r in ok], dtype=float)
            sq = np.array([r["sq_error"] for r in ok])
            summary[est] = {
                "nsg_mean": float(nsg.mean()), "nsg_sd": float(nsg.std(ddof=1)) if nsg.size > 1 else 0.0,
                "nsv_mean": float(nsv.mean()), "nsv_sd": float(nsv.std(ddof=1)) if nsv.size > 1 else 0.0,
                "rmse": float(np.sqrt(sq.mean())),
                "rmse_sd": float(np.sqrt(sq).std(ddof=1)) if sq.size > 1 else 0.0,
                "n_ok": len(ok), "n_failed": len(rs) - len(ok),
            }
            if "in_cone" in ok[0]:
                summary[est]["cone_frequency"] = float(np.mean([r["in_cone"] for r in ok]))
        else:
            summary[est] = {k: float("nan") for k in ("nsg_mean", "nsg_sd", "nsv_mean", "nsv_sd", "rmse", "rmse_sd")}
            summary[est].update(n_ok=0, n_failed=len(rs))
    return summary, failures, timing


def run_experiment(model_config, estimators: Sequence[str] = ESTIMATORS,
                   out_path: Optional[str] = None, opts: Optional[SolverOptions] = None,
                   progress: Optional[Callable[[int], None]] = None) -> ExperimentReport:
    """Run all replications serially in index order and aggregate.

    Apart from the ``timing`` section the report is a deterministic function
    of the configuration.

    Every replication draws its data from stream (seed, rep, 0) and each
    estimator tunes from stream (seed, rep, id), so results are reproducible
    and independent of which other estimators are run. When ``out_path`` is
    given, report.json and table.csv are written there.
    """
    estimators = list(estimators)
    bad = [e for e in estimators if e not in ESTIMATORS]
    if bad or not estimators:
        raise ValueError(f"unknown estimators {bad}; choose from {ESTIMATORS}")
    t0 = time.perf_counter()
    records, seconds = [], []
    if isinstance(model_config, Model1Config):
        model = 1
        chol = toeplitz_cholesky(model_config.p - 1, model_config.rho)
        step = lambda rep: _model1_rep(model_config, rep, estimators, opts, chol)
    elif isinstance(model_config, Model2Config):
        model = 2
        step = lambda rep: _model2_rep(model_config, rep, estimators, opts)
    else:
        raise TypeError("model_config must be a Model1Config or Model2Config")
    for rep in range(model_config.n_reps):
        rec, secs = step(rep)
        records.append(rec)
        seconds.append(secs)
        if progress is not None:
            progress(rep)
    summary, failures, timing = _aggregate(records, seconds, estimators)
    timing["wall_seconds"] = time.perf_counter() - t0
    report = ExperimentReport(model=model, config=asdict(model_config), estimators=estimators,
                              summary=summary, records=records, failures=failures, timing=timing)
    if out_path is not None:
        report.write(out_path)
    return report
