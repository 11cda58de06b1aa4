"""Sparse additive quantile regression through centered basis expansions.

Each covariate z_k gets m basis functions psi_{k1..km} with zero integral over
its domain. Stacking them gives a grouped design with one group of size m per
covariate, which is then fitted by the group-Lasso solver with weight sqrt(m).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import BSpline

from .design import GroupedDesign, GroupPartition
from .objective import PenaltySpec
from .solver import QuantileFit, SolverOptions, fit
from .tuning import PivotConfig, TuningResult, select_lambda

FAMILIES = ("cubic_bspline", "fourier")
CLAMP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class BasisSpec:
    """Basis family, size and per-covariate domains.

    ``domains`` has shape (1, 2) when one interval is shared by all covariates,
    otherwise (d, 2). For splines ``n_knots`` equidistant interior knots give
    ``m = n_knots + 3`` centered functions (one of the n_knots + 4 centered
    B-splines is dropped because they sum to zero).
    """

    family: str
    m: int
    domains: np.ndarray
    n_knots: Optional[int] = None
    degree: int = 3

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown basis family {self.family!r}")
        dom = np.atleast_2d(np.asarray(self.domains, dtype=float))
        if dom.ndim != 2 or dom.shape[1] != 2:
            raise ValueError("domains must be (lo, hi) pairs")
        if not np.all(np.isfinite(dom)) or np.any(dom[:, 0] >= dom[:, 1]):
            raise ValueError("degenerate domain: need lo < hi")
        dom.setflags(write=False)
        object.__setattr__(self, "domains", dom)
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.family == "cubic_bspline" and self.m != self.n_knots + self.degree:
            raise ValueError("spline basis needs m = n_knots + degree")

    def __eq__(self, other):
        if not isinstance(other, BasisSpec):
            return NotImplemented
        return (self.family, self.m, self.n_knots, self.degree) == (
            other.family, other.m, other.n_knots, other.degree) and np.array_equal(self.domains, other.domains)

    def __hash__(self):
        return hash((self.family, self.m, self.n_knots, self.degree, self.domains.tobytes()))

    def domain(self, k: int):
        row = self.domains[0] if self.domains.shape[0] == 1 else self.domains[k]
        return float(row[0]), float(row[1])

    def n_covariates(self) -> Optional[int]:
        return None if self.domains.shape[0] == 1 else self.domains.shape[0]

    def knot_vector(self, k: int) -> np.ndarray:
        """Full clamped knot vector for covariate k (splines only)."""
        lo, hi = self.domain(k)
        inner = np.linspace(lo, hi, self.n_knots + 2)[1:-1]
        return np.r_[[lo] * (self.degree + 1), inner, [hi] * (self.degree + 1)]

    def centering(self, k: int) -> np.ndarray:
        """Domain averages of the raw B-splines: (t_{j+d+1} - t_j) / ((d+1)(hi - lo))."""
        lo, hi = self.domain(k)
        t = self.knot_vector(k)
        d = self.degree
        return (t[d + 1:] - t[:-(d + 1)]) / ((d + 1) * (hi - lo))

    def evaluate(self, z, k: int = 0) -> np.ndarray:
        """len(z) x m matrix of psi_{k1..km}(z); z must already lie in the domain."""
        z = np.asarray(z, dtype=float).reshape(-1)
        lo, hi = self.domain(k)
        if self.family == "fourier":
            u = (z - lo) / (hi - lo)
            freq = np.arange(self.m) // 2 + 1
            ang = 2.0 * np.pi * u[:, None] * freq[None, :]
            out = np.where(np.arange(self.m) % 2 == 0, np.sin(ang), np.cos(ang))
            return np.sqrt(2.0) * out
        t = self.knot_vector(k)
        B = BSpline.design_matrix(z, t, self.degree).toarray()
        return (B - self.centering(k))[:, : self.m]

    def to_dict(self) -> dict:
        return {"family": self.family, "m": self.m, "n_knots": self.n_knots,
                "degree": self.degree, "domains": self.domains.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "BasisSpec":
        return cls(d["family"], int(d["m"]), np.asarray(d["domains"]),
                   d.get("n_knots"), int(d.get("degree", 3)))


def build_basis(family: str, m_or_knots: int, domain) -> BasisSpec:
    """Centered basis on ``domain`` (one (lo, hi) pair, or one per covariate).

    For ``cubic_bspline`` the integer is the number of interior knots; for
    ``fourier`` it is m, giving sin/cos pairs of increasing frequency scaled by
    sqrt(2) so that each function has unit mean square.
    """
    if family in ("bspline", "spline"):
        family = "cubic_bspline"
    if family == "cubic_bspline":
        n_knots = int(m_or_knots)
        if n_knots < 0:
            raise ValueError("number of knots must be nonnegative")
        if n_knots + 3 < 1:
            raise ValueError("too few knots")
        return BasisSpec("cubic_bspline", n_knots + 3, domain, n_knots=n_knots)
    if family == "fourier":
        return BasisSpec("fourier", int(m_or_knots), domain)
    raise ValueError(f"unknown basis family {family!r}")


def empirical_domains(Z, margin: float = 1e-9) -> np.ndarray:
    """Per-column [min, max] widened by a relative margin."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    lo, hi = Z.min(axis=0), Z.max(axis=0)
    pad = margin * np.maximum(1.0, np.maximum(np.abs(lo), np.abs(hi)))
    pad = np.where(hi > lo, pad, np.maximum(pad, 0.5))
    return np.column_stack([lo - pad, hi + pad])


def _fit_to_domain(z, lo, hi, on_out: str):
    # small excursions are clamped silently; larger ones warn or raise
    span = CLAMP_TOL * max(1.0, abs(lo), abs(hi))
    out = (z < lo - span) | (z > hi + span)
    if np.any(out):
        if on_out == "raise":
            raise ValueError(f"{int(out.sum())} value(s) outside the basis domain [{lo}, {hi}]")
        warnings.warn("values outside the basis domain were clamped to the boundary", RuntimeWarning)
    return np.clip(z, lo, hi)


def feature_matrix(Z, basis: BasisSpec, on_out: str = "raise") -> np.ndarray:
    """n x (1 + d m) matrix [1, psi_1(z_1), ..., psi_d(z_d)]."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[None, :]
    if on_out not in ("raise", "clamp"):
        raise ValueError("on_out must be 'raise' or 'clamp'")
    n, d = Z.shape
    if basis.n_covariates() not in (None, d):
        raise ValueError("basis domains do not match the number of covariates")
    cols = [np.ones((n, 1))]
    for k in range(d):
        lo, hi = basis.domain(k)
        cols.append(basis.evaluate(_fit_to_domain(Z[:, k], lo, hi, on_out), k))
    return np.hstack(cols)


def additive_partition(d: int, m: int) -> GroupPartition:
    return GroupPartition.from_sizes([1] + [m] * d)


def expand_design(Z, basis: BasisSpec, on_out: str = "raise") -> GroupedDesign:
    """Grouped design with the intercept plus one block of m columns per covariate."""
    X = feature_matrix(Z, basis, on_out)
    d = (X.shape[1] - 1) // basis.m
    return GroupedDesign(X, additive_partition(d, basis.m))


@dataclass
class AdditiveModel:
    basis: BasisSpec
    beta: np.ndarray
    d: int
    selected_covariates: list
    fit: Optional[QuantileFit] = None
    tuning: Optional[TuningResult] = None
    lam: float = 0.0

    def block(self, k: int) -> np.ndarray:
        """Coefficients of covariate k (0-based)."""
        m = self.basis.m
        return self.beta[1 + k * m: 1 + (k + 1) * m]

    def component(self, k: int, z, on_out: str = "clamp") -> np.ndarray:
        """Fitted component sum_j beta_kj psi_kj(z) for covariate k, uncentered."""
        lo, hi = self.basis.domain(k)
        z = _fit_to_domain(np.asarray(z, dtype=float).reshape(-1), lo, hi, on_out)
        return self.basis.evaluate(z, k) @ self.block(k)

    def to_dict(self) -> dict:
        out = {"basis": self.basis.to_dict(), "d": self.d, "lambda": self.lam,
               "beta": self.beta.tolist(), "selected_covariates": list(self.selected_covariates)}
        if self.fit is not None:
            out["fit"] = {k: v for k, v in self.fit.summary().items() if k not in ("beta", "history")}
        if self.tuning is not None:
            out["tuning"] = self.tuning.summary()
        return out


def fit_additive(Z, y, tau, basis: BasisSpec, pivot_config: Optional[PivotConfig] = None,
                 opts: Optional[SolverOptions] = None, lam: Optional[float] = None) -> AdditiveModel:
    """Expand, tune, fit and package.

    With ``lam`` given the tuning step is skipped. The group weight is sqrt(m)
    for every covariate block.
    """
    design = expand_design(Z, basis)
    d = design.q - 1
    tuning = None
    if lam is None:
        if pivot_config is None:
            raise ValueError("need either a pivot configuration or an explicit lambda")
        if pivot_config.tau != tau:
            raise ValueError("pivot configuration tau differs from the fit tau")
        tuning = select_lambda(design, pivot_config)
        lam = tuning.lam
    weights = np.r_[0.0, np.full(d, np.sqrt(basis.m))]
    qf = fit(design, y, tau, PenaltySpec(float(lam), weights), opts)
    covs = [k - 2 for k in qf.selected_groups if k >= 2]
    return AdditiveModel(basis=basis, beta=qf.beta, d=d, selected_covariates=covs,
                         fit=qf, tuning=tuning, lam=float(lam))


def predict_g(model: AdditiveModel, z, on_out: str = "clamp"):
    """g_hat(z) = beta_0 + sum_k sum_j beta_kj psi_kj(z_k).

    A single d-vector gives a float; an (n, d) array gives n values.
    """
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    F = feature_matrix(z, model.basis, on_out)
    out = F @ model.beta
    return float(out[0]) if single else out


def l2_error(model, g_true: Callable, z_sampler: Callable, n_mc: int, seed) -> float:
    """Monte-Carlo L2 distance between g_hat and g_true.

    ``z_sampler(rng, n)`` returns an (n, d) array; ``g_true`` maps it to n
    values. ``model`` is an AdditiveModel or any callable on (n, d) arrays.
    """
    if n_mc < 1:
        raise ValueError("n_mc must be at least 1")
    rng = np.random.default_rng(seed)
    Zs = np.asarray(z_sampler(rng, int(n_mc)), dtype=float)
    g_hat = model(Zs) if callable(model) else predict_g(model, Zs)
    diff = np.asarray(g_hat, dtype=float) - np.asarray(g_true(Zs), dtype=float)
    return float(np.sqrt(np.mean(diff * diff)))
