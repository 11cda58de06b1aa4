"""Group-Lasso quantile regression by ADMM, certified through the explicit SOCP dual.

The primal problem, multiplied by n, is

    min_beta  sum_i rho_tau(y_i - x_i'beta) + sum_{k>=2} lambda_k ||S_k^{1/2} beta_{G_k}||_2

and its dual is

    max_a  y'a   s.t.  1'a = 0,  a in [tau-1, tau]^n,
                       ||S_k^{-1/2} X_{G_k}'a||_2 <= lambda_k  (k >= 2).

ADMM works on the splitting ``X beta + r = y`` and ``W beta = theta`` with
``W = sqrt(n) blockdiag(S_k^{1/2})``; the r-block is the check-loss prox and
the theta-block is group soft thresholding. The beta-block solves a fixed
system (X'X + W'W) beta = rhs, factorized once per fit.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np
from scipy import linalg

from .design import GroupedDesign, GroupPartition
from .objective import PenaltySpec, objective_terms, prox_check, _check_tau

log = logging.getLogger(__name__)


class SingularSystemError(np.linalg.LinAlgError):
    """The beta-update system is singular and no ridge fallback was allowed."""


@dataclass
class SolverOptions:
    max_iter: int = 20000
    abs_tol: float = 1e-8
    rel_tol: float = 1e-6
    admm_rho: float = 1.0
    adapt_rho: bool = False
    adapt_until: int = 1000
    relaxation: float = 1.6
    group_zero_tol: float = 1e-6
    certificate_interval: int = 25
    allow_ridge: bool = True

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        for name in ("abs_tol", "rel_tol", "admm_rho", "group_zero_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.certificate_interval < 1:
            raise ValueError("certificate_interval must be at least 1")
        if not 0 < self.relaxation < 2:
            raise ValueError("relaxation must lie in (0, 2)")


@dataclass
class QuantileFit:
    beta: np.ndarray
    tau: float
    lam: float
    objective: float
    loss: float
    penalty: float
    duality_gap: float
    relative_gap: float
    iterations: int
    converged: bool
    selected_groups: list
    group_norms: np.ndarray
    residuals: np.ndarray
    dual: np.ndarray
    dual_b: np.ndarray
    ridge: float = 0.0
    rank_deficient: bool = False
    rho: float = 1.0
    history: list = field(default_factory=list)

    def summary(self) -> dict:
        """JSON-ready dictionary of the fit (arrays become lists)."""
        out = {}
        for k, v in asdict(self).items():
            if k in ("residuals", "dual", "dual_b"):
                continue
            out[k] = v.tolist() if isinstance(v, np.ndarray) else v
        return out


def zero_tol(beta, opts: SolverOptions) -> float:
    return opts.group_zero_tol * max(1.0, float(np.linalg.norm(beta)))


def selected_groups(partition: GroupPartition, beta, tol: float) -> list:
    """S(beta) = {1} u {k >= 2 : ||beta_{G_k}||_2 > tol}, 1-based group labels."""
    beta = np.asarray(beta)
    return [1] + [k + 1 for k, g in enumerate(partition.groups)
                  if k > 0 and np.linalg.norm(beta[g]) > tol]


def _tau_quantile(v, tau):
    # smallest minimizer of sum rho_tau(v_i - c): order statistic ceil(n tau)
    n = v.size
    k = max(int(math.ceil(n * tau - 1e-12)) - 1, 0)
    return float(np.partition(v, k)[k])


# --- dual side -----------------------------------------------------------

def _project_box_hyperplane(s, lo, hi):
    """Euclidean projection of s onto {a : lo <= a <= hi, sum(a) = 0}."""
    f = lambda mu: np.clip(s - mu, lo, hi).sum()
    a, b = float(s.min() - hi), float(s.max() - lo)
    for _ in range(200):
        mid = 0.5 * (a + b)
        if f(mid) > 0:
            a = mid
        else:
            b = mid
        if b - a <= 1e-15 * max(1.0, abs(a), abs(b)):
            break
    x = np.clip(s, lo, hi)
    if x.sum() == 0.0:
        return x
    x = np.clip(s - 0.5 * (a + b), lo, hi)
    # push the leftover sum onto coordinates with room, keeping the box
    resid = x.sum()
    if resid != 0.0:
        room = (x - lo) if resid > 0 else (hi - x)
        tot = room.sum()
        if tot > 0:
            x = x - resid * room / tot
            x = np.clip(x, lo, hi)
    return x


def _project_subspace_box(s, C, lo, hi, iters=300):
    """Feasible point of {a : C'a = 0, lo <= a <= hi} near s (Dykstra, then exact repair)."""
    Q, _ = np.linalg.qr(C)
    rank = np.linalg.matrix_rank(C)
    Q = Q[:, :rank]
    proj = lambda v: v - Q @ (Q.T @ v)
    x = proj(s)
    p_ = np.zeros_like(s)
    q_ = np.zeros_like(s)
    for _ in range(iters):
        yb = np.clip(x + p_, lo, hi)
        p_ = x + p_ - yb
        x_new = proj(yb + q_)
        q_ = yb + q_ - x_new
        if np.max(np.abs(x_new - x)) < 1e-13:
            x = x_new
            break
        x = x_new
    x = proj(x)
    # scale into the box; 0 is interior so this keeps C'a = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(x > hi, hi / x, np.where(x < lo, lo / x, 1.0))
    return x * min(1.0, float(ratios.min()))


def _dual_point(design: GroupedDesign, tau, levels, a_seed):
    """Project a_seed onto the dual feasible set; returns (a, b) or None."""
    n = design.n
    lo, hi = tau - 1.0, tau
    a_seed = np.asarray(a_seed, dtype=float)
    if not np.all(np.isfinite(a_seed)):
        return None
    groups = design.partition.groups
    zero = [k for k in range(1, design.q) if levels[k] == 0.0]
    if zero:
        C = design.X[:, np.concatenate([groups[0]] + [groups[k] for k in zero])]
        a = _project_subspace_box(a_seed, C, lo, hi)
    else:
        a = _project_box_hyperplane(a_seed, lo, hi)

    Z = design.whitened()
    b = Z.T @ a
    scale = 1.0
    for k in range(1, design.q):
        nrm = np.linalg.norm(b[groups[k]])
        if levels[k] == 0.0:
            if nrm > 1e-10 * max(1.0, np.sqrt(n)):
                return None
        elif nrm > levels[k]:
            scale = min(scale, levels[k] / nrm)
    a = a * scale
    b = b * scale
    b[groups[0]] = 0.0
    for k in zero:
        b[groups[k]] = 0.0
    return a, b


def dual_certificate(design: GroupedDesign, y, tau, penalty: PenaltySpec, beta, a_seed):
    """Duality gap of ``beta`` against the dual point built from ``a_seed``.

    Returns ``(gap, a, b)`` with ``gap = n * objective(beta) - y'a``. If no
    feasible dual point can be produced the gap is ``inf``.
    """
    _check_tau(tau)
    y = np.asarray(y, dtype=float)
    levels = penalty.levels(design.partition)
    loss, pen = objective_terms(design, y, beta, tau, penalty)
    primal = design.n * (loss + pen)
    pt = _dual_point(design, tau, levels, a_seed)
    if pt is None:
        return math.inf, np.zeros(design.n), np.zeros(design.p)
    a, b = pt
    return primal - float(y @ a), a, b


def relative_gap(gap, primal_times_n):
    return gap / (1.0 + abs(primal_times_n))


def intercept_dual(y, tau):
    """Dual-optimal a for the intercept-only problem (ties share the leftover mass)."""
    y = np.asarray(y, dtype=float)
    c = _tau_quantile(y, tau)
    a = np.where(y > c, tau, tau - 1.0)
    ties = y == c
    a[ties] = 0.0
    a[ties] = -a.sum() / ties.sum()
    return a


def lambda_max(design: GroupedDesign, y, tau, group_weights=None) -> float:
    """Smallest lambda at which the intercept-only fit is optimal.

    Evaluated as max_k ||S_k^{-1/2} X_{G_k}'a*|| / w_k at the dual-optimal
    vector a* of the intercept-only problem.
    """
    _check_tau(tau)
    w = PenaltySpec(0.0, group_weights).weights(design.partition)
    a = intercept_dual(y, tau)
    b = design.whitened().T @ a
    best = 0.0
    for k in range(1, design.q):
        nrm = float(np.linalg.norm(b[design.partition.groups[k]]))
        if nrm == 0.0:
            continue
        if w[k] == 0.0:
            return math.inf
        best = max(best, nrm / w[k])
    return best


# --- primal side ---------------------------------------------------------

class _Splitting:
    """Cached matrices for one (design, penalty) pair."""

    def __init__(self, design: GroupedDesign, levels, allow_ridge: bool):
        n, p = design.n, design.p
        part = design.partition
        self.design = design
        pen_groups = list(range(1, design.q))
        self.pen_groups = pen_groups
        sizes = [part.groups[k].size for k in pen_groups]
        self.sizes = np.array(sizes, dtype=int)
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        m = int(self.offsets[-1])
        W = np.zeros((m, p))
        for j, k in enumerate(pen_groups):
            W[self.offsets[j]:self.offsets[j + 1], part.groups[k]] = math.sqrt(n) * design.gram_sqrts[k]
        self.W = W
        # theta-space threshold levels: lambda_k ||S^{1/2} b|| = (lambda_k / sqrt n) ||theta_k||
        self.theta_levels = np.array([levels[k] for k in pen_groups]) / math.sqrt(n)
        self.sqrt_pinvs = [design.gram_sqrt_pinvs[k] / math.sqrt(n) for k in pen_groups]

        X = design.X
        M = X.T @ X + W.T @ W
        self.ridge = 0.0
        try:
            self.chol = linalg.cho_factor(M, lower=False, check_finite=False)
            d = np.abs(np.diag(self.chol[0]))
            if d.min() <= 1e-8 * d.max():
                raise linalg.LinAlgError("ill-conditioned")
        except linalg.LinAlgError:
            if not allow_ridge:
                raise SingularSystemError("beta-update system is singular")
            self.ridge = 1e-10 * np.trace(M) / p
            self.chol = linalg.cho_factor(M + self.ridge * np.eye(p), lower=False,
                                          check_finite=False)
            log.info("beta-update system singular; ridge %.3g added", self.ridge)

    def solve(self, rhs):
        return linalg.cho_solve(self.chol, rhs, check_finite=False)

    def shrink(self, v, rho):
        if v.size == 0:
            return v
        sq = np.add.reduceat(v * v, self.offsets[:-1])
        nrm = np.sqrt(sq)
        thr = self.theta_levels / rho
        with np.errstate(divide="ignore", invalid="ignore"):
            fac = np.where(nrm > thr, 1.0 - thr / nrm, 0.0)
        return v * np.repeat(fac, self.sizes)

    def beta_from_theta(self, theta, intercept):
        part = self.design.partition
        beta = np.zeros(self.design.p)
        beta[part.groups[0]] = intercept
        for j, k in enumerate(self.pen_groups):
            beta[part.groups[k]] = self.sqrt_pinvs[j] @ theta[self.offsets[j]:self.offsets[j + 1]]
        return beta


def _polish_dual(design: GroupedDesign, tau, levels, r, theta_dirs, active):
    """Dual seed from the KKT equalities at a support-identified iterate.

    Off the zero-residual set E the dual is pinned to tau or tau-1 by the
    residual sign; on E it is the least-squares solution of
    ``Z_{E,A}'a_E = t_A - Z_{~E,A}'a_{~E}`` where A holds the intercept and
    the active groups and t_k = lambda_k theta_k / ||theta_k||.
    """
    E = r == 0.0
    a = np.where(r > 0, tau, tau - 1.0)
    a[E] = 0.0
    if not E.any():
        return a
    groups = design.partition.groups
    cols = [groups[0]] + [groups[k] for k in active]
    idx = np.concatenate(cols)
    Z = design.whitened()[:, idx]
    target = np.concatenate([np.zeros(1)] + [levels[k] * theta_dirs[k] for k in active])
    rhs = target - Z[~E].T @ a[~E]
    sol, *_ = np.linalg.lstsq(Z[E].T, rhs, rcond=None)
    a[E] = sol
    return a


def _polish_primal(design: GroupedDesign, y, tau, levels, r, active, beta, steps=8):
    """Newton solve of the problem restricted to an identified support.

    With the zero-residual set E, the residual signs off E and the active
    groups A held fixed, the problem in whitened coordinates
    gamma_k = S_k^{1/2} beta_k reads

        min  -a_off'Z_{~E,A} gamma + sum_{k in A} lambda_k ||gamma_k||
        s.t. Z_{E,A} gamma = y_E,

    whose KKT multipliers are the dual values on E. Returns
    ``(beta, a_seed)`` or ``None`` when the Newton system breaks down.
    """
    E = r == 0.0
    a_off = np.where(r > 0, tau, tau - 1.0)[~E]
    groups = design.partition.groups
    blocks = [0] + list(active)
    cols = [groups[k] for k in blocks]
    idx = np.concatenate(cols)
    Z = design.whitened()[:, idx]
    ZE = Z[E]
    g0 = -Z[~E].T @ a_off
    starts = np.cumsum([0] + [c.size for c in cols])
    gamma = np.concatenate([design.gram_sqrts[k] @ beta[groups[k]] for k in blocks])
    nA, nE = idx.size, int(E.sum())
    mu = np.zeros(nE)
    for _ in range(steps):
        grad = g0.copy()
        H = np.zeros((nA, nA))
        for j, k in enumerate(blocks):
            if j == 0 or levels[k] == 0.0:
                continue
            sl_ = slice(starts[j], starts[j + 1])
            gk = gamma[sl_]
            nk = np.linalg.norm(gk)
            if nk == 0.0:
                return None
            uk = gk / nk
            grad[sl_] += levels[k] * uk
            H[sl_, sl_] = levels[k] / nk * (np.eye(uk.size) - np.outer(uk, uk))
        K = np.block([[H, -ZE.T], [ZE, np.zeros((nE, nE))]])
        rhs = np.concatenate([-grad, y[E] - ZE @ gamma])
        try:
            sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
        except np.linalg.LinAlgError:
            return None
        step = sol[:nA]
        mu = sol[nA:]
        gamma = gamma + step
        if np.linalg.norm(step) <= 1e-13 * max(1.0, np.linalg.norm(gamma)):
            break
    if not np.all(np.isfinite(gamma)):
        return None
    out = np.zeros(design.p)
    for j, k in enumerate(blocks):
        out[groups[k]] = design.gram_sqrt_pinvs[k] @ gamma[starts[j]:starts[j + 1]]
    a = np.empty(design.n)
    a[~E] = a_off
    a[E] = mu
    return out, a


def _refit_intercept(design, y, beta, tau):
    beta = beta.copy()
    offset = y - design.X[:, 1:] @ beta[1:]
    beta[0] = _tau_quantile(offset, tau)
    return beta


def fit(design: GroupedDesign, y, tau, penalty: PenaltySpec, opts: Optional[SolverOptions] = None) -> QuantileFit:
    """Minimize the group-Lasso penalized check loss and certify the result.

    Convergence means the certified relative duality gap
    ``gap / (1 + n * objective)`` is at most ``opts.rel_tol``. When
    ``max_iter`` is exhausted the best iterate is returned with
    ``converged=False`` and the last certified gap.
    """
    opts = opts or SolverOptions()
    _check_tau(tau)
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape != (design.n,):
        raise ValueError("y must have one entry per design row")
    if not np.all(np.isfinite(y)):
        raise ValueError("y has NaN or Inf entries")
    levels = penalty.levels(design.partition)
    n, p = design.n, design.p
    X = design.X
    sp = _Splitting(design, levels, opts.allow_ridge)
    W = sp.W
    m = W.shape[0]
    alpha = opts.relaxation
    rho = opts.admm_rho
    step = 1.0 / rho

    def score(beta):
        loss, pen = objective_terms(design, y, beta, tau, penalty)
        return loss + pen, loss, pen

    # stacked constraint A beta + zeta = c with A = [X; W], zeta = (r, -theta), c = (y, 0)
    A = np.vstack([X, W])
    c = np.concatenate([y, np.zeros(m)])

    beta = np.zeros(p)
    beta[0] = _tau_quantile(y, tau)
    zeta = c - A @ beta
    zeta[n:] = -zeta[n:]
    u = np.zeros(n + m)

    best_beta = beta.copy()
    best_obj = score(beta)[0]
    best_a = np.zeros(n)
    best_b = np.zeros(p)
    best_dual = 0.0
    gap = n * best_obj - best_dual
    history = []
    converged = False
    it = 0
    last_cert = 0
    sparse_last = None
    polished = [None, None]

    def certify(it):
        nonlocal best_beta, best_obj, best_a, best_b, best_dual, gap, sparse_last
        dense = _refit_intercept(design, y, beta, tau)
        sparse = _refit_intercept(design, y, sp.beta_from_theta(-zeta[n:], beta[0]), tau)
        for cand in (dense, sparse):
            obj = score(cand)[0]
            if obj < best_obj:
                best_obj, best_beta = obj, cand
        sparse_last = sparse
        seeds = [-rho * u[:n]]
        theta = -zeta[n:]
        dirs, active = {}, []
        for j, k in enumerate(sp.pen_groups):
            t = theta[sp.offsets[j]:sp.offsets[j + 1]]
            nt = np.linalg.norm(t)
            if nt > 0:
                active.append(k)
                # theta_k is sqrt(n) S_k^{1/2} beta_k; its direction is what the KKT uses
                dirs[k] = t / nt
        seeds.append(_polish_dual(design, tau, levels, zeta[:n], dirs, active))
        support = (np.flatnonzero(zeta[:n] == 0.0).tobytes(), tuple(active))
        if support == polished[0] and support != polished[1]:
            # support stable across two checkpoints: try an exact restricted solve
            polished[1] = support
            pol = _polish_primal(design, y, tau, levels, zeta[:n], active, best_beta)
            if pol is not None:
                cand = _refit_intercept(design, y, pol[0], tau)
                obj = score(cand)[0]
                if obj < best_obj:
                    best_obj, best_beta = obj, cand
                seeds.append(pol[1])
        polished[0] = support
        for seed in seeds:
            res = dual_certificate(design, y, tau, penalty, best_beta, seed)
            if math.isfinite(res[0]):
                dval = n * best_obj - res[0]
                if dval > best_dual:
                    best_dual, best_a, best_b = dval, res[1], res[2]
        gap = n * best_obj - best_dual
        history.append((it, best_obj, gap))
        return relative_gap(gap, n * best_obj) <= opts.rel_tol

    # screening: the intercept-only fit is exactly optimal when its dual point is feasible
    g0, a0, b0 = dual_certificate(design, y, tau, penalty, best_beta, intercept_dual(y, tau))
    if math.isfinite(g0) and relative_gap(g0, n * best_obj) <= opts.rel_tol:
        best_dual, best_a, best_b, gap = n * best_obj - g0, a0, b0, g0
        history.append((0, best_obj, gap))
        converged = True

    for it in (range(1, opts.max_iter + 1) if not converged else ()):
        beta = sp.solve(A.T @ (c - zeta - u))
        Ab = A @ beta
        Ah = alpha * Ab + (1 - alpha) * (c - zeta)
        zeta_old = zeta
        w = c - Ah - u
        zeta = np.empty_like(w)
        zeta[:n] = prox_check(w[:n], step, tau)
        zeta[n:] = -sp.shrink(-w[n:], rho)
        u = u + Ah + zeta - c

        if it % opts.certificate_interval == 0 or it == opts.max_iter:
            if certify(it):
                converged = True
                break
            last_cert = it
            if opts.adapt_rho and it <= opts.adapt_until:
                pri = np.linalg.norm(Ab + zeta - c)
                dual_res = rho * np.linalg.norm(A.T @ (zeta - zeta_old))
                scale = 0.0
                if pri > 10 * dual_res:
                    scale = 2.0
                elif dual_res > 10 * pri:
                    scale = 0.5
                if scale:
                    rho *= scale
                    step = 1.0 / rho
                    u /= scale

    if not converged and last_cert != it:
        converged = certify(it)
    if sparse_last is not None:
        # prefer exact group zeros when they cost at most a tenth of the gap budget
        obj_s = score(sparse_last)[0]
        gap_s = n * obj_s - best_dual
        close = obj_s <= best_obj + 0.1 * opts.rel_tol * (1.0 + n * best_obj) / n
        if close and obj_s != best_obj and (not converged or relative_gap(gap_s, n * obj_s) <= opts.rel_tol):
            best_beta, best_obj, gap = sparse_last, obj_s, gap_s

    obj, loss, pen = score(best_beta)
    resid = y - X @ best_beta
    tol = zero_tol(best_beta, opts)
    rank_def = np.linalg.matrix_rank(X) < p
    return QuantileFit(
        beta=best_beta, tau=tau, lam=penalty.lam, objective=obj, loss=loss, penalty=pen,
        duality_gap=gap, relative_gap=relative_gap(gap, n * obj), iterations=it,
        converged=converged,
        selected_groups=selected_groups(design.partition, best_beta, tol),
        group_norms=np.array([np.linalg.norm(best_beta[g]) for g in design.partition.groups]),
        residuals=resid, dual=best_a, dual_b=best_b, ridge=sp.ridge,
        rank_deficient=bool(rank_def), rho=rho, history=history,
    )


def fit_unpenalized(design: GroupedDesign, y, tau, opts: Optional[SolverOptions] = None) -> QuantileFit:
    """Plain quantile regression (lambda = 0); the dual then needs X'a = 0."""
    return fit(design, y, tau, PenaltySpec(0.0), opts)


def fit_l1(design: GroupedDesign, y, tau, lam, opts: Optional[SolverOptions] = None) -> QuantileFit:
    """l1-penalized quantile regression: the group fit on the all-singleton partition."""
    single = design.with_partition(GroupPartition.singletons(design.p))
    return fit(single, y, tau, PenaltySpec(lam), opts)


@dataclass
class SocpProblem:
    """Explicit cone-program data for the primal and dual problems.

    Primal variables are stacked as ``(beta, v_2..v_q, eta_plus, eta_minus)``.
    """

    design: GroupedDesign
    y: np.ndarray
    tau: float
    levels: np.ndarray

    @classmethod
    def assemble(cls, design: GroupedDesign, y, tau, penalty: PenaltySpec) -> "SocpProblem":
        _check_tau(tau)
        return cls(design, np.asarray(y, dtype=float), tau, penalty.levels(design.partition))

    @property
    def sizes(self):
        return self.design.p, self.design.q - 1, self.design.n

    @property
    def cost(self) -> np.ndarray:
        p, qm, n = self.sizes
        return np.concatenate([np.zeros(p), self.levels[1:], np.full(n, self.tau), np.full(n, 1 - self.tau)])

    @property
    def equality(self):
        """(A, b) with A x = b encoding eta+ - eta- + X beta = y."""
        p, qm, n = self.sizes
        A = np.hstack([self.design.X, np.zeros((n, qm)), np.eye(n), -np.eye(n)])
        return A, self.y.copy()

    def cones(self):
        """List of (k, M_k) pairs meaning ||M_k beta_{G_k}||_2 <= v_k."""
        return [(k, self.design.gram_sqrts[k]) for k in range(1, self.design.q)]

    def split(self, x):
        p, qm, n = self.sizes
        return x[:p], x[p:p + qm], x[p + qm:p + qm + n], x[p + qm + n:]

    def primal_point(self, beta):
        """Feasible primal point with the smallest cost for a given beta."""
        beta = np.asarray(beta, dtype=float)
        r = self.y - self.design.X @ beta
        vk = self.design.group_norms(beta)[1:]
        return np.concatenate([beta, vk, np.maximum(r, 0), np.maximum(-r, 0)])

    def primal_value(self, x) -> float:
        return float(self.cost @ x)

    def primal_violation(self, x) -> float:
        beta, vk, ep, em = self.split(x)
        A, b = self.equality
        viol = np.max(np.abs(A @ x - b)) if b.size else 0.0
        viol = max(viol, float(-min(ep.min(initial=0), em.min(initial=0))))
        for j, (k, Mk) in enumerate(self.cones()):
            viol = max(viol, float(np.linalg.norm(Mk @ beta[self.design.partition.groups[k]]) - vk[j]))
        return viol

    def dual_value(self, a) -> float:
        return float(self.y @ a)

    def dual_violation(self, a, b) -> float:
        """Largest violation of the dual constraints at (a, b)."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        d = self.design
        viol = max(abs(float(a.sum())), abs(float(b[0])))
        viol = max(viol, float(np.max(a - self.tau, initial=-np.inf)),
                   float(np.max(self.tau - 1 - a, initial=-np.inf)), 0.0)
        Xa = d.X.T @ a
        for k in range(1, d.q):
            g = d.partition.groups[k]
            viol = max(viol, float(np.linalg.norm(b[g]) - self.levels[k]))
            viol = max(viol, float(np.max(np.abs(d.gram_sqrts[k] @ b[g] - Xa[g]))))
        return viol
