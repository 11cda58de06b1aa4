"""Grouped design matrices: group partitions, Gram blocks and their square roots."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class DesignError(ValueError):
    """Raised when a design matrix and a group partition are inconsistent."""


def _rank_tol(lam_max: float) -> float:
    return 1e-10 * max(1.0, lam_max)


def sqrt_psd(A):
    """Symmetric square root and generalized inverse square root of a PSD matrix.

    Eigenvalues below ``1e-10 * max(1, lambda_max)`` are treated as exact
    zeros, so the inverse root is the Moore-Penrose type generalized inverse
    ``U diag(d_1^{-1/2}, ..., d_l^{-1/2}, 0, ..., 0) U'``.

    Returns
    -------
    sqrt : ndarray
    pinv_sqrt : ndarray
    rank : int
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise ValueError("sqrt_psd expects a square matrix")
    if not np.all(np.isfinite(A)):
        raise ValueError("sqrt_psd: matrix has NaN or Inf entries")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if A.size and np.max(np.abs(A - A.T)) > 1e-12 * scale:
        raise ValueError("sqrt_psd: matrix is not symmetric")
    A = 0.5 * (A + A.T)
    if A.shape[0] == 0:
        return A.copy(), A.copy(), 0

    d, U = np.linalg.eigh(A)
    top = float(d[-1])
    tol = _rank_tol(top)
    if d[0] < -1e-8 * max(1.0, abs(top)):
        raise ValueError("sqrt_psd: matrix is not positive semidefinite")
    keep = d > tol
    root = np.zeros_like(d)
    inv_root = np.zeros_like(d)
    root[keep] = np.sqrt(d[keep])
    inv_root[keep] = 1.0 / root[keep]
    sqrt = (U * root) @ U.T
    pinv_sqrt = (U * inv_root) @ U.T
    return 0.5 * (sqrt + sqrt.T), 0.5 * (pinv_sqrt + pinv_sqrt.T), int(keep.sum())


@dataclass(frozen=True)
class GroupPartition:
    """Ordered partition G_1, ..., G_q of the column indices 0..p-1.

    ``groups[0]`` must be ``[0]``: the unpenalized intercept column.
    """

    groups: tuple

    def __post_init__(self):
        groups = tuple(np.asarray(g, dtype=np.intp).reshape(-1) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        if len(groups) == 0:
            raise DesignError("partition has no groups")
        if groups[0].tolist() != [0]:
            raise DesignError("the first group must be the intercept group {0}")
        if any(g.size == 0 for g in groups):
            raise DesignError("groups must be non-empty")
        allidx = np.concatenate(groups)
        if np.unique(allidx).size != allidx.size:
            raise DesignError("groups overlap")
        if allidx.min() != 0 or allidx.max() != allidx.size - 1:
            raise DesignError("groups must cover 0..p-1 exactly")
        for g in groups:
            g.setflags(write=False)

    @classmethod
    def from_sizes(cls, sizes: Sequence[int]) -> "GroupPartition":
        """Contiguous partition with the given group sizes (first size must be 1)."""
        sizes = [int(s) for s in sizes]
        if not sizes or sizes[0] != 1:
            raise DesignError("first group size must be 1 (intercept)")
        if any(s < 1 for s in sizes):
            raise DesignError("group sizes must be positive")
        edges = np.cumsum([0] + sizes)
        return cls(tuple(np.arange(edges[k], edges[k + 1]) for k in range(len(sizes))))

    @classmethod
    def singletons(cls, p: int) -> "GroupPartition":
        return cls.from_sizes([1] * p)

    @property
    def q(self) -> int:
        return len(self.groups)

    @property
    def p(self) -> int:
        return int(sum(g.size for g in self.groups))

    @property
    def sizes(self) -> np.ndarray:
        return np.array([g.size for g in self.groups], dtype=int)

    @property
    def p_min(self) -> int:
        """Smallest non-intercept group size."""
        if self.q < 2:
            raise DesignError("p_min needs at least one non-intercept group")
        return int(self.sizes[1:].min())

    def p_of(self, S) -> int:
        """Total size p_S of the groups with (0-based) indices in S."""
        return int(sum(self.groups[k].size for k in S))

    def is_contiguous(self) -> bool:
        return np.array_equal(np.concatenate(self.groups), np.arange(self.p))

    def permuted(self, order: Sequence[int]) -> "GroupPartition":
        """Partition of the column-permuted design whose groups come in ``order``.

        ``order[0]`` must be 0. Columns are laid out contiguously in the new order.
        """
        order = list(order)
        if order[0] != 0 or sorted(order) != list(range(self.q)):
            raise DesignError("order must be a permutation of groups fixing the intercept")
        return GroupPartition.from_sizes([self.groups[k].size for k in order])


class GroupedDesign:
    """Design matrix with cached per-group Gram blocks and their roots.

    ``X`` is n x p with an exact column of ones in position 0. All arrays are
    read-only after construction, so an instance can be shared freely.
    """

    def __init__(self, X, partition: GroupPartition):
        X = np.array(X, dtype=float, copy=True)
        if X.ndim != 2:
            raise DesignError("X must be a 2-d array")
        n, p = X.shape
        if n < 1:
            raise DesignError("design needs at least one row")
        if p != partition.p:
            raise DesignError(f"X has {p} columns but the partition covers {partition.p}")
        if not np.all(np.isfinite(X)):
            raise DesignError("X has NaN or Inf entries")
        if not np.all(X[:, 0] == 1.0):
            raise DesignError("first column of X must be identically 1")
        X.setflags(write=False)
        self.X = X
        self.partition = partition

        grams, sqrts, pinvs, ranks = [], [], [], []
        for g in partition.groups:
            Xg = X[:, g]
            S = Xg.T @ Xg / n
            r, ir, rk = sqrt_psd(S)
            for a in (S, r, ir):
                a.setflags(write=False)
            grams.append(S)
            sqrts.append(r)
            pinvs.append(ir)
            ranks.append(rk)
        self.gram_blocks = tuple(grams)
        self.gram_sqrts = tuple(sqrts)
        self.gram_sqrt_pinvs = tuple(pinvs)
        self.ranks = tuple(ranks)
        self._whitened = None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.partition.q

    def whitened(self) -> np.ndarray:
        """n x p matrix whose block k is X_{G_k} Sigma_k^{-1/2}."""
        if self._whitened is None:
            Z = np.empty_like(self.X)
            for g, ir in zip(self.partition.groups, self.gram_sqrt_pinvs):
                Z[:, g] = self.X[:, g] @ ir
            Z.setflags(write=False)
            self._whitened = Z
        return self._whitened

    def with_partition(self, partition: GroupPartition) -> "GroupedDesign":
        return GroupedDesign(self.X, partition)

    def group_norms(self, beta) -> np.ndarray:
        """||Sigma_k^{1/2} beta_{G_k}||_2 for every group (including the intercept)."""
        beta = np.asarray(beta, dtype=float)
        return np.array([np.linalg.norm(r @ beta[g])
                         for g, r in zip(self.partition.groups, self.gram_sqrts)])

    def __repr__(self):
        return f"GroupedDesign(n={self.n}, p={self.p}, q={self.q})"


def build_design(X, partition: GroupPartition) -> GroupedDesign:
    return GroupedDesign(X, partition)


@dataclass
class Rescaling:
    """Block-diagonal transform D^{1/2} = diag(1, D_2^{1/2}, ..., D_q^{1/2}).

    Rescaled coefficients are ``beta = D^{1/2} beta0`` and rescaled rows are
    ``x = D^{-1/2} x0``.
    """

    partition: GroupPartition
    sqrt_blocks: list = field(default_factory=list)
    inv_sqrt_blocks: list = field(default_factory=list)

    def _apply(self, v, blocks):
        v = np.array(v, dtype=float, copy=True)
        out = v.copy()
        for g, B in zip(self.partition.groups, blocks):
            out[..., g] = v[..., g] @ B.T
        return out

    def to_rescaled(self, beta0):
        return self._apply(beta0, self.sqrt_blocks)

    def to_original(self, beta):
        return self._apply(beta, self.inv_sqrt_blocks)

    def rescale_X(self, X0):
        # x_i = D^{-1/2} x0_i, rowwise
        return self._apply(X0, self.inv_sqrt_blocks)

    def original_X(self, X):
        return self._apply(X, self.sqrt_blocks)


def rescale_to_identity(design: GroupedDesign, population_grams: Optional[Sequence] = None):
    """Rescale each non-intercept group so that its Gram matrix becomes the identity.

    ``population_grams`` (one matrix per group k >= 2) default to the empirical
    blocks, in which case the rescaled design has identity empirical Gram blocks.
    """
    part = design.partition
    if population_grams is None:
        population_grams = design.gram_blocks[1:]
    population_grams = list(population_grams)
    if len(population_grams) != part.q - 1:
        raise DesignError("need one Gram matrix per non-intercept group")

    sq, isq = [np.eye(1)], [np.eye(1)]
    for k, D in enumerate(population_grams, start=1):
        D = np.atleast_2d(np.asarray(D, dtype=float))
        if D.shape != (part.sizes[k],) * 2:
            raise DesignError(f"Gram matrix for group {k} has wrong shape")
        d = np.linalg.eigvalsh(0.5 * (D + D.T))
        if d[0] <= _rank_tol(d[-1]):
            raise DesignError(f"Gram block of group {k} is singular")
        r, ir, _ = sqrt_psd(D)
        sq.append(r)
        isq.append(ir)
    rec = Rescaling(part, sq, isq)
    return GroupedDesign(rec.rescale_X(design.X), part), rec
