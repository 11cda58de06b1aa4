"""Heuristic descriptive quantities: restricted eigenvalues, group-Gram deviation, a reference lambda.

None of these are used by the solver. The restricted-eigenvalue estimates come
from random sampling of the cone and are one-sided: the sampled minimum can
only over-estimate the true infimum and the sampled maximum can only
under-estimate the true supremum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .design import GroupedDesign, GroupPartition


@dataclass(frozen=True)
class ConeSampleConfig:
    """Cone {alpha : sum_{k not in S} sqrt(p_k)||alpha_k|| <= c0 sum_{k in S} sqrt(p_k)||alpha_k||}.

    ``S_bar`` holds 1-based group labels and must contain 1 (the intercept).
    """

    partition: GroupPartition
    S_bar: Sequence[int]
    c0: float = 4.0
    n_samples: int = 10000
    seed: int = 0

    def __post_init__(self):
        if not self.c0 > 3:
            raise ValueError("c0 must exceed 3")
        S = sorted(set(int(k) for k in self.S_bar))
        if 1 not in S:
            raise ValueError("S_bar must contain the intercept group 1")
        if S[0] < 1 or S[-1] > self.partition.q:
            raise ValueError("S_bar labels out of range")
        object.__setattr__(self, "S_bar", tuple(S))
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")


def cone_constant_c1(c0: float) -> float:
    """(c0 + 3) / (c0 - 3)."""
    if not c0 > 3:
        raise ValueError("c0 must exceed 3")
    return (c0 + 3.0) / (c0 - 3.0)


def sample_cone(config: ConeSampleConfig, n: int, gauss: np.random.Generator,
                slack: np.random.Generator) -> np.ndarray:
    """n unit vectors in the cone.

    Blocks in S_bar are Gaussian; the remaining blocks get Gaussian directions
    rescaled so that their weighted norm equals u * c0 * (weighted norm on
    S_bar) with u ~ Uniform(0, 1).
    """
    part = config.partition
    p = part.p
    A = gauss.standard_normal((n, p))
    u = slack.random(n)
    inS = np.zeros(part.q, dtype=bool)
    inS[np.asarray(config.S_bar) - 1] = True
    w = np.sqrt(part.sizes.astype(float))
    on = np.zeros(n)
    off = np.zeros(n)
    for k, g in enumerate(part.groups):
        nrm = w[k] * np.linalg.norm(A[:, g], axis=1)
        if inS[k]:
            on += nrm
        else:
            off += nrm
    cols_off = np.concatenate([g for k, g in enumerate(part.groups) if not inS[k]] or [np.array([], int)])
    if cols_off.size:
        scale = np.where(off > 0, u * config.c0 * on / np.where(off > 0, off, 1.0), 0.0)
        A[:, cols_off] *= scale[:, None]
    return A / np.linalg.norm(A, axis=1, keepdims=True)


def estimate_restricted_eigs(gram, config: ConeSampleConfig, chunk: int = 20000):
    """Sampled (min, max) of ||gram^{1/2} alpha||_2 over unit alpha in the cone.

    The min is an upper estimate of the restricted minimum eigenvalue and the
    max a lower estimate of the restricted maximum. Samples are generated in
    a fixed order from two seeded streams, so adding samples can only lower
    the min and raise the max.
    """
    G = np.asarray(gram, dtype=float)
    p = config.partition.p
    if G.shape != (p, p):
        raise ValueError("gram has the wrong shape")
    if np.max(np.abs(G - G.T)) > 1e-10 * max(1.0, np.max(np.abs(G))):
        raise ValueError("gram must be symmetric")
    if np.linalg.eigvalsh(0.5 * (G + G.T))[0] < -1e-8 * max(1.0, np.max(np.abs(G))):
        raise ValueError("gram must be positive semidefinite")
    gauss_ss, slack_ss = np.random.SeedSequence(config.seed).spawn(2)
    gauss = np.random.default_rng(gauss_ss)
    slack = np.random.default_rng(slack_ss)
    lo, hi = math.inf, -math.inf
    left = config.n_samples
    while left > 0:
        m = min(chunk, left)
        A = sample_cone(config, m, gauss, slack)
        vals = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", A, G, A), 0.0))
        lo, hi = min(lo, float(vals.min())), max(hi, float(vals.max()))
        left -= m
    return lo, hi


def omega0_check(design: GroupedDesign, bound: float = 0.5):
    """max_{k>=2} ||S_k^{1/2} - I||_op and whether it is at most ``bound``."""
    dev = 0.0
    for r in design.gram_sqrts[1:]:
        ev = np.linalg.eigvalsh(r - np.eye(r.shape[0]))
        dev = max(dev, float(np.max(np.abs(ev))))
    return dev <= bound, dev


def theoretical_lambda(n, q, p_min, A1, A2, Delta) -> float:
    """(4 sqrt(2) + Delta + A1) sqrt(n) + A2 sqrt(n log(q) / p_min).

    A reference value only; it involves unknown constants and is typically
    much larger than the simulated choice.
    """
    if n <= 0 or p_min <= 0:
        raise ValueError("n and p_min must be positive")
    if q < 2:
        raise ValueError("q must be at least 2")
    if min(A1, A2, Delta) < 0:
        raise ValueError("A1, A2 and Delta must be nonnegative")
    return (4.0 * math.sqrt(2.0) + Delta + A1) * math.sqrt(n) + A2 * math.sqrt(n * math.log(q) / p_min)
