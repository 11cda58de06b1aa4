import numpy as np
import pytest
from scipy.optimize import minimize

from gqr.design import GroupPartition, GroupedDesign
from gqr.diagnostics import (ConeSampleConfig, cone_constant_c1, estimate_restricted_eigs,
                             omega0_check, sample_cone, theoretical_lambda)


def cfg(part, S=(1,), n=2000, seed=0, c0=4.0):
    return ConeSampleConfig(partition=part, S_bar=S, c0=c0, n_samples=n, seed=seed)


def test_identity_gram_gives_one():
    part = GroupPartition.from_sizes([1, 2, 3])
    for S in ((1,), (1, 2), (1, 2, 3)):
        lo, hi = estimate_restricted_eigs(np.eye(6), cfg(part, S))
        assert lo == pytest.approx(1.0, abs=1e-14) and hi == pytest.approx(1.0, abs=1e-14)
    lo, hi = estimate_restricted_eigs(4 * np.eye(6), cfg(part))
    assert lo == pytest.approx(2.0, abs=1e-14) and hi == pytest.approx(2.0, abs=1e-14)


def test_samples_lie_in_the_cone():
    part = GroupPartition.from_sizes([1, 2, 3, 1])
    c = cfg(part, (1, 3))
    gens = [np.random.default_rng(s) for s in (1, 2)]
    A = sample_cone(c, 500, *gens)
    np.testing.assert_allclose(np.linalg.norm(A, axis=1), 1.0)
    w = np.sqrt(part.sizes)
    for a in A:
        norms = np.array([np.linalg.norm(a[g]) for g in part.groups]) * w
        on = norms[[0, 2]].sum()
        off = norms[[1, 3]].sum()
        assert off <= c.c0 * on * (1 + 1e-12)


def test_monotone_in_sample_count():
    rng = np.random.default_rng(1)
    F = rng.normal(size=(6, 6))
    G = F @ F.T / 6
    part = GroupPartition.from_sizes([1, 2, 3])
    prev = (np.inf, -np.inf)
    for n in (10, 100, 1000, 5000):
        lo, hi = estimate_restricted_eigs(G, cfg(part, (1, 2), n=n, seed=3))
        assert lo <= prev[0] and hi >= prev[1]
        prev = (lo, hi)
    # chunking does not change the stream
    assert estimate_restricted_eigs(G, cfg(part, (1, 2), n=5000, seed=3), chunk=700) == prev


def test_sampled_min_bounds_the_exact_cone_minimum():
    rng = np.random.default_rng(5)
    F = rng.normal(size=(4, 4))
    G = F @ F.T / 4 + 0.1 * np.eye(4)
    part = GroupPartition.from_sizes([1, 3])
    c0 = 4.0
    lo, hi = estimate_restricted_eigs(G, cfg(part, (1,), n=10**6, seed=0, c0=c0))

    # oracle: dense grid over the sphere section, refined by constrained local search
    def cone_ok(a):
        return c0 * abs(a[0]) - np.sqrt(3) * np.linalg.norm(a[1:])

    best = np.inf
    t = np.linspace(0, np.pi, 25)
    for a1 in t:
        for a2 in t:
            for a3 in np.linspace(0, 2 * np.pi, 49):
                a = np.array([np.cos(a1), np.sin(a1) * np.cos(a2),
                              np.sin(a1) * np.sin(a2) * np.cos(a3), np.sin(a1) * np.sin(a2) * np.sin(a3)])
                if cone_ok(a) >= 0:
                    best = min(best, np.sqrt(a @ G @ a))
    for s in range(20):
        x0 = np.random.default_rng(s).normal(size=4)
        res = minimize(lambda a: a @ G @ a, x0, method="SLSQP",
                       constraints=[{"type": "eq", "fun": lambda a: a @ a - 1},
                                    {"type": "ineq", "fun": cone_ok}])
        if res.success and cone_ok(res.x) >= -1e-9:
            best = min(best, np.sqrt(max(res.x @ G @ res.x, 0)))
    assert lo >= best - 1e-9
    assert lo <= best * 1.2
    assert hi <= np.sqrt(np.linalg.eigvalsh(G)[-1]) + 1e-12


def test_cone_config_validation():
    part = GroupPartition.from_sizes([1, 2])
    with pytest.raises(ValueError):
        cfg(part, c0=3.0)
    with pytest.raises(ValueError):
        cfg(part, S=(2,))
    with pytest.raises(ValueError):
        cfg(part, S=(1, 5))
    with pytest.raises(ValueError):
        cfg(part, n=0)
    with pytest.raises(ValueError):
        estimate_restricted_eigs(np.eye(2), cfg(part))
    assert cone_constant_c1(9.0) == 2.0


def test_omega0_examples():
    n = 50
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(np.column_stack([np.ones(n), rng.normal(size=(n, 3))]))
    X = np.column_stack([np.ones(n), np.sqrt(n) * Q[:, 1:]])
    holds, dev = omega0_check(GroupedDesign(X, GroupPartition.from_sizes([1, 3])))
    assert holds and dev < 1e-12
    X = np.column_stack([np.ones(2), [[2.0, 0.0], [0.0, 2.0]]]) * np.array([1, np.sqrt(2), np.sqrt(2)])
    holds, dev = omega0_check(GroupedDesign(X, GroupPartition.from_sizes([1, 2])))
    assert not holds and dev == pytest.approx(1.0, abs=1e-12)


def _power_norm(M, iters=2000):
    v = np.ones(M.shape[0])
    for _ in range(iters):
        v = M @ (M @ v)
        v /= np.linalg.norm(v)
    return np.sqrt(np.linalg.norm(M @ (M @ v)))


def test_omega0_matches_power_iteration():
    from gqr.additive import build_basis, expand_design

    rng = np.random.default_rng(1)
    d = expand_design(rng.uniform(-1, 1, (500, 2)), build_basis("fourier", 4, (-1, 1)))
    _, dev = omega0_check(d)
    ref = max(_power_norm(r - np.eye(r.shape[0])) for r in d.gram_sqrts[1:])
    assert dev == pytest.approx(ref, abs=1e-8)


def test_spline_design_deviation_shrinks_with_n():
    from gqr.additive import build_basis, expand_design
    from gqr.design import rescale_to_identity

    b = build_basis("cubic_bspline", 4, (-1, 1))
    big = expand_design(np.random.default_rng(99).uniform(-1, 1, (200000, 1)), b)
    pop = big.gram_blocks[1:]
    devs = {}
    for n in (500, 5000):
        vals = []
        for seed in range(10):
            d = expand_design(np.random.default_rng(seed).uniform(-1, 1, (n, 1)), b)
            d2, _ = rescale_to_identity(d, pop)
            vals.append(omega0_check(d2)[1])
        devs[n] = np.mean(vals)
    assert devs[5000] < devs[500]
    assert devs[5000] < 0.5


def test_theoretical_lambda():
    assert theoretical_lambda(100, 10, 2, 0, 0, 0) == pytest.approx(4 * np.sqrt(2) * 10)
    assert theoretical_lambda(400, 7, 3, 1.5, 2.0, 0.3) == pytest.approx(
        np.sqrt(2) * theoretical_lambda(200, 7, 3, 1.5, 2.0, 0.3))
    assert theoretical_lambda(200, 101, 5, 2.0, 17.0, 0.0) == pytest.approx(339.262177495407960, rel=1e-13)
    with pytest.raises(ValueError):
        theoretical_lambda(100, 1, 2, 0, 0, 0)
