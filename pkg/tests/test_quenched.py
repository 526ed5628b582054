"""Closed forms against an independent oracle: the fundamental matrix of the
birth-death chain killed at ``p`` and ``r``, obtained by a dense linear solve."""

import math

import numpy as np
import pytest

from sinai_lab import quenched as Q
from sinai_lab.env import Environment, make_distribution, potential, sample_environment
from sinai_lab.walk import exit_trials


def chain(env, p, r):
    """Fundamental matrix ``N = (I - P)^-1`` on ``p+1..r-1`` and right-absorption vector."""
    sites = np.arange(p + 1, r)
    n = sites.size
    P = np.zeros((n, n))
    right = np.zeros(n)
    for j, x in enumerate(sites):
        w = env.omega(int(x))
        if j + 1 < n:
            P[j, j + 1] = w
        else:
            right[j] = w
        if j > 0:
            P[j, j - 1] = 1 - w
    N = np.linalg.inv(np.eye(n) - P)
    return N, N @ right


def const_env(omega, hw=10):
    return Environment(-hw, np.full(2 * hw + 1, omega), min(omega, 1 - omega))


def random_cases(n, seed, hw=12):
    rng = np.random.default_rng(seed)
    for i in range(n):
        p_ = rng.uniform(0.1, 0.45)
        env = sample_environment(make_distribution("two-point", {"p": p_}), hw, (seed, i))
        pr = np.sort(rng.choice(np.arange(-hw, hw + 1), 2, replace=False))
        if pr[1] - pr[0] < 2:
            continue
        yield env, potential(env), int(pr[0]), int(pr[1]), rng


def test_exit_prob_examples():
    flat = potential(const_env(0.5))
    assert Q.exit_prob(flat, -1, 0, 2) == pytest.approx(1 / 3, abs=1e-15)
    env = sample_environment(make_distribution("two-point", {"p": 0.3}), 5, 1)
    pot = potential(env)
    e = math.exp(pot(-1))
    assert Q.exit_prob(pot, -1, 0, 1) == pytest.approx(e / (e + 1), rel=1e-14)


def test_exit_prob_ordering_checked():
    flat = potential(const_env(0.5))
    with pytest.raises(ValueError):
        Q.exit_prob(flat, 0, 0, 2)
    with pytest.raises(ValueError):
        Q.exit_prob(flat, 2, 1, 0)
    with pytest.raises(IndexError):
        Q.exit_prob(flat, -11, 0, 2)


def test_exit_prob_matches_linear_solve():
    for env, pot, p, r, rng in random_cases(60, 1):
        _, right = chain(env, p, r)
        for q in range(p + 1, r):
            assert Q.exit_prob(pot, p, q, r) == pytest.approx(right[q - p - 1], rel=1e-9, abs=1e-14)


def test_complementarity_and_monotonicity():
    for env, pot, p, r, _ in random_cases(60, 2):
        probs = [Q.exit_prob(pot, p, q, r) for q in range(p + 1, r)]
        for q, a in zip(range(p + 1, r), probs):
            assert a + Q.exit_prob_down(pot, p, q, r) == pytest.approx(1.0, abs=1e-12)
        assert all(x < y for x, y in zip(probs, probs[1:]))


def test_log_space_two_scale_potential():
    # V(n) = k n on [-50, 50], so max V - min V = 400
    k = 4.0
    w = 1 / (1 + math.exp(k))
    env = Environment(-50, np.full(101, w), w)
    pot = potential(env)
    assert pot.values.max() - pot.values.min() == pytest.approx(400, rel=1e-12)
    v = Q.exit_prob(pot, -50, 0, 50)
    # geometric sums: sum_{-50}^{-1} e^{kn} / sum_{-50}^{49} e^{kn}
    ref = -50 * k + math.log1p(-math.exp(-50 * k)) - math.log1p(-math.exp(-100 * k))
    assert 0 < v < 1
    assert math.log(v) == pytest.approx(ref, abs=1e-10)


def test_log_sum_accumulator():
    v = np.array([1000.0, 999.0, -5.0, 1001.0])
    acc = Q.LogSumAccumulator()
    for x in v:
        acc.add(x)
    ref = 1001 + math.log(math.fsum(np.exp(v - 1001)))
    assert acc.log() == pytest.approx(ref, abs=1e-12)
    assert Q.LogSumAccumulator.of(v).log() == pytest.approx(ref, abs=1e-12)
    assert Q.LogSumAccumulator().log() == -math.inf


def test_exit_time_bound_examples():
    flat = const_env(0.5)
    pf = potential(flat)
    assert Q.exit_time_bound(pf, flat, -1, 0, 1) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        Q.exit_time_bound(pf, flat, 0, 0, 1)


def test_exit_time_bound_dominates_exact_mean():
    for env, pot, g, i, rng in random_cases(80, 3):
        N, _ = chain(env, g, i)
        mean = N.sum(axis=1)
        crude = Q.exit_time_crude_bound(pot, env, g, i)
        for h in range(g + 1, i):
            b = Q.exit_time_bound(pot, env, g, h, i)
            assert mean[h - g - 1] <= b * (1 + 1e-12)
            assert b <= crude * (1 + 1e-12)


def test_geometric_param_examples():
    env = const_env(0.5)
    pot = potential(env)
    assert Q.local_time_geometric_param(pot, env, 0, -1, 1) == pytest.approx(1.0)
    assert Q.local_time_geometric_param(pot, env, 0, -2, 2) == pytest.approx(0.5)


def test_expected_local_time_examples():
    env = const_env(0.5)
    pot = potential(env)
    assert Q.expected_local_time(pot, env, 0, 0, -1, 1) == pytest.approx(1.0)
    assert Q.expected_local_time(pot, env, 0, 0, -2, 2) == pytest.approx(2.0)
    b = exit_trials(env, 0, -2, 2, 100_000, 9)
    L = b.local_time_at(0)
    assert abs(L.mean() - 2.0) <= 4 * L.std(ddof=1) / math.sqrt(L.size)


def test_expected_local_time_matches_fundamental_matrix():
    for env, pot, p, r, rng in random_cases(80, 4):
        N, _ = chain(env, p, r)
        for q in range(p + 1, r):
            for z in range(p + 1, r):
                got = Q.expected_local_time(pot, env, q, z, p, r)
                assert got == pytest.approx(N[q - p - 1, z - p - 1], rel=1e-9)


def test_geometric_param_is_inverse_of_return_visits():
    for env, pot, p, r, _ in random_cases(40, 5):
        N, _ = chain(env, p, r)
        for z in range(p + 1, r):
            prm = Q.local_time_geometric_param(pot, env, z, p, r)
            assert 0 < prm <= 1
            assert 1 / prm == pytest.approx(N[z - p - 1, z - p - 1], rel=1e-9)


def test_expected_local_time_ordering_checked():
    env = const_env(0.5)
    pot = potential(env)
    with pytest.raises(ValueError):
        Q.expected_local_time(pot, env, 0, 2, -1, 2)


def test_geometric_variance_relation():
    env = sample_environment(make_distribution("two-point", {"p": 0.35}), 10, 17)
    pot = potential(env)
    prm = Q.local_time_geometric_param(pot, env, 0, -5, 5)
    L = exit_trials(env, 0, -5, 5, 100_000, 3).local_time_at(0).astype(float)
    ratio = L.var(ddof=1) / L.mean() ** 2
    # bootstrap SE of var/mean^2
    rng = np.random.default_rng(0)
    boots = []
    for _ in range(200):
        s = L[rng.integers(0, L.size, L.size)]
        boots.append(s.var(ddof=1) / s.mean() ** 2)
    se = float(np.std(boots, ddof=1))
    assert abs(ratio - (1 - prm)) <= 5 * se
