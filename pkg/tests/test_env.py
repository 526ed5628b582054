import math

import numpy as np
import pytest
from scipy import integrate

from sinai_lab.env import (
    Environment,
    make_distribution,
    potential,
    running_min,
    sample_environment,
)


def const_env(omega, half_width):
    return Environment(-half_width, np.full(2 * half_width + 1, omega), min(omega, 1 - omega))


def test_two_point_sigma():
    d = make_distribution("two-point", {"p": 0.3})
    assert d.sigma == pytest.approx(abs(math.log(7 / 3)), abs=1e-15)
    assert d.epsilon0 == pytest.approx(0.3)


def test_degenerate_half_rejected():
    with pytest.raises(ValueError, match="degenerate"):
        make_distribution("two-point", {"p": 0.5})
    with pytest.raises(ValueError):
        make_distribution("constant", {"omega": 0.5})


def test_uniform_log_odds_sigma_matches_quadrature():
    d = make_distribution("uniform-log-odds", {"lam": 1.0})
    second, _ = integrate.quad(lambda y: y * y / 2.0, -1.0, 1.0)
    assert d.sigma**2 == pytest.approx(1 / 3, abs=1e-15)
    assert d.sigma**2 == pytest.approx(second, rel=1e-12)


def test_epsilon_claim_validated():
    with pytest.raises(ValueError, match="eps0 <= omega <= 1 - eps0"):
        make_distribution("two-point", {"p": 0.3, "epsilon0": 0.6})
    with pytest.raises(ValueError, match="outside"):
        make_distribution("two-point", {"p": 0.3, "epsilon0": 0.4})
    assert make_distribution("two-point", {"p": 0.3, "epsilon0": 0.2}).epsilon0 == 0.2


def test_non_centred_table_rejected():
    with pytest.raises(ValueError, match="transient"):
        make_distribution("table", {"values": [0.3, 0.6], "weights": [1, 1]})
    d = make_distribution("table", {"values": [0.3, 0.7], "weights": [2, 2]})
    assert d.sigma == pytest.approx(math.log(7 / 3))


def test_mirror_table_is_centred():
    d = make_distribution("mirror-table", {"values": [0.2, 0.45], "weights": [1, 3]})
    lo = np.log((1 - np.array(d.support)) / np.array(d.support))
    assert abs(np.dot(d.weights, lo)) < 1e-15


def test_unknown_parameters_rejected():
    with pytest.raises(ValueError, match="unknown"):
        make_distribution("two-point", {"p": 0.3, "q": 1})
    with pytest.raises(ValueError, match="unknown distribution"):
        make_distribution("beta", {})


def test_sample_support_and_window():
    env = sample_environment(make_distribution("two-point", {"p": 0.3}), 2, 7)
    assert env.offset == -2 and env.omegas.size == 5
    assert set(np.round(env.omegas, 12)) <= {0.3, 0.7}


def test_sample_deterministic():
    d = make_distribution("uniform-log-odds", {"lam": 2.0})
    a = sample_environment(d, 300, 5)
    b = sample_environment(d, 300, 5)
    assert np.array_equal(a.omegas, b.omegas)
    assert not np.array_equal(a.omegas, sample_environment(d, 300, 6).omegas)


def test_sample_prefix_consistent_with_extension():
    d = make_distribution("two-point", {"p": 0.2})
    small = sample_environment(d, 10, 3)
    big = sample_environment(d, 1000, 3)
    assert np.array_equal(big.omegas[990:1011], small.omegas)
    ext = small.extended(-1000, 1000)
    assert ext.lo <= -1000 and ext.hi >= 1000
    i = -1000 - ext.offset
    assert np.array_equal(ext.omegas[i : i + 2001], big.omegas)


@pytest.mark.parametrize("kind,params", [
    ("two-point", {"p": 0.3}),
    ("uniform-log-odds", {"lam": 1.5}),
    ("mirror-table", {"values": [0.1, 0.4], "weights": [1, 2]}),
])
def test_ellipticity_and_centering_by_sampling(kind, params):
    d = make_distribution(kind, params)
    env = sample_environment(d, 500_000, 11)
    w = env.omegas
    assert np.all(w >= d.epsilon0 - 1e-15) and np.all(w <= 1 - d.epsilon0 + 1e-15)
    lo = np.log((1 - w) / w)
    se = d.sigma / math.sqrt(w.size)
    assert abs(lo.mean()) <= 4 * se
    # sigma-hat against the analytic value, SE from the fourth moment
    m4 = np.mean(lo**4)
    se2 = math.sqrt(max(m4 - d.sigma**4, 0.0) / w.size)
    assert abs(np.mean(lo**2) - d.sigma**2) <= 4 * se2 + 1e-15


def test_environment_invariants():
    with pytest.raises(ValueError):
        Environment(1, np.array([0.3, 0.7]), 0.3)
    with pytest.raises(ValueError):
        Environment(-1, np.array([0.3, 0.9, 0.7]), 0.3)


def test_environment_json_round_trip():
    env = sample_environment(make_distribution("two-point", {"p": 0.3}), 3, 1)
    import json

    doc = json.loads(env.to_json())
    assert set(doc) == {"offset", "epsilon0", "omegas"}
    back = Environment.from_json(env.to_json())
    assert back.offset == env.offset and np.array_equal(back.omegas, env.omegas)


def test_potential_constant_env():
    pot = potential(const_env(0.3, 2))
    g = math.log(7 / 3)
    assert pot(0) == 0.0
    assert pot(1) == pytest.approx(g) and pot(2) == pytest.approx(2 * g)
    assert pot(-1) == pytest.approx(-g) and pot(-2) == pytest.approx(-2 * g)
    assert np.all(potential(const_env(0.5, 4)).values == 0.0)


def test_potential_increments_are_log_odds():
    env = sample_environment(make_distribution("uniform-log-odds", {"lam": 3.0}), 200, 2)
    pot = potential(env)
    for n in range(env.lo + 1, env.hi + 1):
        w = env.omega(n)
        assert pot(n) - pot(n - 1) == pytest.approx(math.log((1 - w) / w), abs=1e-12)
    assert np.all(np.abs(np.diff(pot.values)) <= math.log((1 - env.epsilon0) / env.epsilon0) + 1e-12)


def test_running_min():
    env = sample_environment(make_distribution("two-point", {"p": 0.35}), 100, 4)
    pot = potential(env)
    assert running_min(pot, 0) == 0.0
    for n in range(0, 101):
        assert running_min(pot, n) == min(pot(k) for k in range(n + 1))
    dec = potential(const_env(0.7, 5))
    assert running_min(dec, 5) == dec(5)
    with pytest.raises(IndexError):
        running_min(pot, 101)
    with pytest.raises((IndexError, ValueError)):
        running_min(pot, -1)
