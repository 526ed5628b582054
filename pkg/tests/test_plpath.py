import io
import math

import numpy as np
import pytest
from scipy import stats

from sinai_lab.env import Environment, potential
from sinai_lab.plpath import (
    BMGridSpec,
    PiecewiseLinearPath,
    grid_times,
    interpolate_potential,
    range_first_passage,
    running_extremes,
    sample_two_sided_bm,
)


def test_path_validation():
    with pytest.raises(ValueError):
        PiecewiseLinearPath([0, 0], [1, 2])
    with pytest.raises(ValueError):
        PiecewiseLinearPath([0, 1], [1, np.nan])


def test_interpolation_exact_and_linear():
    t = np.array([-2.0, -0.5, 0.0, 1.0, 3.0])
    v = np.array([1.0, -1.0, 0.0, 2.0, -4.0])
    p = PiecewiseLinearPath(t, v)
    assert np.array_equal(p(t), v)
    mid = (t[1:] + t[:-1]) / 2
    assert np.allclose(p(mid), (v[1:] + v[:-1]) / 2, atol=1e-15)
    with pytest.raises(ValueError):
        p(3.5)


def test_bm_basic_properties():
    spec = BMGridSpec(dt=1e-3, t_max=1.0, t_min=-1.0)
    w = sample_two_sided_bm(spec, 1)
    assert w(0.0) == 0.0 and w.t_min == pytest.approx(-1.0) and w.t_max == pytest.approx(1.0)
    assert np.array_equal(w.values, sample_two_sided_bm(spec, 1).values)


def test_bm_variance_and_covariance():
    spec = BMGridSpec(dt=1e-3, t_max=1.0, t_min=0.0)
    n = 10_000
    a = np.empty(n)
    b = np.empty(n)
    for i in range(n):
        w = sample_two_sided_bm(spec, (4, i))
        a[i], b[i] = w(0.5), w(1.0)
    # Var(W1) = 1: sample variance has SE sqrt(2/(n-1))
    assert abs(b.var(ddof=1) - 1.0) <= 4 * math.sqrt(2 / (n - 1))
    # Cov(W(.5), W(1)) = .5, SE of the product mean
    prod = a * b
    assert abs(prod.mean() - 0.5) <= 4 * prod.std(ddof=1) / math.sqrt(n)


def test_bm_scaling_law():
    r = 4.0
    n = 2000
    base = BMGridSpec(dt=1e-2, t_max=1.0, t_min=0.0)
    wide = BMGridSpec(dt=r * 1e-2, t_max=r, t_min=0.0)
    x = np.array([sample_two_sided_bm(base, (1, i))(0.7) for i in range(n)])
    y = np.array([sample_two_sided_bm(wide, (2, i))(0.7 * r) / math.sqrt(r) for i in range(n)])
    assert stats.ks_2samp(x, y).pvalue > 1e-3


def test_graded_grid_is_horizon_independent():
    short = grid_times(1e-3, 5.0, 1.0)
    long = grid_times(1e-3, 500.0, 1.0)
    assert np.array_equal(long[: short.size], short)
    assert long.size < 1000 + 1000 * math.log(500) + 10
    assert np.all(np.diff(grid_times(1e-3, 5.0)) > 0)
    spec = BMGridSpec(1e-3, 50.0, -50.0, graded_from=1.0)
    w_short = sample_two_sided_bm(spec.with_window(-5, 5), 3)
    w_long = sample_two_sided_bm(spec, 3)
    k = np.searchsorted(w_long.times, w_short.times)
    assert np.array_equal(w_long.values[k], w_short.values)


def test_interpolate_potential():
    flat = potential(Environment(-3, np.full(7, 0.5), 0.5))
    assert np.all(interpolate_potential(flat).values == 0)
    env = Environment(-3, np.full(7, 0.3), 0.3)
    path = interpolate_potential(potential(env))
    right = path.right_half()
    assert np.allclose(np.diff(right.values) / np.diff(right.times), math.log(7 / 3))
    pot = potential(env)
    for n in range(-3, 4):
        assert path(float(n)) == pot(n)


def test_range_first_passage_examples():
    up = PiecewiseLinearPath([0.0, 10.0], [0.0, 10.0])
    assert range_first_passage(up, 0.0) == 0.0
    assert range_first_passage(up, 2.0) == pytest.approx(2.0)
    assert range_first_passage(up, 11.0) is None
    with pytest.raises(ValueError):
        range_first_passage(up, -1.0)
    dip = PiecewiseLinearPath([0.0, 1.0, 4.0], [0.0, -1.0, 2.0])
    # minimum -1 at t=1, then slope 1: range 2 reached at t = 3
    assert range_first_passage(dip, 2.0) == pytest.approx(3.0)


def test_range_first_passage_monotone_in_r():
    w = sample_two_sided_bm(BMGridSpec(1e-3, 10.0, 0.0), 8)
    ds = [range_first_passage(w, r) for r in np.linspace(0, 2, 41)]
    finite = [d for d in ds if d is not None]
    assert all(a <= b for a, b in zip(finite, finite[1:]))


def test_range_first_passage_levy_bound():
    r, T, n = 1.0, 16.0, 1000
    spec = BMGridSpec(1e-3, T, 0.0)
    late = sum(range_first_passage(sample_two_sided_bm(spec, (5, i)), r) is None for i in range(n))
    bound = 2 * r / math.sqrt(T)
    assert late / n <= bound + 4 * math.sqrt(bound * (1 - bound) / n)


def brute_running(path, fn, ts):
    fine = path.right_half()
    out = []
    for t in ts:
        k = np.searchsorted(fine.times, t, side="right")
        vals = np.concatenate([fine.values[:k], [fine(t)]])
        out.append(fn(vals))
    return np.array(out)


def test_running_extremes_examples():
    up = PiecewiseLinearPath([0.0, 3.0], [0.0, 3.0])
    mn, mx = running_extremes(up)
    assert np.all(mn.values == 0.0)
    vee = PiecewiseLinearPath([0.0, 1.0, 2.0], [0.0, -1.0, 1.0])
    mn, _ = running_extremes(vee)
    ts = np.linspace(0, 2, 21)
    assert np.allclose(mn(ts), np.minimum(0, -np.minimum(ts, 1)), atol=1e-15)


def test_running_extremes_match_grid_scan():
    w = sample_two_sided_bm(BMGridSpec(1e-2, 5.0, -1.0), 2)
    mn, mx = running_extremes(w)
    ts = np.linspace(0, 5, 1001)
    assert np.allclose(mn(ts), brute_running(w, np.min, ts), atol=1e-12)
    assert np.allclose(mx(ts), brute_running(w, np.max, ts), atol=1e-12)
    z = w.right_half()
    assert np.all(mn(z.times) <= z.values) and np.all(np.diff(mn.values) <= 0)
    assert np.all(mx(z.times) >= z.values) and np.all(np.diff(mx.values) >= 0)


def test_write_csv():
    buf = io.StringIO()
    PiecewiseLinearPath([0.0, 1.0], [0.0, 0.5]).write_csv(buf)
    assert buf.getvalue().splitlines() == ["t,value", "0.0,0.0", "1.0,0.5"]
