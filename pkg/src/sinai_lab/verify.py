"""Cross-validation of the closed-form quenched formulas against simulation.

Each check draws random two-point environments and random sites, evaluates
the closed form, simulates exits, and reports one row per case:
``(case, closed_form, mc_estimate, se, pass)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _seeding
from . import quenched as Q
from .env import make_distribution, potential, sample_environment
from .walk import exit_trials

P_RANGE = (0.3, 0.45)
HALF_WIDTH = 10


@dataclass(frozen=True)
class CaseResult:
    case: str
    closed_form: float
    mc_estimate: float
    se: float
    passed: bool


def _random_env(rng, seed):
    p = float(rng.uniform(*P_RANGE))
    env = sample_environment(make_distribution("two-point", {"p": p}), HALF_WIDTH, seed)
    return env, potential(env)


def _sites(rng, k, lo=-HALF_WIDTH, hi=HALF_WIDTH, min_span=2):
    """``k`` distinct sorted sites in ``[lo, hi]`` whose extremes differ by at least ``min_span``."""
    while True:
        s = np.sort(rng.choice(np.arange(lo, hi + 1), size=k, replace=False))
        if s[-1] - s[0] >= min_span:
            return [int(v) for v in s]


def check_exit_prob(n_cases=200, n_walks=20000, seed=0, z=4.0):
    """Probability of leaving ``(p, r)`` through ``r`` from ``q``."""
    rng = _seeding.generator(seed, 0)
    out = []
    for i in range(n_cases):
        env, pot = _random_env(rng, _seeding.child(seed, 0, 1, i))
        p, q, r = _sites(rng, 3)
        cf = Q.exit_prob(pot, p, q, r)
        b = exit_trials(env, q, p, r, n_walks, _seeding.child(seed, 0, 2, i))
        mc = float(b.exit_right.mean())
        se = math.sqrt(cf * (1 - cf) / n_walks)
        out.append(CaseResult(f"exit_prob/{i}", cf, mc, se, abs(mc - cf) <= z * se))
    return out


def _mean_se(x):
    x = np.asarray(x, float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def _close(cf, mc, se, z):
    return abs(mc - cf) <= z * se or abs(mc - cf) <= 1e-12 * max(1.0, abs(cf))


def check_local_time(n_cases=200, n_trials=10000, seed=0, z=4.0):
    """Mean number of visits to ``z`` before leaving ``(p, r)``, from ``q``."""
    rng = _seeding.generator(seed, 1)
    out = []
    for i in range(n_cases):
        env, pot = _random_env(rng, _seeding.child(seed, 1, 1, i))
        p, r = _sites(rng, 2, min_span=3)
        site, q = (int(v) for v in rng.integers(p + 1, r, size=2))
        cf = Q.expected_local_time(pot, env, q, site, p, r)
        b = exit_trials(env, q, p, r, n_trials, _seeding.child(seed, 1, 2, i))
        mc, se = _mean_se(b.local_time_at(site))
        out.append(CaseResult(f"local_time/{i}", cf, mc, se, _close(cf, mc, se, z)))
    return out


def geometric_gof(samples, param):
    """Chi-square p-value of samples on ``{1, 2, ...}`` against Geometric(``param``).

    Cells with expected count below 5 are pooled into a tail cell.
    """
    x = np.asarray(samples)
    n = x.size
    if param >= 1.0:
        return 1.0 if np.all(x == 1) else 0.0
    kmax = 1
    while n * stats.geom.pmf(kmax + 1, param) >= 5 and n * stats.geom.sf(kmax + 1, param) >= 5:
        kmax += 1
    ks = np.arange(1, kmax + 1)
    obs = np.array([np.sum(x == k) for k in ks] + [np.sum(x > kmax)], float)
    exp = n * np.concatenate([stats.geom.pmf(ks, param), [stats.geom.sf(kmax, param)]])
    if obs.size < 2:
        return 1.0
    return float(stats.chisquare(obs, exp).pvalue)


def check_geometric(n_cases=50, n_trials=100000, seed=0, z=4.0, alpha=1e-3):
    """Visits to ``z`` before exit, from ``z``: mean ``1/param`` and geometric shape."""
    rng = _seeding.generator(seed, 2)
    out = []
    for i in range(n_cases):
        env, pot = _random_env(rng, _seeding.child(seed, 2, 1, i))
        p, r = _sites(rng, 2, min_span=4)
        site = int(rng.integers(p + 1, r))
        prm = Q.local_time_geometric_param(pot, env, site, p, r)
        b = exit_trials(env, site, p, r, n_trials, _seeding.child(seed, 2, 2, i))
        L = b.local_time_at(site)
        mc, se = _mean_se(L)
        gof = geometric_gof(L, prm)
        ok = _close(1 / prm, mc, se, z) and gof > alpha
        out.append(CaseResult(f"geometric/{i}", 1 / prm, mc, se, ok))
    return out


def check_exit_time_bound(n_cases=200, n_trials=10000, seed=0):
    """Mean exit time ``<=`` the double-sum bound ``<=`` the crude bound."""
    rng = _seeding.generator(seed, 3)
    out = []
    for i in range(n_cases):
        env, pot = _random_env(rng, _seeding.child(seed, 3, 1, i))
        g, h, k = _sites(rng, 3)
        bound = Q.exit_time_bound(pot, env, g, h, k)
        crude = Q.exit_time_crude_bound(pot, env, g, k)
        b = exit_trials(env, h, g, k, n_trials, _seeding.child(seed, 3, 2, i))
        mc, se = _mean_se(b.exit_times)
        out.append(CaseResult(f"exit_time_bound/{i}", bound, mc, se, mc <= bound <= crude))
    return out


CHECKS = {
    "exit_prob": (check_exit_prob, 0.975),
    "local_time": (check_local_time, 0.975),
    "geometric": (check_geometric, 1.0),
    "exit_time_bound": (check_exit_time_bound, 1.0),
}


def run_suite(seed=0, scale: float = 1.0):
    """All checks; ``scale`` shrinks case and trial counts for quick runs.

    Returns the rows and, per check, ``(n_passed, n_cases, meets_threshold)``.
    """
    sizes = {
        "exit_prob": (200, 20000),
        "local_time": (200, 10000),
        "geometric": (50, 100000),
        "exit_time_bound": (200, 10000),
    }
    rows, summary = [], {}
    for name, (fn, frac) in CHECKS.items():
        nc, nt = sizes[name]
        nc, nt = max(1, round(nc * scale)), max(100, round(nt * scale))
        res = fn(nc, nt, seed)
        k = sum(r.passed for r in res)
        rows += res
        summary[name] = (k, len(res), k >= math.ceil(frac * len(res) - 1e-9))
    return rows, summary


def write_csv(rows, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["case", "closed_form", "mc_estimate", "se", "pass"])
    for r in rows:
        w.writerow([r.case, repr(r.closed_form), repr(r.mc_estimate), repr(r.se), int(r.passed)])
