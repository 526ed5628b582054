"""Monte Carlo campaigns: persistence of additive functionals of Sinai's
walk, the exponent fit, and the Brownian valley-bottom statistics behind it.

Every trial draws its randomness from ``(master_seed, purpose, index)``, so
results do not depend on the number of workers or on scheduling.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from . import _seeding
from .env import EnvDistribution, potential, sample_environment
from .extrema import CertificationError, excess_samples, sweep_sign_changes, valley_bottom
from .plpath import BMGridSpec, interpolate_potential, sample_two_sided_bm
from .walk import FunctionalSpec, PersistenceTrialConfig, first_violation, simulate

PERSISTENCE_EXPONENT = (3 - math.sqrt(5)) / 2
C4 = 0.5 + 7 * math.sqrt(5) / 30


@dataclass(frozen=True)
class EstimateWithCI:
    """Binomial proportion with its 95% Wilson interval."""

    point: float
    ci_low: float
    ci_high: float
    n_trials: int
    successes: int

    @classmethod
    def from_counts(cls, successes: int, n: int, confidence: float = 0.95):
        if n < 1:
            raise ValueError("need at least one trial")
        ci = stats.binomtest(int(successes), int(n)).proportion_ci(confidence, method="wilson")
        p = successes / n
        return cls(p, min(float(ci.low), p), max(float(ci.high), p), int(n), int(successes))

    @property
    def se(self) -> float:
        return math.sqrt(self.point * (1 - self.point) / self.n_trials)


@dataclass(frozen=True)
class ExponentFit:
    """Least-squares line through ``(log log N, log p)`` with a 95% slope interval."""

    slope: float
    intercept: float
    stderr: float
    r_squared: float
    points: tuple
    ci_low: float
    ci_high: float

    def contains(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high

    def overlaps(self, other: "ExponentFit") -> bool:
        return self.ci_low <= other.ci_high and other.ci_low <= self.ci_high


def fit_exponent(estimates) -> ExponentFit:
    """Fit ``log p(N) = slope * log log N + intercept``.

    ``estimates`` is a sequence of ``(N, p)`` pairs where ``p`` is a float or
    an :class:`EstimateWithCI`.  Degenerate estimates (0 or 1) are dropped
    with a warning.
    """
    pts = []
    for N, est in estimates:
        p = est.point if isinstance(est, EstimateWithCI) else float(est)
        if not 0 < p < 1:
            warnings.warn(f"dropping degenerate estimate p = {p} at N = {N}", stacklevel=2)
            continue
        if not N > 1:
            raise ValueError("horizons must exceed 1")
        pts.append((math.log(math.log(N)), math.log(p)))
    if len(pts) < 3:
        raise ValueError("fitting needs at least 3 non-degenerate horizons")
    x, y = np.array(pts).T
    r = stats.linregress(x, y)
    q = stats.t.ppf(0.975, len(pts) - 2)
    return ExponentFit(
        float(r.slope), float(r.intercept), float(r.stderr), float(r.rvalue**2),
        tuple(pts), float(r.slope - q * r.stderr), float(r.slope + q * r.stderr),
    )


@dataclass(frozen=True)
class PersistenceCampaign:
    """Annealed persistence estimate over increasing horizons.

    Trial ``i`` uses environment ``i // walks_per_env``, drawn fresh from
    ``distribution``, and its own walk.
    """

    distribution: EnvDistribution
    horizons: tuple
    functional: FunctionalSpec = FunctionalSpec()
    u: float = 0.0
    n_envs: int = 1000
    walks_per_env: int = 1
    master_seed: int = 0

    def __post_init__(self):
        h = tuple(int(n) for n in self.horizons)
        object.__setattr__(self, "horizons", h)
        if not h or any(a >= b for a, b in zip(h, h[1:])) or h[0] < 1:
            raise ValueError("horizons must be positive and strictly increasing")
        if self.n_envs < 1 or self.walks_per_env < 1:
            raise ValueError("n_envs and walks_per_env must be >= 1")
        if not self.u <= 0:
            raise ValueError("u must be <= 0")

    @property
    def n_trials(self) -> int:
        return self.n_envs * self.walks_per_env


@dataclass
class PersistenceResult:
    campaign: PersistenceCampaign
    estimates: list
    first_violations: np.ndarray | None = field(default=None, repr=False)


_NEVER = np.iinfo(np.int64).max
_BLOCK = 64


def resolve_workers(n_workers: int | None) -> int:
    if n_workers is None:
        n_workers = int(os.environ.get("SINAI_LAB_WORKERS", "1"))
    if n_workers < 1:
        raise ValueError("number of workers must be >= 1")
    return n_workers


def _map_blocks(fn, n_items: int, n_workers: int | None):
    """Apply ``fn(lo, hi)`` over fixed index blocks and concatenate in block order."""
    n_workers = resolve_workers(n_workers)
    bounds = [(lo, min(lo + _BLOCK, n_items)) for lo in range(0, n_items, _BLOCK)]
    if n_workers == 1:
        parts = [fn(lo, hi) for lo, hi in bounds]
    else:
        with ThreadPoolExecutor(n_workers) as ex:
            parts = list(ex.map(lambda b: fn(*b), bounds))
    return [x for part in parts for x in part]


def _violation_times(camp: PersistenceCampaign, horizon: int, tag: tuple, n_workers):
    cfg = PersistenceTrialConfig(horizon, camp.u, camp.functional)
    wpe = camp.walks_per_env
    seed = camp.master_seed

    def block(lo, hi):
        out = []
        for e in range(lo, hi):
            env = sample_environment(camp.distribution, 64, _seeding.child(seed, _seeding.ENV, *tag, e))
            for w in range(wpe):
                fv = first_violation(env, cfg, _seeding.child(seed, _seeding.WALK, *tag, e, w))
                out.append(_NEVER if fv is None else fv)
        return out

    return np.array(_map_blocks(block, camp.n_envs, n_workers), dtype=np.int64)


def run_persistence(
    camp: PersistenceCampaign, n_workers: int | None = None, mode: str = "shared"
) -> PersistenceResult:
    """Per-horizon persistence frequencies with Wilson intervals.

    ``shared`` runs each trial once up to the largest horizon and reads every
    horizon off its first violation time, so the indicators are pathwise
    monotone in ``N``.  ``independent`` uses fresh trials for every horizon.
    """
    if mode == "shared":
        fv = _violation_times(camp, camp.horizons[-1], (0,), n_workers)
        ests = [EstimateWithCI.from_counts(int(np.sum(fv > N)), fv.size) for N in camp.horizons]
        return PersistenceResult(camp, list(zip(camp.horizons, ests)), fv)
    if mode == "independent":
        ests = []
        for h, N in enumerate(camp.horizons):
            fv = _violation_times(camp, N, (1, h), n_workers)
            ests.append((N, EstimateWithCI.from_counts(int(np.sum(fv > N)), fv.size)))
        return PersistenceResult(camp, ests)
    raise ValueError("mode must be 'shared' or 'independent'")


def rate_function(x: float) -> float:
    """Large-deviation rate of the number of sign changes of ``b`` per unit ``log x``.

    ``I(x) = x log(2x(x + sqrt(x^2 + 5/4))) + 3/2 - (x + sqrt(x^2 + 5/4))``
    with ``I(0) = (3 - sqrt(5))/2`` by continuity.
    """
    if x < 0:
        raise ValueError("the rate function is infinite for x < 0")
    r = math.sqrt(x * x + 1.25)
    if x == 0:
        return 1.5 - r
    return x * math.log(2 * x * (x + r)) + 1.5 - (x + r)


def rate_function_derivative(x: float) -> float:
    """``I'(x) = log(2x(x + sqrt(x^2 + 5/4)))`` for ``x > 0``."""
    if x <= 0:
        raise ValueError("derivative is defined for x > 0")
    return math.log(2 * x * (x + math.sqrt(x * x + 1.25)))


def rate_function_minimizer(lo: float = 1e-6, hi: float = 10.0, xtol: float = 1e-14) -> float:
    """Zero of ``I``, found by bisection on ``I'``.

    ``I`` is convex and non-negative, so its zero is a double root where the
    sign of ``I`` itself never changes; the sign change of ``I'`` brackets it.
    """
    return float(optimize.bisect(rate_function_derivative, lo, hi, xtol=xtol))


# Brownian valley-bottom experiments

def default_bm_grid() -> BMGridSpec:
    """Graded grid: cells of 1e-3 near the origin, 1e-3 * |t| beyond ``|t| = 1``."""
    return BMGridSpec(dt=1e-3, t_max=16.0, t_min=-16.0, graded_from=1.0)


def _grown(spec: BMGridSpec, T: float) -> BMGridSpec:
    return spec.with_window(-T, T)


def _certified_sweep(spec, seed, c, x_max, a=0.0, attempts=10, grow=4.0):
    """Sweep on a window widened until certified, or ``None`` if it never is."""
    T = max(spec.t_max, -spec.t_min, 16.0 * x_max**2)
    for _ in range(attempts):
        path = sample_two_sided_bm(_grown(spec, T), seed)
        try:
            rec = sweep_sign_changes(path, c, x_max, a)
        except CertificationError:
            T *= grow
            continue
        if rec.excess_certified:
            return rec
        T *= grow
    return None


@dataclass(frozen=True)
class MeanWithCI:
    mean: float
    ci_low: float
    ci_high: float
    n_used: int
    n_censored: int


def _mean_ci(x, censored):
    x = np.asarray(x, float)
    m = float(x.mean())
    h = 1.96 * float(x.std(ddof=1)) / math.sqrt(x.size) if x.size > 1 else math.inf
    return MeanWithCI(m, m - h, m + h, int(x.size), int(censored))


def sign_change_rate_check(
    bm_spec: BMGridSpec | None, t_values, n_samples: int, seed, n_workers=None, c: float = 1.0
) -> list:
    """Mean of ``k(e^t) / t``, the number of sign changes of ``b`` in ``[1, e^t]`` per unit ``t``.

    Returns ``(t, MeanWithCI)`` rows.  Each path is swept once up to the
    largest ``t``; samples whose window never certifies are censored.
    """
    spec = bm_spec or default_bm_grid()
    ts = [float(t) for t in t_values if t > 0]
    if not ts:
        raise ValueError("need at least one positive t")
    tmax = max(ts)

    def block(lo, hi):
        return [
            _certified_sweep(spec, _seeding.child(seed, _seeding.TRIAL, j), c, c * math.exp(tmax))
            for j in range(lo, hi)
        ]

    recs = _map_blocks(block, n_samples, n_workers)
    ok = [r for r in recs if r is not None]
    cens = len(recs) - len(ok)
    return [(t, _mean_ci([r.count(c * math.exp(t)) / t for r in ok], cens)) for t in ts]


def sign_persistence_constant(
    bm_spec: BMGridSpec | None, x_values, n_samples: int, seed, n_workers=None
) -> list:
    """``(x, q(x), q(x) * x**((3 - sqrt 5)/2))`` rows, ``q(x)`` the frequency of no sign change in ``[1, x]``."""
    spec = bm_spec or default_bm_grid()
    xs = [float(x) for x in x_values]
    if any(x < 1 for x in xs):
        raise ValueError("x values must be >= 1")
    xmax = max(xs)

    def block(lo, hi):
        return [
            _certified_sweep(spec, _seeding.child(seed, _seeding.TRIAL, j), 1.0, xmax)
            for j in range(lo, hi)
        ]

    recs = [r for r in _map_blocks(block, n_samples, n_workers) if r is not None]
    rows = []
    for x in xs:
        # b(1) and b(x) share a sign iff no change lies in (1, x]
        k = sum(1 for r in recs if r.count(x) == 0)
        est = EstimateWithCI.from_counts(k, len(recs))
        rows.append((x, est, est.point * x**PERSISTENCE_EXPONENT))
    return rows


def strong_change_bound(a: float, k: int) -> float:
    """``(1 - exp(-2a))**(k - 1)``."""
    return (1 - math.exp(-2 * a)) ** (k - 1)


def strong_change_absence(
    bm_spec: BMGridSpec | None, a: float, c: float, k_values, n_samples: int, seed,
    n_workers=None,
) -> list:
    """Frequency of the event that none of ``X_1, ..., X_{2k}`` is an ``a``-strong change with ``b(X_i) > 0``.

    ``b(X_i)`` is the bottom at the change scale itself, i.e. before the jump.
    Returns ``(k, EstimateWithCI, bound)`` rows.
    """
    spec = bm_spec or default_bm_grid()
    ks = [int(k) for k in k_values]
    need = 2 * max(ks)

    def one(j):
        s = _seeding.child(seed, _seeding.TRIAL, j)
        span = 3.0 * need + 6.0
        for _ in range(6):
            rec = _certified_sweep(spec, s, c, c * math.exp(span), a)
            if rec is None or len(rec.changes) >= need:
                return rec
            span *= 1.5
        return None

    recs = _map_blocks(lambda lo, hi: [one(j) for j in range(lo, hi)], n_samples, n_workers)
    ok = [r for r in recs if r is not None]
    rows = []
    for k in ks:
        hits = 0
        for r in ok:
            bad = any(
                ch.positive_before and strong
                for ch, strong in zip(r.changes[: 2 * k], r.strong_flags[: 2 * k])
            )
            hits += not bad
        rows.append((k, EstimateWithCI.from_counts(hits, len(ok)), strong_change_bound(a, k)))
    return rows


def _bm_at_scale(x, dt, seed, attempts=8):
    T = 16.0 * x * x
    spec = BMGridSpec(dt, T, -T)
    for _ in range(attempts):
        yield sample_two_sided_bm(spec.with_window(-T, T), seed)
        T *= 2


def excess_samples_bm(x: float, n_samples: int, seed, dt: float = 1e-4, n_workers=None):
    """``(e(T_-1), e(T_0), e(T_1))`` at scale ``x`` for independent Brownian paths.

    Returns an ``(n_used, 3)`` array and the number of censored samples.
    """
    def one(j):
        for path in _bm_at_scale(x, dt, _seeding.child(seed, _seeding.TRIAL, j)):
            try:
                return excess_samples(path, x)
            except CertificationError:
                continue
        return None

    res = _map_blocks(lambda lo, hi: [one(j) for j in range(lo, hi)], n_samples, n_workers)
    ok = [r for r in res if r is not None]
    return np.array(ok, dtype=float).reshape(-1, 3), len(res) - len(ok)


def valley_bottom_samples(x: float, n_samples: int, seed, dt: float = 1e-3, n_workers=None):
    """``b(x)`` for independent Brownian paths on a uniform grid; returns values and censored count."""

    def one(j):
        for path in _bm_at_scale(x, dt, _seeding.child(seed, _seeding.TRIAL, j)):
            try:
                return valley_bottom(path, x)[0]
            except CertificationError:
                continue
        return None

    res = _map_blocks(lambda lo, hi: [one(j) for j in range(lo, hi)], n_samples, n_workers)
    ok = [r for r in res if r is not None]
    return np.array(ok, dtype=float), len(res) - len(ok)


@dataclass
class LocalizationReport:
    """Per-trial rows ``(trial, S_N, b, (S_N - b)/log^2 N, sigma^2 S_N/log^2 N)`` and medians."""

    N: int
    rows: list
    median_abs_offset: float
    median_abs_scaled: float


def localization_diagnostic(dist: EnvDistribution, N: int, n_trials: int, seed, n_workers=None):
    """Compare the walk at time ``N`` with the valley bottom of its potential at scale ``log N``."""
    if N < 1000:
        raise ValueError("N must be at least 1000")
    logN = math.log(N)
    scale = logN**2

    def one(i):
        es = _seeding.child(seed, _seeding.ENV, i)
        hw = max(64, int(4 * scale / dist.sigma**2))
        for _ in range(12):
            env = sample_environment(dist, hw, es)
            try:
                b, _ = valley_bottom(interpolate_potential(potential(env)), logN)
                break
            except CertificationError:
                hw *= 2
        else:
            return (i, math.nan, math.nan, math.nan, math.nan)
        S = simulate(env, N, _seeding.child(seed, _seeding.WALK, i)).final_position
        return (i, S, b, (S - b) / scale, dist.sigma**2 * S / scale)

    rows = _map_blocks(lambda lo, hi: [one(i) for i in range(lo, hi)], n_trials, n_workers)
    off = np.array([r[3] for r in rows], float)
    sc = np.array([r[4] for r in rows], float)
    return LocalizationReport(
        N, rows, float(np.nanmedian(np.abs(off))), float(np.nanmedian(np.abs(sc)))
    )
