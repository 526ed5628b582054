"""Piecewise-linear paths: discretised two-sided Brownian motion and
interpolated potentials, with exact range and running-extreme utilities.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import _seeding
from .env import Potential


@dataclass(frozen=True, eq=False)
class PiecewiseLinearPath:
    """Continuous path through ``(times[j], values[j])``, linear in between."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        v = np.array(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 2:
            raise ValueError("need matching 1-d times and values with at least 2 points")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ValueError("path breakpoints must be finite")
        if np.any(np.diff(t) <= 0):
            raise ValueError("breakpoint times must be strictly increasing")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def t_min(self) -> float:
        return float(self.times[0])

    @property
    def t_max(self) -> float:
        return float(self.times[-1])

    @property
    def value_at_0(self) -> float:
        return self(0.0)

    def __call__(self, t):
        if np.any(np.asarray(t) < self.t_min) or np.any(np.asarray(t) > self.t_max):
            raise ValueError("time outside the path window")
        out = np.interp(t, self.times, self.values)
        return float(out) if np.ndim(out) == 0 else out

    def right_half(self) -> "PiecewiseLinearPath":
        """The path on ``[0, t_max]``, with a breakpoint inserted at 0 if needed."""
        if self.t_min > 0 or self.t_max <= 0:
            raise ValueError("path window must contain [0, t] for some t > 0")
        k = np.searchsorted(self.times, 0.0, side="left")
        t, v = self.times[k:], self.values[k:]
        if t[0] != 0.0:
            t = np.concatenate([[0.0], t])
            v = np.concatenate([[self(0.0)], v])
        return PiecewiseLinearPath(t, v)

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "value"])
        for a, b in zip(self.times.tolist(), self.values.tolist()):
            w.writerow([repr(a), repr(b)])


@dataclass(frozen=True)
class BMGridSpec:
    """Grid for two-sided Brownian motion on ``[t_min, t_max]``.

    With ``graded_from = g`` the cells have length ``dt`` on ``[-g, g]`` and
    grow proportionally to ``|t|`` beyond, ``dt * |t| / g``, so the path keeps
    a fixed relative resolution at every time scale and long horizons cost
    only logarithmically many points.  The grid never depends on the horizon,
    so a longer window reproduces the shorter one exactly.
    """

    dt: float
    t_max: float
    t_min: float
    sigma_scale: float = 1.0
    graded_from: float | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_min <= 0 <= self.t_max:
            raise ValueError("need t_min <= 0 <= t_max")
        if not self.sigma_scale > 0:
            raise ValueError("sigma_scale must be positive")
        if self.graded_from is not None and not self.graded_from >= self.dt:
            raise ValueError("graded_from must be at least dt")

    def with_window(self, t_min: float, t_max: float) -> "BMGridSpec":
        return BMGridSpec(self.dt, t_max, t_min, self.sigma_scale, self.graded_from)


def grid_times(dt: float, horizon: float, graded_from: float | None = None) -> np.ndarray:
    """Positive grid times ``t_1 < t_2 < ...`` up to the first one ``>= horizon``."""
    if horizon <= 0:
        return np.empty(0)
    if graded_from is None:
        n = max(1, math.ceil(horizon / dt - 1e-9))
        return dt * np.arange(1, n + 1)
    J = math.ceil(graded_from / dt - 1e-9)
    tJ = J * dt
    if horizon <= tJ:
        n = max(1, math.ceil(horizon / dt - 1e-9))
        return dt * np.arange(1, n + 1)
    rho = 1.0 + dt / graded_from
    k = math.ceil(math.log(horizon / tJ) / math.log(rho) - 1e-9)
    return np.concatenate([dt * np.arange(1, J + 1), tJ * rho ** np.arange(1, k + 1)])


def _half(spec: BMGridSpec, horizon: float, seed, side: int):
    t = grid_times(spec.dt, horizon, spec.graded_from)
    if t.size == 0:
        return t, t
    h = np.diff(np.concatenate([[0.0], t]))
    z = _seeding.generator(seed, _seeding.BM, side).standard_normal(t.size)
    return t, np.cumsum(z * np.sqrt(h)) * spec.sigma_scale


def sample_two_sided_bm(spec: BMGridSpec, seed) -> PiecewiseLinearPath:
    """Two independent Brownian halves glued at ``W(0) = 0``.

    The left half uses the sub-stream ``(seed, BM, 0)`` and the right half
    ``(seed, BM, 1)``; each half's increments are drawn sequentially along its
    grid, so widening the window only appends points.
    """
    tl, vl = _half(spec, -spec.t_min, seed, 0)
    tr, vr = _half(spec, spec.t_max, seed, 1)
    t = np.concatenate([-tl[::-1], [0.0], tr])
    v = np.concatenate([vl[::-1], [0.0], vr])
    return PiecewiseLinearPath(t, v)


def interpolate_potential(pot: Potential) -> PiecewiseLinearPath:
    """Linear interpolation of ``V`` between integer sites."""
    t = np.arange(pot.lo, pot.hi + 1, dtype=float)
    return PiecewiseLinearPath(t, pot.values)


def range_first_passage(path: PiecewiseLinearPath, r: float) -> float | None:
    """``inf{t >= 0 : Z(t) - min_{[0, t]} Z >= r}``, solved exactly on segments."""
    if r < 0:
        raise ValueError("r must be non-negative")
    z = path.right_half()
    t, v = z.times, z.values
    m = np.minimum.accumulate(v)
    hit = np.nonzero(v - m >= r)[0]
    if hit.size == 0:
        return None
    j = int(hit[0])
    if j == 0:
        return 0.0
    # the running minimum is m[j-1] throughout the rising segment (j-1, j)
    s = (v[j] - v[j - 1]) / (t[j] - t[j - 1])
    return float(t[j - 1] + (m[j - 1] + r - v[j - 1]) / s)


def _running(t, v, ext):
    m = ext.accumulate(v)
    prev = m[:-1]
    # a segment reaching a new extreme from strictly inside: insert the crossing point
    new = ext(v[1:], prev) != prev
    cross = new & (v[:-1] != prev)
    j = np.nonzero(cross)[0]
    tc = t[j] + (prev[j] - v[j]) / (v[j + 1] - v[j]) * (t[j + 1] - t[j])
    tt = np.concatenate([t, tc])
    vv = np.concatenate([m, prev[j]])
    order = np.argsort(tt, kind="stable")
    tt, vv = tt[order], vv[order]
    keep = np.concatenate([[True], np.diff(tt) > 0])
    return PiecewiseLinearPath(tt[keep], vv[keep])


def running_extremes(path: PiecewiseLinearPath):
    """Exact running minimum and maximum of the path on ``[0, t_max]``."""
    z = path.right_half()
    return _running(z.times, z.values, np.minimum), _running(z.times, z.values, np.maximum)
