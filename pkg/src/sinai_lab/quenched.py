"""Closed-form quenched quantities for a fixed environment.

All sums of ``exp(V(k))`` are evaluated in log space with a running maximum
shift: potentials with swings of a few hundred overflow double precision
otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import Environment, Potential


@dataclass
class LogSumAccumulator:
    """Running ``sum(exp(v_k))`` stored as ``exp(max_exponent) * residual_sum``."""

    max_exponent: float = -math.inf
    residual_sum: float = 0.0

    def add(self, v: float) -> "LogSumAccumulator":
        if v > self.max_exponent:
            self.residual_sum = self.residual_sum * math.exp(self.max_exponent - v) + 1.0
            self.max_exponent = v
        else:
            self.residual_sum += math.exp(v - self.max_exponent)
        return self

    def extend(self, values) -> "LogSumAccumulator":
        v = np.asarray(values, dtype=float)
        if v.size == 0:
            return self
        m = float(v.max())
        s = math.fsum(np.exp(v - m))
        if m > self.max_exponent:
            self.residual_sum = self.residual_sum * math.exp(self.max_exponent - m) + s
            self.max_exponent = m
        else:
            self.residual_sum += s * math.exp(m - self.max_exponent)
        return self

    def log(self) -> float:
        if self.residual_sum == 0.0:
            return -math.inf
        return self.max_exponent + math.log(self.residual_sum)

    @classmethod
    def of(cls, values) -> "LogSumAccumulator":
        return cls().extend(values)


def _log_sum(pot: Potential, a: int, b: int) -> float:
    """``log(sum_{k=a}^{b} exp(V(k)))``."""
    return LogSumAccumulator.of(pot.segment(a, b)).log()


def _check_order(*xs):
    if any(x >= y for x, y in zip(xs, xs[1:])):
        raise ValueError(f"indices must be strictly increasing, got {xs}")


def exit_prob(pot: Potential, p: int, q: int, r: int) -> float:
    """Probability that the walk started at ``q`` hits ``r`` before ``p``."""
    _check_order(p, q, r)
    return math.exp(_log_sum(pot, p, q - 1) - _log_sum(pot, p, r - 1))


def exit_prob_down(pot: Potential, p: int, q: int, r: int) -> float:
    """Probability that the walk started at ``q`` hits ``p`` before ``r``.

    Computed from its own sum ``sum_{k=q}^{r-1} exp(V(k))`` rather than as a
    complement, so the two probabilities check each other.
    """
    _check_order(p, q, r)
    return math.exp(_log_sum(pot, q, r - 1) - _log_sum(pot, p, r - 1))


def log_exit_time_bound(pot: Potential, env: Environment, g: int, h: int, i: int) -> float:
    """Logarithm of :func:`exit_time_bound`."""
    _check_order(g, h, i)
    V = pot.segment(g, i - 1)
    om = np.array([env.omega(l) for l in range(g, i)])
    # log sum_{l=g}^{k} exp(-V(l)) / omega_l, cumulatively in k
    inner = np.logaddexp.accumulate(-V - np.log(om))
    terms = V[h - g :] + inner[h - g :]
    return LogSumAccumulator.of(terms).log()


def exit_time_bound(pot: Potential, env: Environment, g: int, h: int, i: int) -> float:
    """Upper bound on the mean exit time of ``(g, i)`` from ``h``.

    ``sum_{k=h}^{i-1} sum_{l=g}^{k} exp(V(k) - V(l)) / omega_l``.  This is an
    inequality, not the exact mean.
    """
    return math.exp(log_exit_time_bound(pot, env, g, h, i))


def max_potential_rise(pot: Potential, g: int, i: int) -> float:
    """``max_{g <= l <= k <= i-1} (V(k) - V(l))``."""
    V = pot.segment(g, i - 1)
    return float(np.max(V - np.minimum.accumulate(V)))


def exit_time_crude_bound(pot: Potential, env: Environment, g: int, i: int) -> float:
    """``(i - g)**2 / eps0 * exp(max rise of V on [g, i-1])``, which dominates the double sum."""
    if g >= i:
        raise ValueError("need g < i")
    return (i - g) ** 2 / env.epsilon0 * math.exp(max_potential_rise(pot, g, i))


def local_time_geometric_param(pot: Potential, env: Environment, z: int, p: int, r: int) -> float:
    """Probability of escaping to ``{p, r}`` before returning to ``z``, starting at ``z``.

    The number of visits to ``z`` before exit is geometric on ``{1, 2, ...}``
    with this success parameter.
    """
    _check_order(p, z, r)
    up = 1.0 if z + 1 == r else exit_prob(pot, z, z + 1, r)
    down = 1.0 if z - 1 == p else exit_prob_down(pot, p, z - 1, z)
    w = env.omega(z)
    return w * up + (1.0 - w) * down


def expected_local_time(
    pot: Potential, env: Environment, q: int, z: int, p: int, r: int
) -> float:
    """Mean number of visits to ``z`` before leaving ``(p, r)``, starting from ``q``."""
    if not (p < z < r and p < q < r):
        raise ValueError(f"need p < z < r and p < q < r, got p={p}, q={q}, z={z}, r={r}")
    if z == q:
        reach = 1.0
    elif z < q:
        reach = exit_prob_down(pot, z, q, r)
    else:
        reach = exit_prob(pot, p, q, z)
    return reach / local_time_geometric_param(pot, env, z, p, r)
