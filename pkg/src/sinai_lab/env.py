"""Random environments for Sinai's walk and their potential.

An environment assigns to every site ``i`` the probability ``omega_i`` of
stepping right.  The laws shipped here are elliptic (``eps0 <= omega <=
1 - eps0``), have log-odds ``log((1 - omega)/omega)`` of mean zero, which
makes the walk recurrent, and are non-degenerate (``sigma > 0``).

Environments are finite windows of an infinite i.i.d. sequence.  Sites are
drawn in blocks of ``BLOCK`` sites, each block from its own sub-seed, so a
window can be widened later without changing any site already drawn.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _seeding

BLOCK = 256
FAMILIES = ("two-point", "uniform-log-odds", "table", "mirror-table")
DIAGNOSTIC_FAMILIES = ("constant",)
_MEAN_TOL = 1e-12


@dataclass(frozen=True)
class EnvDistribution:
    """Law of a single transition probability ``omega``.

    ``support`` and ``weights`` describe discrete families; the uniform
    log-odds family is continuous and keeps them empty.
    """

    kind: str
    params: dict
    epsilon0: float
    sigma: float
    support: tuple = ()
    weights: tuple = ()
    diagnostic: bool = False

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    def sample(self, u: np.ndarray) -> np.ndarray:
        """Transform uniforms on [0, 1) into transition probabilities."""
        if self.kind == "uniform-log-odds":
            lam = self.params["lam"]
            return 1.0 / (1.0 + np.exp(lam * (2.0 * u - 1.0)))
        if len(self.support) == 1:
            return np.full(u.shape, self.support[0])
        cdf = np.cumsum(self.weights)
        cdf[-1] = 1.0
        idx = np.searchsorted(cdf, u, side="right")
        return np.asarray(self.support)[idx]


def _log_odds(w):
    return np.log1p(-np.asarray(w, dtype=float)) - np.log(w)


def _discrete(kind, params, support, weights, eps_claim, diagnostic):
    support = np.asarray(support, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if support.ndim != 1 or support.shape != weights.shape or support.size == 0:
        raise ValueError("table needs matching non-empty 'values' and 'weights'")
    if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
        raise ValueError("table weights must be positive")
    if np.any(support <= 0) or np.any(support >= 1):
        raise ValueError("transition probabilities must lie strictly inside (0, 1)")
    weights = weights / weights.sum()
    lo = float(np.min(np.minimum(support, 1 - support)))
    eps0 = _check_epsilon(eps_claim, lo)
    L = _log_odds(support)
    mean = float(np.dot(weights, L))
    sigma = math.sqrt(float(np.dot(weights, L * L)))
    if not diagnostic:
        if abs(mean) > _MEAN_TOL:
            raise ValueError(
                f"log-odds mean {mean:.3e} is not zero; the walk would be transient"
            )
        if sigma == 0.0:
            raise ValueError("sigma = 0: the environment is degenerate (omega = 1/2)")
    return EnvDistribution(
        kind, dict(params), eps0, sigma, tuple(support), tuple(weights), diagnostic
    )


def _check_epsilon(claim, tight):
    """Validate a claimed ellipticity bound against the support's tightest one."""
    if claim is None:
        if not 0 < tight <= 0.5:
            raise ValueError("ellipticity bound must lie in (0, 1/2)")
        return tight
    claim = float(claim)
    if not 0 < claim < 0.5:
        raise ValueError(
            f"epsilon0 = {claim} violates the ellipticity bound 0 < eps0 < 1/2 "
            "(eps0 <= omega <= 1 - eps0)"
        )
    if tight < claim:
        raise ValueError(
            f"support reaches {tight}, outside [eps0, 1 - eps0] for eps0 = {claim}"
        )
    return claim


def make_distribution(kind: str, params: dict | None = None, diagnostic: bool = False):
    """Build a validated environment law.

    Families:

    * ``two-point``: ``omega in {p, 1 - p}`` with equal weights (``p``).
    * ``uniform-log-odds``: ``log((1 - omega)/omega)`` uniform on
      ``[-lam, lam]`` (``lam``).
    * ``table``: explicit ``values``/``weights``; the log-odds mean must be 0.
    * ``mirror-table``: ``values``/``weights`` symmetrised by adding ``1 - v``
      with the same weight, which centres the log-odds exactly.
    * ``constant`` (diagnostic only): ``omega`` fixed; violates centering or
      non-degeneracy and exists for sanity checks.

    Any family accepts an ``epsilon0`` entry claiming an ellipticity bound,
    which is checked against the support.
    """
    params = dict(params or {})
    eps_claim = params.pop("epsilon0", None)
    if kind == "two-point":
        _require(params, kind, {"p"})
        p = float(params["p"])
        if not 0 < p < 1:
            raise ValueError("p must lie in (0, 1)")
        return _discrete(kind, {"p": p}, [p, 1 - p], [0.5, 0.5], eps_claim, diagnostic)
    if kind == "uniform-log-odds":
        _require(params, kind, {"lam"})
        lam = float(params["lam"])
        if not lam > 0 or not math.isfinite(lam):
            raise ValueError("lam must be positive: lam = 0 is the degenerate omega = 1/2")
        tight = 1.0 / (1.0 + math.exp(lam))
        eps0 = _check_epsilon(eps_claim, tight)
        return EnvDistribution(kind, {"lam": lam}, eps0, lam / math.sqrt(3.0))
    if kind in ("table", "mirror-table"):
        _require(params, kind, {"values", "weights"})
        v = [float(x) for x in params["values"]]
        w = [float(x) for x in params["weights"]]
        stored = {"values": v, "weights": w}
        if kind == "mirror-table":
            v, w = v + [1 - x for x in v], w + w
        return _discrete(kind, stored, v, w, eps_claim, diagnostic)
    if kind == "constant":
        if not diagnostic:
            raise ValueError(
                "constant environments violate centering or non-degeneracy; "
                "pass diagnostic=True to use them for sanity checks"
            )
        _require(params, kind, {"omega"})
        om = float(params["omega"])
        return _discrete(kind, {"omega": om}, [om], [1.0], eps_claim, True)
    raise ValueError(f"unknown distribution kind {kind!r}; expected one of {FAMILIES}")


def _require(params, kind, keys):
    missing = keys - params.keys()
    extra = params.keys() - keys
    if missing:
        raise ValueError(f"{kind} distribution needs {sorted(missing)}")
    if extra:
        raise ValueError(f"unknown parameters for {kind}: {sorted(extra)}")


def _block_key(j: int) -> tuple[int, int]:
    return (0, j) if j >= 0 else (1, -j - 1)


def _draw_blocks(dist: EnvDistribution, seed, j0: int, j1: int) -> np.ndarray:
    parts = []
    for j in range(j0, j1 + 1):
        u = _seeding.generator(seed, _seeding.ENV, *_block_key(j)).random(BLOCK)
        parts.append(dist.sample(u))
    return np.concatenate(parts)


@dataclass(frozen=True, eq=False)
class Environment:
    """Transition probabilities ``omegas[i - offset]`` for sites in the window.

    Environments drawn from a law remember it together with their seed, which
    lets :meth:`extended` widen the window consistently.
    """

    offset: int
    omegas: np.ndarray
    epsilon0: float
    distribution: EnvDistribution | None = field(default=None, repr=False)
    seed: tuple | None = None

    def __post_init__(self):
        om = np.array(self.omegas, dtype=float)
        om.setflags(write=False)
        object.__setattr__(self, "omegas", om)
        if om.ndim != 1 or om.size == 0:
            raise ValueError("omegas must be a non-empty 1-d sequence")
        if not self.offset <= 0 <= self.offset + om.size - 1:
            raise ValueError("window must contain site 0")
        eps = self.epsilon0
        if not 0 < eps <= 0.5:
            raise ValueError("epsilon0 must lie in (0, 1/2]")
        if np.any(om < eps) or np.any(om > 1 - eps):
            raise ValueError("omegas outside [eps0, 1 - eps0]")

    @property
    def lo(self) -> int:
        return self.offset

    @property
    def hi(self) -> int:
        return self.offset + self.omegas.size - 1

    def omega(self, i: int) -> float:
        if not self.lo <= i <= self.hi:
            raise IndexError(f"site {i} outside window [{self.lo}, {self.hi}]")
        return float(self.omegas[i - self.offset])

    @cached_property
    def thresholds(self) -> np.ndarray:
        """``floor(omega * 2**32)``: a uniform 32-bit word below it means a right step."""
        return np.floor(self.omegas * 4294967296.0).astype(np.uint64)

    def extended(self, lo: int, hi: int) -> "Environment":
        """Environment covering at least ``[lo, hi]`` and the current window."""
        if self.distribution is None or self.seed is None:
            raise ValueError("environment has no generating law and cannot be extended")
        lo, hi = min(lo, self.lo), max(hi, self.hi)
        j0, j1 = lo // BLOCK, hi // BLOCK
        om = _draw_blocks(self.distribution, self.seed, j0, j1)
        return Environment(j0 * BLOCK, om, self.epsilon0, self.distribution, self.seed)

    def to_json(self) -> str:
        return json.dumps(
            {"offset": self.offset, "epsilon0": self.epsilon0, "omegas": self.omegas.tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "Environment":
        d = json.loads(text)
        if set(d) != {"offset", "epsilon0", "omegas"}:
            raise ValueError("environment JSON needs exactly offset, epsilon0, omegas")
        return cls(int(d["offset"]), np.asarray(d["omegas"], float), float(d["epsilon0"]))


def sample_environment(dist: EnvDistribution, half_width: int, seed) -> Environment:
    """i.i.d. environment on ``[-half_width, half_width]``, deterministic in ``seed``."""
    if half_width < 1:
        raise ValueError("half_width must be at least 1")
    seed = _seeding.normalize(seed)
    j0, j1 = (-half_width) // BLOCK, half_width // BLOCK
    om = _draw_blocks(dist, seed, j0, j1)
    start = -half_width - j0 * BLOCK
    win = om[start : start + 2 * half_width + 1]
    return Environment(-half_width, win, dist.epsilon0, dist, seed)


@dataclass(frozen=True, eq=False)
class Potential:
    """Values ``V(n)`` for ``n`` in ``[offset, offset + len(values) - 1]``."""

    offset: int
    values: np.ndarray
    sigma: float = float("nan")

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if not self.offset <= 0 <= self.offset + v.size - 1:
            raise ValueError("window must contain site 0")

    @property
    def lo(self) -> int:
        return self.offset

    @property
    def hi(self) -> int:
        return self.offset + self.values.size - 1

    def __call__(self, n: int) -> float:
        if not self.lo <= n <= self.hi:
            raise IndexError(f"site {n} outside window [{self.lo}, {self.hi}]")
        return float(self.values[n - self.offset])

    def segment(self, a: int, b: int) -> np.ndarray:
        """``V(a), ..., V(b)`` as an array view."""
        if not (self.lo <= a and b <= self.hi):
            raise IndexError(f"range [{a}, {b}] outside window [{self.lo}, {self.hi}]")
        return self.values[a - self.offset : b - self.offset + 1]


def potential(env: Environment) -> Potential:
    """``V(0) = 0`` and ``V(n) - V(n-1) = log((1 - omega_n)/omega_n)``."""
    inc = _log_odds(env.omegas)
    z = -env.offset  # array index of site 0
    v = np.empty(inc.size)
    v[z] = 0.0
    v[z + 1 :] = np.cumsum(inc[z + 1 :])
    # V(n) = -(inc_{n+1} + ... + inc_0) for n < 0
    v[:z] = -np.cumsum(inc[1 : z + 1][::-1])[::-1]
    sigma = env.distribution.sigma if env.distribution is not None else float("nan")
    return Potential(env.offset, v, sigma)


def running_min(pot: Potential, n: int) -> float:
    """``min(V(0), ..., V(n))`` for ``n >= 0``."""
    if n < 0:
        raise ValueError("running minimum is defined for n >= 0")
    return float(np.min(pot.segment(0, n)))
