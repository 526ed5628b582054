"""Quenched simulation of Sinai's walk and additive functionals of its path.

The walk starts at 0 and, from site ``i``, steps to ``i + 1`` with
probability ``omega_i`` and to ``i - 1`` otherwise.  Environments drawn from a
law are widened on demand, so a walk never sees a window boundary.

Randomness: the walk seed feeds an SFC64 bit generator whose 64-bit words are
split into two 32-bit uniforms, one per step.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _seeding
from . import _walk_kernels as K
from .env import Environment

SAFETY_CAP = 10**9
FUNCTIONAL_RANGE = 10**4
_INT_LIMIT = 2**62
_FLOAT_LIMIT = 1e300
_NO_TARGET = -(2**63)


class AccumulatorOverflow(ArithmeticError):
    """The running sum left the exactly representable range."""


class StepCapExceeded(RuntimeError):
    """A walk ran past the safety cap without exiting."""


@dataclass(frozen=True)
class FunctionalSpec:
    """Function ``f`` in the additive functional ``sum_k f(S_k)``.

    Kinds: ``sign``; ``signed-power`` (``sgn(x) |x|**alpha``);
    ``signed-power-log`` (``sgn(x) |x|**(log(2 + |x|)**alpha)``); ``custom``
    (a vectorised ``func`` supplied by the caller).  Every kind satisfies
    ``f(0) = 0``, ``f >= 1`` on positive sites and ``f <= -1`` on negative
    ones, checked on ``|x| <= 10**4``, the range where the shipped families
    are guaranteed to fit their accumulators.
    """

    kind: str = "sign"
    alpha: float = 0.0
    func: Callable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("sign", "signed-power", "signed-power-log", "custom"):
            raise ValueError(f"unknown functional kind {self.kind!r}")
        if self.alpha < 0 or not math.isfinite(self.alpha):
            raise ValueError("alpha must be a finite non-negative number")
        if (self.kind == "custom") != (self.func is not None):
            raise ValueError("a custom functional needs func, and only it")
        xs = np.array([-FUNCTIONAL_RANGE, -1, 0, 1, FUNCTIONAL_RANGE])
        with np.errstate(over="ignore"):
            v = self._raw(xs, as_float=True).astype(float)
        if v[2] != 0 or v[3] < 1 or v[1] > -1:
            raise ValueError("f must satisfy f(0) = 0, f(1) >= 1 and f(-1) <= -1")
        lim = _INT_LIMIT if self.integer_valued else _FLOAT_LIMIT
        if not np.all(np.abs(v) < lim):
            raise ValueError(
                f"|f(x)| overflows its accumulator for |x| <= {FUNCTIONAL_RANGE}; "
                "reduce alpha"
            )
        if self.kind == "custom":
            xs = np.arange(-FUNCTIONAL_RANGE, FUNCTIONAL_RANGE + 1)
            v = self._raw(xs)
            if np.any(v[xs > 0] < 1) or np.any(v[xs < 0] > -1):
                raise ValueError("f must be >= 1 on positive and <= -1 on negative sites")

    @property
    def integer_valued(self) -> bool:
        if self.kind == "sign":
            return True
        if self.kind == "signed-power":
            return float(self.alpha).is_integer()
        if self.kind == "custom":
            return np.issubdtype(np.asarray(self.func(np.arange(-1, 2))).dtype, np.integer)
        return False

    @property
    def kernel_kind(self) -> int:
        return {"sign": K.SIGN, "signed-power": K.POWER, "signed-power-log": K.POWER_LOG}.get(
            self.kind, K.OPAQUE
        )

    def _raw(self, x, as_float=False):
        """``f(x)``; ``as_float`` evaluates integer powers in floating point, where they cannot wrap."""
        x = np.asarray(x, dtype=np.int64)
        if self.kind == "sign":
            return np.sign(x)
        if self.kind == "custom":
            return np.asarray(self.func(x))
        ax = np.abs(x)
        if self.kind == "signed-power":
            if self.integer_valued and not as_float:
                return np.sign(x) * ax ** int(self.alpha)
            return np.sign(x) * ax.astype(float) ** self.alpha
        a = ax.astype(float)
        return np.sign(x) * a ** (np.log(2.0 + a) ** self.alpha)

    def __call__(self, x) -> np.ndarray:
        """``f`` at integer sites, as int64 when integer valued, else float64."""
        x = np.asarray(x, dtype=np.int64)
        if x.size and np.max(np.abs(x)) > FUNCTIONAL_RANGE:
            with np.errstate(over="ignore"):
                v = self._raw(x, as_float=True).astype(float)
            lim = _INT_LIMIT if self.integer_valued else _FLOAT_LIMIT
            if not np.all(np.abs(v) < lim):
                raise AccumulatorOverflow(f"f overflows at sites beyond {FUNCTIONAL_RANGE}")
        v = self._raw(x)
        return v.astype(np.int64) if self.integer_valued else v.astype(float)

    @classmethod
    def from_dict(cls, d: dict) -> "FunctionalSpec":
        d = dict(d)
        kind = d.pop("kind", "sign")
        alpha = float(d.pop("alpha", 0.0))
        if d:
            raise ValueError(f"unknown functional keys {sorted(d)}")
        return cls(kind, alpha)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "alpha": self.alpha}


@dataclass(frozen=True)
class PersistenceTrialConfig:
    """Persistence event ``sum_{k<=n} f(S_k) > u`` for all ``1 <= n <= N``."""

    N: int
    u: float = 0.0
    functional: FunctionalSpec = FunctionalSpec()

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        if not self.u <= 0:
            raise ValueError("u must be <= 0")


@dataclass
class WalkRecord:
    """Summary of one walk of ``n_steps`` steps from the origin."""

    n_steps: int
    final_position: int
    local_times: dict
    hitting_times: dict = field(default_factory=dict)
    functional_min: float | None = None
    first_violation: int | None = None
    path: np.ndarray | None = field(default=None, repr=False)

    def to_json_dict(self) -> dict:
        return {
            "n_steps": self.n_steps,
            "final_position": self.final_position,
            "local_times": {str(k): v for k, v in sorted(self.local_times.items())},
            "hitting_times": {str(k): v for k, v in sorted(self.hitting_times.items())},
            "functional_min": self.functional_min,
            "first_violation": self.first_violation,
        }


class _Bits:
    """Sequential buffer of raw 64-bit words; buffer sizes never affect the stream."""

    def __init__(self, seed, first: int = 512, largest: int = 1 << 18):
        self._bg = _seeding.bit_generator(seed)
        self._size = first
        self._largest = largest
        self.words = np.empty(0, dtype=np.uint64)
        self.cursor = 0

    def refill(self):
        self.words = self._bg.random_raw(self._size)
        self.cursor = 0
        self._size = min(2 * self._size, self._largest)


def _widen(env: Environment, pos: int) -> Environment:
    width = env.hi - env.lo + 1
    return env.extended(min(env.lo, pos - width), max(env.hi, pos + width))


def _realign(arr, old: Environment, new: Environment, fill):
    out = np.full(new.omegas.size, fill, dtype=arr.dtype)
    k = old.lo - new.lo
    out[k : k + arr.size] = arr
    return out


def _run_span(env, n_steps, seed, target, record_path):
    bits = _Bits(seed)
    lt = np.zeros(env.omegas.size, dtype=np.int64)
    first = np.full(env.omegas.size, -1, dtype=np.int64)
    lt[-env.offset] = 1
    first[-env.offset] = 0
    path = np.zeros(n_steps + 1 if record_path else 0, dtype=np.int64)
    pos = t = 0
    while True:
        status, bits.cursor, pos, t = K.walk_span(
            env.thresholds, env.offset, bits.words, bits.cursor, pos, t,
            n_steps, target, lt, first, path,
        )
        if status == K.NEED_BITS:
            bits.refill()
        elif status == K.NEED_EXTEND:
            new = _widen(env, pos)
            lt, first = _realign(lt, env, new, 0), _realign(first, env, new, -1)
            env = new
        else:
            return status, env, pos, t, lt, first, path


def simulate(
    env: Environment,
    n_steps: int,
    seed,
    targets=(),
    functional: FunctionalSpec | None = None,
    u: float = 0.0,
    record_path: bool = False,
) -> WalkRecord:
    """Run ``n_steps`` steps from 0 and record local and hitting times.

    ``hitting_times[p]`` is the first time ``<= n_steps`` the walk sits at
    ``p``, or ``None``.  When ``functional`` is given the record also carries
    the minimum of the running sum over ``1 <= n <= n_steps`` and the first
    ``n`` at which it is ``<= u``.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    keep = record_path or functional is not None
    _, env, pos, _, lt, first, path = _run_span(env, n_steps, seed, _NO_TARGET, keep)
    sites = np.nonzero(lt)[0]
    local = {int(s + env.offset): int(lt[s]) for s in sites}
    hits = {}
    for p in targets:
        k = p - env.offset
        hits[p] = int(first[k]) if 0 <= k < first.size and first[k] >= 0 else None
    rec = WalkRecord(n_steps, int(pos), local, hits, path=path if keep else None)
    if functional is not None:
        sums = additive_functional_path(path, functional)
        if n_steps >= 1:
            tail = sums[1:]
            rec.functional_min = tail.min().item()
            bad = np.nonzero(tail <= u)[0]
            rec.first_violation = int(bad[0]) + 1 if bad.size else None
        if not record_path:
            rec.path = None
    return rec


def hitting_time(env: Environment, target: int, cap: int, seed) -> int | None:
    """First ``k <= cap`` with ``S_k = target``, or ``None`` when capped."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    if target == 0:
        return 0
    if abs(target) > cap:
        return None
    status, *_rest = _run_span(env, cap, seed, target, False)
    return _rest[2] if status == K.HIT else None


@dataclass
class ExitBatch:
    """Outcomes of independent walks started at ``start`` and stopped on ``{p, r}``.

    ``local_times[j, x - p - 1]`` is the number of visits of walk ``j`` to
    site ``x`` in ``(p, r)`` up to its exit, time 0 included.
    """

    start: int
    p: int
    r: int
    exit_right: np.ndarray
    exit_times: np.ndarray
    local_times: np.ndarray

    def local_time_at(self, z: int) -> np.ndarray:
        if not self.p < z < self.r:
            raise ValueError("site outside (p, r)")
        return self.local_times[:, z - self.p - 1]


def exit_trials(
    env: Environment, start: int, p: int, r: int, n: int, seed, cap: int = SAFETY_CAP
) -> ExitBatch:
    """``n`` independent exits of ``(p, r)`` from ``start``, sharing one random stream."""
    if not p < start < r:
        raise ValueError("need p < start < r")
    if n < 1:
        raise ValueError("n must be >= 1")
    if env.lo > p or env.hi < r:
        env = env.extended(p, r)
    sides = np.zeros(n, dtype=np.bool_)
    times = np.zeros(n, dtype=np.int64)
    lt = np.zeros((n, r - p - 1), dtype=np.int32)
    lt[0, start - p - 1] = 1
    bits = _Bits(seed)
    i, pos, t = 0, start, 0
    while True:
        status, bits.cursor, i, pos, t = K.exit_batch(
            env.thresholds, env.offset, bits.words, bits.cursor,
            start, p, r, i, pos, t, cap, sides, times, lt,
        )
        if status == K.DONE:
            return ExitBatch(start, p, r, sides, times, lt)
        if status == K.CAPPED:
            raise StepCapExceeded(f"walk {i} did not leave ({p}, {r}) within {cap} steps")
        bits.refill()


def exit_trial(env: Environment, start: int, p: int, r: int, seed):
    """One exit of ``(p, r)``: (exit side ``'p'`` or ``'r'``, exit time, local times)."""
    b = exit_trials(env, start, p, r, 1, seed)
    row = b.local_times[0]
    local = {p + 1 + k: int(v) for k, v in enumerate(row) if v}
    return ("r" if b.exit_right[0] else "p"), int(b.exit_times[0]), local


def additive_functional_path(record_or_path, f: FunctionalSpec) -> np.ndarray:
    """Running sums ``sum_{k=0}^{n} f(S_k)`` for ``n = 0, ..., len - 1``.

    Exact in int64 for integer-valued ``f``; compensated summation otherwise.
    """
    path = record_or_path.path if isinstance(record_or_path, WalkRecord) else record_or_path
    if path is None:
        raise ValueError("walk record has no stored path; simulate with record_path=True")
    path = np.asarray(path, dtype=np.int64)
    v = f(path)
    if f.integer_valued:
        if path.size and int(np.max(np.abs(v))) * path.size >= _INT_LIMIT:
            raise AccumulatorOverflow("running sum may exceed the int64 accumulator")
        return np.cumsum(v)
    return K.compensated_cumsum(v)


def local_time_sum(record: WalkRecord, f: FunctionalSpec):
    """``sum_x f(x) L(x, n)``: the functional evaluated site by site."""
    sites = np.array(sorted(record.local_times), dtype=np.int64)
    counts = [record.local_times[s] for s in sites]
    v = f(sites)
    if f.integer_valued:
        return sum(int(a) * int(b) for a, b in zip(v, counts))
    return math.fsum(float(a) * b for a, b in zip(v, counts))


def write_stream_csv(record: WalkRecord, f: FunctionalSpec, fh) -> None:
    """Write ``n, S_n, running_sum`` rows for a record with a stored path."""
    sums = additive_functional_path(record, f)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["n", "S_n", "running_sum"])
    for n, (s, a) in enumerate(zip(record.path.tolist(), sums.tolist())):
        w.writerow([n, s, repr(a) if isinstance(a, float) else a])


class _PersistenceRunner:
    """Advance one walk while tracking the running sum of ``f``."""

    def __init__(self, env: Environment, cfg: PersistenceTrialConfig, seed):
        self.env = env
        self.cfg = cfg
        self.f = cfg.functional
        self.bits = _Bits(seed)
        self.fv = self.f(np.arange(env.lo, env.hi + 1))

    def first_violation(self) -> int | None:
        f, cfg = self.f, self.cfg
        kind, alpha = f.kernel_kind, float(f.alpha)
        pos = t = 0
        if f.integer_valued:
            s = 0
            u = math.floor(cfg.u)
        else:
            s, c = 0.0, 0.0
        while True:
            env, bits = self.env, self.bits
            if f.integer_valued:
                status, bits.cursor, pos, t, s = K.persist_int(
                    env.thresholds, env.offset, self.fv, bits.words, bits.cursor,
                    pos, t, s, u, cfg.N, kind, alpha,
                )
            else:
                status, bits.cursor, pos, t, s, c = K.persist_float(
                    env.thresholds, env.offset, self.fv, bits.words, bits.cursor,
                    pos, t, s, c, float(cfg.u), cfg.N, kind, alpha,
                )
            if status == K.NEED_BITS:
                bits.refill()
            elif status == K.NEED_EXTEND:
                self.env = _widen(env, pos)
                self.fv = f(np.arange(self.env.lo, self.env.hi + 1))
            elif status == K.VIOLATION:
                return int(t)
            elif status == K.OVERFLOW:
                raise AccumulatorOverflow(f"running sum left the int64 range at step {t}")
            else:
                return None


def first_violation(env: Environment, cfg: PersistenceTrialConfig, seed) -> int | None:
    """Smallest ``1 <= n <= N`` with running sum ``<= u``, or ``None``."""
    return _PersistenceRunner(env, cfg, seed).first_violation()


def persistence_trial(env: Environment, cfg: PersistenceTrialConfig, seed) -> bool:
    """True iff the running sum stays above ``u`` for every ``1 <= n <= N``."""
    return first_violation(env, cfg, seed) is None
