"""x-extrema of continuous paths, valley bottoms and their sign changes.

A point ``y`` is an x-minimum of ``w`` if there are ``a < y < b`` with
``w(y) = min w`` on ``[a, b]`` and ``w(a), w(b) >= w(y) + x``; x-maxima are
defined symmetrically.  The x-extrema alternate, and ``x_0 <= 0 < x_1``
denotes the pair straddling the origin.  The valley bottom ``b(x)`` is
whichever of the two is a minimum.

On a finite window an extremum is *certified* only if its confining points
lie inside the window.  Candidates next to the window edges are reported but
flagged uncertified.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import _extrema_kernels as K
from .plpath import PiecewiseLinearPath

MIN, MAX = "min", "max"
_KIND = {K.MIN: MIN, K.MAX: MAX}


class CertificationError(ValueError):
    """The window is too narrow to certify the requested extrema."""


@dataclass(frozen=True)
class ExtremumPoint:
    location: float
    value: float
    kind: str
    certified: bool


@dataclass(frozen=True)
class ExtremaDecomposition:
    """Alternating x-extrema of a path, in increasing location.

    ``index_origin`` is the position in ``points`` of ``x_0``, the last
    point at or left of 0; :meth:`point` indexes relative to it.  ``ties``
    records that equal values were met and the leftmost one was kept.
    """

    x: float
    points: tuple
    index_origin: int
    ties: bool = False

    def point(self, k: int) -> ExtremumPoint:
        j = self.index_origin + k
        if not 0 <= j < len(self.points):
            raise CertificationError(f"x_{k} lies outside the window")
        return self.points[j]

    def certified(self) -> list:
        return [p for p in self.points if p.certified]

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "location", "value", "kind", "certified"])
        for j, p in enumerate(self.points):
            w.writerow(
                [j - self.index_origin, repr(p.location), repr(p.value), p.kind, int(p.certified)]
            )


@dataclass(frozen=True)
class Slope:
    """Segment between consecutive certified extrema ``x_k`` and ``x_{k+1}``."""

    k: int
    support: tuple
    height: float
    excess: float
    orientation: str


@dataclass(frozen=True)
class SignChange:
    X: float
    b_before: float
    b_after: float
    e_minus: float
    e_plus: float
    positive_before: bool
    excess_certified: bool = True


@dataclass(frozen=True)
class SignChangeRecord:
    """Scales ``X_1 < X_2 < ...`` in ``[c, x_max)`` where ``b`` changes sign.

    ``initial_sign`` is +1 when ``b(c) > 0`` and -1 when ``b(c) <= 0``.
    ``strong_flags[i]`` tells whether change ``i`` is ``a``-strong: both
    neighbouring excess heights are at least ``a * X_i``.
    """

    c: float
    x_max: float
    a: float
    initial_sign: int
    changes: tuple
    strong_flags: tuple

    @property
    def excess_certified(self) -> bool:
        """Whether every recorded excess height is confined inside the window."""
        return all(ch.excess_certified for ch in self.changes)

    @property
    def X(self) -> np.ndarray:
        return np.array([ch.X for ch in self.changes])

    def count(self, upto: float) -> int:
        """Number of changes in ``[c, upto]``."""
        return int(np.searchsorted(self.X, upto, side="right"))

    def sign_at(self, x: float) -> int:
        """Sign of ``b(x)`` for ``c <= x < x_max`` (left-continuous in ``x``)."""
        k = int(np.searchsorted(self.X, x, side="left"))
        return self.initial_sign * (-1) ** k

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["X_k", "b_before", "b_after", "e_minus", "e_plus", "strong"])
        for ch, s in zip(self.changes, self.strong_flags):
            w.writerow(
                [repr(ch.X), repr(ch.b_before), repr(ch.b_after),
                 repr(ch.e_minus), repr(ch.e_plus), int(s)]
            )


def _check(path: PiecewiseLinearPath, x: float):
    if not x > 0:
        raise ValueError("scale x must be positive")
    if not np.all(np.isfinite(path.values)):
        raise ValueError("path values must be finite")


def decompose(path: PiecewiseLinearPath, x: float) -> ExtremaDecomposition:
    """All x-extrema of ``path`` in its window, with boundary candidates.

    Raises :class:`CertificationError` when no x-extremum is certified.
    Whether ``x_0`` and its neighbours are certified is left to the
    consumers that need them.
    """
    _check(path, x)
    idx, kinds, cert, tie = K.scan(path.values, float(x))
    if not np.any(cert):
        raise CertificationError(f"no {x}-extremum is certified within the window")
    t, v = path.times, path.values
    pts = tuple(
        ExtremumPoint(float(t[i]), float(v[i]), _KIND[int(k)], bool(c))
        for i, k, c in zip(idx, kinds, cert)
    )
    origin = int(np.searchsorted(t[idx], 0.0, side="right")) - 1
    return ExtremaDecomposition(float(x), pts, origin, bool(tie))


def _origin(path, x):
    """Decomposition whose ``x_0`` has a known kind.

    An uncertified candidate ahead of the first certified extremum still has
    a determined kind: the true extremum it stands for lies at or left of it.
    """
    dec = decompose(path, x)
    o = dec.index_origin
    if o < 0:
        raise CertificationError(f"the window does not certify x_0 at scale {x}")
    leading = o + 1 < len(dec.points) and not any(p.certified for p in dec.points[: o + 1])
    if not (dec.point(0).certified or (leading and dec.point(1).certified)):
        raise CertificationError(f"the window does not certify x_0 at scale {x}")
    return dec


def slopes(dec: ExtremaDecomposition, path: PiecewiseLinearPath | None = None) -> list:
    """Slopes between consecutive certified extrema, indexed relative to ``x_0``."""
    out = []
    pts = dec.points
    for j in range(len(pts) - 1):
        p, q = pts[j], pts[j + 1]
        if not (p.certified and q.certified):
            continue
        H = abs(q.value - p.value)
        out.append(
            Slope(j - dec.index_origin, (p.location, q.location), H, H - dec.x,
                  "up" if q.value > p.value else "down")
        )
    if not out:
        raise CertificationError("fewer than two consecutive certified extrema")
    return out


def valley_bottom(path: PiecewiseLinearPath, x: float):
    """``(b(x), sign)`` with sign +1 when ``b(x) > 0`` and -1 otherwise.

    ``b(x)`` is ``x_0`` when that is an x-minimum and ``x_1`` otherwise; the
    point returned must be certified.
    """
    dec = _origin(path, x)
    p0 = dec.point(0)
    if p0.kind == MIN:
        if not p0.certified:
            raise CertificationError("x_0 is a minimum beyond the window")
        return p0.location, -1
    p1 = dec.point(1)
    if not p1.certified:
        raise CertificationError("x_0 is a maximum and x_1 is not certified")
    return p1.location, 1


def valley_sign(path: PiecewiseLinearPath, x: float) -> int:
    """Sign of ``b(x)``, which only needs ``x_0`` certified."""
    return 1 if _origin(path, x).point(0).kind == MAX else -1


def excess_samples(path: PiecewiseLinearPath, x: float):
    """``(e(T_-1), e(T_0), e(T_1))`` at scale ``x``; needs ``x_-1, ..., x_2`` certified."""
    dec = _origin(path, x)
    p = [dec.point(k) for k in (-1, 0, 1, 2)]
    if not all(q.certified for q in p):
        raise CertificationError("x_-1 .. x_2 are not all certified")
    return tuple(abs(p[k + 1].value - p[k].value) - x for k in range(3))


def sweep_sign_changes(
    path: PiecewiseLinearPath, c: float, x_max: float, a: float = 0.0
) -> SignChangeRecord:
    """Scales in ``[c, x_max)`` at which the sign of ``b`` changes.

    Slopes are merged smallest height first; the merge of the slope
    ``[x_0, x_1]`` at height ``h`` is exactly a scale where ``e(T_0) = 0``
    and ``b`` jumps to the other side of the origin.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    if not x_max >= c:
        raise ValueError("need c <= x_max")
    if a < 0:
        raise ValueError("a must be non-negative")
    _check(path, c)
    ev, sign_c, ok, _ = K.sweep(path.times, path.values, float(c), float(x_max))
    if not ok:
        raise CertificationError(f"window does not certify the sweep up to scale {x_max}")
    changes = []
    for X, k0, l0, l1, lm, l2, Hm, Hp, wm, wp in ev:
        # a window edge may stand in for x_-1 or x_2 only if it still confines the pair
        if (wm and Hm < X) or (wp and Hp < X):
            raise CertificationError(f"sign change at {X} is not certified within the window")
        if k0 == K.MIN:  # b = x_0 <= 0 jumps to the minimum x_2 > 0
            before, after = l0, l2
        else:  # b = x_1 > 0 jumps to the minimum x_-1 < 0
            before, after = l1, lm
        changes.append(
            SignChange(float(X), float(before), float(after), float(Hm - X), float(Hp - X),
                       bool(k0 == K.MAX),
                       not (wm or wp))
        )
    flags = tuple(bool(ch.e_minus >= a * ch.X and ch.e_plus >= a * ch.X) for ch in changes)
    return SignChangeRecord(float(c), float(x_max), float(a), int(sign_c), tuple(changes), flags)
