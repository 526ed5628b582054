"""Brute-force reference implementations used as independent test oracles."""

import numpy as np

from sinai_lab.extrema import CertificationError, valley_sign
from sinai_lab.plpath import PiecewiseLinearPath


def brute_extrema(v, x):
    """x-extrema of a piecewise-linear path straight from the definition.

    Breakpoint ``i`` is an x-minimum if some ``a < i < b`` have ``v[i]`` as the
    minimum of ``v[a..b]`` and ``v[a], v[b] >= v[i] + x``; maxima likewise.
    Returns sorted ``(index, kind)`` pairs.
    """
    v = list(v)
    n = len(v)
    out = []
    for i in range(n):
        for kind, sgn in (("min", 1), ("max", -1)):
            w = [sgn * y for y in v]
            hit = any(
                w[i] == min(w[a : b + 1]) and w[a] >= w[i] + x and w[b] >= w[i] + x
                for a in range(i)
                for b in range(i + 1, n)
            )
            if hit:
                out.append((i, kind))
    return out


def random_zigzag(rng, n_max=12):
    n = int(rng.integers(3, n_max + 1))
    t = np.cumsum(rng.uniform(0.2, 1.5, n))
    t -= t[int(rng.integers(0, n))] + rng.uniform(0, 0.1)
    v = rng.normal(0, 3, n)
    return PiecewiseLinearPath(t, v)


def random_wells(rng, n_wells):
    """High walls at both ends around ``n_wells`` minima separated by random maxima."""
    vals = [float(rng.uniform(25, 30))]
    for k in range(n_wells):
        vals.append(float(rng.uniform(-6, 0)))
        if k < n_wells - 1:
            vals.append(float(rng.uniform(0.5, 8)))
    vals.append(float(rng.uniform(25, 30)))
    t = np.cumsum(rng.uniform(0.5, 3.0, len(vals)))
    t -= rng.uniform(t[0] + 0.01, t[-1] - 0.01)
    return PiecewiseLinearPath(t, np.array(vals))


def probe_scales(path, c, x_max):
    """Midpoints between consecutive distinct pairwise value gaps in ``[c, x_max]``.

    The set of x-extrema only changes when ``x`` crosses such a gap, so these
    probes see every distinct decomposition in the range.
    """
    v = path.values
    gaps = np.unique(np.abs(v[:, None] - v[None, :]).ravel())
    cut = np.unique(np.concatenate([[c, x_max], gaps[(gaps > c) & (gaps < x_max)]]))
    return (cut[1:] + cut[:-1]) / 2, cut


def probe_signs(path, xs):
    out = []
    for x in xs:
        try:
            out.append(valley_sign(path, x))
        except CertificationError:
            out.append(0)
    return np.array(out)
