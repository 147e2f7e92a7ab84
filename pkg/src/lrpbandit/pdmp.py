"""Exact simulation of the limiting jump-drift process.

Between jumps the state follows ``y' = (1 - p_A) - p_A y``, i.e. it relaxes
exponentially towards ``r_A = (1 - p_A)/p_A``.  Jumps have size ``+g`` and
occur at rate ``p_B y / g``.  Jump times are drawn by inverting the
cumulative intensity along the flow, so paths carry no discretisation
error, and occupation times and moments are integrated in closed form
along each flow segment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .params import BanditParams
from .rng import GOLDEN, Stream, mix64, unit

__all__ = [
    "PdmpPath",
    "OccupationHistogram",
    "Segments",
    "flow",
    "cumulative_intensity",
    "invert_intensity",
    "sample_jump_time",
    "sample_jump_times",
    "simulate_path",
    "occupation_histogram",
    "ergodic_moments",
    "time_average",
    "generator",
]

RESIDUAL_TOL = 1e-12


def flow(y0, t, params: BanditParams):
    """State reached from ``y0`` after drifting for time ``t``."""
    r_A = params.r_A
    out = r_A + (np.asarray(y0, dtype=float) - r_A) * np.exp(-params.p_A * np.asarray(t, dtype=float))
    return float(out) if out.ndim == 0 else out


def cumulative_intensity(y0, t, params: BanditParams, g: float):
    """Integrated jump rate ``(p_B/g) * int_0^t flow(y0, s) ds``."""
    p_A, r_A = params.p_A, params.r_A
    y0 = np.asarray(y0, dtype=float)
    t = np.asarray(t, dtype=float)
    out = (params.p_B / g) * (r_A * t - (y0 - r_A) * np.expm1(-p_A * t) / p_A)
    return float(out) if out.ndim == 0 else out


@njit(cache=True)
def _lam(t, y0, p_A, r_A, c):
    return c * (r_A * t - (y0 - r_A) * math.expm1(-p_A * t) / p_A)


@njit(cache=True)
def _invert(y0, E, p_A, p_B, g):
    """Unique ``t`` with ``Lambda(t) = E``: Newton inside a doubling bracket."""
    if E <= 0.0:
        return 0.0
    r_A = (1.0 - p_A) / p_A
    c = p_B / g
    lo = 0.0
    hi = 1.0
    while _lam(hi, y0, p_A, r_A, c) < E:
        lo = hi
        hi *= 2.0
    rate0 = c * y0
    t = E / rate0 if rate0 > 0.0 else 0.5 * (lo + hi)
    if not (lo < t < hi):
        t = 0.5 * (lo + hi)
    for _ in range(200):
        f = _lam(t, y0, p_A, r_A, c) - E
        if abs(f) <= RESIDUAL_TOL * E:
            break
        if f < 0.0:
            lo = t
        else:
            hi = t
        d = c * (r_A + (y0 - r_A) * math.exp(-p_A * t))
        tn = t - f / d if d > 0.0 else lo - 1.0
        if not (lo < tn < hi):
            tn = 0.5 * (lo + hi)
        if tn == t or hi - lo <= 4e-16 * hi:
            t = tn
            break
        t = tn
    return t


@njit(cache=True)
def _invert_many(y0, E, p_A, p_B, g):
    out = np.empty(E.size)
    for i in range(E.size):
        out[i] = _invert(y0, E[i], p_A, p_B, g)
    return out


def invert_intensity(y0: float, E, params: BanditParams, g: float):
    """Solve ``cumulative_intensity(y0, t) = E`` for ``t``."""
    if np.ndim(E):
        return _invert_many(float(y0), np.asarray(E, dtype=float), params.p_A, params.p_B, g)
    return _invert(float(y0), float(E), params.p_A, params.p_B, g)


def sample_jump_time(y0: float, params: BanditParams, g: float, rng: Stream) -> float:
    """Time to the next jump from ``y0``, by exact inversion."""
    if y0 < 0:
        raise ValueError("y0 must be non-negative")
    return invert_intensity(y0, rng.exponential(), params, g)


def sample_jump_times(y0: float, params: BanditParams, g: float, rng: Stream, size: int) -> np.ndarray:
    if y0 < 0:
        raise ValueError("y0 must be non-negative")
    return invert_intensity(y0, rng.exponential(size), params, g)


@njit(cache=True)
def _simulate(key, counter, y0, T, p_A, p_B, g):
    r_A = (1.0 - p_A) / p_A
    cap = 16 + int(2.0 * T * p_B * max(y0, r_A) / g)
    times = np.empty(cap)
    pre = np.empty(cap)
    s = key + counter * GOLDEN
    t = 0.0
    y = y0
    k = 0
    while True:
        s += GOLDEN
        counter += np.uint64(1)
        E = -math.log1p(-unit(mix64(s)))
        tau = _invert(y, E, p_A, p_B, g)
        if t + tau >= T:
            break
        t += tau
        y = r_A + (y - r_A) * math.exp(-p_A * tau)
        if k == cap:
            cap *= 2
            nt = np.empty(cap)
            npre = np.empty(cap)
            nt[:k] = times[:k]
            npre[:k] = pre[:k]
            times = nt
            pre = npre
        times[k] = t
        pre[k] = y
        y += g
        k += 1
    return times[:k].copy(), pre[:k].copy(), counter


@dataclass
class PdmpPath:
    """Jump skeleton of one path on ``[0, horizon]``."""

    y0: float
    jump_times: np.ndarray
    pre_values: np.ndarray
    horizon: float
    params: BanditParams
    g: float

    @property
    def post_values(self) -> np.ndarray:
        return self.pre_values + self.g

    @property
    def n_jumps(self) -> int:
        return self.jump_times.size

    def segments(self, burn_in_fraction: float = 0.0, n_batches: int = 1) -> "Segments":
        return _segments(self, burn_in_fraction, n_batches)


def simulate_path(y0: float, horizon: float, params: BanditParams, g: float, rng: Stream) -> PdmpPath:
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if y0 < 0:
        raise ValueError("y0 must be non-negative")
    times, pre, counter = _simulate(
        np.uint64(rng.key), np.uint64(rng.counter), float(y0), float(horizon),
        params.p_A, params.p_B, float(g),
    )
    rng.counter = int(counter)
    return PdmpPath(float(y0), times, pre, float(horizon), params, float(g))


# --------------------------------------------------------------------------
# segments, occupation times, ergodic averages


@dataclass
class Segments:
    """Flow pieces ``(start time, start value, duration, batch)`` after burn-in."""

    t: np.ndarray
    v: np.ndarray
    dur: np.ndarray
    batch: np.ndarray
    t0: float
    horizon: float
    n_batches: int


@njit(cache=True)
def _cut_segments(times, pre, y0, g, T, p_A, cuts):
    # cuts: increasing times in [0, T]; the first is the averaging start
    r_A = (1.0 - p_A) / p_A
    n = times.size
    cap = n + 1 + cuts.size
    ts = np.empty(cap)
    vs = np.empty(cap)
    ds = np.empty(cap)
    bs = np.empty(cap, dtype=np.int64)
    m = 0
    ci = 1
    t0 = cuts[0]
    for k in range(n + 1):
        a = 0.0 if k == 0 else times[k - 1]
        v = y0 if k == 0 else pre[k - 1] + g
        b = T if k == n else times[k]
        if b <= t0:
            continue
        if a < t0:
            v = r_A + (v - r_A) * math.exp(-p_A * (t0 - a))
            a = t0
        while True:
            while ci < cuts.size and cuts[ci] <= a:
                ci += 1
            stop = b
            if ci < cuts.size and cuts[ci] < b:
                stop = cuts[ci]
            if m == cap:
                cap *= 2
                ts2 = np.empty(cap)
                vs2 = np.empty(cap)
                ds2 = np.empty(cap)
                bs2 = np.empty(cap, dtype=np.int64)
                ts2[:m] = ts[:m]
                vs2[:m] = vs[:m]
                ds2[:m] = ds[:m]
                bs2[:m] = bs[:m]
                ts, vs, ds, bs = ts2, vs2, ds2, bs2
            ts[m] = a
            vs[m] = v
            ds[m] = stop - a
            bs[m] = ci - 1
            m += 1
            if stop >= b:
                break
            v = r_A + (v - r_A) * math.exp(-p_A * (stop - a))
            a = stop
    return ts[:m].copy(), vs[:m].copy(), ds[:m].copy(), bs[:m].copy()


def _segments(path, burn_in_fraction, n_batches):
    if not 0.0 <= burn_in_fraction < 1.0:
        raise ValueError("burn_in_fraction must lie in [0, 1)")
    if n_batches < 1:
        raise ValueError("n_batches must be >= 1")
    t0 = burn_in_fraction * path.horizon
    cuts = np.linspace(t0, path.horizon, n_batches + 1)[:-1]
    ts, vs, ds, bs = _cut_segments(
        path.jump_times, path.pre_values, path.y0, path.g, path.horizon, path.params.p_A, cuts
    )
    return Segments(ts, vs, ds, bs, t0, path.horizon, n_batches)


@dataclass
class OccupationHistogram:
    """Exact time spent by a path in each bin of a uniform grid."""

    edges: np.ndarray
    weights: np.ndarray
    total_time: float
    overflow: float

    @property
    def width(self) -> float:
        return float(self.edges[1] - self.edges[0])

    @property
    def probabilities(self) -> np.ndarray:
        return self.weights / self.total_time

    @property
    def overflow_fraction(self) -> float:
        return self.overflow / self.total_time

    @property
    def density(self) -> np.ndarray:
        return self.weights / (self.total_time * self.width)

    def merge(self, other: "OccupationHistogram") -> "OccupationHistogram":
        if not np.array_equal(self.edges, other.edges):
            raise ValueError("cannot merge histograms with different bins")
        return OccupationHistogram(
            self.edges, self.weights + other.weights,
            self.total_time + other.total_time, self.overflow + other.overflow,
        )


@njit(cache=True)
def _occupation(vs, ds, p_A, lo, width, nbins, weights):
    r_A = (1.0 - p_A) / p_A
    hi = lo + nbins * width
    overflow = 0.0
    for k in range(vs.size):
        v = vs[k]
        dur = ds[k]
        if dur <= 0.0:
            continue
        if v == r_A:
            b = int(math.floor((v - lo) / width))
            if 0 <= b < nbins:
                weights[b] += dur
            else:
                overflow += dur
            continue
        down = v > r_A
        e = r_A + (v - r_A) * math.exp(-p_A * dur)
        if down:
            if v <= lo:
                overflow += dur
                continue
            b = int(math.ceil((v - lo) / width)) - 1
            if b >= nbins:
                b = nbins  # sentinel: above the grid
        else:
            if v >= hi:
                overflow += dur
                continue
            b = int(math.floor((v - lo) / width))
            if b < 0:
                b = -1  # sentinel: below the grid
        elapsed = 0.0
        while True:
            if down:
                level = lo + min(b, nbins) * width
                reached = e < level
            else:
                level = lo + (max(b, -1) + 1) * width
                reached = e > level
            if reached:
                tl = math.log((v - r_A) / (level - r_A)) / p_A
                if tl > dur:
                    tl = dur
                if tl < elapsed:
                    tl = elapsed
            else:
                tl = dur
            piece = tl - elapsed
            if 0 <= b < nbins:
                weights[b] += piece
            else:
                overflow += piece
            elapsed = tl
            if not reached:
                break
            if down:
                b -= 1
                if b < 0:
                    overflow += dur - elapsed
                    break
            else:
                b += 1
                if b >= nbins:
                    overflow += dur - elapsed
                    break
    return overflow


def default_bins(params: BanditParams, g: float, width: float = 0.05) -> np.ndarray:
    r_A = params.r_A
    nbins = int(round(10.0 * max(1.0, g) / width))
    return r_A + width * np.arange(nbins + 1)


def uniform_bins(lo: float, hi: float, width: float) -> np.ndarray:
    nbins = int(round((hi - lo) / width))
    if nbins < 1 or not math.isclose(lo + nbins * width, hi, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError("(hi - lo) must be a positive multiple of width")
    return lo + width * np.arange(nbins + 1)


def occupation_histogram(path: PdmpPath, bins=None, burn_in_fraction: float = 0.0) -> OccupationHistogram:
    """Occupation-time histogram of ``path`` after discarding the burn-in.

    ``bins`` is an array of uniformly spaced edges (default: width 0.05 on
    ``[r_A, r_A + 10 max(1, g)]``).  Time spent outside the grid is
    accumulated in ``overflow``.
    """
    edges = default_bins(path.params, path.g) if bins is None else np.asarray(bins, dtype=float)
    widths = np.diff(edges)
    if edges.ndim != 1 or widths.size < 1 or not np.allclose(widths, widths[0], rtol=1e-9):
        raise ValueError("bins must be uniformly spaced edges")
    segs = path.segments(burn_in_fraction)
    weights = np.zeros(widths.size)
    overflow = _occupation(segs.v, segs.dur, path.params.p_A, edges[0], widths[0], widths.size, weights)
    return OccupationHistogram(edges, weights, path.horizon - segs.t0, overflow)


def _segment_integrals(v, dur, p_A):
    r_A = (1.0 - p_A) / p_A
    dv = v - r_A
    e1 = -np.expm1(-p_A * dur) / p_A
    e2 = -np.expm1(-2.0 * p_A * dur) / (2.0 * p_A)
    m1 = r_A * dur + dv * e1
    m2 = r_A**2 * dur + 2.0 * r_A * dv * e1 + dv**2 * e2
    return m1, m2


def ergodic_moments(path: PdmpPath, burn_in_fraction: float = 0.1) -> tuple[float, float]:
    """Time-averaged mean and variance of the path after burn-in."""
    segs = path.segments(burn_in_fraction)
    m1, m2 = _segment_integrals(segs.v, segs.dur, path.params.p_A)
    total = path.horizon - segs.t0
    mean = m1.sum() / total
    return float(mean), float(m2.sum() / total - mean**2)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def time_average(
    path: PdmpPath,
    f,
    burn_in_fraction: float = 0.1,
    n_batches: int = 50,
    max_piece: float = 0.5,
) -> tuple[float, float]:
    """Batch-means estimate of the time average of ``f(Y_t)``.

    Returns ``(average, standard_error)``.  ``f`` must accept arrays; it is
    integrated along each flow segment with 8-point Gauss-Legendre on
    pieces no longer than ``max_piece``.
    """
    segs = path.segments(burn_in_fraction, n_batches)
    r_A, p_A = path.params.r_A, path.params.p_A
    npieces = np.maximum(1, np.ceil(segs.dur / max_piece)).astype(np.int64)
    seg_id = np.repeat(np.arange(segs.dur.size), npieces)
    first = np.cumsum(npieces) - npieces
    j = np.arange(seg_id.size) - first[seg_id]
    h = segs.dur[seg_id] / npieces[seg_id]
    a = j * h
    batch_sum = np.zeros(n_batches)
    piece_int = np.zeros(seg_id.size)
    for x, w in zip(_GL_X, _GL_W):
        s = a + 0.5 * h * (x + 1.0)
        y = r_A + (segs.v[seg_id] - r_A) * np.exp(-p_A * s)
        piece_int += 0.5 * h * w * f(y)
    np.add.at(batch_sum, segs.batch[seg_id], piece_int)
    length = (path.horizon - segs.t0) / n_batches
    means = batch_sum / length
    avg = float(means.mean())
    se = float(means.std(ddof=1) / math.sqrt(n_batches)) if n_batches > 1 else float("nan")
    return avg, se


def generator(f, fprime, params: BanditParams, g: float):
    """``Lf`` as a vectorised callable."""
    p_A, p_B = params.p_A, params.p_B

    def Lf(y):
        return p_B * y * (f(y + g) - f(y)) / g + (1.0 - p_A - p_A * y) * fprime(y)

    return Lf
