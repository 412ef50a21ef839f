"""Exact one-dimensional transport distances.

A 1-D distribution function (or quantile function) is stored as a
monotone polyline: knots (t_k, y_k) joined by straight segments, where
repeated abscissae encode jumps.  Discrete measures give staircase
polylines, grid densities give continuous piecewise-linear ones, and the
L^p distance between two polylines is integrated in closed form.
"""
from __future__ import annotations

import math

import numpy as np

from ..errors import ParameterError, ShapeError


def _sorted_atoms(points, weights):
    x = np.asarray(points, float).reshape(-1)
    w = np.asarray(weights, float).reshape(-1)
    order = np.argsort(x, kind="stable")
    return x[order], w[order]


def cdf_polyline(points, weights):
    """Staircase CDF of a weighted atom set as (x knots, F knots)."""
    x, w = _sorted_atoms(points, weights)
    c = np.cumsum(w)
    c[-1] = 1.0
    xs = np.repeat(x, 2)
    fs = np.empty_like(xs)
    fs[0::2] = np.concatenate(([0.0], c[:-1]))
    fs[1::2] = c
    return xs, fs


def grid_cdf_polyline(edges, masses):
    """Continuous piecewise-linear CDF of a piecewise-constant density."""
    c = np.concatenate(([0.0], np.cumsum(masses)))
    c /= c[-1]
    return np.asarray(edges, float), c


def _eval_right(ts, ys, t):
    """Right limit at t of the polyline (constant extension outside)."""
    k = np.searchsorted(ts, t, side="right") - 1
    return _interp_at(ts, ys, t, k)


def _eval_left(ts, ys, t):
    """Left limit at t of the polyline."""
    k = np.searchsorted(ts, t, side="left") - 1
    return _interp_at(ts, ys, t, k)


def _interp_at(ts, ys, t, k):
    n = ts.shape[0]
    out = np.empty(t.shape)
    lo = k < 0
    hi = k >= n - 1
    mid = ~(lo | hi)
    out[lo] = ys[0]
    out[hi] = ys[-1]
    km = k[mid]
    t0, t1 = ts[km], ts[km + 1]
    y0, y1 = ys[km], ys[km + 1]
    span = t1 - t0
    frac = np.where(span > 0, (t[mid] - t0) / np.where(span > 0, span, 1.0), 0.0)
    out[mid] = y0 + (y1 - y0) * frac
    return out


def linear_abs_power_integral(h, d0, d1, p):
    """Integral over [0, h] of |l(s)|^p with l linear from d0 to d1."""
    h = np.asarray(h, float)
    d0 = np.asarray(d0, float)
    d1 = np.asarray(d1, float)
    a0, a1 = np.abs(d0), np.abs(d1)
    same = d0 * d1 >= 0
    out = np.zeros(np.broadcast(h, d0, d1).shape)
    q = p + 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        diff = a1 - a0
        close = np.abs(diff) <= 1e-12 * np.maximum(a0, a1)
        if p == 1.0:
            s_same = h * (a0 + a1) / 2
        elif p == 2.0:
            s_same = h * (d0 * d0 + d0 * d1 + d1 * d1) / 3
        else:
            s_same = np.where(close, h * np.maximum(a0, a1) ** p,
                              h * (a1 ** q - a0 ** q) / (q * diff))
        tot = a0 + a1
        s_opp = h * (a0 ** q + a1 ** q) / (q * np.where(tot > 0, tot, 1.0))
    out = np.where(same, s_same, s_opp)
    return np.where(h > 0, out, 0.0)


def polyline_lp(ts_a, ys_a, ts_b, ys_b, p=1.0, lo=None, hi=None):
    """Integral of |A(t) - B(t)|^p over [lo, hi] for two monotone polylines."""
    knots = np.union1d(ts_a, ts_b)
    if lo is not None:
        knots = np.union1d(knots[(knots > lo) & (knots < hi)], [lo, hi])
    if knots.shape[0] < 2:
        return 0.0
    left, right = knots[:-1], knots[1:]
    h = right - left
    keep = h > 0
    left, right, h = left[keep], right[keep], h[keep]
    d0 = _eval_right(ts_a, ys_a, left) - _eval_right(ts_b, ys_b, left)
    d1 = _eval_left(ts_a, ys_a, right) - _eval_left(ts_b, ys_b, right)
    return math.fsum(linear_abs_power_integral(h, d0, d1, p))


def w1_polyline_cdf(cdf_a, cdf_b):
    """W_1 as the L^1 distance between two CDF polylines."""
    return polyline_lp(cdf_a[0], cdf_a[1], cdf_b[0], cdf_b[1], 1.0)


def wp_polyline_quantile(cdf_a, cdf_b, p):
    """W_p from the L^p distance between the quantile functions.

    The quantile polyline is the CDF polyline with the axes swapped.
    """
    val = polyline_lp(cdf_a[1], cdf_a[0], cdf_b[1], cdf_b[0], p, 0.0, 1.0)
    return max(val, 0.0) ** (1.0 / p)


def wp_weighted_1d(xa, wa, xb, wb, p=1.0):
    """Exact W_p between two weighted 1-D atom sets by quantile merging."""
    if p < 1:
        raise ParameterError("p must be >= 1")
    ca = cdf_polyline(xa, wa)
    cb = cdf_polyline(xb, wb)
    if p == 1.0:
        return w1_polyline_cdf(ca, cb)
    return wp_polyline_quantile(ca, cb, p)


def wp_sorted_equal(xs, ys, p=1.0):
    """((1/N) sum |x_(i) - y_(i)|^p)^(1/p) for equal-size samples."""
    xs = np.sort(np.asarray(xs, float).reshape(-1))
    ys = np.sort(np.asarray(ys, float).reshape(-1))
    if xs.shape != ys.shape:
        raise ShapeError("equal sample sizes required")
    diff = np.abs(xs - ys)
    if p == 1.0:
        return math.fsum(diff) / xs.shape[0]
    return (math.fsum(diff ** p) / xs.shape[0]) ** (1.0 / p)


def w1_sorted_vs_law(xs, law, weights=None):
    """Exact W_1 between sorted samples and a law with closed-form CDF.

    Works on the last axis, so a (trials, N) array of sorted samples gives
    one distance per trial.  Uses the antiderivative G of the CDF:
    between consecutive atoms the integrand |c - F| is split at the
    quantile of the running level c.
    """
    xs = np.asarray(xs, float)
    n = xs.shape[-1]
    if weights is None:
        c = np.arange(1, n) / n
    else:
        c = np.cumsum(np.asarray(weights, float))[:-1]
    G = law.cdf_integral
    a = xs[..., :-1]
    b = xs[..., 1:]
    with np.errstate(invalid="ignore"):
        q = np.asarray(law.quantile(c), float)
    z = np.clip(q, a, b)
    Ga, Gb, Gz = G(a), G(b), G(z)
    mid = c * (z - a) - (Gz - Ga) + (Gb - Gz) - c * (b - z)
    left = G(xs[..., 0])
    right = law.upper_tail_integral(xs[..., -1])
    return left + mid.sum(axis=-1) + right


def w1_step_vs_grid(points, weights, edges, masses):
    return w1_polyline_cdf(cdf_polyline(points, weights), grid_cdf_polyline(edges, masses))
