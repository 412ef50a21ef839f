"""Lattice covers of a ball and finite nets over probability measures.

A measure on B_R is first quantized onto the centers of a cover by balls
of radius r, then its weights are rounded to multiples of 1/K.  Both
steps carry an explicit transport certificate.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import comb

from .errors import CapacityError, ConsistencyError, ParameterError, ShapeError
from .measures import DiscreteMeasure, measure_from_text, measure_to_text
from .transport import wp_discrete

MAX_LATTICE = 10 ** 7
MAX_ENUMERATION = 10 ** 6


def unit_ball_volume(d):
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def lattice_constant(d):
    """Certified k with #centers <= k (R/r)^d whenever r <= R.

    Every kept cell lies inside B_{R + r/2} and has volume (r/sqrt(d))^d,
    so the count is at most omega_d d^{d/2} (R/r + 1/2)^d.
    """
    return unit_ball_volume(d) * (1.5 * math.sqrt(d)) ** d


@dataclass(frozen=True, eq=False)
class BallCover:
    centers: np.ndarray
    r: float
    R: float

    def __post_init__(self):
        c = np.array(self.centers, float, copy=True)
        c.flags.writeable = False
        object.__setattr__(self, "centers", c)

    @property
    def dim(self):
        return self.centers.shape[1]

    @property
    def size(self):
        return self.centers.shape[0]

    @property
    def diameter(self):
        return 2.0 * self.R

    @property
    def k(self):
        return lattice_constant(self.dim)

    def count_bound(self):
        return self.k * (self.R / self.r) ** self.dim

    def tree(self):
        return cKDTree(self.centers)

    def to_text(self):
        n = self.size
        return measure_to_text(DiscreteMeasure(self.centers, np.full(n, 1.0 / n)))

    @classmethod
    def from_text(cls, text, r, R):
        return cls(measure_from_text(text).points, r, R)


def cover_ball_lattice(R: float, r: float, d: int) -> BallCover:
    """Centers of the lattice (r/sqrt(d)) Z^d whose cubic cells meet B_R."""
    if not (R > 0 and r > 0) or int(d) != d or d < 1:
        raise ParameterError("need R > 0, r > 0 and integer d >= 1")
    d = int(d)
    if r >= R:
        return BallCover(np.zeros((1, d)), r, R)
    if d * (R / r) ** d > MAX_LATTICE:
        raise CapacityError(f"lattice with d (R/r)^d = {d * (R / r) ** d:.3g} exceeds the guard")
    s = r / math.sqrt(d)
    zmax = int(math.ceil((R + s / 2) / s))
    axis = np.arange(-zmax, zmax + 1, dtype=float) * s
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    # distance from the origin to the closed cell around each lattice point
    gap = np.clip(np.abs(grid) - s / 2, 0.0, None)
    keep = np.sqrt(np.sum(gap * gap, axis=1)) <= R * (1 + 1e-12)
    return BallCover(grid[keep], r, R)


def probe_coverage(cover: BallCover, pitch: float | None = None):
    """Fraction of probe-grid points of B_R within r of a center.

    Returns (fraction, max nearest-center distance, probe count).
    """
    d, R = cover.dim, cover.R
    pitch = cover.r / 10 if pitch is None else pitch
    m = int(math.floor(R / pitch))
    axis = np.arange(-m, m + 1) * pitch
    if d * (2 * m + 1) ** d > 5 * MAX_LATTICE:
        raise CapacityError("probe grid too large")
    probes = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    probes = probes[np.linalg.norm(probes, axis=1) <= R]
    dist, _ = cover.tree().query(probes)
    inside = dist <= cover.r * (1 + 1e-12)
    return float(inside.mean()), float(dist.max()), int(probes.shape[0])


def assign_to_centers(mu: DiscreteMeasure, cover: BallCover) -> np.ndarray:
    """Index of the nearest center of each atom, ties to the lowest index.

    The cells are Voronoi cells clipped to the balls, so an atom sitting on
    a center stays there and every atom moves at most r.
    """
    if mu.dim != cover.dim:
        raise ShapeError("measure and cover dimensions differ")
    tree = cover.tree()
    groups = tree.query_ball_point(mu.points, cover.r * (1 + 1e-12))
    out = np.empty(mu.n, np.int64)
    for i, g in enumerate(groups):
        if not g:
            raise ConsistencyError(f"atom {i} lies outside every ball of the cover")
        g = np.sort(np.asarray(g))
        dist = np.linalg.norm(cover.centers[g] - mu.points[i], axis=1)
        out[i] = g[np.argmin(dist)]
    return out


def quantize_weights(mu: DiscreteMeasure, cover: BallCover) -> np.ndarray:
    """beta_j = mass of the atoms assigned to center j."""
    idx = assign_to_centers(mu, cover)
    beta = np.zeros(cover.size)
    np.add.at(beta, idx, mu.weights)
    return beta


def quantize_to_centers(mu: DiscreteMeasure, cover: BallCover) -> DiscreteMeasure:
    """Move every atom to its partition center; each atom moves at most r."""
    beta = quantize_weights(mu, cover)
    used = np.flatnonzero(beta > 0)
    w = beta[used]
    return DiscreteMeasure(cover.centers[used], w / math.fsum(w))


@dataclass(frozen=True, eq=False)
class NetPoint:
    """Element of C_K: integer numerators k_j over the cover centers."""

    numerators: tuple
    K: int
    cover: BallCover

    def __post_init__(self):
        ks = tuple(int(k) for k in self.numerators)
        if any(k < 0 for k in ks) or sum(ks) != self.K or len(ks) != self.cover.size:
            raise ConsistencyError("numerators must be nonnegative, one per center, summing to K")
        object.__setattr__(self, "numerators", ks)

    def fractions(self):
        return [Fraction(k, self.K) for k in self.numerators]

    def measure(self) -> DiscreteMeasure:
        ks = np.asarray(self.numerators)
        used = np.flatnonzero(ks > 0)
        w = ks[used] / self.K
        return DiscreteMeasure(self.cover.centers[used], w / math.fsum(w))

    def to_text(self):
        return f"{self.K}\n" + ",".join(str(k) for k in self.numerators) + "\n"

    @classmethod
    def from_text(cls, text, cover):
        lines = text.strip().splitlines()
        return cls(tuple(int(v) for v in lines[1].split(",")), int(lines[0]), cover)


@dataclass(frozen=True, eq=False)
class RoundingResult:
    net_point: NetPoint
    J: int
    floors: np.ndarray
    plan: list
    certificate: float
    plan_cost: float


def round_weights(beta, K: int, p: float, D: float, cover: BallCover) -> RoundingResult:
    """Round weights beta (one per center) to multiples of 1/K.

    n_j = floor(K beta_j); the first J centers receive one extra unit,
    where J is the first index with sum_{j<=J}(n_j + 1) + sum_{j>J} n_j = K.
    The certificate D (N/K)^{1/p} is backed by an explicit plan that keeps
    min(beta_j, alpha_j) in place and moves the rest greedily.
    """
    beta = np.asarray(beta, float)
    if int(K) != K or K < 1:
        raise ParameterError("K must be a positive integer")
    K = int(K)
    n_centers = beta.shape[0]
    if n_centers != cover.size:
        raise ShapeError("one weight per cover center required")
    if abs(math.fsum(beta) - 1.0) > 1e-12 or np.any(beta < 0):
        raise ParameterError("weights must be a probability vector")
    # the 1e-9 slack absorbs products like 10 * 0.7 = 6.999...; it cannot
    # push the floor sum above K while N < 1e9
    floors = np.floor(K * beta + 1e-9).astype(np.int64)
    J = K - int(floors.sum())
    if not 0 <= J <= n_centers:
        raise ConsistencyError(f"no valid J: remainder {J} with {n_centers} centers")
    nums = floors.copy()
    nums[:J] += 1
    alpha = nums / K
    keep = np.minimum(beta, alpha)
    excess = beta - keep
    deficit = alpha - keep
    plan = [(j, j, float(keep[j])) for j in range(n_centers) if keep[j] > 0]
    src = [j for j in range(n_centers) if excess[j] > 0]
    dst = [j for j in range(n_centers) if deficit[j] > 0]
    ex, de = excess.copy(), deficit.copy()
    a = b = 0
    cost = 0.0
    while a < len(src) and b < len(dst):
        i, j = src[a], dst[b]
        m = min(ex[i], de[j])
        if m > 0:
            plan.append((i, j, float(m)))
            cost += m * float(np.linalg.norm(cover.centers[i] - cover.centers[j])) ** p
        ex[i] -= m
        de[j] -= m
        if ex[i] <= 1e-18:
            a += 1
        if de[j] <= 1e-18:
            b += 1
    cert = D * (n_centers / K) ** (1.0 / p)
    if cost ** (1.0 / p) > cert * (1 + 1e-12):
        raise ConsistencyError("redistribution plan exceeds its certificate")
    return RoundingResult(NetPoint(tuple(nums.tolist()), K, cover), J, floors, plan, cert, cost ** (1.0 / p))


def net_resolution(n_centers: int, D: float, r: float, p: float) -> int:
    """K = [N (D/r)^p] + 1."""
    return int(math.floor(n_centers * (D / r) ** p)) + 1


def net_size_bound(D: float, delta: float, p: float, n_half: int):
    """(C D / delta)^{p N(E, delta/2)} with C = 2 (4e)^{1/p}.

    Returns (log of the bound, bound or inf when not representable).
    """
    if not (D > 0 and delta > 0 and p >= 1 and n_half >= 0):
        raise ParameterError("need D > 0, delta > 0, p >= 1, n_half >= 0")
    if delta >= D:
        return 0.0, 1.0
    C = 2.0 * (4.0 * math.e) ** (1.0 / p)
    logb = p * n_half * math.log(C * D / delta)
    return logb, (math.exp(logb) if logb < 709 else math.inf)


@dataclass(frozen=True, eq=False)
class NetResult:
    net_point: NetPoint
    certificate: float
    distance: float
    quantize_distance: float
    rounding_distance: float
    K: int


def nearest_net_point(mu: DiscreteMeasure, cover: BallCover, K: int | None = None,
                      p: float = 1.0, exact: bool = True) -> NetResult:
    """Quantize then round; certificate r + D (N/K)^{1/p}.

    With K=None the resolution [N (D/r)^p] + 1 is used, which makes the
    certificate at most 2r.
    """
    if np.any(np.linalg.norm(mu.points, axis=1) > cover.R * (1 + 1e-12)):
        raise ParameterError("measure must be supported in B_R")
    D = cover.diameter
    if K is None:
        K = net_resolution(cover.size, D, cover.r, p)
    beta = quantize_weights(mu, cover)
    rounding = round_weights(beta, K, p, D, cover)
    cert = cover.r + rounding.certificate
    dist = q_dist = r_dist = math.nan
    if exact:
        nu = rounding.net_point.measure()
        used = np.flatnonzero(beta > 0)
        mu_t = DiscreteMeasure(cover.centers[used], beta[used] / math.fsum(beta[used]))
        dist, _ = wp_discrete(mu, nu, p)
        q_dist, _ = wp_discrete(mu, mu_t, p)
        r_dist, _ = wp_discrete(mu_t, nu, p)
    return NetResult(rounding.net_point, cert, dist, q_dist, r_dist, int(K))


def enumerate_net(n_centers: int, K: int) -> np.ndarray:
    """All numerator vectors of C_K (stars and bars), one per row."""
    total = comb(K + n_centers - 1, n_centers - 1, exact=True)
    if total > MAX_ENUMERATION:
        raise CapacityError(f"|C_K| = {total} exceeds the enumeration guard")
    rows = np.empty((total, n_centers), np.int64)
    for r, bars in enumerate(itertools.combinations(range(K + n_centers - 1), n_centers - 1)):
        prev = -1
        for j, b in enumerate(bars):
            rows[r, j] = b - prev - 1
            prev = b
        rows[r, -1] = K + n_centers - 2 - prev
    return rows


def net_cardinality(n_centers: int, K: int) -> int:
    return comb(K + n_centers - 1, n_centers - 1, exact=True)


def net_cardinality_bound(n_centers: int, K: int) -> float:
    """(2K)^N / N! and its Stirling relaxation (2Ke/N)^N."""
    n = n_centers
    return (2 * K) ** n / math.factorial(n), (2 * K * math.e / n) ** n
