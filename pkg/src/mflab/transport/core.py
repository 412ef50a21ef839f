"""Exact Wasserstein distances between discrete measures."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import CertificateError, ParameterError, ShapeError, SolverError
from ..measures import DiscreteMeasure, EmpiricalMeasure
from . import onedim
from .simplex import STATUS_MAX_ITER, STATUS_OPTIMAL, c_transform_min, max_cost, network_simplex, pair_costs


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Sparse optimal coupling: arrays of source index, target index, mass."""

    src: np.ndarray
    dst: np.ndarray
    mass: np.ndarray
    cost: float
    p: float

    @property
    def pairs(self):
        return list(zip(self.src.tolist(), self.dst.tolist(), self.mass.tolist()))

    def marginals(self, m, n):
        rows = np.zeros(m)
        cols = np.zeros(n)
        np.add.at(rows, self.src, self.mass)
        np.add.at(cols, self.dst, self.mass)
        return rows, cols

    def recomputed_cost(self, mu, nu):
        c = pair_costs(mu.points, nu.points, self.src, self.dst, float(self.p))
        return math.fsum(c * self.mass)

    def to_text(self) -> str:
        lines = [f"{i},{j},{format(float(w), '.17g')}" for i, j, w in self.pairs]
        lines.append(f"cost={format(float(self.cost), '.17g')}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, p=1.0):
        src, dst, mass, cost = [], [], [], math.nan
        for ln in text.strip().splitlines():
            if ln.startswith("cost="):
                cost = float(ln[5:])
                continue
            i, j, w = ln.split(",")
            src.append(int(i))
            dst.append(int(j))
            mass.append(float(w))
        return cls(np.array(src, np.int64), np.array(dst, np.int64), np.array(mass), cost, p)


@dataclass(frozen=True, eq=False)
class TransportSolution:
    distance: float
    plan: TransportPlan
    u: np.ndarray
    v: np.ndarray
    iterations: int

    def dual_objective(self, mu, nu):
        return math.fsum(np.concatenate((mu.weights * self.u, nu.weights * self.v)))


def _check_pair(mu, nu, p):
    if mu.dim != nu.dim:
        raise ShapeError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    if not p >= 1:
        raise ParameterError("p must be >= 1")


def solve_transport(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 1.0,
                    max_iter: int | None = None) -> TransportSolution:
    """Exact optimal transport for cost |x - y|^p, with dual potentials."""
    _check_pair(mu, nu, p)
    X = np.ascontiguousarray(mu.points)
    Y = np.ascontiguousarray(nu.points)
    a = np.ascontiguousarray(mu.weights)
    b = np.ascontiguousarray(nu.weights)
    m, n = a.shape[0], b.shape[0]
    p = float(p)
    cmax = max_cost(X, Y, p)
    tol = 1e-13 * cmax if cmax > 0 else 1e-300
    big = 2.0 * cmax if cmax > 0 else 1.0
    if max_iter is None:
        max_iter = 200 * (m + n) * max(int(math.log2(m + n)), 1) + 10000
    block = max(64, int(math.sqrt(m * n)))
    tsrc, tdst, fl, art, u, v, it, status = network_simplex(
        X, Y, a, b, p, tol, big, int(max_iter), block)
    if status == STATUS_MAX_ITER:
        raise SolverError(f"network simplex hit the iteration cap ({max_iter})")
    leftover = fl[art].sum() if art.any() else 0.0
    if status != STATUS_OPTIMAL or leftover > 1e-9:
        raise SolverError("network simplex ended with flow on artificial arcs")
    keep = (~art) & (fl > 0)
    src, dst, mass = tsrc[keep], tdst[keep] - m, fl[keep]
    order = np.lexsort((dst, src))
    src, dst, mass = src[order], dst[order], mass[order]
    cost = math.fsum(pair_costs(X, Y, src, dst, p) * mass)
    cost = max(cost, 0.0)
    plan = TransportPlan(src, dst, mass, cost, p)
    return TransportSolution(cost ** (1.0 / p), plan, u, v, int(it))


def wp_discrete(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 1.0):
    """Exact W_p(mu, nu) and an optimal plan."""
    sol = solve_transport(mu, nu, p)
    return sol.distance, sol.plan


def _is_1d_like(m):
    return isinstance(m, DiscreteMeasure) and m.dim == 1


def w1_exact_1d(a, b) -> float:
    """W_1 in one dimension as the L^1 distance between CDFs.

    ``b`` may be a 1-D discrete measure, a law exposing ``cdf_integral``,
    or a grid density (anything with ``edges`` and ``masses``).
    """
    if not _is_1d_like(a):
        raise ShapeError("w1_exact_1d needs a one-dimensional measure")
    xa = a.points[:, 0]
    if isinstance(b, DiscreteMeasure):
        if b.dim != 1:
            raise ShapeError("w1_exact_1d needs one-dimensional measures")
        return onedim.wp_weighted_1d(xa, a.weights, b.points[:, 0], b.weights, 1.0)
    if hasattr(b, "edges") and hasattr(b, "masses"):
        return onedim.w1_step_vs_grid(xa, a.weights, b.edges, b.masses)
    if hasattr(b, "cdf_integral"):
        order = np.argsort(xa, kind="stable")
        return float(onedim.w1_sorted_vs_law(xa[order], b, a.weights[order]))
    raise ParameterError("second argument must be a measure, grid density or law")


def wp_exact_1d(a: DiscreteMeasure, b: DiscreteMeasure, p: float = 1.0) -> float:
    """Exact W_p in one dimension.

    Equal-size uniform samples use sorted order statistics; other inputs
    use the exact merged-quantile formula.
    """
    if not (_is_1d_like(a) and _is_1d_like(b)):
        raise ShapeError("wp_exact_1d needs one-dimensional measures")
    if not p >= 1:
        raise ParameterError("p must be >= 1")
    if isinstance(a, EmpiricalMeasure) and isinstance(b, EmpiricalMeasure) and a.n == b.n:
        return onedim.wp_sorted_equal(a.points[:, 0], b.points[:, 0], p)
    return onedim.wp_weighted_1d(a.points[:, 0], a.weights, b.points[:, 0], b.weights, p)


# ---------------------------------------------------------------------------
# Kantorovich-Rubinstein lower bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Witness:
    """Test function f with a claimed Lipschitz constant.

    ``f`` maps an (n, d) array to n values.
    """

    f: object
    lipschitz: float = 1.0
    name: str = "witness"

    def __call__(self, x):
        return np.asarray(self.f(np.asarray(x, float)), float).reshape(-1)


def identity_witness():
    return Witness(lambda x: x[:, 0], 1.0, "identity")


def constant_witness(c=0.0):
    return Witness(lambda x: np.full(x.shape[0], float(c)), 0.0, "constant")


def kantorovich_witness(mu, nu, sol: TransportSolution | None = None):
    """1-Lipschitz witness built from the dual potential of the p=1 solve.

    f(x) = min_j (|x - y_j| - v_j) is the c-transform of the target
    potential; it is 1-Lipschitz everywhere and attains the optimum.
    """
    if sol is None:
        sol = solve_transport(mu, nu, 1.0)
    Y = np.ascontiguousarray(nu.points)
    v = sol.v.copy()
    return Witness(lambda x: c_transform_min(np.ascontiguousarray(x), Y, v), 1.0, "c-transform")


def certify_lipschitz(witness: Witness, points, n_pairs=2000, seed=0, slack=1e-9):
    """Check |f(x) - f(y)| <= L |x - y| on sampled pairs of the support hull."""
    pts = np.asarray(points, float)
    gen = np.random.Generator(np.random.Philox(seed))
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    k = min(n_pairs, max(pts.shape[0] ** 2, 1))
    i = gen.integers(0, pts.shape[0], k)
    j = gen.integers(0, pts.shape[0], k)
    box = lo + (hi - lo) * gen.random((n_pairs, pts.shape[1]))
    xa = np.concatenate((pts[i], box))
    xb = np.concatenate((pts[j], box[::-1]))
    fa, fb = witness(xa), witness(xb)
    dist = np.linalg.norm(xa - xb, axis=1)
    excess = np.abs(fa - fb) - witness.lipschitz * dist
    bad = excess > slack * (1 + np.abs(fa) + np.abs(fb))
    if bad.any():
        raise CertificateError(f"witness {witness.name} exceeds Lipschitz constant "
                               f"{witness.lipschitz} on {int(bad.sum())} sampled pairs")
    return True


def w1_dual_gap(mu: DiscreteMeasure, nu: DiscreteMeasure, witness: Witness):
    """Kantorovich lower bound int f d(mu - nu) and its gap to exact W_1."""
    _check_pair(mu, nu, 1.0)
    if witness.lipschitz > 1 + 1e-12:
        raise CertificateError("witness Lipschitz constant exceeds 1")
    certify_lipschitz(witness, np.concatenate((mu.points, nu.points)))
    lower = math.fsum(np.concatenate((mu.weights * witness(mu.points),
                                      -nu.weights * witness(nu.points))))
    w1, _ = wp_discrete(mu, nu, 1.0)
    return lower, w1 - lower
