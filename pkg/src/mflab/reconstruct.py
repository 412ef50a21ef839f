"""Kernel reconstruction of a density from an empirical measure and the
sup-norm error bound

    ||f_tilde - f||_inf <= Lip(zeta) / alpha^(d+1) * W_1(mu_hat, mu) + delta(alpha),

where f_tilde = mu_hat * zeta_alpha, zeta_alpha(x) = alpha^-d zeta(x / alpha)
and delta is the modulus of continuity of f.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .errors import CheckRefusedError, ParameterError, ShapeError
from .measures import EmpiricalMeasure, Kernel
from .pde import GridDensity1D
from .transport import onedim, w1_exact_1d

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True, eq=False)
class MollifiedDensity:
    """f_tilde(x) = (1/N) sum_i zeta_alpha(x - X_i)."""

    base: EmpiricalMeasure
    kernel: Kernel
    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ParameterError("bandwidth alpha must be positive")
        if self.kernel.dim != self.base.dim:
            raise ShapeError("kernel and measure dimensions differ")
        if self.dim == 1:
            x = self.base.points[:, 0]
            order = np.argsort(x, kind="stable")
            object.__setattr__(self, "_xs", x[order])
            object.__setattr__(self, "_ws", self.base.weights[order])

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def lipschitz(self) -> float:
        """Lipschitz constant of f_tilde: Lip(zeta) / alpha^(d+1)."""
        return self.kernel.lipschitz_norm / self.alpha ** (self.dim + 1)

    def __call__(self, x, chunk=2048):
        x = np.asarray(x, float)
        if self.dim == 1:
            flat = x.reshape(-1)
            return self._eval_1d(flat, chunk).reshape(x.shape if x.ndim <= 1 or x.shape[-1] != 1
                                                      else x.shape[:-1])
        pts = x.reshape(-1, self.dim)
        return self._eval_nd(pts).reshape(x.shape[:-1])

    def _eval_1d(self, x, chunk):
        a = self.alpha
        xs, ws = self._xs, self._ws
        order = np.argsort(x, kind="stable")
        out = np.empty(x.shape[0])
        for c0 in range(0, x.shape[0], chunk):
            idx = order[c0:c0 + chunk]
            xc = x[idx]
            # only atoms within alpha of this block of evaluation points
            lo = np.searchsorted(xs, xc[0] - a, side="left")
            hi = np.searchsorted(xs, xc[-1] + a, side="right")
            if hi <= lo:
                out[idx] = 0.0
                continue
            u = (xc[:, None] - xs[None, lo:hi]) / a
            out[idx] = self.kernel.profile(np.abs(u)) @ ws[lo:hi] / a
        return out

    def _eval_nd(self, pts):
        from scipy.spatial import cKDTree
        tree = cKDTree(self.base.points)
        out = np.zeros(pts.shape[0])
        for k, nb in enumerate(tree.query_ball_point(pts, self.alpha)):
            if nb:
                u = (pts[k] - self.base.points[nb]) / self.alpha
                out[k] = self.kernel(u) @ self.base.weights[nb]
        return out / self.alpha ** self.dim

    def integral(self) -> float:
        """Quadrature of f_tilde.

        In one dimension an 8-point Gauss rule on every interval between the
        points X_i + k alpha / 4, |k| <= 4, which include the kernel
        breakpoints (exact for the triangular kernel).  In higher dimension the
        integral is the total weight times a radial Gauss rule for the kernel.
        """
        a = self.alpha
        if self.dim == 1:
            br = np.unique((self._xs[:, None] + a * np.linspace(-1, 1, 9)[None, :]).reshape(-1))
            lo, hi = br[:-1], br[1:]
            mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
            nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
            vals = self(nodes.reshape(-1)).reshape(nodes.shape)
            return float(np.sum(half * (vals @ _GL_WEIGHTS)))
        # by linearity every atom contributes the radial integral of the kernel
        r, w = np.polynomial.legendre.leggauss(64)
        r, w = 0.5 * (r + 1), 0.5 * w
        radial = float(np.sum(w * self.kernel.profile(r) * r ** (self.dim - 1)))
        area = 2 * math.pi ** (self.dim / 2) / math.gamma(self.dim / 2)
        return math.fsum(self.base.weights) * area * radial

    def to_csv(self, x) -> str:
        x = np.asarray(x, float).reshape(-1)
        out = io.StringIO()
        out.write("x,f~(x)\n")
        for xi, v in zip(x.tolist(), self(x).tolist()):
            out.write(f"{xi!r},{v!r}\n")
        return out.getvalue()


def mollify(mu: EmpiricalMeasure, kernel: Kernel | None = None, alpha: float = 1.0) -> MollifiedDensity:
    if kernel is None:
        kernel = Kernel("triangular", mu.dim)
    return MollifiedDensity(mu, kernel, float(alpha))


def sup_error_bound(W1: float, alpha: float, L_zeta: float, delta, d: int = 1) -> float:
    """L_zeta / alpha^(d+1) * W1 + delta(alpha)."""
    if not alpha > 0:
        raise ParameterError("alpha must be positive")
    return L_zeta / alpha ** (d + 1) * W1 + float(delta(alpha))


# ---------------------------------------------------------------------------
# targets
# ---------------------------------------------------------------------------

class GridTarget:
    """Piecewise-linear interpolant of a grid density, usable as a target.

    The Lipschitz constant is the largest nodal slope, which bounds the
    interpolant exactly.
    """

    def __init__(self, rho: GridDensity1D):
        self.rho = rho
        self.dim = 1
        self.lipschitz = float(np.max(np.abs(np.diff(rho.values))) / rho.h) if rho.n_cells > 1 else 0.0

    def pdf(self, x):
        return np.interp(x, self.rho.centers, self.rho.values, left=0.0, right=0.0)

    def quantile(self, u):
        return self.rho.quantile(u)

    def w1(self, mu: EmpiricalMeasure) -> float:
        return w1_exact_1d(mu, self.rho)


def _target_w1(mu, target):
    if isinstance(target, GridTarget):
        return target.w1(mu)
    return w1_exact_1d(mu, target)


def _target_range(target, tail=1e-12):
    if isinstance(target, GridTarget):
        nz = np.nonzero(target.rho.values > 0)[0]
        c = target.rho.centers
        return c[nz[0]] - target.rho.h, c[nz[-1]] + target.rho.h
    lo, hi = target.support() if hasattr(target, "support") else (-math.inf, math.inf)
    if not math.isfinite(lo):
        lo = float(target.quantile(tail))
    if not math.isfinite(hi):
        hi = float(target.quantile(1 - tail))
    return lo, hi


@dataclass(frozen=True)
class ReconstructionReport:
    N: int
    epsilon: float
    alpha: float
    L: float
    K: float
    w1: float
    sup_error: float
    sup_error_upper: float
    bound: float
    pitch: float
    inequality_holds: bool
    event: bool
    budget_event: bool
    implication_holds: bool

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def reconstruction_check(mu: EmpiricalMeasure, f, kernel: Kernel | None = None, epsilon: float = 0.3,
                         L_f: float | None = None) -> ReconstructionReport:
    """Evaluate the sup-norm bound and the event implication for one sample.

    alpha = eps / (2L) with L = max(L_f, L_zeta) and K = (2L)^-(d+2).  The
    sup error is the maximum over a grid of pitch alpha/10 that covers the
    atoms and the target's support with an alpha margin.  That maximum is a
    lower bound on the true sup, so the events "sup error > eps" it flags
    are genuine.  ``sup_error_upper`` adds the grid-gap correction
    (Lip(f_tilde) + L_f) * pitch / 2 and is an upper bound.
    """
    if mu.dim != 1:
        raise ShapeError("reconstruction_check works in one dimension")
    d = 1
    kernel = kernel or Kernel("triangular", 1)
    if L_f is None:
        L_f = float(f.lipschitz)
    L = max(L_f, kernel.lipschitz_norm)
    alpha = epsilon / (2 * L)
    K = (2 * L) ** (-(d + 2))
    mol = mollify(mu, kernel, alpha)
    w1 = _target_w1(mu, f)
    lo, hi = _target_range(f)
    x = mu.points[:, 0]
    lo = min(lo, x.min()) - alpha
    hi = max(hi, x.max()) + alpha
    pitch = alpha / 10
    grid = np.arange(lo, hi + pitch, pitch)
    err = float(np.max(np.abs(mol(grid) - f.pdf(grid))))
    upper = err + (mol.lipschitz + L_f) * pitch / 2
    bound = sup_error_bound(w1, alpha, kernel.lipschitz_norm, lambda a: L_f * a, d)
    event = err > epsilon
    budget = w1 > K * epsilon ** (d + 2)
    return ReconstructionReport(mu.n, float(epsilon), alpha, L, K, w1, err, upper, bound, pitch,
                                bool(err <= bound), bool(event), bool(budget),
                                bool((not event) or budget))


# ---------------------------------------------------------------------------
# budget shape
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BudgetFit:
    """Exponent q of eps in the budget exp(-c N eps^q).

    For each N, eps*(N) is the eps at which the budget event
    W_1 > K eps^(d+2) has frequency ``level``; if the probability depends
    on N eps^q only, log N = const - q log eps*.
    """

    exponent: float
    r2: float
    Ns: tuple
    eps_star: tuple
    level: float


def budget_crossing(w1_samples, K: float, d: int = 1, level: float = 0.5) -> float:
    """eps with empirical P[W_1 > K eps^(d+2)] = level."""
    w = np.asarray(w1_samples, float)
    q = float(np.quantile(w, 1.0 - level))
    return (q / K) ** (1.0 / (d + 2))


def fit_budget_exponent(w1_by_N: dict, K: float, d: int = 1, level: float = 0.5) -> BudgetFit:
    Ns = sorted(w1_by_N)
    eps = [budget_crossing(w1_by_N[n], K, d, level) for n in Ns]
    res = stats.linregress(np.log(eps), np.log(Ns))
    return BudgetFit(float(-res.slope), float(res.rvalue ** 2), tuple(Ns), tuple(eps), level)


@dataclass(frozen=True, eq=False)
class EquilibriumReconstruction:
    epsilon: float
    times: np.ndarray
    reports: tuple
    frequency: float
    budget_frequency: float
    scaled: float
    violations: int

    @property
    def w1(self) -> np.ndarray:
        return np.array([r.w1 for r in self.reports])


def equilibrium_reconstruction(bundle, mu_inf: GridDensity1D, epsilon: float, t_min: float = 0.0,
                               kernel: Kernel | None = None, potential=None) -> EquilibriumReconstruction:
    """Reconstruction of the equilibrium density from late particle slices.

    Uses every saved time t >= t_min.  Reports the frequency of sup-error
    deviations above eps, the frequency of the budget event, the scaled
    variable N eps^(2d+4) and the number of failed implications.
    """
    pot = potential or (bundle.config.potential if bundle.config is not None else None)
    if pot is None or not pot.uniformly_convex:
        raise CheckRefusedError("not-uniformly-convex",
                                "equilibrium reconstruction needs the uniformly convex case")
    if bundle.dim != 1:
        raise ShapeError("equilibrium reconstruction is one-dimensional")
    target = GridTarget(mu_inf)
    keep = np.nonzero(bundle.times >= t_min)[0]
    reps = tuple(reconstruction_check(EmpiricalMeasure(bundle.X[k]), target, kernel, epsilon)
                 for k in keep)
    n = max(len(reps), 1)
    return EquilibriumReconstruction(
        float(epsilon), bundle.times[keep], reps,
        sum(r.event for r in reps) / n, sum(r.budget_event for r in reps) / n,
        bundle.N * epsilon ** 6, sum(not r.implication_holds for r in reps))
