"""One-dimensional reference solver for the McKean-Vlasov equation

    d/dt rho = rho'' + (rho (V + W * rho)')'

on a bounded interval with no-flux walls, plus diagnostics for moment,
time-regularity and long-time behaviour of its solutions.

The discretization is a Scharfetter-Gummel finite-volume scheme with the
potential Phi = V + W * rho frozen at the start of each step and the
resulting tridiagonal system solved implicitly.  The matrix is an M-matrix
with unit column sums, so every step preserves positivity and total mass
up to rounding, and the scheme's discrete steady states are exactly the
nodal Gibbs densities exp(-Phi) / Z.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import special, stats

from .errors import (CheckRefusedError, DivergenceError, DomainTooSmallError, OffGridError,
                     ParameterError, SolverError)
from .measures import Law, PotentialSpec
from .transport import onedim

MASS_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class GridDensity1D:
    """Probability density sampled at the centers of a uniform grid.

    ``values[k]`` is the density at x_min + (k + 1/2) h.  Moments use these
    nodal values (midpoint rule); transport distances treat the density as
    piecewise constant, which makes the CDF piecewise linear.
    """

    x_min: float
    x_max: float
    n_cells: int
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, float, copy=True).reshape(-1)
        if not (self.x_max > self.x_min):
            raise ParameterError("x_max must exceed x_min")
        if v.shape[0] != int(self.n_cells):
            raise ParameterError(f"expected {self.n_cells} values, got {v.shape[0]}")
        if not np.all(np.isfinite(v)) or v.min(initial=0.0) < 0:
            raise ParameterError("density values must be finite and nonnegative")
        mass = math.fsum(v) * (self.x_max - self.x_min) / v.shape[0]
        if abs(mass - 1.0) > MASS_TOL:
            raise ParameterError(f"density integrates to {mass!r}, not 1")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "n_cells", int(self.n_cells))
        object.__setattr__(self, "x_min", float(self.x_min))
        object.__setattr__(self, "x_max", float(self.x_max))
        object.__setattr__(self, "t", float(self.t))

    # geometry ---------------------------------------------------------------
    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.h

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_cells + 1)

    @property
    def masses(self) -> np.ndarray:
        return self.values * self.h

    @property
    def bounds(self):
        return (self.x_min, self.x_max)

    # moments ----------------------------------------------------------------
    @property
    def mass(self) -> float:
        return math.fsum(self.masses)

    @property
    def mean(self) -> float:
        return float(np.dot(self.centers, self.masses))

    @property
    def second_moment(self) -> float:
        x = self.centers
        return float(np.dot(x * x, self.masses))

    @property
    def variance(self) -> float:
        x = self.centers - self.mean
        return float(np.dot(x * x, self.masses))

    def sq_exp_moment(self, alpha: float) -> float:
        x = self.centers
        with np.errstate(over="ignore"):
            return float(np.dot(np.exp(alpha * x * x), self.masses))

    # distribution functions -------------------------------------------------
    def cdf_polyline(self):
        return onedim.grid_cdf_polyline(self.edges, self.masses)

    def cdf(self, x):
        ts, ys = self.cdf_polyline()
        return np.interp(np.asarray(x, float), ts, ys)

    def quantile(self, u):
        """Inverse of the piecewise-linear CDF (leftmost point on flat parts)."""
        u = np.asarray(u, float)
        ts, ys = self.cdf_polyline()
        k = np.clip(np.searchsorted(ys, u, side="left"), 1, ys.shape[0] - 1)
        y0, y1 = ys[k - 1], ys[k]
        frac = np.where(y1 > y0, (u - y0) / np.where(y1 > y0, y1 - y0, 1.0), 0.0)
        return ts[k - 1] + np.clip(frac, 0.0, 1.0) * (ts[k] - ts[k - 1])

    def sample(self, n: int, gen: np.random.Generator) -> np.ndarray:
        """Inverse-CDF draws of shape (n, 1)."""
        return self.quantile(gen.random(n))[:, None]

    def equal_mass_atoms(self, m: int) -> np.ndarray:
        """Quantiles at the midpoints (k + 1/2)/m; a deterministic m-point proxy."""
        return self.quantile((np.arange(m) + 0.5) / m)

    def w1(self, other) -> float:
        return onedim.w1_polyline_cdf(self.cdf_polyline(), other.cdf_polyline())

    def wp(self, other, p=2.0) -> float:
        return onedim.wp_polyline_quantile(self.cdf_polyline(), other.cdf_polyline(), p)

    def with_values(self, values, t=None) -> "GridDensity1D":
        return GridDensity1D(self.x_min, self.x_max, self.n_cells, values,
                             self.t if t is None else t)

    # construction -----------------------------------------------------------
    @classmethod
    def from_law(cls, law: Law, x_min: float, x_max: float, n_cells: int, t=0.0,
                 leak_tol=1e-10) -> "GridDensity1D":
        """Cell averages of a 1-D law, renormalized to the interval."""
        edges = np.linspace(x_min, x_max, n_cells + 1)
        cdf = np.asarray(law.cdf(edges), float)
        outside = cdf[0] + (1.0 - cdf[-1])
        if outside > leak_tol:
            raise DomainTooSmallError(
                f"interval [{x_min}, {x_max}] misses mass {outside:.3g} of {law.spec()}")
        m = np.clip(np.diff(cdf), 0.0, None)
        total = math.fsum(m)
        h = (x_max - x_min) / n_cells
        return cls(x_min, x_max, n_cells, m / (total * h), t)

    @classmethod
    def from_function(cls, f, x_min, x_max, n_cells, t=0.0) -> "GridDensity1D":
        """Normalized nodal values of a nonnegative function."""
        h = (x_max - x_min) / n_cells
        x = x_min + (np.arange(n_cells) + 0.5) * h
        v = np.clip(np.asarray(f(x), float), 0.0, None)
        return cls(x_min, x_max, n_cells, v / (math.fsum(v) * h), t)

    def regrid(self, x_min, x_max, n_cells) -> "GridDensity1D":
        """Conservative transfer through the piecewise-linear CDF."""
        edges = np.linspace(x_min, x_max, n_cells + 1)
        c = self.cdf(edges)
        if c[0] > MASS_TOL or 1.0 - c[-1] > MASS_TOL:
            raise DomainTooSmallError("target grid does not contain the density")
        m = np.diff(c)
        h = (x_max - x_min) / n_cells
        return GridDensity1D(x_min, x_max, n_cells, m / (math.fsum(m) * h), self.t)

    # serialization ----------------------------------------------------------
    def to_csv(self, potential_tag: str = "") -> str:
        out = io.StringIO()
        out.write(f"# t={self.t!r}\n# n_cells={self.n_cells}\n")
        out.write(f"# x_min={self.x_min!r}\n# x_max={self.x_max!r}\n")
        out.write(f"# potential={potential_tag}\n")
        out.write("x,f(x)\n")
        for x, v in zip(self.centers.tolist(), self.values.tolist()):
            out.write(f"{x!r},{v!r}\n")
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "GridDensity1D":
        meta, rows = {}, []
        for ln in text.splitlines():
            if ln.startswith("#"):
                k, _, v = ln[1:].strip().partition("=")
                meta[k.strip()] = v.strip()
            elif ln and not ln.startswith("x,"):
                rows.append(float(ln.split(",")[1]))
        return cls(float(meta["x_min"]), float(meta["x_max"]), int(meta["n_cells"]),
                   np.array(rows), float(meta["t"]))


def auto_domain(law: Law, T: float, potential: PotentialSpec | None = None,
                tail=1e-10, margin=0.5):
    """Symmetric interval that keeps the solution away from the walls.

    The half-width covers the initial law plus free diffusion over [0, T]
    at Gaussian tail level ``tail``, enlarged by ``margin``.  A confining
    potential only shrinks the spread, so the estimate is conservative in
    the convex case; the solver still checks the boundary at every step.
    """
    z = float(special.ndtri(1 - tail / 2))
    mean = float(getattr(law, "mean", 0.0))
    var0 = _law_variance(law)
    center = 0.0
    if potential is not None and potential.family == "quadratic":
        center = potential.center[0]
    reach = max(abs(mean), abs(center)) + z * math.sqrt(var0 + 2.0 * T)
    if potential is not None and potential.family == "quadratic" and potential.beta > 0:
        # the stationary spread is 1/beta at most in the convex quadratic case
        reach = max(abs(mean), abs(center)) + z * math.sqrt(var0 + min(2.0 * T, 1.0 / potential.beta))
    lo, hi = law.support() if hasattr(law, "support") else (-math.inf, math.inf)
    half = (1.0 + margin) * reach
    if math.isfinite(lo) and math.isfinite(hi):
        half = max(half, (1.0 + margin) * max(abs(lo), abs(hi)))
    return -half, half


def _law_variance(law) -> float:
    if hasattr(law, "std"):
        return float(law.std) ** 2
    lo, hi = law.support()
    if math.isfinite(lo) and math.isfinite(hi):
        return (hi - lo) ** 2 / 12.0
    if hasattr(law, "df"):
        return float(law.scale) ** 2 * law.df / (law.df - 2.0)
    # numerical variance from the quantile function
    u = (np.arange(4000) + 0.5) / 4000
    return float(np.var(law.quantile(u)))


# ---------------------------------------------------------------------------
# potentials on the grid
# ---------------------------------------------------------------------------

def _w_poly(potential: PotentialSpec) -> np.ndarray:
    """Ascending coefficients of W in one dimension."""
    if potential.family == "custom-polynomial":
        return np.asarray(potential.w_coeffs or (0.0,), float)
    return np.array([0.0, 0.0, 0.5 * potential.gamma])


def convolve_w(potential: PotentialSpec, x: np.ndarray, masses: np.ndarray) -> np.ndarray:
    """(W * rho)(x) for the discrete measure sum_k masses[k] delta_{x_k}.

    W is a polynomial, so W(x - y) expands in the centered moments of rho
    and the convolution is exact at O(n deg W) cost.
    """
    w = _w_poly(potential)
    deg = w.shape[0] - 1
    if deg <= 0:
        return np.full(x.shape, w[0] * math.fsum(masses))
    c = float(np.dot(x, masses) / masses.sum())
    xc = x - c
    mom = np.array([np.dot(xc ** j, masses) for j in range(deg + 1)])
    # coefficients of the result as a polynomial in (x - c)
    out = np.zeros(deg + 1)
    for k in range(deg + 1):
        if w[k] == 0:
            continue
        for j in range(k + 1):
            out[k - j] += w[k] * special.comb(k, j, exact=True) * (-1) ** j * mom[j]
    return np.polynomial.polynomial.polyval(xc, out)


def convolve_w_direct(potential: PotentialSpec, x: np.ndarray, masses: np.ndarray) -> np.ndarray:
    """Quadratic-cost reference for ``convolve_w``: sum_j W(x_i - x_j) m_j."""
    return potential.W((x[:, None] - x[None, :])[..., None]) @ masses


def total_potential(potential: PotentialSpec, rho: GridDensity1D) -> np.ndarray:
    x = rho.centers
    phi = np.asarray(potential.V(x[:, None]), float)
    if potential.has_interaction:
        phi = phi + convolve_w(potential, x, rho.masses)
    return phi


def _bernoulli(z):
    """B(z) = z / (e^z - 1), with B(0) = 1."""
    z = np.asarray(z, float)
    small = np.abs(z) < 1e-6
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 - 0.5 * z + z * z / 12.0, safe / np.expm1(safe))


@njit(cache=True)
def _thomas(lower, diag, upper, rhs):
    """Tridiagonal solve without pivoting (safe for M-matrices).

    ``lower[k]`` couples row k+1 to column k, ``upper[k]`` row k to k+1.
    """
    n = diag.shape[0]
    c = np.empty(n)
    y = np.empty(n)
    c[0] = upper[0] / diag[0] if n > 1 else 0.0
    y[0] = rhs[0] / diag[0]
    for k in range(1, n):
        den = diag[k] - lower[k - 1] * c[k - 1]
        if k < n - 1:
            c[k] = upper[k] / den
        y[k] = (rhs[k] - lower[k - 1] * y[k - 1]) / den
    for k in range(n - 2, -1, -1):
        y[k] -= c[k] * y[k + 1]
    return y


def _sg_bands(phi, h, dt):
    d = np.diff(phi)
    bp = _bernoulli(d)
    bm = _bernoulli(-d)
    r = dt / (h * h)
    diag = np.ones(phi.shape[0])
    diag[:-1] += r * bp
    diag[1:] += r * bm
    return -r * bp, diag, -r * bm


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DensitySeries:
    """Saved densities of one solve, all on the same grid."""

    times: np.ndarray
    values: np.ndarray
    x_min: float
    x_max: float
    potential: PotentialSpec
    dt: float
    mass_drift: float = 0.0
    max_step_drift: float = 0.0
    clipped_mass: float = 0.0
    notes: tuple = field(default=())

    def __post_init__(self):
        for name in ("times", "values"):
            a = np.array(getattr(self, name), float, copy=True)
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    def __len__(self):
        return self.times.shape[0]

    def __getitem__(self, k) -> GridDensity1D:
        return GridDensity1D(self.x_min, self.x_max, self.n_cells, self.values[k], self.times[k])

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    @property
    def n_cells(self) -> int:
        return self.values.shape[1]

    @property
    def tag(self) -> str:
        return self.potential.tag

    @property
    def final(self) -> GridDensity1D:
        return self[len(self) - 1]

    def index_of(self, t, atol=1e-9) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > atol * max(1.0, abs(t)):
            raise OffGridError(f"t={t!r} is not a saved time; nearest saved time is {self.times[k]!r}")
        return k

    def at(self, t) -> GridDensity1D:
        return self[self.index_of(t)]

    def covers(self, times, atol=1e-9) -> bool:
        try:
            for t in np.atleast_1d(times):
                self.index_of(float(t), atol)
        except OffGridError:
            return False
        return True


def solve_mckean_1d(potential: PotentialSpec, initial: GridDensity1D, T: float, dt: float,
                    n_cells: int | None = None, save_every: int = 1, leak_tol: float = 1e-10,
                    clip_tol: float = 1e-8) -> DensitySeries:
    """Integrate the nonlinear Fokker-Planck equation on [0, T].

    Each step freezes Phi = V + W * rho at the current density and solves
    the implicit Scharfetter-Gummel system.  Boundary cells holding more
    than ``leak_tol`` mass raise DomainTooSmallError; negative values from
    rounding are clipped and the run aborts if their total exceeds
    ``clip_tol``.  Mass is never renormalized; its drift is recorded.
    """
    if potential.dim != 1:
        raise ParameterError("the grid solver is one-dimensional")
    if not (dt > 0 and T >= 0):
        raise ParameterError("need dt > 0 and T >= 0")
    if n_cells is not None and int(n_cells) != initial.n_cells:
        initial = initial.regrid(initial.x_min, initial.x_max, int(n_cells))
    n_steps = int(round(T / dt))
    if abs(n_steps * dt - T) > 1e-9 * max(T, 1.0):
        raise ParameterError("T must be an integer multiple of dt")
    save_every = max(int(save_every), 1)
    h = initial.h
    x = initial.centers
    V = np.asarray(potential.V(x[:, None]), float)
    interact = potential.has_interaction
    rho = np.array(initial.values, float)
    mass0 = math.fsum(rho) * h
    times = [initial.t]
    saved = [rho.copy()]
    ab = None
    max_drift = 0.0
    clipped = 0.0
    prev_mass = mass0
    for step in range(1, n_steps + 1):
        if ab is None or interact:
            phi = V + convolve_w(potential, x, rho * h) if interact else V
            ab = _sg_bands(phi, h, dt)
        rho = _thomas(ab[0], ab[1], ab[2], rho)
        total = rho.sum()
        if not math.isfinite(total):
            raise DivergenceError(step)
        if rho.min() < 0:
            neg = rho < 0
            clipped += -rho[neg].sum() * h
            rho[neg] = 0.0
            if clipped > clip_tol:
                raise SolverError(f"clipped mass {clipped:.3g} exceeds {clip_tol:g} at step {step}")
        edge = (rho[0] + rho[-1]) * h
        if edge > leak_tol:
            raise DomainTooSmallError(
                f"boundary cells hold mass {edge:.3g} at t={initial.t + step * dt:.6g}; "
                f"widen [{initial.x_min}, {initial.x_max}]")
        mass = rho.sum() * h
        max_drift = max(max_drift, abs(mass - prev_mass))
        prev_mass = mass
        if step % save_every == 0 or step == n_steps:
            times.append(initial.t + step * dt)
            saved.append(rho.copy())
    return DensitySeries(np.array(times), np.array(saved), initial.x_min, initial.x_max, potential,
                         dt, abs(prev_mass - mass0), max_drift, clipped)


def stationary_density(potential: PotentialSpec, x_min: float, x_max: float, n_cells: int,
                       start: GridDensity1D | None = None, damping=0.5, tol=1e-14,
                       max_iter=100000) -> GridDensity1D:
    """Discrete steady state rho = exp(-V - W * rho) / Z of the scheme.

    Found by damped fixed-point iteration.  In the uniformly convex case the
    map contracts; otherwise convergence is not guaranteed and a
    SolverError reports the last increment.
    """
    h = (x_max - x_min) / n_cells
    if start is None:
        rho = GridDensity1D.from_function(lambda z: np.exp(-(z * z) / 2), x_min, x_max, n_cells)
    else:
        rho = start.regrid(x_min, x_max, n_cells) if start.n_cells != n_cells else start
    x = rho.centers
    V = np.asarray(potential.V(x[:, None]), float)
    cur = np.array(rho.values)
    for _ in range(max_iter):
        phi = V + (convolve_w(potential, x, cur * h) if potential.has_interaction else 0.0)
        g = np.exp(-(phi - phi.min()))
        g /= math.fsum(g) * h
        nxt = (1 - damping) * cur + damping * g if potential.has_interaction else g
        diff = np.abs(nxt - cur).sum() * h
        cur = nxt
        if diff < tol:
            return GridDensity1D(x_min, x_max, n_cells, cur / (math.fsum(cur) * h), math.inf)
    raise SolverError(f"stationary iteration did not converge (last L1 step {diff:.3g})")


# ---------------------------------------------------------------------------
# moment diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MomentTrace:
    """Second moment, square-exponential moment and mean along a solve."""

    times: np.ndarray
    e: np.ndarray
    M_alpha: np.ndarray
    mean: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        if np.any(self.e < self.mean ** 2 - 1e-12 * np.maximum(self.e, 1.0)):
            raise ParameterError("second moment below squared mean")


def alpha_schedule(alpha0: float, b: float):
    """alpha(t) = e^{-bt} / (1/alpha0 + 4 (1 - e^{-bt}) / b), with the b -> 0 limit."""
    if not alpha0 > 0:
        raise ParameterError("alpha0 must be positive")
    a0, b = float(alpha0), float(b)

    def alpha(t):
        t = np.asarray(t, float)
        if b == 0:
            return 1.0 / (1.0 / a0 + 4.0 * t)
        # -expm1(-bt)/b is accurate for small b t
        return np.exp(-b * t) / (1.0 / a0 - 4.0 * np.expm1(-b * t) / b)

    return alpha


def moment_trace(series: DensitySeries, alpha=None) -> MomentTrace:
    """Moments of every saved density; ``alpha`` is a callable schedule or None."""
    e, mean, ma, al = [], [], [], []
    for rho in series:
        e.append(rho.second_moment)
        mean.append(rho.mean)
        a = float(alpha(rho.t)) if alpha is not None else 0.0
        al.append(a)
        ma.append(rho.sq_exp_moment(a) if alpha is not None else 1.0)
    return MomentTrace(np.array(series.times), np.array(e), np.array(ma), np.array(mean), np.array(al))


@dataclass(frozen=True, eq=False)
class GronwallReport:
    times: np.ndarray
    e: np.ndarray
    bound: np.ndarray
    residual: np.ndarray
    a: float
    G: float
    eta_bar: float

    @property
    def min_residual(self) -> float:
        return float(self.residual.min())


def default_eta_bar(gamma: float) -> float:
    """gamma itself when gamma < 0, else the small negative default -1e-3.

    With a negative interaction constant the interaction term contributes
    +2|gamma| e(t) to e'(t), so the decay rate must be reduced by |gamma|.
    """
    return float(gamma) if gamma < 0 else -1e-3


def energy_bound(t, e0, a, G):
    """e^{-at} [e0 + G (e^{at} - 1) / a], continuous at a = 0."""
    t = np.asarray(t, float)
    if a == 0:
        return e0 + G * t
    return np.exp(-a * t) * e0 - G * np.expm1(-a * t) / a


def energy_gronwall_check(trace: MomentTrace, potential: PotentialSpec,
                          eta_bar: float | None = None) -> GronwallReport:
    """residual(t) = bound(t) - e(t) for the second-moment Gronwall bound."""
    if eta_bar is None:
        eta_bar = default_eta_bar(potential.gamma)
    if not eta_bar < 0:
        raise ParameterError("eta_bar must be negative")
    d = potential.dim
    gv0 = np.asarray(potential.grad_V(np.zeros((1, d))), float).reshape(-1)
    a = 2.0 * (potential.beta + eta_bar)
    G = 2.0 * d + float(gv0 @ gv0) / (2.0 * abs(eta_bar))
    t = trace.times - trace.times[0]
    bound = energy_bound(t, trace.e[0], a, G)
    return GronwallReport(trace.times, trace.e, bound, bound - trace.e, a, G, float(eta_bar))


def ou_second_moment(t, e0, d=1, beta=1.0):
    """Exact second moment of the centered OU flow: d/beta + (e0 - d/beta) e^{-2 beta t}."""
    t = np.asarray(t, float)
    return d / beta + (e0 - d / beta) * np.exp(-2 * beta * t)


# ---------------------------------------------------------------------------
# time regularity and long-time behaviour
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogFit:
    slope: float
    intercept: float
    r2: float
    n: int


def _linfit(x, y) -> LogFit:
    res = stats.linregress(x, y)
    return LogFit(float(res.slope), float(res.intercept), float(res.rvalue ** 2), len(x))


@dataclass(frozen=True, eq=False)
class HolderReport:
    gaps: np.ndarray
    w1: np.ndarray
    exponent: float
    constant: float
    max_ratio: float
    r2: float


def time_holder_check(series: DensitySeries, gaps=None, anchor: float | None = None) -> HolderReport:
    """Fit W_1(mu_s, mu_{s+g}) ~ C g^kappa over dyadic gaps g.

    For each gap the largest distance over admissible saved pairs is used
    (or only s = ``anchor`` when given).  Reports the slope kappa, the
    constant exp(intercept) and max over pairs of W_1 / sqrt(g).
    """
    times = series.times
    T = times[-1] - times[0]
    if gaps is None:
        # dyadic multiples of the save interval, skipping the finest one
        step = times[1] - times[0]
        gaps = [step * 2 ** k for k in range(1, 64) if step * 2 ** k <= T / 2 + 1e-12]
    gaps = np.array(sorted(gaps), float)
    dens = list(series)
    cdfs = [r.cdf_polyline() for r in dens]
    out = []
    ratio = 0.0
    for g in gaps:
        best = 0.0
        found = False
        for i, s in enumerate(times):
            if anchor is not None and abs(s - anchor) > 1e-12:
                continue
            try:
                j = series.index_of(s + g)
            except OffGridError:
                continue
            found = True
            d = onedim.w1_polyline_cdf(cdfs[i], cdfs[j])
            best = max(best, d)
            if g > 0:
                ratio = max(ratio, d / math.sqrt(g))
        if not found:
            raise OffGridError(f"gap {g!r} has no pair of saved times")
        out.append(best)
    w1 = np.array(out)
    if np.any(w1 <= 0):
        return HolderReport(gaps, w1, math.nan, math.nan, ratio, math.nan)
    fit = _linfit(np.log(gaps), np.log(w1))
    return HolderReport(gaps, w1, fit.slope, math.exp(fit.intercept), ratio, fit.r2)


@dataclass(frozen=True, eq=False)
class EquilibriumReport:
    times: np.ndarray
    w2: np.ndarray
    rate: float
    constant: float
    r2: float
    n_fit: int


def equilibrium_convergence_check(series: DensitySeries, mu_inf: GridDensity1D, t_min=0.0,
                                  floor=1e-9) -> EquilibriumReport:
    """Fit log W_2(mu_t, mu_inf) = log C - lambda t on the saved times.

    Only points with t >= ``t_min`` and distance above ``floor`` (where
    rounding takes over) enter the fit.  Refused outside the uniformly
    convex regime beta > 0, beta + 2 min(gamma, 0) > 0.
    """
    pot = series.potential
    if not pot.uniformly_convex:
        raise CheckRefusedError("not-uniformly-convex",
                                f"equilibrium rate needs beta > 0 and beta + 2 min(gamma, 0) > 0; "
                                f"got beta={pot.beta:g}, gamma={pot.gamma:g}")
    ref = mu_inf.cdf_polyline()
    w2 = np.array([onedim.wp_polyline_quantile(r.cdf_polyline(), ref, 2.0) for r in series])
    keep = (series.times >= t_min) & (w2 > floor)
    if keep.sum() < 3:
        return EquilibriumReport(series.times, w2, math.nan, math.nan, math.nan, int(keep.sum()))
    fit = _linfit(series.times[keep], np.log(w2[keep]))
    return EquilibriumReport(series.times, w2, -fit.slope, math.exp(fit.intercept), fit.r2,
                             int(keep.sum()))


def grid_for(law: Law, T: float, potential: PotentialSpec | None = None, h: float = 0.02,
             **kw) -> GridDensity1D:
    """Initial density of ``law`` on an automatically sized grid of pitch about h."""
    lo, hi = auto_domain(law, T, potential, **kw)
    n = int(math.ceil((hi - lo) / h))
    return GridDensity1D.from_law(law, lo, hi, n)
