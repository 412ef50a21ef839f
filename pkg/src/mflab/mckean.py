"""Interacting particle system, its synchronously coupled nonlinear copy,
and the diagnostics built on top of them.

    dX^i = sqrt(2) dB^i - grad V(X^i) dt - (1/N) sum_j grad W(X^i - X^j) dt
    dY^i = sqrt(2) dB^i - grad V(Y^i) dt - (grad W * mu_t)(Y^i) dt

Both systems start from the same positions and use the same Brownian
increments.  Every particle owns two random streams, one for its initial
position and one for its noise, so relabelling particles relabels
trajectories.
"""
from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special, stats

from .concentration import clopper_pearson
from .errors import ConfigError, DivergenceError, DomainError, OffGridError, ParameterError, ShapeError
from .measures import DiscreteMeasure, EmpiricalMeasure, Law, PointMass, PotentialSpec, RngSpec, measure_to_text
from .pde import DensitySeries
from .transport import onedim, wp_discrete

FORCE_METHODS = ("auto", "pairwise", "moments")
PAIRWISE_MAX_N = 1024


def stability_cap(potential: PotentialSpec) -> float:
    """Largest admissible Euler step: 0.5 / max(|beta| + 2 Gamma, 1)."""
    return 0.5 / max(abs(potential.beta) + 2 * potential.Gamma, 1.0)


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one particle simulation.

    ``noise_dt`` is the resolution at which Brownian increments are drawn;
    each Euler step sums dt / noise_dt of them, so a run at dt and one at
    dt / 2 with the same ``noise_dt`` see the same Brownian path.
    ``stream_ids`` assigns random streams to particles (default 0..N-1).
    """

    N: int
    dt: float
    T: float
    potential: PotentialSpec
    initial: Law
    rng: RngSpec
    save_stride: int = 1
    force: str = "auto"
    noise_dt: float | None = None
    stream_ids: tuple | None = None

    def __post_init__(self):
        if int(self.N) < 1:
            raise ConfigError("N must be positive")
        object.__setattr__(self, "N", int(self.N))
        if self.potential.has_interaction and self.N < 2:
            raise ConfigError("interaction needs N >= 2")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError("dt must be positive")
        cap = stability_cap(self.potential)
        if self.dt > cap * (1 + 1e-12):
            raise ConfigError(f"dt={self.dt!r} exceeds the stability cap {cap!r}")
        if not self.T >= 0:
            raise ConfigError("T must be nonnegative")
        if abs(self.n_steps * self.dt - self.T) > 1e-9 * max(1.0, self.T):
            raise ConfigError("T must be an integer multiple of dt")
        if int(self.save_stride) < 1:
            raise ConfigError("save_stride must be >= 1")
        object.__setattr__(self, "save_stride", int(self.save_stride))
        if self.force not in FORCE_METHODS:
            raise ConfigError(f"force must be one of {FORCE_METHODS}")
        if self.initial.dim != self.potential.dim:
            raise ConfigError("initial law and potential disagree on the dimension")
        if self.noise_dt is not None:
            k = self.dt / self.noise_dt
            if not (self.noise_dt > 0 and abs(k - round(k)) < 1e-9 and round(k) >= 1):
                raise ConfigError("dt must be an integer multiple of noise_dt")
        if self.stream_ids is not None:
            ids = tuple(int(i) for i in self.stream_ids)
            if len(ids) != self.N or len(set(ids)) != self.N:
                raise ConfigError("stream_ids must be N distinct integers")
            object.__setattr__(self, "stream_ids", ids)

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def dim(self) -> int:
        return self.potential.dim

    @property
    def substeps(self) -> int:
        return 1 if self.noise_dt is None else int(round(self.dt / self.noise_dt))

    @property
    def force_method(self) -> str:
        if self.force != "auto":
            return self.force
        return "pairwise" if self.N <= PAIRWISE_MAX_N else "moments"

    @property
    def ids(self) -> tuple:
        return self.stream_ids if self.stream_ids is not None else tuple(range(self.N))

    def replace(self, **kw) -> "SimConfig":
        vals = {f: getattr(self, f) for f in self.__dataclass_fields__}
        vals.update(kw)
        return SimConfig(**vals)


@dataclass(frozen=True, eq=False)
class TrajectoryBundle:
    """Saved particle positions, shape (n_saved, N, d) per system.

    ``kind`` is "interacting" (X only), "coupled" (X and Y) or
    "nonlinear" (independent copies of the nonlinear process stored in X).
    """

    times: np.ndarray
    X: np.ndarray
    Y: np.ndarray | None = None
    shared_noise: bool = False
    dt: float = math.nan
    save_stride: int = 1
    seed: int = 0
    kind: str = "interacting"
    config: SimConfig | None = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("times", "X", "Y"):
            a = getattr(self, name)
            if a is None:
                continue
            a = np.array(a, float, copy=True)
            a.flags.writeable = False
            object.__setattr__(self, name, a)
        if self.X.ndim != 3 or self.X.shape[0] != self.times.shape[0]:
            raise ShapeError("X must have shape (n_saved, N, d)")
        if not np.all(np.isfinite(self.X)):
            raise ParameterError("trajectories must be finite")
        if self.Y is not None:
            if self.Y.shape != self.X.shape:
                raise ShapeError("X and Y must have the same shape")
            if not np.array_equal(self.X[0], self.Y[0]):
                raise ParameterError("X and Y must share the initial slice")
            if not np.all(np.isfinite(self.Y)):
                raise ParameterError("trajectories must be finite")

    @property
    def N(self) -> int:
        return self.X.shape[1]

    @property
    def dim(self) -> int:
        return self.X.shape[2]

    def index_of(self, t, atol=1e-9) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > atol * max(1.0, abs(t)):
            raise OffGridError(f"t={t!r} is not a saved time (no interpolation); "
                               f"nearest saved time is {self.times[k]!r}")
        return k

    def slice(self, t, which="X") -> np.ndarray:
        k = self.index_of(t)
        if which == "X":
            return self.X[k]
        if which == "Y":
            if self.Y is None:
                raise ParameterError("bundle has no Y system")
            return self.Y[k]
        raise ParameterError("which must be 'X' or 'Y'")


# ---------------------------------------------------------------------------
# reference flows mu_t for the nonlinear system
# ---------------------------------------------------------------------------

class ReferenceFlow:
    """Time series of reference measures mu_t used by the nonlinear drift.

    Built from a PDE solve (grid densities; the convolution is the exact
    nodal quadrature sum) or from samples of a large independent run
    (plain sample average).  Between stored times the measure is
    interpolated linearly, i.e. the stored moments are.
    """

    def __init__(self, times, moments, kind, frames, potential=None):
        self.times = np.asarray(times, float)
        self.moments = np.asarray(moments, float)
        self.kind = kind
        self.frames = frames
        self.potential = potential

    @staticmethod
    def _moment_rows(potential, points_list, weights_list):
        rows = []
        for pts, w in zip(points_list, weights_list):
            if potential.family == "custom-polynomial":
                deg = max(len(potential.w_coeffs) - 1, 0)
                x = pts[:, 0]
                rows.append([float(np.dot(x ** j, w)) for j in range(deg + 1)])
            else:
                rows.append(list(w @ pts))
        return rows

    @classmethod
    def from_series(cls, series: DensitySeries, potential: PotentialSpec | None = None):
        potential = potential or series.potential
        frames = list(series)
        pts = [r.centers[:, None] for r in frames]
        ws = [r.masses for r in frames]
        return cls(series.times, cls._moment_rows(potential, pts, ws), "grid", frames, potential)

    @classmethod
    def from_samples(cls, times, samples, potential: PotentialSpec):
        samples = np.asarray(samples, float)
        if samples.ndim == 2:
            samples = samples[..., None]
        ws = [np.full(s.shape[0], 1.0 / s.shape[0]) for s in samples]
        return cls(times, cls._moment_rows(potential, list(samples), ws), "sample", list(samples),
                   potential)

    def check_covers(self, T, spacing):
        if self.times[0] > 1e-12 or self.times[-1] < T - 1e-9 * max(1.0, T):
            raise ConfigError(f"reference covers [{self.times[0]}, {self.times[-1]}], need [0, {T}]")
        if self.times.shape[0] > 1 and np.max(np.diff(self.times)) > spacing * (1 + 1e-9):
            raise ConfigError("reference time grid is coarser than the save stride")

    def moments_at(self, t):
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        k = min(max(k, 0), self.times.shape[0] - 1)
        if k == self.times.shape[0] - 1 or t <= self.times[k]:
            return self.moments[k]
        lam = (t - self.times[k]) / (self.times[k + 1] - self.times[k])
        return (1 - lam) * self.moments[k] + lam * self.moments[k + 1]

    def drift(self, y, t, potential: PotentialSpec):
        """(grad W * mu_t)(y) for an (N, d) array."""
        mom = self.moments_at(t)
        if potential.family != "custom-polynomial":
            return potential.gamma * (y - mom)
        dw = np.polynomial.polynomial.polyder(potential.w_coeffs or (0.0,))
        x = y[:, 0]
        out = np.zeros_like(x)
        for k, c in enumerate(dw):
            if c == 0:
                continue
            for j in range(k + 1):
                out += c * special.comb(k, j, exact=True) * (-1) ** j * mom[j] * x ** (k - j)
        return out[:, None]

    def frame_index(self, t, atol=1e-9) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > atol * max(1.0, abs(t)):
            raise OffGridError(f"reference has no frame at t={t!r}; nearest is {self.times[k]!r}")
        return k

    def w1_to(self, points, t) -> float:
        """W_1 between a uniform sample and mu_t."""
        fr = self.frames[self.frame_index(t)]
        pts = np.asarray(points, float)
        w = np.full(pts.shape[0], 1.0 / pts.shape[0])
        if self.kind == "grid":
            return onedim.w1_step_vs_grid(pts[:, 0], w, fr.edges, fr.masses)
        if pts.shape[1] == 1:
            return onedim.wp_weighted_1d(pts[:, 0], w, fr[:, 0], np.full(fr.shape[0], 1.0 / fr.shape[0]), 1.0)
        return wp_discrete(EmpiricalMeasure(pts), EmpiricalMeasure(fr), 1.0)[0]


def as_reference(mu_ref, potential) -> ReferenceFlow:
    if isinstance(mu_ref, ReferenceFlow):
        return mu_ref
    if isinstance(mu_ref, DensitySeries):
        return ReferenceFlow.from_series(mu_ref, potential)
    if isinstance(mu_ref, TrajectoryBundle):
        return ReferenceFlow.from_samples(mu_ref.times, mu_ref.X, potential)
    raise ConfigError("mu_ref must be a DensitySeries, TrajectoryBundle or ReferenceFlow")


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def initial_positions(config: SimConfig) -> np.ndarray:
    """One draw per particle from its own initial-position stream."""
    d = config.dim
    out = np.empty((config.N, d))
    if isinstance(config.initial, PointMass):
        out[:] = config.initial.sample(config.N, None)
        return out
    for p, sid in enumerate(config.ids):
        out[p] = config.initial.sample(1, config.rng.spawn(sid, 0).generator())[0]
    return out


def _interaction(potential, x, method):
    return potential.interaction_drift(x, method=method)


def _simulate(config: SimConfig, ref: ReferenceFlow | None, want_x: bool, want_y: bool):
    pot = config.potential
    N, d, dt = config.N, config.dim, config.dt
    k = config.substeps
    sdt = math.sqrt(dt / k)
    sqrt2 = math.sqrt(2.0)
    method = config.force_method
    interact = pot.has_interaction
    gens = [config.rng.spawn(sid, 1).generator() for sid in config.ids]
    x0 = initial_positions(config)
    X = x0.copy()
    Y = x0.copy()
    xs, ys, times = [X.copy()], [Y.copy()], [0.0]
    n_steps = config.n_steps
    block = max(1, min(256, (1 << 22) // max(N * d * k, 1)))
    for b0 in range(0, n_steps, block):
        nb = min(block, n_steps - b0)
        Z = np.empty((nb * k, N, d))
        for p, g in enumerate(gens):
            Z[:, p, :] = g.standard_normal((nb * k, d))
        if k > 1:
            Z = Z.reshape(nb, k, N, d).sum(axis=1)
        for s in range(nb):
            step = b0 + s + 1
            t = (step - 1) * dt
            inc = sqrt2 * (sdt * Z[s])
            if want_x:
                drift = pot.grad_V(X)
                if interact:
                    drift = drift + _interaction(pot, X, method)
                X = X - dt * drift + inc
                if not math.isfinite(X.sum()):
                    raise DivergenceError(step)
            if want_y:
                drift = pot.grad_V(Y)
                if interact:
                    drift = drift + ref.drift(Y, t, pot)
                Y = Y - dt * drift + inc
                if not math.isfinite(Y.sum()):
                    raise DivergenceError(step)
            if step % config.save_stride == 0 or step == n_steps:
                times.append(step * dt)
                xs.append(X.copy())
                ys.append(Y.copy())
    return np.array(times), np.array(xs), np.array(ys)


def simulate_interacting(config: SimConfig) -> TrajectoryBundle:
    """Euler-Maruyama for the N-particle system with the exact interaction sum."""
    times, xs, _ = _simulate(config, None, True, False)
    return TrajectoryBundle(times, xs, None, False, config.dt, config.save_stride, config.rng.seed,
                            "interacting", config)


def _prepare_ref(config, mu_ref):
    if not config.potential.has_interaction:
        return None if mu_ref is None else as_reference(mu_ref, config.potential)
    if mu_ref is None:
        raise ConfigError("the nonlinear drift needs a reference flow mu_ref")
    ref = as_reference(mu_ref, config.potential)
    ref.check_covers(config.T, config.save_stride * config.dt)
    return ref


def simulate_coupled(config: SimConfig, mu_ref=None) -> TrajectoryBundle:
    """Interacting system X and nonlinear system Y driven by the same noise."""
    ref = _prepare_ref(config, mu_ref)
    times, xs, ys = _simulate(config, ref, True, True)
    return TrajectoryBundle(times, xs, ys, True, config.dt, config.save_stride, config.rng.seed,
                            "coupled", config)


def simulate_nonlinear(config: SimConfig, mu_ref=None) -> TrajectoryBundle:
    """N independent copies of the nonlinear process (stored in X)."""
    ref = _prepare_ref(config, mu_ref)
    times, _, ys = _simulate(config, ref, False, True)
    return TrajectoryBundle(times, ys, None, False, config.dt, config.save_stride, config.rng.seed,
                            "nonlinear", config)


def empirical_at(bundle: TrajectoryBundle, t: float, which: str = "X") -> EmpiricalMeasure:
    return EmpiricalMeasure(bundle.slice(t, which))


def pair_empirical(bundle: TrajectoryBundle, t: float, which: str = "X") -> DiscreteMeasure:
    """Uniform measure on the N(N-1) ordered pairs (x_i, x_j), i != j."""
    x = bundle.slice(t, which)
    n = x.shape[0]
    if n < 2:
        raise DomainError("pair empirical measure needs N >= 2")
    i, j = np.nonzero(~np.eye(n, dtype=bool))
    pts = np.concatenate((x[i], x[j]), axis=1)
    return EmpiricalMeasure(pts)


# ---------------------------------------------------------------------------
# coupling inequality
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CouplingReport:
    times: np.ndarray
    w1_x_mu: np.ndarray
    w1_y_mu: np.ndarray
    w1_x_y: np.ndarray
    rhs: np.ndarray
    residual: np.ndarray
    alpha: float
    Gamma: float
    tolerance: float = 0.0

    @property
    def min_residual(self) -> float:
        return float(self.residual.min())

    def violations(self, tol=None) -> int:
        tol = self.tolerance if tol is None else tol
        return int(np.sum(self.residual < -tol))


def _w1_samples(a, b):
    if a.shape[1] == 1:
        return onedim.wp_sorted_equal(a[:, 0], b[:, 0], 1.0)
    return wp_discrete(EmpiricalMeasure(a), EmpiricalMeasure(b), 1.0)[0]


def coupling_rhs(times, w1_y_mu, Gamma, alpha):
    """Gamma int_0^t e^{-alpha (t - s)} w(s) ds + w(t), trapezoid on the saved grid."""
    times = np.asarray(times, float)
    w = np.asarray(w1_y_mu, float)
    out = np.empty_like(w)
    for k, t in enumerate(times):
        f = np.exp(-alpha * (t - times[:k + 1])) * w[:k + 1]
        out[k] = Gamma * (integrate.trapezoid(f, times[:k + 1]) if k > 0 else 0.0) + w[k]
    return out


def coupling_check(bundle: TrajectoryBundle, mu_ref, potential: PotentialSpec | None = None,
                   tolerance: float = 0.0) -> CouplingReport:
    """Compare W_1(muhat_t, mu_t) with the coupling right-hand side."""
    if bundle.Y is None:
        raise ParameterError("coupling_check needs a coupled bundle")
    pot = potential or (bundle.config.potential if bundle.config is not None else None)
    if pot is None:
        raise ParameterError("potential unknown; pass it explicitly")
    ref = as_reference(mu_ref, pot)
    alpha = pot.beta + 2 * min(pot.gamma, 0.0)
    Gamma = pot.Gamma
    xm, ym, xy = [], [], []
    for k, t in enumerate(bundle.times):
        xm.append(ref.w1_to(bundle.X[k], t))
        ym.append(ref.w1_to(bundle.Y[k], t))
        xy.append(_w1_samples(bundle.X[k], bundle.Y[k]))
    xm, ym, xy = np.array(xm), np.array(ym), np.array(xy)
    rhs = coupling_rhs(bundle.times, ym, Gamma, alpha)
    return CouplingReport(bundle.times, xm, ym, xy, rhs, rhs - xm, alpha, Gamma, tolerance)


@dataclass(frozen=True, eq=False)
class ToleranceCalibration:
    """Outcome of the dt-halving study.

    ``discretization`` is the largest change of the residual between the
    runs at dt and dt/2 on the same Brownian path; ``grid_error`` the
    largest W_1 gap between reference flows at two resolutions.
    """

    dt: float
    discretization: float
    grid_error: float
    tolerance: float
    residual_coarse: np.ndarray
    residual_fine: np.ndarray


def calibrate_coupling_tolerance(config: SimConfig, mu_ref, mu_ref_fine=None,
                                 safety=2.0) -> ToleranceCalibration:
    """tol = safety * (time-discretization estimate + reference grid error)."""
    fine_dt = config.dt / 2
    coarse = config.replace(noise_dt=fine_dt)
    fine = config.replace(dt=fine_dt, noise_dt=fine_dt, save_stride=2 * config.save_stride)
    ref_f = mu_ref_fine if mu_ref_fine is not None else mu_ref
    rc = coupling_check(simulate_coupled(coarse, mu_ref), mu_ref, config.potential)
    rf = coupling_check(simulate_coupled(fine, ref_f), ref_f, config.potential)
    disc = float(np.max(np.abs(rc.residual - rf.residual)))
    grid = 0.0
    if mu_ref_fine is not None:
        a = as_reference(mu_ref, config.potential)
        b = as_reference(mu_ref_fine, config.potential)
        if a.kind == "grid" and b.kind == "grid":
            grid = max(a.frames[a.frame_index(t)].w1(b.frames[b.frame_index(t)]) for t in rc.times)
    return ToleranceCalibration(config.dt, disc, grid, safety * (disc + grid), rc.residual, rf.residual)


# ---------------------------------------------------------------------------
# regularity and window deviations
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RegularityRow:
    s: float
    t: float
    m2: float
    m2_se: float
    m4: float
    exp_moment: float


@dataclass(frozen=True, eq=False)
class RegularityReport:
    rows: tuple
    exponent: float
    C2: float
    C4: float
    a: float

    def table(self):
        return [(r.s, r.t, r.m2, r.m2_se, r.m4, r.exp_moment) for r in self.rows]


def sde_regularity_check(config: SimConfig, pairs, mu_ref=None, a: float = 0.1) -> RegularityReport:
    """Monte Carlo moments of increments of the nonlinear process.

    ``config.N`` is the number of independent replicas.  For each (s, t)
    reports E|Y_t - Y_s|^2, E|Y_t - Y_s|^4 and E[max over saved u in
    [s, t] of exp(a |Y_u - Y_s|^2)], the fitted exponent of the second
    moment in |t - s| and the constants max m2/|t-s|, max m4/|t-s|^2.
    """
    b = simulate_nonlinear(config, mu_ref)
    rows = []
    for s, t in pairs:
        s, t = sorted((float(s), float(t)))
        i, j = b.index_of(s), b.index_of(t)
        inc = b.X[j] - b.X[i]
        r2 = np.sum(inc * inc, axis=1)
        win = b.X[i:j + 1] - b.X[i][None]
        sup = np.max(np.sum(win * win, axis=2), axis=0)
        with np.errstate(over="ignore"):
            em = float(np.mean(np.exp(a * sup)))
        rows.append(RegularityRow(s, t, float(r2.mean()), float(r2.std(ddof=1) / math.sqrt(len(r2))),
                                  float(np.mean(r2 * r2)), em))
    gaps = np.array([r.t - r.s for r in rows])
    m2 = np.array([r.m2 for r in rows])
    m4 = np.array([r.m4 for r in rows])
    pos = gaps > 0
    exponent = math.nan
    if pos.sum() >= 2:
        exponent = float(stats.linregress(np.log(gaps[pos]), np.log(m2[pos])).slope)
    C2 = float(np.max(m2[pos] / gaps[pos])) if pos.any() else 0.0
    C4 = float(np.max(m4[pos] / gaps[pos] ** 2)) if pos.any() else 0.0
    return RegularityReport(tuple(rows), exponent, C2, C4, a)


@dataclass(frozen=True)
class WindowDeviation:
    epsilon: float
    window: float
    trials: int
    p_window: float
    ci_window: tuple
    p_sup: float
    ci_sup: tuple
    diverged: int
    grid_stride: float


def sup_deviation_over_window(config: SimConfig, mu_ref, epsilon: float, window: float,
                              trials: int) -> WindowDeviation:
    """Estimate P[max W_1(nuhat_s, nuhat_t) > eps] and P[max_t W_1(muhat_t, mu_t) > eps].

    The window maximum runs over saved times s, t with |t - s| <= window;
    the second over all saved times.  Both maxima are surrogates for the
    continuum suprema, at the save stride recorded in the result.  A
    diverged replica counts as an event for both probabilities.
    """
    if window > config.T:
        raise ParameterError("window must not exceed T")
    ref = _prepare_ref(config, mu_ref) if config.potential.has_interaction else as_reference(mu_ref, config.potential)
    hits_w = hits_s = div = 0
    for r in range(trials):
        cfg = config.replace(rng=config.rng.spawn(r))
        try:
            b = simulate_coupled(cfg, ref)
        except DivergenceError:
            div += 1
            hits_w += 1
            hits_s += 1
            continue
        times = b.times
        wmax = 0.0
        if window > 0:
            for i in range(len(times)):
                for j in range(i + 1, len(times)):
                    if times[j] - times[i] > window + 1e-12:
                        break
                    wmax = max(wmax, _w1_samples(b.Y[i], b.Y[j]))
        smax = max(ref.w1_to(b.X[k], t) for k, t in enumerate(times))
        hits_w += wmax > epsilon
        hits_s += smax > epsilon
    return WindowDeviation(float(epsilon), float(window), trials, hits_w / trials,
                           clopper_pearson(hits_w, trials), hits_s / trials,
                           clopper_pearson(hits_s, trials), div, config.save_stride * config.dt)


# ---------------------------------------------------------------------------
# binary trajectory files
# ---------------------------------------------------------------------------

MAGIC = b"MFTR"
_HEADER = struct.Struct("<4sQQQdQQQ")


def bundle_to_bytes(bundle: TrajectoryBundle) -> bytes:
    """Header (magic, N, d, stride, dt, seed, frames, has_Y), then per frame
    the time and the X (and Y) positions as little-endian float64."""
    out = io.BytesIO()
    has_y = bundle.Y is not None
    out.write(_HEADER.pack(MAGIC, bundle.N, bundle.dim, bundle.save_stride, float(bundle.dt),
                           int(bundle.seed), len(bundle.times), int(has_y)))
    for k, t in enumerate(bundle.times):
        out.write(np.float64(t).astype("<f8").tobytes())
        out.write(np.ascontiguousarray(bundle.X[k], dtype="<f8").tobytes())
        if has_y:
            out.write(np.ascontiguousarray(bundle.Y[k], dtype="<f8").tobytes())
    return out.getvalue()


def bundle_from_bytes(data: bytes) -> TrajectoryBundle:
    magic, N, d, stride, dt, seed, nf, has_y = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ParameterError("not a trajectory file")
    per = 1 + N * d * (2 if has_y else 1)
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if body.shape[0] != nf * per:
        raise ParameterError("truncated trajectory file")
    body = body.reshape(nf, per)
    times = body[:, 0]
    X = body[:, 1:1 + N * d].reshape(nf, N, d)
    Y = body[:, 1 + N * d:].reshape(nf, N, d) if has_y else None
    kind = "coupled" if has_y else "interacting"
    return TrajectoryBundle(times, X, Y, bool(has_y), dt, int(stride), int(seed), kind)


def save_bundle(bundle: TrajectoryBundle, path):
    with open(path, "wb") as fh:
        fh.write(bundle_to_bytes(bundle))


def load_bundle(path) -> TrajectoryBundle:
    with open(path, "rb") as fh:
        return bundle_from_bytes(fh.read())


def export_frame(bundle: TrajectoryBundle, index: int, which: str = "X") -> str:
    """Frame ``index`` in the text format of ``measures``."""
    arr = bundle.X if which == "X" else bundle.Y
    if arr is None:
        raise ParameterError("bundle has no Y system")
    return measure_to_text(EmpiricalMeasure(arr[index]))


# ---------------------------------------------------------------------------
# seeded coupling study
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CouplingStudy:
    calibration: ToleranceCalibration
    reports: tuple
    seeds: tuple

    @property
    def tolerance(self) -> float:
        return self.calibration.tolerance

    @property
    def violations(self) -> int:
        return sum(r.violations(self.tolerance) for r in self.reports)

    @property
    def min_residual(self) -> float:
        return min(r.min_residual for r in self.reports)


def _one_seed(args):
    config, series = args
    return coupling_check(simulate_coupled(config, series), series, config.potential)


def coupling_study(config: SimConfig, n_seeds: int, h: float = 0.02, jobs: int = 1) -> CouplingStudy:
    """Coupling inequality over seeded replicas with a calibrated tolerance.

    The reference flow is the PDE solution at cell width h and step dt; a
    second solve at h/2, dt/2 gives the grid error used by the dt-halving
    calibration, which runs on its own random stream.  Replica r uses the
    stream ``config.rng.spawn(r)``.
    """
    from .pde import grid_for, solve_mckean_1d
    if config.dim != 1:
        raise ConfigError("the coupling study uses the 1-D PDE reference")
    pot, law = config.potential, config.initial
    coarse = solve_mckean_1d(pot, grid_for(law, config.T, pot, h=h), config.T, config.dt,
                             save_every=config.save_stride)
    fine = solve_mckean_1d(pot, grid_for(law, config.T, pot, h=h / 2), config.T, config.dt / 2,
                           save_every=2 * config.save_stride)
    cal = calibrate_coupling_tolerance(config.replace(rng=config.rng.spawn(1 << 30)), coarse, fine)
    tasks = [(config.replace(rng=config.rng.spawn(r)), coarse) for r in range(n_seeds)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            reps = list(ex.map(_one_seed, tasks))
    else:
        reps = [_one_seed(t) for t in tasks]
    reps = tuple(CouplingReport(r.times, r.w1_x_mu, r.w1_y_mu, r.w1_x_y, r.rhs, r.residual,
                                r.alpha, r.Gamma, cal.tolerance) for r in reps)
    return CouplingStudy(cal, reps, tuple(range(n_seeds)))
