"""Measures, reference laws, potentials, kernels and random streams.

Everything here is immutable after construction.  Arrays held by the
dataclasses are marked read-only so that measures can be shared freely
between threads and worker processes.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special, stats

from .errors import ConsistencyError, EmptyTruncationError, ParameterError, ShapeError

_MASK64 = (1 << 64) - 1


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


# ---------------------------------------------------------------------------
# randomness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RngSpec:
    """Counter-based random stream identified by (seed, stream path).

    ``spawn`` derives child streams; distinct paths give statistically
    independent Philox substreams, and the same path always reproduces the
    same draws.
    """

    seed: int
    stream: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)
        s = self.stream
        if isinstance(s, (int, np.integer)):
            s = (int(s),)
        s = tuple(int(k) for k in s)
        if any(k < 0 for k in s):
            raise ParameterError("stream ids must be nonnegative integers")
        object.__setattr__(self, "stream", s)

    def spawn(self, *keys) -> "RngSpec":
        return RngSpec(self.seed, self.stream + tuple(int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# reference laws
# ---------------------------------------------------------------------------

class Law:
    """Base class for reference distributions.

    Laws of dimension one also expose ``cdf``, ``quantile``, ``pdf``,
    ``mean`` and ``cdf_integral`` (the antiderivative G of the CDF with
    G(-inf) = 0), which the exact 1-D transport routines rely on.
    """

    dim: int = 1
    name: str = "law"

    def sample(self, n: int, gen: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def _need_1d(self):
        if self.dim != 1:
            raise ShapeError(f"{self.name} law of dimension {self.dim} has no scalar CDF")

    def support(self):
        """Bounds (lo, hi) of the support in 1-D, possibly infinite."""
        return (-math.inf, math.inf)

    def upper_tail_integral(self, x):
        """Integral of 1 - F over [x, inf)."""
        return self.mean - np.asarray(x, float) + self.cdf_integral(x)

    def spec(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Gaussian(Law):
    mean: float = 0.0
    std: float = 1.0
    dim: int = 1
    name = "gaussian"

    def __post_init__(self):
        if not (self.std > 0 and math.isfinite(self.std)):
            raise ParameterError("gaussian std must be positive")
        if not math.isfinite(self.mean):
            raise ParameterError("gaussian mean must be finite")
        if int(self.dim) < 1:
            raise ParameterError("dimension must be >= 1")

    def sample(self, n, gen):
        return self.mean + self.std * gen.standard_normal((n, self.dim))

    def cdf(self, x):
        self._need_1d()
        return special.ndtr((np.asarray(x, float) - self.mean) / self.std)

    def pdf(self, x):
        self._need_1d()
        z = (np.asarray(x, float) - self.mean) / self.std
        return np.exp(-0.5 * z * z) / (self.std * math.sqrt(2 * math.pi))

    def quantile(self, u):
        self._need_1d()
        return self.mean + self.std * special.ndtri(np.asarray(u, float))

    def cdf_integral(self, x):
        self._need_1d()
        x = np.asarray(x, float)
        return (x - self.mean) * self.cdf(x) + self.std ** 2 * self.pdf(x)

    @property
    def lipschitz(self):
        # max |f'| attained at one standard deviation from the mean
        return math.exp(-0.5) / (self.std ** 2 * math.sqrt(2 * math.pi))

    def spec(self):
        return f"gaussian(mean={self.mean!r}, std={self.std!r}, dim={self.dim})"


@dataclass(frozen=True)
class Uniform(Law):
    """Uniform law on the interval [low, high]."""

    low: float = 0.0
    high: float = 1.0
    dim: int = 1
    name = "uniform"

    def __post_init__(self):
        if not (self.high > self.low):
            raise ParameterError("uniform law needs high > low")
        if self.dim != 1:
            raise ParameterError("uniform interval law is one-dimensional")

    @property
    def mean(self):
        return 0.5 * (self.low + self.high)

    def sample(self, n, gen):
        return self.low + (self.high - self.low) * gen.random((n, 1))

    def support(self):
        return (self.low, self.high)

    def cdf(self, x):
        return np.clip((np.asarray(x, float) - self.low) / (self.high - self.low), 0.0, 1.0)

    def pdf(self, x):
        x = np.asarray(x, float)
        return np.where((x >= self.low) & (x <= self.high), 1.0 / (self.high - self.low), 0.0)

    def quantile(self, u):
        return self.low + (self.high - self.low) * np.asarray(u, float)

    def cdf_integral(self, x):
        x = np.asarray(x, float)
        w = self.high - self.low
        inside = (np.clip(x, self.low, self.high) - self.low) ** 2 / (2 * w)
        return inside + np.maximum(x - self.high, 0.0)

    def spec(self):
        return f"uniform(low={self.low!r}, high={self.high!r})"


@dataclass(frozen=True)
class UniformBall(Law):
    """Uniform law on the closed Euclidean ball of given radius."""

    radius: float = 1.0
    dim: int = 1
    name = "uniform-ball"

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ParameterError("uniform-ball radius must be positive")
        if int(self.dim) < 1:
            raise ParameterError("dimension must be >= 1")

    mean = 0.0

    def _interval(self):
        return Uniform(-self.radius, self.radius)

    def sample(self, n, gen):
        d = self.dim
        g = gen.standard_normal((n, d))
        nrm = np.linalg.norm(g, axis=1, keepdims=True)
        nrm[nrm == 0] = 1.0
        r = self.radius * gen.random((n, 1)) ** (1.0 / d)
        pts = g / nrm * r
        # guard against the last ulp pushing a point outside the ball
        out = np.linalg.norm(pts, axis=1) > self.radius
        if out.any():
            pts[out] *= self.radius / np.linalg.norm(pts[out], axis=1, keepdims=True)
        return pts

    def support(self):
        return (-self.radius, self.radius)

    def cdf(self, x):
        self._need_1d()
        return self._interval().cdf(x)

    def pdf(self, x):
        self._need_1d()
        return self._interval().pdf(x)

    def quantile(self, u):
        self._need_1d()
        return self._interval().quantile(u)

    def cdf_integral(self, x):
        self._need_1d()
        return self._interval().cdf_integral(x)

    def spec(self):
        return f"uniform-ball(radius={self.radius!r}, dim={self.dim})"


@dataclass(frozen=True)
class StudentT(Law):
    """Product of independent scaled Student-t coordinates."""

    df: float = 3.0
    scale: float = 1.0
    dim: int = 1
    name = "student-t"

    def __post_init__(self):
        if not (self.df > 0 and self.scale > 0):
            raise ParameterError("student-t needs df > 0 and scale > 0")
        if int(self.dim) < 1:
            raise ParameterError("dimension must be >= 1")

    @property
    def mean(self):
        if self.df <= 1:
            raise ParameterError("student-t mean undefined for df <= 1")
        return 0.0

    def sample(self, n, gen):
        return self.scale * gen.standard_t(self.df, (n, self.dim))

    def cdf(self, x):
        self._need_1d()
        return stats.t.cdf(np.asarray(x, float) / self.scale, self.df)

    def pdf(self, x):
        self._need_1d()
        return stats.t.pdf(np.asarray(x, float) / self.scale, self.df) / self.scale

    def quantile(self, u):
        self._need_1d()
        return self.scale * stats.t.ppf(np.asarray(u, float), self.df)

    def cdf_integral(self, x):
        self._need_1d()
        if self.df <= 1:
            raise ParameterError("student-t CDF is not integrable for df <= 1")
        z = np.asarray(x, float) / self.scale
        nu = self.df
        g = z * stats.t.cdf(z, nu) + (nu + z * z) / (nu - 1) * stats.t.pdf(z, nu)
        return self.scale * g

    def spec(self):
        return f"student-t(df={self.df!r}, scale={self.scale!r}, dim={self.dim})"


@dataclass(frozen=True)
class PointMass(Law):
    at: float = 0.0
    dim: int = 1
    name = "point-mass"

    @property
    def mean(self):
        return self.at

    def sample(self, n, gen):
        return np.full((n, self.dim), float(self.at))

    def support(self):
        return (self.at, self.at)

    def cdf(self, x):
        return (np.asarray(x, float) >= self.at).astype(float)

    def quantile(self, u):
        return np.full_like(np.asarray(u, float), self.at)

    def cdf_integral(self, x):
        return np.maximum(np.asarray(x, float) - self.at, 0.0)

    def spec(self):
        return f"point-mass(at={self.at!r})"


@dataclass(frozen=True)
class GaussianMixture(Law):
    """One-dimensional mixture of Gaussians with a certified Lipschitz density."""

    weights: tuple = (0.5, 0.5)
    means: tuple = (-1.0, 1.0)
    stds: tuple = (0.5, 0.5)
    dim: int = 1
    name = "gaussian-mixture"

    def __post_init__(self):
        w = np.asarray(self.weights, float)
        if not (len(w) == len(self.means) == len(self.stds)) or len(w) == 0:
            raise ParameterError("mixture component lists must have equal nonzero length")
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise ParameterError("mixture weights must be nonnegative and sum to 1")
        if any(s <= 0 for s in self.stds):
            raise ParameterError("mixture stds must be positive")
        for k in ("weights", "means", "stds"):
            object.__setattr__(self, k, tuple(float(v) for v in getattr(self, k)))

    def _parts(self):
        return [Gaussian(m, s) for m, s in zip(self.means, self.stds)]

    @property
    def mean(self):
        return float(np.dot(self.weights, self.means))

    def sample(self, n, gen):
        comp = gen.choice(len(self.weights), size=n, p=np.asarray(self.weights))
        z = gen.standard_normal(n)
        m = np.asarray(self.means)[comp]
        s = np.asarray(self.stds)[comp]
        return (m + s * z)[:, None]

    def cdf(self, x):
        return sum(w * g.cdf(x) for w, g in zip(self.weights, self._parts()))

    def pdf(self, x):
        return sum(w * g.pdf(x) for w, g in zip(self.weights, self._parts()))

    def cdf_integral(self, x):
        return sum(w * g.cdf_integral(x) for w, g in zip(self.weights, self._parts()))

    def quantile(self, u):
        """Vectorized bisection on the CDF followed by Newton polishing."""
        u = np.asarray(u, float)
        flat = u.reshape(-1)
        lo = np.full(flat.shape, min(m - 40 * s for m, s in zip(self.means, self.stds)))
        hi = np.full(flat.shape, max(m + 40 * s for m, s in zip(self.means, self.stds)))
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            below = self.cdf(mid) < flat
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        x = 0.5 * (lo + hi)
        for _ in range(3):
            dens = self.pdf(x)
            step = np.where(dens > 0, (self.cdf(x) - flat) / np.where(dens > 0, dens, 1.0), 0.0)
            x = np.clip(x - step, lo, hi)
        x = np.where(flat <= 0, -math.inf, np.where(flat >= 1, math.inf, x))
        return x.reshape(u.shape)

    @property
    def lipschitz(self):
        # triangle inequality over components: sum of component slopes
        return float(sum(w * g.lipschitz for w, g in zip(self.weights, self._parts())))

    def spec(self):
        return (f"gaussian-mixture(weights={list(self.weights)}, means={list(self.means)}, "
                f"stds={list(self.stds)})")


_LAWS = {
    "gaussian": Gaussian,
    "normal": Gaussian,
    "uniform": Uniform,
    "uniform-ball": UniformBall,
    "student-t": StudentT,
    "point-mass": PointMass,
    "gaussian-mixture": GaussianMixture,
}

_LAW_RE = re.compile(r"^\s*([a-z][a-z\-]*)\s*(?:\((.*)\))?\s*$")


def parse_law(text: str) -> Law:
    """Parse ``name(arg, key=value, ...)`` into a law.

    Values may be numbers or bracketed lists of numbers, e.g.
    ``gaussian-mixture(weights=[0.5,0.5], means=[-1,1], stds=[0.5,0.5])``.
    """
    if isinstance(text, Law):
        return text
    m = _LAW_RE.match(text)
    if not m or m.group(1) not in _LAWS:
        raise ParameterError(f"unknown law spec {text!r}; known: {sorted(_LAWS)}")
    cls = _LAWS[m.group(1)]
    args, kwargs = [], {}
    body = (m.group(2) or "").strip()
    for tok in re.findall(r"[^,\[\]]+=\s*\[[^\]]*\]|[^,]+", body):
        tok = tok.strip()
        if not tok:
            continue
        if "=" in tok:
            k, v = tok.split("=", 1)
            kwargs[k.strip().replace("-", "_")] = _parse_value(v.strip())
        else:
            args.append(_parse_value(tok))
    try:
        return cls(*args, **kwargs)
    except TypeError as exc:
        raise ParameterError(f"bad arguments for {m.group(1)}: {exc}") from None


def _parse_value(v: str):
    if v.startswith("["):
        return tuple(float(s) for s in v.strip("[]").split(",") if s.strip())
    f = float(v)
    return int(f) if f.is_integer() and "." not in v and "e" not in v.lower() else f


# ---------------------------------------------------------------------------
# discrete measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted point cloud in R^d."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise ShapeError("points must be an (n, d) array")
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.shape[0] != pts.shape[0]:
            raise ShapeError("points and weights differ in length")
        if pts.shape[0] == 0:
            raise ParameterError("a measure needs at least one atom")
        if not np.all(np.isfinite(pts)):
            raise ParameterError("atoms must be finite")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ParameterError("weights must be finite and nonnegative")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise ParameterError(f"weights sum to {math.fsum(w)!r}, not 1")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return (self.points.shape == other.points.shape
                and np.array_equal(self.points, other.points)
                and np.array_equal(self.weights, other.weights))

    __hash__ = None

    def is_valid(self) -> bool:
        return validate_measure(self)

    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def with_points(self, points) -> "DiscreteMeasure":
        if isinstance(self, EmpiricalMeasure):
            return EmpiricalMeasure(points)
        return DiscreteMeasure(points, self.weights)

    def to_text(self) -> str:
        return measure_to_text(self)

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, dim={self.dim})"


class EmpiricalMeasure(DiscreteMeasure):
    """Uniform-weight measure; weights are constructed as exactly 1/N."""

    def __init__(self, points, weights=None):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        n = pts.shape[0]
        if n == 0:
            raise ParameterError("a measure needs at least one atom")
        super().__init__(pts, np.full(n, 1.0 / n))


def validate_measure(mu) -> bool:
    """Predicate re-checking every DiscreteMeasure invariant."""
    try:
        p, w = mu.points, mu.weights
        ok = (p.ndim == 2 and w.ndim == 1 and p.shape[0] == w.shape[0] and p.shape[0] > 0
              and np.all(np.isfinite(p)) and np.all(w >= 0)
              and abs(math.fsum(w) - 1.0) <= 1e-12)
        if ok and isinstance(mu, EmpiricalMeasure):
            ok = bool(np.all(w == 1.0 / w.shape[0]))
        return bool(ok)
    except AttributeError:
        return False


def dirac(x) -> EmpiricalMeasure:
    return EmpiricalMeasure(np.atleast_2d(np.asarray(x, float)))


def sample_iid(law, n: int, rng: RngSpec) -> EmpiricalMeasure:
    """Draw n i.i.d. points from ``law`` using the stream ``rng``."""
    law = parse_law(law)
    if int(n) != n or n < 1:
        raise ParameterError("n must be a positive integer")
    return EmpiricalMeasure(law.sample(int(n), rng.generator()))


def truncate(mu: DiscreteMeasure, R: float) -> DiscreteMeasure:
    """Restrict mu to the closed ball of radius R and renormalize."""
    if not R > 0:
        raise ParameterError("truncation radius must be positive")
    keep = np.linalg.norm(mu.points, axis=1) <= R
    if keep.all():
        return mu
    kept_mass = math.fsum(mu.weights[keep])
    if not keep.any() or kept_mass <= 0:
        raise EmptyTruncationError(f"no mass inside the ball of radius {R}")
    if isinstance(mu, EmpiricalMeasure):
        return EmpiricalMeasure(mu.points[keep])
    w = mu.weights[keep] / kept_mass
    w = w / math.fsum(w)
    return DiscreteMeasure(mu.points[keep], w)


def sq_exp_moment(mu: DiscreteMeasure, alpha: float) -> float:
    """E_alpha = sum_i w_i exp(alpha |x_i|^2); +inf on overflow."""
    if not alpha > 0:
        raise ParameterError("alpha must be positive")
    r2 = np.einsum("ij,ij->i", mu.points, mu.points)
    with np.errstate(over="ignore"):
        terms = mu.weights * np.exp(alpha * r2)
    if not np.all(np.isfinite(terms)):
        return math.inf
    s = math.fsum(terms)
    return s if math.isfinite(s) else math.inf


def poly_moment(mu: DiscreteMeasure, q: float) -> float:
    """M_q = sum_i w_i |x_i|^q."""
    if not q >= 1:
        raise ParameterError("q must be >= 1")
    r = np.linalg.norm(mu.points, axis=1)
    with np.errstate(over="ignore"):
        return math.fsum(mu.weights * r ** q)


def measure_to_text(mu: DiscreteMeasure) -> str:
    lines = [f"{mu.dim},{mu.n}"]
    for w, x in zip(mu.weights, mu.points):
        lines.append(",".join(format(float(v), ".17g") for v in (w, *x)))
    return "\n".join(lines) + "\n"


def measure_from_text(text: str) -> DiscreteMeasure:
    rows = [ln.strip() for ln in text.strip().splitlines() if ln.strip() and not ln.startswith("#")]
    try:
        d, n = (int(v) for v in rows[0].split(","))
        data = np.array([[float(v) for v in ln.split(",")] for ln in rows[1:]], float)
    except (ValueError, IndexError) as exc:
        raise ParameterError(f"malformed measure text: {exc}") from None
    if data.shape != (n, d + 1):
        raise ShapeError(f"expected {n} rows of {d + 1} columns, got {data.shape}")
    w, pts = data[:, 0], data[:, 1:]
    if np.all(w == 1.0 / n):
        return EmpiricalMeasure(pts)
    return DiscreteMeasure(pts, w)


def save_measure(mu, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(measure_to_text(mu))


def load_measure(path) -> DiscreteMeasure:
    with open(path, encoding="utf-8") as fh:
        return measure_from_text(fh.read())


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------

FAMILIES = ("quadratic", "quartic-confinement", "custom-polynomial")


@dataclass(frozen=True)
class PotentialSpec:
    """Confinement V and interaction W with Hessian bounds.

    quadratic            V = beta/2 |x - c|^2,                W = gamma/2 |z|^2
    quartic-confinement  V = quartic/4 |x|^4 + beta/2 |x|^2,  W = gamma/2 |z|^2
    custom-polynomial    V = sum v_k x^k, W = sum w_k z^k (one dimension, W even)

    ``v_coeffs``/``w_coeffs`` hold (beta[, quartic]) and (gamma,) for the
    first two families and ascending polynomial coefficients for the last.
    """

    family: str
    v_coeffs: tuple
    w_coeffs: tuple
    dim: int = 1
    center: tuple = ()
    beta: float = field(default=math.nan)
    gamma: float = field(default=math.nan)
    gamma_prime: float = field(default=math.nan)
    Gamma: float = field(default=math.nan)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown potential family {self.family!r}")
        vc = tuple(float(v) for v in self.v_coeffs)
        wc = tuple(float(v) for v in self.w_coeffs)
        d = int(self.dim)
        c = tuple(float(v) for v in self.center) or (0.0,) * d
        if len(c) != d:
            raise ShapeError("center must have length dim")
        if not all(math.isfinite(v) for v in vc + wc + c):
            raise ParameterError("potential coefficients must be finite")
        object.__setattr__(self, "v_coeffs", vc)
        object.__setattr__(self, "w_coeffs", wc)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "dim", d)
        if self.family == "quadratic":
            if len(vc) != 1 or len(wc) != 1:
                raise ParameterError("quadratic family takes v_coeffs=(beta,), w_coeffs=(gamma,)")
            beta, gamma, gprime = vc[0], wc[0], wc[0]
        elif self.family == "quartic-confinement":
            if len(vc) != 2 or len(wc) != 1:
                raise ParameterError("quartic family takes v_coeffs=(beta, quartic), w_coeffs=(gamma,)")
            if vc[1] < 0:
                raise ParameterError("quartic coefficient must be nonnegative")
            if any(c):
                raise ParameterError("quartic family is centered at the origin")
            beta, gamma, gprime = vc[0], wc[0], wc[0]
        else:
            if d != 1:
                raise ParameterError("custom polynomials are one-dimensional")
            if any(c):
                raise ParameterError("custom polynomials take no center")
            if any(w != 0 for w in wc[1::2]):
                raise ParameterError("W must be even: odd coefficients must vanish")
            beta = _poly_inf(np.polynomial.Polynomial(vc).deriv(2))
            w2 = np.polynomial.Polynomial(wc or (0.0,)).deriv(2)
            gamma = _poly_inf(w2)
            gprime = -_poly_inf(-w2)
            if beta == -math.inf:
                raise ParameterError("V has no finite lower Hessian bound")
        object.__setattr__(self, "beta", float(beta))
        object.__setattr__(self, "gamma", float(gamma))
        object.__setattr__(self, "gamma_prime", float(gprime))
        object.__setattr__(self, "Gamma", float(max(abs(gamma), abs(gprime))))

    # constructors ---------------------------------------------------------
    @classmethod
    def quadratic(cls, beta, gamma=0.0, dim=1, center=None):
        return cls("quadratic", (beta,), (gamma,), dim, tuple(center) if center is not None else ())

    @classmethod
    def quartic_confinement(cls, quartic, beta=0.0, gamma=0.0, dim=1):
        return cls("quartic-confinement", (beta, quartic), (gamma,), dim)

    @classmethod
    def custom_polynomial(cls, v_coeffs, w_coeffs):
        return cls("custom-polynomial", tuple(v_coeffs), tuple(w_coeffs), 1)

    @property
    def tag(self) -> str:
        if self.family == "quadratic":
            return f"quadratic(beta={self.beta:g},gamma={self.gamma:g})"
        if self.family == "quartic-confinement":
            return f"quartic(beta={self.beta:g},quartic={self.v_coeffs[1]:g},gamma={self.gamma:g})"
        return f"poly(V={list(self.v_coeffs)},W={list(self.w_coeffs)})"

    @property
    def has_interaction(self) -> bool:
        return any(w != 0 for w in self.w_coeffs)

    @property
    def uniformly_convex(self) -> bool:
        return self.beta > 0 and self.beta + 2 * min(self.gamma, 0.0) > 0

    def _x(self, x):
        x = np.asarray(x, float)
        if x.shape[-1] != self.dim:
            if self.dim == 1:
                x = x[..., None]
            else:
                raise ShapeError(f"expected trailing dimension {self.dim}")
        return x

    # values and gradients -------------------------------------------------
    def V(self, x):
        x = self._x(x)
        if self.family == "custom-polynomial":
            return np.polynomial.polynomial.polyval(x[..., 0], self.v_coeffs)
        y = x - np.asarray(self.center)
        r2 = np.sum(y * y, axis=-1)
        out = 0.5 * self.beta * r2
        if self.family == "quartic-confinement":
            out = out + 0.25 * self.v_coeffs[1] * r2 * r2
        return out

    def grad_V(self, x):
        x = self._x(x)
        if self.family == "custom-polynomial":
            dv = np.polynomial.polynomial.polyder(self.v_coeffs)
            return np.polynomial.polynomial.polyval(x[..., 0], dv)[..., None]
        y = x - np.asarray(self.center)
        if self.family == "quartic-confinement":
            r2 = np.sum(y * y, axis=-1, keepdims=True)
            return (self.beta + self.v_coeffs[1] * r2) * y
        return self.beta * y

    def W(self, z):
        z = self._x(z)
        if self.family == "custom-polynomial":
            return np.polynomial.polynomial.polyval(z[..., 0], self.w_coeffs or (0.0,))
        return 0.5 * self.gamma * np.sum(z * z, axis=-1)

    def grad_W(self, z):
        z = self._x(z)
        if self.family == "custom-polynomial":
            dw = np.polynomial.polynomial.polyder(self.w_coeffs or (0.0,))
            return np.polynomial.polynomial.polyval(z[..., 0], dw)[..., None]
        return self.gamma * z

    def interaction_drift(self, x, method="pairwise", chunk=256):
        """(1/N) sum_j grad W(x_i - x_j) for every particle i.

        ``pairwise`` evaluates the O(N^2) sum directly.  ``moments`` uses
        the exact polynomial expansion in power sums of the positions,
        which costs O(N deg W).
        """
        x = np.asarray(x, float)
        n = x.shape[0]
        if not self.has_interaction:
            return np.zeros_like(x)
        if method == "moments":
            if self.family != "custom-polynomial":
                return self.gamma * (x - x.mean(axis=0))
            xc = x[:, 0] - x[:, 0].mean()
            dw = np.polynomial.polynomial.polyder(self.w_coeffs)
            out = np.zeros(n)
            sums = [np.mean(xc ** k) for k in range(len(dw))]
            for m, cm in enumerate(dw):
                if cm == 0:
                    continue
                acc = np.zeros(n)
                for k in range(m + 1):
                    acc += special.comb(m, k, exact=True) * xc ** (m - k) * (-1) ** k * sums[k]
                out += cm * acc
            return out[:, None]
        if method != "pairwise":
            raise ParameterError(f"unknown interaction method {method!r}")
        out = np.empty_like(x)
        for i0 in range(0, n, chunk):
            diff = x[i0:i0 + chunk, None, :] - x[None, :, :]
            out[i0:i0 + chunk] = self.grad_W(diff).mean(axis=1)
        return out


def _poly_inf(poly: np.polynomial.Polynomial) -> float:
    """Infimum over R of a real polynomial (may be -inf)."""
    c = np.trim_zeros(np.asarray(poly.coef, float), "b")
    if c.size == 0:
        return 0.0
    if c.size == 1:
        return float(c[0])
    deg = c.size - 1
    if deg % 2 == 1 or c[-1] < 0:
        return -math.inf
    crit = np.polynomial.Polynomial(c).deriv().roots()
    crit = crit[np.abs(crit.imag) < 1e-9].real
    return float(np.min(np.polynomial.polynomial.polyval(crit, c)))


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

def _sphere_area(d):
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


@dataclass(frozen=True)
class Kernel:
    """Radial, nonnegative, unit-mass kernel supported in the unit ball.

    triangular    c_d (1 - |u|)_+
    smooth-bump   c_d exp(-1/(1 - |u|^2)) on |u| < 1
    """

    shape: str = "triangular"
    dim: int = 1
    norm_const: float = field(default=math.nan, repr=False)
    lipschitz_norm: float = field(default=math.nan)
    support_radius: float = 1.0

    def __post_init__(self):
        d = int(self.dim)
        if d < 1:
            raise ParameterError("kernel dimension must be >= 1")
        area = _sphere_area(d)
        if self.shape == "triangular":
            c = d * (d + 1) / area
            lip = c
        elif self.shape == "smooth-bump":
            mass, _ = integrate.quad(lambda r: _bump(r) * r ** (d - 1), 0, 1, epsabs=1e-14, epsrel=1e-13)
            c = 1.0 / (area * mass)
            res = optimize.minimize_scalar(lambda r: -_bump_slope(r), bounds=(0.0, 1.0),
                                           method="bounded", options={"xatol": 1e-12})
            # tiny relative margin certifies the numerically located maximum
            lip = c * (-res.fun) * (1 + 1e-6)
        else:
            raise ParameterError(f"unknown kernel shape {self.shape!r}")
        object.__setattr__(self, "dim", d)
        object.__setattr__(self, "norm_const", float(c))
        object.__setattr__(self, "lipschitz_norm", float(lip))

    def profile(self, r):
        r = np.asarray(r, float)
        if self.shape == "triangular":
            return self.norm_const * np.clip(1.0 - r, 0.0, None)
        return self.norm_const * _bump(r)

    def __call__(self, u):
        u = np.asarray(u, float)
        if self.dim == 1 and (u.ndim == 0 or u.shape[-1] != 1):
            r = np.abs(u)
        else:
            r = np.linalg.norm(u, axis=-1)
        return self.profile(r)

    def integral(self) -> float:
        val, _ = integrate.quad(lambda r: float(self.profile(r)) * r ** (self.dim - 1), 0, 1,
                                epsabs=1e-14, epsrel=1e-13)
        return _sphere_area(self.dim) * val


def _bump(r):
    r = np.asarray(r, float)
    out = np.zeros_like(r)
    m = r < 1
    out[m] = np.exp(-1.0 / (1.0 - r[m] ** 2))
    return out if out.ndim else float(out)


def _bump_slope(r):
    if r >= 1:
        return 0.0
    s = 1.0 - r * r
    return 2 * r / (s * s) * math.exp(-1.0 / s)


def check_consistency(condition, message):
    if not condition:
        raise ConsistencyError(message)
