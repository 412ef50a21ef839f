"""Deviation-bound calculators and Monte Carlo deviation estimates."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, stats

from .errors import DomainError, ParameterError
from .measures import (EmpiricalMeasure, Gaussian, Law, PointMass, RngSpec, StudentT,
                       parse_law)
from .transport import w1_exact_1d, wp_discrete, wp_exact_1d
from .transport.onedim import w1_sorted_vs_law


def gamma_p(p: float) -> float:
    if not 1 <= p <= 2:
        raise DomainError("gamma_p is defined for p in [1, 2]")
    return 3.0 - 2.0 * math.sqrt(2.0) if p == 2 else 1.0


@dataclass(frozen=True)
class TpParams:
    p: float = 1.0
    lam: float = 1.0
    lam_prime: float = 0.5
    d: int = 1
    d_prime: float = 1.5
    alpha: float = 0.25
    E_alpha: float = 1.0
    N0: float = 1.0
    N0_given: bool = False

    def __post_init__(self):
        if not (self.lam > 0 and 0 < self.lam_prime < self.lam):
            raise ParameterError("need 0 < lambda' < lambda")
        if not self.d_prime > self.d:
            raise ParameterError("need d' > d")
        if not 0 < self.alpha < self.lam / 2:
            raise ParameterError("need 0 < alpha < lambda / 2")
        if not self.E_alpha >= 1:
            raise ParameterError("E_alpha is at least 1")
        if not self.N0 > 0:
            raise ParameterError("N0 must be positive")

    @property
    def n0_warning(self) -> bool:
        """True when N0 is the unverified default rather than user supplied."""
        return not self.N0_given


@dataclass
class BoundReport:
    theorem: str
    p: float
    N: int
    epsilon: float
    bound: float
    estimate: float = math.nan
    ci_low: float = math.nan
    ci_high: float = math.nan
    trials: int = 0
    admissible: bool = False
    raw_bound: float = math.nan
    n0_warning: bool = True
    params: dict = field(default_factory=dict)

    def record(self) -> dict:
        return {"theorem": self.theorem, "p": self.p, "N": self.N, "epsilon": self.epsilon,
                "bound": self.bound, "estimate": self.estimate,
                "ci": [self.ci_low, self.ci_high], "trials": self.trials,
                "admissible": self.admissible}

    def to_json(self) -> str:
        return json.dumps(self.record(), separators=(",", ":"))

    def csv_row(self):
        return [self.N, self.epsilon, self.bound, self.estimate, self.ci_low, self.ci_high]


CSV_HEADER = ["N", "epsilon", "bound", "estimate", "ci_lo", "ci_hi"]


def _clamp(x):
    return min(max(x, 0.0), 1.0)


def bound_tp(params: TpParams, N: int, epsilon: float):
    """exp(-gamma_p lambda'/2 N eps^2) and admissibility N >= N0 max(eps^-(d'+2), 1)."""
    if not (epsilon > 0 and N >= 1):
        raise ParameterError("need epsilon > 0 and N >= 1")
    b = math.exp(-gamma_p(params.p) * params.lam_prime / 2 * N * epsilon ** 2)
    adm = N >= params.N0 * max(epsilon ** -(params.d_prime + 2), 1.0)
    return b, adm


@dataclass(frozen=True)
class MqBound:
    bound: float
    raw: float
    regime: str
    n_exponent: float
    threshold: float
    admissible: bool


def bound_mq(q, p, delta, N, epsilon, d=1, d_prime=1.5, N0=1.0) -> MqBound:
    """Polynomial-moment deviation bound, regime (i) or (ii)."""
    if not (q >= 1 and p >= 1 and epsilon > 0 and N >= 1):
        raise DomainError("need q >= 1, p >= 1, epsilon > 0, N >= 1")
    if p < q / 2:
        if not 0 < delta < q / p - 2:
            raise DomainError("regime (i) needs delta in (0, q/p - 2)")
        regime, expo = "i", -q / (2 * p) + delta / 2
    elif p < q:
        if not 0 < delta < q / p - 1:
            raise DomainError("regime (ii) needs delta in (0, q/p - 1)")
        regime, expo = "ii", 1 - q / p + delta
    else:
        raise DomainError("need p < q")
    if not d_prime > d:
        raise DomainError("need d' > d")
    raw = epsilon ** -q * N ** expo
    thr = N0 * max(epsilon ** (-q * (2 * p + d_prime) / (q - p)), epsilon ** (d_prime - d))
    return MqBound(_clamp(raw), raw, regime, expo, thr, N >= thr)


@dataclass(frozen=True)
class VarBound:
    bound: float
    raw: float
    terms: tuple
    threshold: float
    admissible: bool


def bound_var(variant: str, N, epsilon, *, K=1.0, p=1.0, a=1.5, lam_prime=0.5,
              d=1, d_prime=1.5, N0=1.0) -> VarBound:
    """Variant bounds (i), (ii), (iii); (iii) returns the min of its two expressions."""
    if not (epsilon > 0 and N >= 1):
        raise DomainError("need epsilon > 0 and N >= 1")
    if variant == "i":
        if not (p >= 1 and K > 0):
            raise DomainError("variant (i) needs p >= 1 and K > 0")
        raw = math.exp(-K * N ** (1 / p) * min(epsilon, epsilon ** 2))
        terms = (raw,)
        thr = N0 * max(epsilon ** -(2 * p + d_prime), 1.0)
    elif variant == "ii":
        if not (a < 2 and K > 0):
            raise DomainError("variant (ii) needs a < 2 and K > 0")
        raw = math.exp(-K * N * min(epsilon ** 2, epsilon ** a))
        terms = (raw,)
        thr = N0 * max(epsilon ** -(4 + d_prime), 1.0)
    elif variant == "iii":
        if not (p > 2 and lam_prime > 0 and d_prime > d):
            raise DomainError("variant (iii) needs p > 2, lambda' > 0, d' > d")
        first = (math.exp(-lam_prime / 2 * N * epsilon ** 2)
                 + math.exp(-(N * epsilon ** (d_prime + 2)) ** (2 / d_prime)))
        second = 2 * math.exp(-lam_prime / 4 * N ** (2 / p) * epsilon ** 2)
        raw = min(first, second)
        terms = (first, second)
        thr = N0 * max(epsilon ** -(d_prime + 2), 1.0)
    else:
        raise DomainError(f"unknown variant {variant!r}")
    return VarBound(_clamp(raw), raw, terms, thr, N >= thr)


@dataclass(frozen=True)
class TruncationBound:
    bound: float
    admissible: bool
    threshold: float


def truncation_bound(E_alpha, alpha, R, p) -> TruncationBound:
    """2^p E_alpha R^p exp(-alpha R^2), claimed only for R >= sqrt(p / (2 alpha))."""
    if not (alpha > 0 and R > 0 and p >= 1):
        raise ParameterError("need alpha > 0, R > 0, p >= 1")
    thr = math.sqrt(p / (2 * alpha))
    if math.isinf(E_alpha):
        return TruncationBound(math.inf, R >= thr, thr)
    b = 2 ** p * E_alpha * R ** p * math.exp(-alpha * R * R)
    return TruncationBound(b, R >= thr, thr)


def relative_entropy_gaussian(m1, s1, m2, s2) -> float:
    """H(N(m1, s1^2) | N(m2, s2^2))."""
    if not (s1 > 0 and s2 > 0):
        raise DomainError("scales must be positive")
    return math.log(s2 / s1) + (s1 * s1 + (m1 - m2) ** 2) / (2 * s2 * s2) - 0.5


def tp_residual_gaussian(m, lam, p) -> float:
    """sqrt(2 H(nu|mu) / lam) - W_p(nu, mu) for nu = N(m,1), mu = N(0,1)."""
    if p not in (1, 2):
        raise DomainError("p must be 1 or 2")
    if not lam > 0:
        raise DomainError("lambda must be positive")
    H = relative_entropy_gaussian(m, 1.0, 0.0, 1.0)
    return math.sqrt(2 * H / lam) - abs(m)


def clopper_pearson(k: int, n: int, level=0.95):
    a = 1 - level
    lo = 0.0 if k == 0 else float(stats.beta.ppf(a / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - a / 2, k + 1, n - k))
    return lo, hi


def _has_exact_cdf(law):
    return isinstance(law, Law) and law.dim == 1 and hasattr(law, "cdf_integral")


def mc_distances(law, p, N, trials, rng: RngSpec, reference=None, batch=512) -> np.ndarray:
    """W_p(empirical N-sample, mu) for each trial.

    Trial t draws from the substream rng.spawn(t).  In 1-D with p=1 the
    distance to the exact CDF is used; otherwise ``reference`` (a large
    sample of mu) stands in for mu.
    """
    law = parse_law(law)
    out = np.empty(trials)
    exact = p == 1 and _has_exact_cdf(law) and reference is None
    if not exact and reference is None:
        raise ParameterError("a reference sample is required unless p=1 in one dimension")
    for t0 in range(0, trials, batch):
        t1 = min(trials, t0 + batch)
        samples = np.stack([law.sample(N, rng.spawn(t).generator()) for t in range(t0, t1)])
        if exact:
            out[t0:t1] = w1_sorted_vs_law(np.sort(samples[..., 0], axis=1), law)
            continue
        for k, s in enumerate(samples):
            emp = EmpiricalMeasure(s)
            if law.dim == 1:
                out[t0 + k] = wp_exact_1d(emp, reference, p)
            else:
                out[t0 + k] = wp_discrete(emp, reference, p)[0]
    return out


def deviation_report(distances, epsilon, *, theorem="transport-entropy", p=1.0, N=0, bound=math.nan,
                     admissible=False, raw_bound=math.nan, n0_warning=True, params=None):
    k = int(np.count_nonzero(np.asarray(distances) > epsilon))
    n = len(distances)
    lo, hi = clopper_pearson(k, n)
    return BoundReport(theorem, p, N, epsilon, bound, k / n, lo, hi, n, admissible,
                       raw_bound, n0_warning, params or {})


def mc_deviation(law, p, N, epsilon, trials, rng: RngSpec, reference=None,
                 params: TpParams | None = None) -> BoundReport:
    """Fraction of trials with W_p(empirical, mu) > epsilon, with exact 95% CI."""
    if trials < 100:
        raise ParameterError("at least 100 trials are required")
    law = parse_law(law)
    dist = mc_distances(law, p, N, trials, rng, reference)
    bound, adm, raw, warn = math.nan, False, math.nan, True
    if params is not None and 1 <= p <= 2 and epsilon > 0:
        bound, adm = bound_tp(params, N, epsilon)
        raw, warn = bound, params.n0_warning
    return deviation_report(dist, epsilon, p=p, N=N, bound=bound, admissible=adm,
                            raw_bound=raw, n0_warning=warn,
                            params={"law": law.spec(), "seed": rng.seed})


def mc_deviation_tilted(N, epsilon, trials, rng: RngSpec, shift=None):
    """Importance-sampling estimate of P[W_1(empirical, N(0,1)) > eps].

    Proposal: every point is shifted by +s or -s (a fair coin per trial).
    The likelihood ratio of the whole sample is exact, so the estimator is
    unbiased; it reaches probabilities far below 1/trials.
    Returns (estimate, standard error, shift).
    """
    law = Gaussian(0.0, 1.0)
    s = epsilon if shift is None else shift
    vals = np.empty(trials)
    for t in range(trials):
        gen = rng.spawn(t).generator()
        sign = 1.0 if gen.random() < 0.5 else -1.0
        x = np.sort(gen.standard_normal(N) + sign * s)
        sx = x.sum()
        # log of the mixture density ratio q/p for the full sample
        a = s * sx - N * s * s / 2
        b = -s * sx - N * s * s / 2
        log_q_over_p = np.logaddexp(a, b) - math.log(2)
        hit = float(w1_sorted_vs_law(x, law)) > epsilon
        vals[t] = math.exp(-log_q_over_p) if hit else 0.0
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(trials))
    return est, se, s


@dataclass(frozen=True)
class ShapeFit:
    intercept: float
    slope: float
    r2: float
    ok: bool
    reason: str = ""


def fit_log_linear(xs, ps) -> ShapeFit:
    """Least squares log P = a - b x; fails when any P is zero."""
    xs = np.asarray(xs, float)
    ps = np.asarray(ps, float)
    if np.any(ps <= 0):
        zero = xs[ps <= 0].tolist()
        return ShapeFit(math.nan, math.nan, math.nan, False,
                        f"log P undefined: zero estimate at {zero}")
    y = np.log(ps)
    res = stats.linregress(xs, y)
    return ShapeFit(float(res.intercept), float(-res.slope), float(res.rvalue ** 2), True)


@dataclass(frozen=True)
class IdentityReport:
    w1_exact: float
    w1_quadrature: float
    residual: float
    clt_integral: float


def _clt_integral(law):
    if isinstance(law, PointMass):
        return 0.0
    if isinstance(law, StudentT) and law.df <= 2:
        return math.inf
    lo, hi = law.support()

    def f(t):
        F = float(law.cdf(t))
        return math.sqrt(max(F * (1 - F), 0.0))

    val, err = integrate.quad(f, lo, hi, epsabs=1e-12, epsrel=1e-10, limit=500)
    if not math.isfinite(val) or err > 1e-6 * max(1.0, abs(val)):
        return math.inf
    return float(val)


def mq_identity_check(mu: EmpiricalMeasure, law) -> IdentityReport:
    """Heaviside identity: exact W_1 vs adaptive quadrature of |F_N - F|."""
    law = parse_law(law)
    x = np.sort(mu.points[:, 0])
    w = mu.weights[np.argsort(mu.points[:, 0], kind="stable")]
    exact = w1_exact_1d(mu, law)
    lo, hi = law.support()
    opts = dict(epsabs=1e-14, epsrel=1e-13, limit=200)
    parts = []
    if isinstance(law, PointMass):
        parts.append(float(np.sum(w * np.abs(x - law.at))))
    else:
        cdf = lambda t: float(law.cdf(t))
        a0 = max(lo, -math.inf)
        if x[0] > lo:
            parts.append(integrate.quad(cdf, a0, x[0], **opts)[0])
        c = np.cumsum(w)
        for k in range(len(x) - 1):
            a, b = x[k], x[k + 1]
            if b <= a:
                continue
            ck = c[k]
            brk = float(law.quantile(ck)) if 0 < ck < 1 else None
            pts = [brk] if brk is not None and a < brk < b else None
            parts.append(integrate.quad(lambda t: abs(ck - cdf(t)), a, b, points=pts, **opts)[0])
        if x[-1] < hi:
            parts.append(integrate.quad(lambda t: 1.0 - cdf(t), x[-1], hi, **opts)[0])
    quad = math.fsum(parts)
    return IdentityReport(float(exact), quad, abs(exact - quad), _clt_integral(law))


def report_dict(r):
    return asdict(r)
