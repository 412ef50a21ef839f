import math

import numpy as np
import pytest
from scipy import integrate, stats

from mflab.concentration import (TpParams, bound_mq, bound_tp, bound_var, clopper_pearson, fit_log_linear,
                                 gamma_p, mc_deviation, mc_deviation_tilted, mc_distances,
                                 mq_identity_check, relative_entropy_gaussian, tp_residual_gaussian,
                                 truncation_bound)
from mflab.errors import DomainError, ParameterError
from mflab.measures import EmpiricalMeasure, Gaussian, RngSpec, dirac, sample_iid, sq_exp_moment, truncate
from mflab.transport import wp_exact_1d


def test_gamma_p():
    assert gamma_p(1) == 1 and gamma_p(1.5) == 1
    assert math.isclose(gamma_p(2), 3 - 2 * math.sqrt(2), rel_tol=1e-15)
    with pytest.raises(DomainError):
        gamma_p(2.5)


def test_params_validation():
    with pytest.raises(ParameterError):
        TpParams(lam=1.0, lam_prime=1.0)
    with pytest.raises(ParameterError):
        TpParams(d=1, d_prime=1.0)


def test_bound_tp():
    pr = TpParams(p=2, lam=2.0, lam_prime=1.0)
    b, _ = bound_tp(pr, 1000, 0.1)
    assert math.isclose(b, math.exp(-(3 - 2 * math.sqrt(2)) * 0.5 * 10), rel_tol=1e-14)
    assert math.isclose(b, 0.4241, abs_tol=5e-5)
    bs = [bound_tp(pr, N, 0.1)[0] for N in (10, 100, 1000, 10 ** 4)]
    assert all(y < x for x, y in zip(bs, bs[1:]))
    b1, b2 = bound_tp(pr, 100, 0.1)[0], bound_tp(pr, 100, 0.2)[0]
    assert math.isclose(math.log(b2), 4 * math.log(b1), rel_tol=1e-12)


def test_bound_mq():
    r = bound_mq(4, 1, 1, 100, 0.5)
    assert r.regime == "i" and math.isclose(r.raw, 0.5 ** -4 * 100 ** -1.5, rel_tol=1e-14)
    r = bound_mq(2, 1.5, 0.1, 100, 0.5)
    assert r.regime == "ii" and math.isclose(r.n_exponent, 1 - 4 / 3 + 0.1, rel_tol=1e-14)
    for q, p, dl in ((4, 1, 1), (2, 1.5, 0.1)):
        raws = [bound_mq(q, p, dl, N, 0.3).raw for N in (10, 100, 1000)]
        assert raws[0] > raws[1] > raws[2]
    with pytest.raises(DomainError):
        bound_mq(2, 2, 0.1, 100, 0.5)


def test_bound_var():
    r = bound_var("i", 50, 1.0, K=0.3, p=2)
    assert math.isclose(r.raw, math.exp(-0.3 * 50 ** 0.5), rel_tol=1e-14)
    r = bound_var("ii", 50, 0.5, K=0.3, a=1.5)
    assert math.isclose(r.raw, math.exp(-0.3 * 50 * 0.25), rel_tol=1e-14)
    r = bound_var("iii", 64, 0.5, p=3, lam_prime=1.0)
    assert math.isclose(r.terms[1], 2 * math.exp(-1), rel_tol=1e-14)
    assert r.raw == min(r.terms)


def test_truncation_bound_behaviour():
    bs = [truncation_bound(1.5, 0.25, R, 1).bound for R in (3, 6, 12, 24)]
    assert all(y < x for x, y in zip(bs, bs[1:])) and bs[-1] < 1e-30
    assert not truncation_bound(1.5, 0.25, 1.0, 2).admissible
    assert truncation_bound(1.5, 0.25, 2.0, 2).admissible


@pytest.mark.parametrize("p", [1, 2])
def test_truncation_bound_dominates_exact(p):
    mu = sample_iid("gaussian(0,1)", 10 ** 4, RngSpec(31))
    t = truncate(mu, 3.0)
    exact = wp_exact_1d(mu, t, p) ** p
    b = truncation_bound(sq_exp_moment(mu, 0.25), 0.25, 3.0, p)
    assert b.admissible and exact <= b.bound


def test_relative_entropy():
    assert relative_entropy_gaussian(0.3, 1.2, 0.3, 1.2) == 0
    assert math.isclose(relative_entropy_gaussian(1.7, 1, 0, 1), 1.7 ** 2 / 2, rel_tol=1e-14)
    assert relative_entropy_gaussian(0, 1, 0, 2) != relative_entropy_gaussian(0, 2, 0, 1)
    # against numerical integration of the density ratio
    f, g = stats.norm(0.4, 0.7), stats.norm(-0.2, 1.3)
    num = integrate.quad(lambda x: f.pdf(x) * (f.logpdf(x) - g.logpdf(x)), -12, 12)[0]
    assert abs(relative_entropy_gaussian(0.4, 0.7, -0.2, 1.3) - num) < 1e-10
    with pytest.raises(DomainError):
        relative_entropy_gaussian(0, 0, 0, 1)


def test_tp_residual():
    assert tp_residual_gaussian(0, 1, 2) == 0
    for m in (-2, -1, 0, 1, 2):
        assert abs(tp_residual_gaussian(m, 1, 2)) <= 1e-12
    assert math.isclose(tp_residual_gaussian(1, 2, 2), 1 / math.sqrt(2) - 1, rel_tol=1e-14)


def test_clopper_pearson():
    assert clopper_pearson(0, 10)[0] == 0 and clopper_pearson(10, 10)[1] == 1
    lo, hi = clopper_pearson(3, 40)
    assert lo < 3 / 40 < hi
    # known value from the exact beta quantiles
    assert math.isclose(clopper_pearson(0, 100)[1], 1 - 0.025 ** (1 / 100), rel_tol=1e-10)


def test_mc_deviation_edge_cases(rng):
    r = mc_deviation("gaussian(0,1)", 1, 30, 0.0, 100, rng)
    assert r.estimate == 1.0
    r = mc_deviation("uniform(0,1)", 1, 30, 1.5, 100, rng)
    assert r.estimate == 0.0
    assert r.ci_low <= r.estimate <= r.ci_high


def test_mc_distances_match_direct_w1(rng):
    d = mc_distances("gaussian(0,1)", 1, 25, 5, rng)
    from mflab.transport import w1_exact_1d
    for t in range(5):
        pts = Gaussian(0, 1).sample(25, rng.spawn(t).generator())
        assert abs(d[t] - w1_exact_1d(EmpiricalMeasure(pts), Gaussian(0, 1))) < 1e-12


@pytest.mark.slow
def test_mc_deviation_reproducible_across_seeds():
    a = mc_deviation("gaussian(0,1)", 1, 100, 0.2, 10 ** 4, RngSpec(1))
    b = mc_deviation("gaussian(0,1)", 1, 100, 0.2, 10 ** 4, RngSpec(2))
    assert a.ci_low <= b.ci_high and b.ci_low <= a.ci_high


def test_tilted_estimator_agrees_with_plain_mc():
    plain = mc_deviation("gaussian(0,1)", 1, 50, 0.2, 4000, RngSpec(4))
    est, se, _ = mc_deviation_tilted(50, 0.2, 4000, RngSpec(5))
    assert abs(est - plain.estimate) < 4 * math.hypot(se, math.sqrt(plain.estimate / 4000))


def test_fit_log_linear():
    xs = np.array([1.0, 2, 3, 4])
    f = fit_log_linear(xs, np.exp(0.5 - 0.3 * xs))
    assert math.isclose(f.slope, 0.3, rel_tol=1e-12) and math.isclose(f.r2, 1.0, rel_tol=1e-12)
    f = fit_log_linear(xs, [0.5, 0.1, 0.0, 0.0])
    assert not f.ok and "zero" in f.reason


def test_mq_identity():
    mu = sample_iid("gaussian(0,1)", 200, RngSpec(3))
    r = mq_identity_check(mu, "gaussian(0,1)")
    assert r.residual <= 1e-10
    r = mq_identity_check(sample_iid("uniform(0,1)", 20, RngSpec(3)), "uniform(0,1)")
    assert math.isclose(r.clt_integral, math.pi / 8, rel_tol=1e-9)
    r = mq_identity_check(dirac([0.0]), "point-mass(0)")
    assert r.clt_integral == 0
    assert mq_identity_check(dirac([0.0]), "student-t(df=2)").clt_integral == math.inf
