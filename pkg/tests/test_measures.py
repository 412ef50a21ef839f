import math

import numpy as np
import pytest
from scipy import optimize
from hypothesis import given, settings, strategies as st

from mflab.errors import EmptyTruncationError, ParameterError, ShapeError
from mflab.measures import (DiscreteMeasure, EmpiricalMeasure, Gaussian, GaussianMixture, Kernel,
                            PotentialSpec, RngSpec, StudentT, Uniform, UniformBall, dirac,
                            measure_from_text, measure_to_text, parse_law, poly_moment, sample_iid,
                            sq_exp_moment, truncate, validate_measure)
from mflab.transport import wp_discrete


def test_weights_must_sum_to_one():
    with pytest.raises(ParameterError):
        DiscreteMeasure([[0.0], [1.0]], [0.5, 0.6])
    with pytest.raises(ParameterError):
        DiscreteMeasure([[0.0], [1.0]], [1.5, -0.5])
    with pytest.raises(ShapeError):
        DiscreteMeasure([[0.0], [1.0]], [1.0])


def test_empirical_weights_exact():
    mu = EmpiricalMeasure(np.arange(7.0))
    assert np.all(mu.weights == 1.0 / 7)
    assert validate_measure(mu)
    assert mu.points.flags.writeable is False


def test_sample_deterministic():
    a = sample_iid("gaussian(0,1)", 3, RngSpec(11))
    b = sample_iid("gaussian(0,1)", 3, RngSpec(11))
    c = sample_iid("gaussian(0,1)", 3, RngSpec(11, (1,)))
    assert a == b
    assert not np.array_equal(a.points, c.points)


def test_uniform_ball_support():
    mu = sample_iid(UniformBall(1.0, 3), 1000, RngSpec(2))
    assert np.linalg.norm(mu.points, axis=1).max() <= 1.0


def test_gaussian_sample_mean_clt():
    N = 10 ** 5
    mu = sample_iid("gaussian(0,1)", N, RngSpec(5))
    assert abs(mu.mean()[0]) < 4 / math.sqrt(N)


def test_invalid_law_parameters():
    with pytest.raises(ParameterError):
        parse_law("gaussian(mean=0, std=-1)")
    with pytest.raises(ParameterError):
        parse_law("cauchy(0,1)")


def test_parse_law_roundtrip():
    for text in ["gaussian(mean=0.5, std=2)", "uniform(low=-1, high=3)", "student-t(df=4, scale=1)",
                 "gaussian-mixture(weights=[0.4, 0.6], means=[-1.5, 1.0], stds=[0.6, 0.8])"]:
        law = parse_law(text)
        assert parse_law(law.spec()) == law


@pytest.mark.parametrize("law", [Gaussian(0.3, 1.7), Uniform(-1.0, 2.0), StudentT(4.0, 1.5),
                                 GaussianMixture((0.4, 0.6), (-1.5, 1.0), (0.6, 0.8))])
def test_law_cdf_quantile_consistent(law):
    u = np.linspace(0.01, 0.99, 41)
    assert np.allclose(law.cdf(law.quantile(u)), u, atol=1e-10)
    # the CDF antiderivative differentiates back to the CDF
    x = np.linspace(-1.9, 1.9, 9)
    h = 1e-5
    fd = (law.cdf_integral(x + h) - law.cdf_integral(x - h)) / (2 * h)
    assert np.allclose(fd, law.cdf(x), atol=1e-7)


def test_truncate_cases():
    mu = EmpiricalMeasure([[0.1, 0.0], [0.0, -0.5]])
    assert truncate(mu, 1.0) is mu
    R = 1.0
    mu = DiscreteMeasure([[0.0, 0.0], [2 * R, 0.0]], [0.5, 0.5])
    t = truncate(mu, R)
    assert t.n == 1 and np.array_equal(t.points, [[0.0, 0.0]]) and t.weights[0] == 1.0
    with pytest.raises(EmptyTruncationError):
        truncate(DiscreteMeasure([[5.0, 0.0]], [1.0]), 1.0)


def test_truncate_distance_matches_ot():
    mu = sample_iid("gaussian(0,1)", 200, RngSpec(3))
    t = truncate(mu, 2.0)
    assert math.isclose(math.fsum(t.weights), 1.0, abs_tol=1e-12)
    d, _ = wp_discrete(mu, t, 1.0)
    res = optimize.linprog(np.abs(mu.points - t.points.T).ravel(),
                           A_eq=np.vstack([np.kron(np.eye(mu.n), np.ones(t.n)),
                                           np.kron(np.ones(mu.n), np.eye(t.n))]),
                           b_eq=np.concatenate([mu.weights, t.weights]), method="highs")
    assert abs(d - res.fun) < 1e-9
    assert d > 0


def test_sq_exp_moment():
    assert sq_exp_moment(dirac([0.0]), 3.0) == 1.0
    assert math.isclose(sq_exp_moment(dirac([1.0]), 1.0), math.e, rel_tol=1e-15)
    mu = sample_iid("gaussian(0,1)", 10 ** 5, RngSpec(8))
    assert abs(sq_exp_moment(mu, 0.25) / math.sqrt(2) - 1) < 0.02
    assert sq_exp_moment(dirac([100.0]), 1.0) == math.inf


def test_poly_moment():
    assert poly_moment(dirac([0.0]), 2) == 0.0
    assert poly_moment(EmpiricalMeasure([[-1.0], [1.0]]), 2) == 1.0
    mu = sample_iid("gaussian(0,1)", 10 ** 5, RngSpec(9))
    assert abs(poly_moment(mu, 4) / 3 - 1) < 0.05


def test_measure_text_roundtrip():
    mu = DiscreteMeasure([[0.1, 2.0], [np.pi, -1e-300]], [0.25, 0.75])
    back = measure_from_text(measure_to_text(mu))
    assert back == mu
    e = EmpiricalMeasure(np.linspace(0, 1, 5))
    assert isinstance(measure_from_text(measure_to_text(e)), EmpiricalMeasure)


def test_potential_metadata():
    pot = PotentialSpec.quadratic(1.0, -0.25)
    assert (pot.beta, pot.gamma, pot.gamma_prime, pot.Gamma) == (1.0, -0.25, -0.25, 0.25)
    assert pot.uniformly_convex
    assert not PotentialSpec.quadratic(1.0, -0.6).uniformly_convex
    cp = PotentialSpec.custom_polynomial((0, 0, 0.5, 0, 0.25), (0, 0, -0.5, 0, 0.1))
    # W'' = -1 + 1.2 z^2 has infimum -1 and no finite supremum
    assert cp.gamma == -1.0 and cp.gamma_prime == math.inf
    with pytest.raises(ParameterError):
        PotentialSpec.custom_polynomial((0, 0, 1), (0, 1, 1))


@pytest.mark.parametrize("pot", [PotentialSpec.quadratic(1.5, 0.5, dim=2, center=(0.3, -1)),
                                 PotentialSpec.quartic_confinement(0.7, -1.0, 0.2, dim=2),
                                 PotentialSpec.custom_polynomial((1, 0.2, -1, 0.1, 0.25), (0, 0, 0.5, 0, -0.05))])
def test_gradients_match_finite_differences(pot, gen):
    x = gen.normal(size=(20, pot.dim))
    h = 1e-6
    for fn, gfn in ((pot.V, pot.grad_V), (pot.W, pot.grad_W)):
        g = gfn(x)
        for k in range(pot.dim):
            e = np.zeros(pot.dim)
            e[k] = h
            fd = (fn(x + e) - fn(x - e)) / (2 * h)
            assert np.allclose(g[:, k], fd, rtol=1e-6, atol=1e-6)


def test_interaction_drift_methods_agree(gen):
    x = gen.normal(size=(50, 1))
    for pot in (PotentialSpec.quadratic(1.0, 0.5),
                PotentialSpec.custom_polynomial((0, 0, 1), (0, 0, 0.5, 0, -0.05, 0, 0.01))):
        a = pot.interaction_drift(x, "pairwise")
        b = pot.interaction_drift(x, "moments")
        assert np.allclose(a, b, atol=1e-12)


@pytest.mark.parametrize("shape", ["triangular", "smooth-bump"])
@pytest.mark.parametrize("dim", [1, 2, 3])
def test_kernel_unit_mass(shape, dim):
    k = Kernel(shape, dim)
    assert abs(k.integral() - 1) < 1e-8
    assert k.profile(1.0) == 0 and k.profile(1.5) == 0
    r = np.linspace(0, 0.999, 2000)
    slope = np.abs(np.diff(k.profile(r)) / np.diff(r)).max()
    assert slope <= k.lipschitz_norm * (1 + 1e-9)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20))
def test_empirical_always_valid(xs):
    assert validate_measure(EmpiricalMeasure(np.array(xs)))
