import math

import numpy as np
import pytest

from cases import GRONWALL_MATRIX, gronwall_case
from mflab import pde
from mflab.errors import CheckRefusedError, DomainTooSmallError, OffGridError, ParameterError
from mflab.measures import Gaussian, PotentialSpec, RngSpec, parse_law


def solve(beta, gamma, law, T, dt, h=0.02, save_every=1, center=None):
    pot = PotentialSpec.quadratic(beta, gamma, center=center)
    init = pde.grid_for(parse_law(law), T, pot, h=h)
    return pde.solve_mckean_1d(pot, init, T, dt, save_every=save_every)


def test_grid_density_invariants():
    g = pde.GridDensity1D.from_law(Gaussian(0.0, 1.0), -8, 8, 400)
    assert abs(g.mass - 1) < 1e-8 and np.all(g.values >= 0)
    with pytest.raises(ParameterError):
        pde.GridDensity1D(0, 1, 4, [1, 1, 1, 2])
    with pytest.raises(DomainTooSmallError):
        pde.GridDensity1D.from_law(Gaussian(0.0, 1.0), -1, 1, 100)


def test_csv_roundtrip():
    g = pde.GridDensity1D.from_law(Gaussian(0.3, 0.7), -5, 5, 50, t=1.25)
    text = g.to_csv("quadratic(beta=1,gamma=0)")
    assert text.splitlines()[0] == "# t=1.25"
    back = pde.GridDensity1D.from_csv(text)
    assert np.array_equal(back.values, g.values) and back.t == g.t and back.x_min == g.x_min


def test_grid_w1_matches_quadrature():
    from scipy import integrate
    a = pde.GridDensity1D.from_law(Gaussian(0.0, 1.0), -8, 8, 160)
    b = pde.GridDensity1D.from_law(Gaussian(0.5, 0.8), -8, 8, 160)
    f = lambda x: abs(a.cdf(x) - b.cdf(x))
    val = math.fsum(integrate.quad(f, lo, hi, epsabs=1e-15)[0] for lo, hi in zip(a.edges, a.edges[1:]))
    assert abs(a.w1(b) - val) < 1e-9


def test_convolution_matches_direct():
    x = np.linspace(-3, 3, 61)
    m = np.exp(-x * x)
    m /= m.sum()
    for pot in (PotentialSpec.quadratic(1.0, 0.7),
                PotentialSpec.custom_polynomial((0, 0, 1), (0, 0, -0.5, 0, 0.1, 0, 0.02))):
        assert np.allclose(pde.convolve_w(pot, x, m), pde.convolve_w_direct(pot, x, m), atol=1e-11)


def test_mass_conserved_and_positive():
    s = solve(1.0, 0.5, "gaussian(mean=1, std=0.5)", 2.0, 1e-2)
    assert s.mass_drift < 1e-12 and s.max_step_drift < 1e-12
    assert all(np.all(r.values >= 0) for r in s)


def test_ou_stationary_variance():
    s = solve(1.0, 0.0, "gaussian(mean=0, std=0.3)", 10.0, 1e-2, save_every=1000)
    assert abs(s.final.variance - 1.0) < 1e-3


def test_heat_variance_growth():
    s = solve(0.0, 0.0, "gaussian(mean=0, std=0.05)", 1.0, 1e-3, h=0.01, save_every=100)
    for r in s:
        assert abs(r.variance - (0.05 ** 2 + 2 * r.t)) < 1e-4


def test_mean_field_stationary_variance():
    s = solve(1.0, 0.5, "gaussian(mean=0, std=1)", 20.0, 1e-2, save_every=2000)
    assert abs(s.final.variance - 1 / 1.5) < 1e-3
    st = pde.stationary_density(s.potential, s.x_min, s.x_max, s.n_cells)
    assert abs(st.variance - 1 / 1.5) < 1e-3


def test_boundary_leak_detected():
    pot = PotentialSpec.quadratic(0.0, 0.0)
    init = pde.GridDensity1D.from_law(Gaussian(0.0, 0.2), -2, 2, 200)
    with pytest.raises(DomainTooSmallError):
        pde.solve_mckean_1d(pot, init, 1.0, 1e-2)


def test_off_grid_time():
    s = solve(1.0, 0.0, "gaussian(mean=0, std=1)", 1.0, 0.1, save_every=2)
    with pytest.raises(OffGridError, match="nearest saved time"):
        s.at(0.1)
    assert s.at(0.2).t == pytest.approx(0.2)


def test_alpha_schedule():
    a = pde.alpha_schedule(1.0, 0.0)
    assert a(0.0) == 1.0 and math.isclose(a(1.0), 0.2, rel_tol=1e-15)
    for b in (0.0, 0.5, 2.0):
        f = pde.alpha_schedule(0.7, b)
        vals = f(np.linspace(0, 10, 200))
        assert f(0.0) == pytest.approx(0.7) and np.all(vals > 0) and np.all(np.diff(vals) <= 0)
    # small b approaches the b = 0 limit
    assert pde.alpha_schedule(1.0, 1e-9)(1.0) == pytest.approx(0.2, rel=1e-8)


def test_ou_moment_ode():
    s = solve(1.0, 0.0, "gaussian(mean=0, std=0.3)", 5.0, 1e-3, save_every=100)
    tr = pde.moment_trace(s)
    exact = pde.ou_second_moment(tr.times, tr.e[0])
    assert abs(tr.e[-1] / exact[-1] - 1) < 1e-4
    rep = pde.energy_gronwall_check(tr, s.potential, eta_bar=-1e-12)
    # with eta_bar -> 0 the bound reduces to the exact OU second moment
    assert np.allclose(rep.bound, exact, rtol=1e-9)
    assert rep.residual[0] == 0


@pytest.mark.parametrize("k", range(len(GRONWALL_MATRIX)))
def test_gronwall_matrix_two_resolutions(k):
    pot, law = gronwall_case(k)
    for h, dt in ((0.02, 1e-3), (0.01, 5e-4)):
        init = pde.grid_for(law, 5.0, pot, h=h)
        s = pde.solve_mckean_1d(pot, init, 5.0, dt, save_every=int(round(0.05 / dt)))
        rep = pde.energy_gronwall_check(pde.moment_trace(s), pot)
        assert rep.residual[0] == 0
        assert rep.min_residual >= -1e-6


def test_gronwall_equality_case_converges():
    """Above equilibrium with gamma < 0 the bound is attained; the deficit is O(dt)."""
    pot = PotentialSpec.quadratic(1.0, -0.25)
    mins = []
    for h, dt in ((0.02, 1e-3), (0.01, 5e-4)):
        init = pde.grid_for(Gaussian(0.0, 2.0), 5.0, pot, h=h)
        s = pde.solve_mckean_1d(pot, init, 5.0, dt, save_every=int(round(0.05 / dt)))
        mins.append(pde.energy_gronwall_check(pde.moment_trace(s), pot).min_residual)
    assert mins[1] < 0 and abs(mins[1]) < 0.6 * abs(mins[0])


def test_holder_exponent_and_refinement():
    ratios = []
    for h, dt in ((0.004, 1e-4), (0.002, 5e-5)):
        pot = PotentialSpec.quadratic(0.0, 0.0)
        init = pde.grid_for(Gaussian(0.0, 0.02), 1.0, pot, h=h)
        s = pde.solve_mckean_1d(pot, init, 1.0, dt, save_every=int(round(1e-2 / dt)))
        rep = pde.time_holder_check(s)
        assert 0.4 <= rep.exponent <= 0.6
        ratios.append(rep.max_ratio)
    assert math.isfinite(ratios[0]) and abs(ratios[1] / ratios[0] - 1) <= 0.1
    rep = pde.time_holder_check(s, gaps=[0.0])
    assert rep.w1[0] == 0


def test_equilibrium_start_at_equilibrium():
    pot = PotentialSpec.quadratic(1.0, 0.5)
    st = pde.stationary_density(pot, -6, 6, 600)
    s = pde.solve_mckean_1d(pot, st.with_values(st.values, 0.0), 2.0, 1e-2, save_every=20)
    rep = pde.equilibrium_convergence_check(s, st)
    assert np.all(rep.w2 < 1e-9)


def test_equilibrium_rate_ou():
    s = solve(1.0, 0.0, "gaussian(mean=1, std=0.5)", 6.0, 1e-3, save_every=100)
    st = pde.stationary_density(s.potential, s.x_min, s.x_max, s.n_cells)
    rep = pde.equilibrium_convergence_check(s, st, t_min=0.5)
    assert 0.8 <= rep.rate <= 1.2


def test_equilibrium_refused_outside_convex_regime():
    s = solve(1.0, -0.6, "gaussian(mean=0, std=0.5)", 0.1, 1e-2)
    with pytest.raises(CheckRefusedError) as err:
        pde.equilibrium_convergence_check(s, s.final)
    assert err.value.tag == "not-uniformly-convex"


def test_grid_sample_and_atoms():
    g = pde.GridDensity1D.from_law(Gaussian(0.0, 1.0), -8, 8, 800)
    x = g.sample(20000, RngSpec(3).generator())
    assert abs(x.mean()) < 4 / math.sqrt(20000)
    atoms = g.equal_mass_atoms(10)
    assert np.allclose(atoms, Gaussian(0, 1).quantile((np.arange(10) + 0.5) / 10), atol=2e-3)
