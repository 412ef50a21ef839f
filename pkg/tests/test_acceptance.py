"""Acceptance criteria 1-14, each at its stated tolerance and runtime.

Every test records one PASS/FAIL line, printed in the terminal summary.
"""
import itertools
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from cases import GRONWALL_MATRIX, gronwall_case
from conftest import ACCEPTANCE_LINES
from mflab import cli, concentration as conc, covering as cov, mckean as mk, pde, reconstruct as rc
from mflab.measures import (DiscreteMeasure, EmpiricalMeasure, Gaussian, GaussianMixture, Kernel,
                            PotentialSpec, RngSpec, UniformBall, parse_law, sample_iid,
                            sq_exp_moment, truncate)
from mflab.transport import w1_exact_1d, wp_discrete, wp_exact_1d

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SEED = 20240611


def record(n, ok, detail, elapsed, limit=None):
    timing = f"{elapsed:.1f}s" + (f" (limit {limit:g}s)" if limit else "")
    ACCEPTANCE_LINES.append(f"criterion {n:>2} [{'PASS' if ok else 'FAIL'}] {detail}; {timing}")
    assert ok, detail


def perm_min(X, Y, p):
    n = X.shape[0]
    c = np.linalg.norm(X[:, None, :] - Y[None, :, :], axis=2) ** p
    perms = np.array(list(itertools.permutations(range(n))))
    return c[np.arange(n)[None, :], perms].mean(axis=1).min()


def test_c01_ot_oracle():
    t0 = time.perf_counter()
    gen = np.random.Generator(np.random.Philox(SEED))
    worst = 0.0
    for k in range(200):
        n = int(gen.integers(2, 9))
        p = 1.0 if k % 2 == 0 else 2.0
        X, Y = gen.random((n, 2)), gen.random((n, 2))
        d, _ = wp_discrete(EmpiricalMeasure(X), EmpiricalMeasure(Y), p)
        worst = max(worst, abs(d ** p - perm_min(X, Y, p)))
    el = time.perf_counter() - t0
    record(1, worst <= 1e-10 and el < 10, f"200 pairs, max |cost - permutation min| = {worst:.2e}", el, 10)


def test_c02_one_dimensional_identity():
    t0 = time.perf_counter()
    worst_ot = worst_q = 0.0
    for k in range(100):
        a = sample_iid("gaussian(0,1)", 50, RngSpec(SEED, (2, k, 0)))
        b = sample_iid("gaussian(0.3,1.2)", 50, RngSpec(SEED, (2, k, 1)))
        worst_ot = max(worst_ot, abs(w1_exact_1d(a, b) - wp_discrete(a, b, 1.0)[0]))
        worst_q = max(worst_q, conc.mq_identity_check(a, "gaussian(0,1)").residual)
    el = time.perf_counter() - t0
    ok = worst_ot <= 1e-10 and worst_q <= 1e-8 and el < 30
    record(2, ok, f"max gap to simplex {worst_ot:.2e}, to CDF quadrature {worst_q:.2e}", el, 30)


def test_c03_covering_certificates():
    t0 = time.perf_counter()
    delta = 0.4
    cover = cov.cover_ball_lattice(1.0, delta / 2, 2)
    law = UniformBall(1.0, 2)
    ok_count, worst = 0, 0.0
    for k in range(50):
        g = RngSpec(SEED, (3, k)).generator()
        w = g.dirichlet(np.ones(6))
        mu = DiscreteMeasure(law.sample(6, g), w / math.fsum(w))
        res = cov.nearest_net_point(mu, cover, K=cov.net_resolution(cover.size, 2.0, delta / 2, 1.0))
        ok_count += res.distance <= delta
        worst = max(worst, res.distance)
    counts_ok = bound_ok = True
    for n in range(1, 6):
        for K in range(1, 9):
            counts_ok &= cov.enumerate_net(n, K).shape[0] == math.comb(K + n - 1, n - 1)
            if K > n:
                bound_ok &= cov.net_cardinality(n, K) <= cov.net_cardinality_bound(n, K)[1]
    el = time.perf_counter() - t0
    ok = ok_count == 50 and counts_ok and bound_ok and el < 120
    record(3, ok, f"{ok_count}/50 within delta (max W_1 {worst:.3f}); |C_K| counts {'ok' if counts_ok else 'WRONG'}; "
                  f"(2Ke/N)^N bound for K > N {'ok' if bound_ok else 'VIOLATED'}", el, 120)


def test_c04_truncation_bound():
    t0 = time.perf_counter()
    violations, checked = 0, 0
    for k in range(20):
        mu = sample_iid("gaussian(0,1)", 10 ** 4, RngSpec(SEED, (4, k)))
        E = sq_exp_moment(mu, 0.25)
        for R in (2.0, 3.0, 4.0):
            t = truncate(mu, R)
            for p in (1.0, 2.0):
                b = conc.truncation_bound(E, 0.25, R, p)
                if not b.admissible:
                    continue
                checked += 1
                violations += wp_exact_1d(mu, t, p) ** p > b.bound
    el = time.perf_counter() - t0
    record(4, violations == 0 and el < 120, f"{violations} violations in {checked} admissible cases", el, 120)


def test_c05_gaussian_t2_family():
    t0 = time.perf_counter()
    eq = max(abs(conc.tp_residual_gaussian(m, 1.0, 2)) for m in range(-2, 3))
    neg = [conc.tp_residual_gaussian(m, 2.0, 2) for m in (-2, -1, 1, 2)]
    el = time.perf_counter() - t0
    ok = eq <= 1e-12 and all(r < 0 for r in neg) and el < 1
    record(5, ok, f"max |residual| at lambda=1 {eq:.1e}; lambda=2 residuals {[round(r, 4) for r in neg]}", el, 1)


def test_c06_concentration_shape():
    t0 = time.perf_counter()
    Ns = [50, 100, 200, 400, 800]
    reps = [conc.mc_deviation("gaussian(0,1)", 1, N, 0.2, 10 ** 4, RngSpec(SEED, (6, N))) for N in Ns]
    est = [r.estimate for r in reps]
    fit = conc.fit_log_linear(Ns, est)
    # importance-sampling estimates resolve the tail that plain MC cannot; reported only
    tilted = [conc.mc_deviation_tilted(N, 0.2, 10 ** 4, RngSpec(SEED, (60, N)))[0] for N in Ns]
    tfit = conc.fit_log_linear(Ns, tilted)
    el = time.perf_counter() - t0
    ok = fit.ok and fit.slope > 0 and fit.r2 >= 0.95 and el < 300
    detail = (f"plain MC estimates {est}: " +
              (f"b = {fit.slope:.4g}, R^2 = {fit.r2:.4f}, K = b/eps^2 = {fit.slope / 0.04:.4g}" if fit.ok
               else fit.reason) +
              f"; tilted estimates {[float(f'{v:.3g}') for v in tilted]} give b = {tfit.slope:.4g}, "
              f"R^2 = {tfit.r2:.4f}")
    record(6, ok, detail, el, 300)


def test_c07_coupling_inequality():
    t0 = time.perf_counter()
    pot = PotentialSpec.quadratic(1.0, 0.5)
    config = mk.SimConfig(256, 1e-3, 2.0, pot, Gaussian(0.0, 1.0), RngSpec(SEED, (7,)), save_stride=10)
    st = mk.coupling_study(config, 20, h=0.02, jobs=min(4, os.cpu_count() or 1))
    el = time.perf_counter() - t0
    cal = st.calibration
    ok = st.violations == 0 and el < 600
    record(7, ok, f"tolerance {cal.tolerance:.3g} (dt-halving {cal.discretization:.3g}, grid {cal.grid_error:.3g}); "
                  f"min residual {st.min_residual:.3g}; {st.violations} violations over 20 seeds", el, 600)


def test_c08_energy_gronwall():
    t0 = time.perf_counter()
    ou = PotentialSpec.quadratic(1.0, 0.0)
    s = pde.solve_mckean_1d(ou, pde.grid_for(Gaussian(0.0, 0.3), 5.0, ou), 5.0, 1e-3, save_every=100)
    tr = pde.moment_trace(s)
    rel = abs(tr.e[-1] / pde.ou_second_moment(5.0, tr.e[0]) - 1)
    mins = []
    for k in range(len(GRONWALL_MATRIX)):
        pot, law = gronwall_case(k)
        sk = pde.solve_mckean_1d(pot, pde.grid_for(law, 5.0, pot), 5.0, 1e-3, save_every=50)
        mins.append(pde.energy_gronwall_check(pde.moment_trace(sk), pot).min_residual)
    el = time.perf_counter() - t0
    ok = rel <= 1e-4 and min(mins) >= -1e-6 and el < 60
    record(8, ok, f"OU relative error at T=5 {rel:.2e}; min residual over {len(mins)} cases {min(mins):.2e}", el, 60)


def test_c09_stationary_variance():
    t0 = time.perf_counter()
    pot = PotentialSpec.quadratic(1.0, 0.5)
    target = 1 / 1.5
    s = pde.solve_mckean_1d(pot, pde.grid_for(Gaussian(0.0, 1.0), 20.0, pot), 20.0, 1e-2, save_every=500)
    v_pde = s.final.variance
    config = mk.SimConfig(10 ** 4, 2.5e-3, 40.0, pot, Gaussian(0.0, 1.0), RngSpec(SEED, (9,)),
                          save_stride=40, force="moments")
    b = mk.simulate_interacting(config)
    late = b.times >= 10.0
    v_part = float(np.mean(b.X[late, :, 0].var(axis=1)))
    el = time.perf_counter() - t0
    ok = abs(v_pde - target) <= 1e-2 and abs(v_part - target) <= 1e-2 and el < 300
    record(9, ok, f"PDE variance {v_pde:.6f}, particle variance (time average over t >= 10) {v_part:.5f}, "
                  f"target {target:.6f}", el, 300)


def test_c10_time_holder():
    t0 = time.perf_counter()
    heat = PotentialSpec.quadratic(0.0, 0.0)
    s = pde.solve_mckean_1d(heat, pde.grid_for(Gaussian(0.0, 0.02), 1.0, heat, h=0.004), 1.0, 1e-4,
                            save_every=10)
    rep = pde.time_holder_check(s)
    el = time.perf_counter() - t0
    ok = 0.4 <= rep.exponent <= 0.6 and el < 60
    record(10, ok, f"exponent {rep.exponent:.4f} (R^2 {rep.r2:.4f}), max W_1/sqrt(gap) {rep.max_ratio:.4f}", el, 60)


def test_c11_equilibrium_rate():
    t0 = time.perf_counter()
    pot = PotentialSpec.quadratic(1.0, 0.5)
    s = pde.solve_mckean_1d(pot, pde.grid_for(Gaussian(1.0, 0.5), 10.0, pot), 10.0, 1e-3, save_every=100)
    st = pde.stationary_density(pot, s.x_min, s.x_max, s.n_cells)
    rep = pde.equilibrium_convergence_check(s, st)
    el = time.perf_counter() - t0
    ok = pot.uniformly_convex and rep.rate > 0 and rep.r2 >= 0.98 and el < 120
    record(11, ok, f"rate {rep.rate:.4f}, R^2 {rep.r2:.6f} over {rep.n_fit} times", el, 120)


def test_c12_propagation_of_chaos():
    t0 = time.perf_counter()
    pot = PotentialSpec.quadratic(1.0, 0.5)
    law = Gaussian(0.5, 1.0)
    s = pde.solve_mckean_1d(pot, pde.grid_for(law, 1.0, pot), 1.0, 1e-3, save_every=100)
    atoms = s.at(1.0).equal_mass_atoms(24)
    prod = EmpiricalMeasure(np.array([[a, b] for a in atoms for b in atoms]))
    medians = []
    for N in (32, 64, 128):
        vals = []
        for r in range(10):
            c = mk.SimConfig(N, 1e-2, 1.0, pot, law, RngSpec(SEED, (12, N, r)), save_stride=100)
            b = mk.simulate_interacting(c)
            vals.append(wp_discrete(mk.pair_empirical(b, 1.0), prod, 1.0)[0])
        medians.append(float(np.median(vals)))
    el = time.perf_counter() - t0
    ok = medians[0] > medians[1] > medians[2] and el < 600
    record(12, ok, f"medians over 10 seeds at N=32,64,128: {[round(m, 4) for m in medians]}", el, 600)


def test_c13_reconstruction():
    t0 = time.perf_counter()
    gm = GaussianMixture((0.4, 0.6), (-1.5, 1.0), (0.6, 0.8))
    ker = Kernel("triangular", 1)
    viol = impl = 0
    for k in range(1000):
        r = rc.reconstruction_check(sample_iid(gm, 500, RngSpec(SEED, (13, k))), gm, ker, 0.3)
        viol += not r.inequality_holds
        impl += not r.implication_holds
    L = max(gm.lipschitz, ker.lipschitz_norm)
    K = (2 * L) ** -3
    w1 = {N: [w1_exact_1d(sample_iid(gm, N, RngSpec(SEED, (131, N, k))), gm) for k in range(200)]
          for N in (100, 300, 1000, 3000, 10000)}
    fit = rc.fit_budget_exponent(w1, K, 1)
    el = time.perf_counter() - t0
    ok = viol == 0 and impl == 0 and 5 <= fit.exponent <= 7 and el < 600
    record(13, ok, f"{viol} inequality violations, {impl} implication failures in 1000 trials; "
                   f"eps exponent {fit.exponent:.3f} (R^2 {fit.r2:.4f})", el, 600)


def test_c14_determinism(tmp_path):
    t0 = time.perf_counter()
    mismatched = []
    for path in sorted(CONFIGS.glob("*.cfg")):
        dirs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{path.stem}-{rep}"
            code = cli.main(["run", str(path), "--out", str(out)])
            assert code in (0, 1), f"{path.name} exited {code}"
            dirs.append(out)
        names = sorted(os.listdir(dirs[0]))
        if names != sorted(os.listdir(dirs[1])):
            mismatched.append(path.name)
            continue
        for n in names:
            if (dirs[0] / n).read_bytes() != (dirs[1] / n).read_bytes():
                mismatched.append(f"{path.name}:{n}")
    el = time.perf_counter() - t0
    record(14, not mismatched, f"{len(list(CONFIGS.glob('*.cfg')))} configs rerun; mismatches: {mismatched or 'none'}", el)
