"""Mode integrals, the collapsed A functional, and chaos coefficients."""

import numpy as np
import pytest

from kpz2d.analytic_oracles import M2_closed_form, mean_mode_integral
from kpz2d.chaos_analysis import (A_functional, ChaosIndex, canonical_modes,
                                  chaos_coefficient_direct,
                                  chaos_coefficient_fk,
                                  chaos_coefficients_fk, chaos_run_direct,
                                  mode_sums_for_positions,
                                  path_mode_integral, phase_shift_identity,
                                  second_chaos_energy, zero_mode_comparison)
from kpz2d.errors import HorizonMismatch
from kpz2d.polymer_mc import _path_bundle, sample_paths


class TestChaosIndex:
    def test_validation(self):
        with pytest.raises(ValueError):
            ChaosIndex((0, 0), 0)
        with pytest.raises(ValueError):
            ChaosIndex((1, 0), 1)       # l must be < |k|^2
        idx = ChaosIndex((2, 1), 4)
        assert idx.k_sq == 5 and idx.canonical

    def test_canonical_enumeration(self):
        modes = canonical_modes(1, 2)
        # |k|^2 in {1,2,4}: canonical k = (1,0),(0,1),(1,1),(1,-1),(2,0),(0,2)
        assert len(modes) == 1 + 1 + 2 + 2 + 4 + 4
        assert all(m.canonical for m in modes)
        ks = {m.k for m in modes}
        assert (1, 0) in ks and (0, 1) in ks and (1, -1) in ks
        assert (-1, 0) not in ks


class TestPathFunctionals:
    def test_horizon_guard(self):
        p = sample_paths((0.5, (0.0, 0.0)), 50, 1, seed=1)[0]
        with pytest.raises(HorizonMismatch):
            path_mode_integral(p, ChaosIndex((1, 0), 0))

    def test_phase_shift_identity_exact(self):
        idx = ChaosIndex((2, -1), 3)
        p = sample_paths((1.0, (0.3, 0.6)), 64, 1, seed=2)[0]
        x = (0.21, 0.77)
        shifted = sample_paths((1.0, (0.3, 0.6)), 64, 1, seed=2)[0]
        shifted.positions = np.mod(shifted.positions + np.asarray(x), 1.0)
        lhs = path_mode_integral(shifted, idx)
        rhs = phase_shift_identity(idx, x) * path_mode_integral(p, idx)
        assert lhs == pytest.approx(rhs, abs=1e-12)
        assert phase_shift_identity(idx, (0.0, 0.0)) == 1.0

    def test_A_functional_identical_paths(self):
        idx = ChaosIndex((1, 0), 0)
        p = sample_paths((1.0, (0.5, 0.5)), 64, 1, seed=3)[0]
        assert A_functional(p, p, idx) == pytest.approx(0.0, abs=1e-15)

    def test_A_mean_real_and_value(self):
        # untilted E A = M2 - |m|^2 within 3 stderr
        idx = ChaosIndex((1, 0), 0)
        pos, dt = _path_bundle(1.0, (0.0, 0.0), 2048, 4000, seed=4)
        pos2, _ = _path_bundle(1.0, (0.0, 0.0), 2048, 4000, seed=5)
        s1 = mode_sums_for_positions(pos, dt, [idx])[0]
        s2 = mode_sums_for_positions(pos2, dt, [idx])[0]
        vals = np.abs(s1) ** 2 - s1 * np.conj(s2)
        target = M2_closed_form((1, 0), 0) \
            - abs(mean_mode_integral((1, 0), 0)) ** 2
        se = vals.real.std(ddof=1) / np.sqrt(vals.size)
        assert abs(vals.real.mean() - target) < 3.5 * se
        im_se = vals.imag.std(ddof=1) / np.sqrt(vals.size)
        assert abs(vals.imag.mean()) < 3.5 * im_se

    def test_mode_mc_matches_closed_forms(self):
        # E S and E|S|^2 against the oracle values at two modes
        idxs = [ChaosIndex((1, 0), 0), ChaosIndex((2, 1), 0)]
        pos, dt = _path_bundle(1.0, (0.0, 0.0), 4096, 12000, seed=6)
        S = mode_sums_for_positions(pos, dt, idxs)
        for row, idx in zip(S, idxs):
            m_oracle = mean_mode_integral(idx.k, idx.l)
            se = row.real.std(ddof=1) / np.sqrt(row.size)
            assert abs(row.mean() - m_oracle) < 4 * se
            m2 = np.abs(row) ** 2
            m2_se = m2.std(ddof=1) / np.sqrt(row.size)
            assert abs(m2.mean() - M2_closed_form(idx.k, idx.l)) \
                < 3.5 * m2_se + 3e-4   # + left-endpoint Riemann bias


class TestDirectRoute:
    def test_theta_zero_coefficient(self):
        a, se = chaos_coefficient_direct(0.0, 0.25, ChaosIndex((1, 0), 0),
                                         noise_reps=6, seed=7, grid_n=32,
                                         dt=1.0 / 256)
        assert a == 0.0 and se == 0.0

    def test_mode_tap_matches_wiener(self):
        # the solver-side accumulator reproduces the mode integrals
        from kpz2d.noise_field import TorusGrid, sample_noise
        from kpz2d.chaos_analysis import _ModeTap
        g = TorusGrid(32)
        noise = sample_noise(g, 0.01, 30, seed=8)
        idx = ChaosIndex((1, -2), 2)
        tap = _ModeTap(noise, [idx])
        for j in range(30):
            tap(j, noise.slice(j))
        modes, w1 = tap.finish()
        direct = noise.wiener_integral(
            lambda s, x, y: np.exp(2j * np.pi * (2 * s + x - 2 * y)))
        assert modes[0] == pytest.approx(direct, abs=1e-10)
        assert w1 == pytest.approx(noise.wiener_integral(
            lambda s, x, y: 1.0), abs=1e-10)

    def test_independence_structure(self):
        # W[e_{k,l}] uncorrelated with W[1]; f-bar uncorrelated with v
        z, H, v = chaos_run_direct(0.1, 0.25, [ChaosIndex((1, 0), 0)],
                                   160, seed=9, grid_n=32, dt=1.0 / 256)
        f = H - v
        fc = f - f.mean()
        vc = v - v.mean()
        corr = np.mean(fc * vc) / (fc.std() * vc.std())
        assert abs(corr) < 3.5 / np.sqrt(len(v))


class TestFkRoute:
    def test_theta_zero(self):
        a, se = chaos_coefficient_fk(0.0, 0.25, ChaosIndex((1, 0), 0),
                                     count=64, noise_reps=4, seed=10,
                                     grid_n=32, dt=1.0 / 128)
        assert a == 0.0

    def test_small_theta_slope(self):
        # a / theta at small theta matches the closed-form slope
        idx = ChaosIndex((1, 0), 0)
        eps = 0.25
        a, se = chaos_coefficient_fk(0.02, eps, idx, count=512,
                                     noise_reps=10, seed=11, grid_n=32,
                                     dt=1.0 / 512)
        from kpz2d.noise_field import TorusGrid, make_mollifier
        m = make_mollifier("bump", eps, TorusGrid(32))
        c = 1.0 / np.sqrt(abs(np.log(eps)))
        slope = c * m.fourier_radial(eps) ** 2 * (
            M2_closed_form((1, 0), 0)
            - abs(mean_mode_integral((1, 0), 0)) ** 2)
        assert a / 0.02 == pytest.approx(slope, rel=0.10)

    def test_hermitian_symmetry(self):
        # a at (k, l) and the conjugate mode (-k is non-canonical; compare
        # (1,1) against (1,-1) which are exchangeable under reflection)
        kw = dict(count=384, noise_reps=8, grid_n=32, dt=1.0 / 256)
        a1, s1 = chaos_coefficient_fk(0.05, 0.25, ChaosIndex((1, 1), 0),
                                      seed=12, **kw)
        a2, s2 = chaos_coefficient_fk(0.05, 0.25, ChaosIndex((1, -1), 0),
                                      seed=13, **kw)
        assert abs(a1 - a2) < 3.5 * np.hypot(s1, s2)

    def test_fourier_zero_kills_coefficient(self):
        # |rho_hat(eps k)| ~ 0 makes the fk coefficient collapse
        from kpz2d.noise_field import TorusGrid, make_mollifier
        eps = 0.23
        m = make_mollifier("bump", eps, TorusGrid(32))
        k = (8, 0)                        # eps |k| = 1.84 ~ rho_hat zero
        assert abs(m.fourier_radial(eps * 8)) < 0.01
        rep = chaos_coefficients_fk(0.05, eps, [ChaosIndex(k, 0)],
                                    count=128, noise_reps=4, seed=14,
                                    grid_n=32, dt=1.0 / 128)
        assert abs(rep.a_coeff[0]) < 1e-5


class TestEnergyAndZeroMode:
    def test_energy_theta_zero(self):
        e, rep = second_chaos_energy(0.0, 0.25, 2, seed=15)
        assert e == 0.0

    def test_energy_positive(self):
        e, rep = second_chaos_energy(0.1, 0.25, 1, seed=16, route="fk",
                                     noise_reps=6, count=384, grid_n=32,
                                     dt=1.0 / 256)
        assert e > 0.0
        assert len(rep.indices) == 2      # (1,0) and (0,1), l = 0

    def test_zero_mode_report(self):
        rep = zero_mode_comparison(0.2, 0.25, 600, seed=17, grid_n=32,
                                   dt=1.0 / 128)
        # Var(sqrt(theta) W_1[1]) = theta t = 0.2 within 3 relative SE
        se = 0.2 * np.sqrt(2.0 / 599)
        assert abs(rep["v_moments"]["var"] - 0.2) < 3.5 * se
        assert abs(np.mean(rep["h_bar"])) < 1e-12   # centered by design
        assert rep["ks_pvalue"] >= 0.0
        assert len(rep["f_bar"]) == 600


def test_wiener_mode_gram_orthonormal():
    # empirical Gram of {|W[e]|^2 - 1} over canonical modes ~ identity
    from kpz2d.noise_field import TorusGrid, sample_noise
    from kpz2d.chaos_analysis import _ModeTap
    g = TorusGrid(16)
    modes = canonical_modes(1, 2)[:6]
    zs = []
    for r in range(1500):
        noise = sample_noise(g, 0.05, 20, seed=20000 + r)
        tap = _ModeTap(noise, modes)
        for j in range(20):
            tap(j, noise.slice(j))
        mvals, _ = tap.finish()
        zs.append(np.abs(mvals) ** 2 - 1.0)
    zs = np.array(zs)
    gram = zs.T @ zs / zs.shape[0]
    se = 3.5 / np.sqrt(zs.shape[0])
    for i in range(len(modes)):
        for j in range(len(modes)):
            target = 1.0 if i == j else 0.0
            tol = 3.5 * np.sqrt(np.var(zs[:, i] * zs[:, j]) / zs.shape[0])
            assert abs(gram[i, j] - target) < max(tol, se)
