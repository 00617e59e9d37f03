import cmath
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate, special

from deadtime.core import (
    Constant,
    Cosine,
    FixedDeadTime,
    GammaDeadTime,
    NumericalError,
    Spectrum,
    TabulatedDeadTime,
    TimeGrid,
    angular_frequency,
    signal_spectrum,
)
from deadtime.spectral import (
    HarmonicSystem,
    cosine_continued_fraction,
    infer_input_spectrum,
    output_spectrum,
    periodic_rate,
    qk_array,
    qk_fixed,
    qk_law,
    solve_active_spectrum,
)

# Fig-3-style drive: 80 ms dead time, 10 Hz base output, 90% modulation
D = 0.08
LAM0 = 1.0 / (0.1 - D)
EPS = 0.9 * LAM0


def fig3_system(f, K=16):
    w = angular_frequency(f)
    lam_spec = signal_spectrum(Cosine(LAM0, EPS, f), w, order=1)
    return HarmonicSystem(w, K, FixedDeadTime(D), lam_spec)


class TestQkFixed:
    def test_zeroth_is_the_dead_time(self):
        assert qk_fixed(0.08, 5.0, 0) == 0.08

    def test_resonance_vanishes(self):
        d = 0.08
        w = 2 * math.pi / d
        assert abs(qk_fixed(d, w, 1)) < 1e-15

    def test_small_argument_expansion(self):
        d, w = 0.01, 0.01
        got = qk_fixed(d, w, 1)
        assert abs(got - (d - 1j * w * d**2 / 2)) < 1e-10

    def test_hermitian(self):
        for k in (1, 3, 7):
            assert qk_fixed(0.05, 12.0, -k) == pytest.approx(
                qk_fixed(0.05, 12.0, k).conjugate()
            )

    def test_matches_survivor_integral(self):
        # independent quadrature of the survivor transform
        d, w, k = 0.07, 9.0, 3
        re = integrate.quad(lambda y: math.cos(k * w * y), 0, d)[0]
        im = integrate.quad(lambda y: -math.sin(k * w * y), 0, d)[0]
        assert qk_fixed(d, w, k) == pytest.approx(re + 1j * im, abs=1e-12)


class TestQkLaw:
    def test_fixed_delegates(self):
        law = FixedDeadTime(0.08)
        w = angular_frequency(7.0)
        for k in range(9):
            assert qk_law(law, w, k) == pytest.approx(qk_fixed(0.08, w, k), abs=1e-14)

    def test_gamma_mean(self):
        law = GammaDeadTime(order=10, rate=137.5)
        assert qk_law(law, 3.0, 0) == pytest.approx(11 / 137.5, abs=1e-15)

    def test_gamma_against_survivor_quadrature(self):
        law = GammaDeadTime(order=10, rate=137.5)
        w = angular_frequency(5.0)
        k = 1

        def surv(y):
            return special.gammaincc(11, 137.5 * y)

        re = integrate.quad(lambda y: surv(y) * math.cos(k * w * y), 0, 0.5, limit=200)[0]
        im = integrate.quad(lambda y: -surv(y) * math.sin(k * w * y), 0, 0.5, limit=200)[0]
        assert qk_law(law, w, k) == pytest.approx(re + 1j * im, abs=1e-9)

    def test_tabulated_tracks_gamma(self):
        ref = GammaDeadTime(order=3, rate=50.0)
        x = np.linspace(0.0, ref.quantile(1 - 1e-13), 8001)
        pdf = ref.density(x)
        law = TabulatedDeadTime(x, pdf / np.trapezoid(pdf, x))
        w = angular_frequency(6.0)
        for k in (0, 1, 4):
            assert qk_law(law, w, k) == pytest.approx(qk_law(ref, w, k), abs=2e-6)

    def test_array_is_hermitian(self):
        q = qk_array(GammaDeadTime(2, 40.0), 11.0, 6)
        assert_allclose(q[::-1].conj(), q, atol=1e-15)


class TestSolveActiveSpectrum:
    def test_constant_input_recovers_equilibrium(self):
        w = angular_frequency(5.0)
        lam_spec = signal_spectrum(Constant(LAM0), w, order=1)
        sys = HarmonicSystem(w, 4, FixedDeadTime(D), lam_spec)
        alpha = solve_active_spectrum(sys)
        assert alpha.coefficient(0) == pytest.approx(1 / (1 + LAM0 * D), abs=1e-14)
        for k in range(1, alpha.order + 1):
            assert abs(alpha.coefficient(k)) < 1e-14

    def test_no_distortion_at_inverse_dead_time(self):
        f = 1.0 / D
        alpha = solve_active_spectrum(fig3_system(f))
        assert alpha.coefficient(0) == pytest.approx(1 / (1 + LAM0 * D), abs=1e-12)
        mags = [abs(alpha.coefficient(k)) for k in range(1, alpha.order + 1)]
        assert max(mags) < 1e-10

    def test_truncation_insensitive(self):
        f = 6.25
        a1 = solve_active_spectrum(fig3_system(f, K=8))
        a2 = solve_active_spectrum(fig3_system(f, K=16))
        for k in range(-8, 9):
            assert abs(a1.coefficient(k) - a2.coefficient(k)) < 1e-10

    def test_truncation_guard(self):
        w = angular_frequency(5.0)
        lam_spec = signal_spectrum(Cosine(LAM0, EPS, 5.0), w, order=1)
        with pytest.raises(ValueError, match="truncation"):
            solve_active_spectrum(HarmonicSystem(w, 2, FixedDeadTime(D), lam_spec))


class TestContinuedFraction:
    @pytest.mark.parametrize("f", [4.0, 6.25, 10.0, 12.5, 17.5])
    def test_matches_dense_solve(self, f):
        dense = solve_active_spectrum(fig3_system(f))
        fast = cosine_continued_fraction(LAM0, EPS, D, angular_frequency(f))
        for k in range(-8, 9):
            assert abs(dense.coefficient(k) - fast.coefficient(k)) < 1e-10

    def test_zero_modulation(self):
        alpha = cosine_continued_fraction(LAM0, 0.0, D, angular_frequency(3.0))
        assert alpha.coefficient(0) == pytest.approx(1 / (1 + LAM0 * D))
        assert abs(alpha.coefficient(1)) == 0.0

    def test_resonant_drive_keeps_only_the_mean(self):
        alpha = cosine_continued_fraction(LAM0, EPS, D, 2 * math.pi / D)
        assert alpha.coefficient(0) == pytest.approx(1 / (1 + LAM0 * D), abs=1e-12)
        for k in range(1, alpha.order + 1):
            assert abs(alpha.coefficient(k)) < 1e-12

    def test_gamma_law_agrees_with_dense_solve(self):
        law = GammaDeadTime(order=10, rate=137.5)
        f = 6.0
        w = angular_frequency(f)
        lam_spec = signal_spectrum(Cosine(LAM0, EPS, f), w, order=1)
        dense = solve_active_spectrum(HarmonicSystem(w, 16, law, lam_spec))
        fast = cosine_continued_fraction(LAM0, EPS, law, w)
        for k in range(-6, 7):
            assert abs(dense.coefficient(k) - fast.coefficient(k)) < 1e-10

    def test_rejects_overmodulation(self):
        with pytest.raises(ValueError):
            cosine_continued_fraction(10.0, 11.0, 0.05, 30.0)


class TestOutputSpectrum:
    def test_constant_input(self):
        w = angular_frequency(5.0)
        lam_spec = signal_spectrum(Constant(LAM0), w, order=1)
        sys = HarmonicSystem(w, 4, FixedDeadTime(D), lam_spec)
        beta = output_spectrum(sys, solve_active_spectrum(sys))
        assert beta.coefficient(0) == pytest.approx(LAM0 / (1 + LAM0 * D), abs=1e-12)
        for k in range(1, beta.order + 1):
            assert abs(beta.coefficient(k)) < 1e-12

    def test_frequency_doubling_near_half_resonance(self):
        sys = fig3_system(6.25)
        beta = output_spectrum(sys, solve_active_spectrum(sys))
        assert abs(beta.coefficient(2)) > abs(beta.coefficient(1))

    def test_mean_rate_resonance(self):
        def beta0(f):
            sys = fig3_system(f)
            return output_spectrum(sys, solve_active_spectrum(sys)).coefficient(0).real

        assert beta0(0.95 / D) > beta0(0.5 / D)

    def test_pointwise_product_identity(self):
        # the output series must equal input rate times active fraction
        # sampled directly
        f = 10.0
        w = angular_frequency(f)
        sys = fig3_system(f)
        alpha = solve_active_spectrum(sys)
        beta = output_spectrum(sys, alpha)
        t = np.linspace(0.0, 1.0 / f, 128, endpoint=False)
        lam_t = LAM0 + EPS * np.cos(w * t)
        assert_allclose(
            beta.evaluate(t), lam_t * alpha.evaluate(t), atol=1e-8, rtol=0
        )


class TestInferInput:
    def test_round_trip(self):
        f = 10.0
        sys = fig3_system(f)
        alpha = solve_active_spectrum(sys)
        beta = output_spectrum(sys, alpha)
        lam_hat, cond = infer_input_spectrum(beta, FixedDeadTime(D))
        assert cond >= 1.0 and math.isfinite(cond)
        assert lam_hat.coefficient(0) == pytest.approx(LAM0, abs=1e-8)
        assert lam_hat.coefficient(1) == pytest.approx(EPS / 2, abs=1e-8)
        for k in range(2, lam_hat.order + 1):
            assert abs(lam_hat.coefficient(k)) < 1e-8

    def test_constant_output(self):
        w = angular_frequency(5.0)
        a0 = 1 / (1 + LAM0 * D)
        beta = Spectrum(w, np.array([0.0, LAM0 * a0, 0.0], dtype=complex))
        lam_hat, _ = infer_input_spectrum(beta, FixedDeadTime(D))
        assert lam_hat.coefficient(0) == pytest.approx(LAM0, abs=1e-10)
        assert abs(lam_hat.coefficient(1)) < 1e-10

    def test_singular_system_raises(self):
        # beta_0 = 1/q_0 zeroes out the whole diagonal
        w = angular_frequency(5.0)
        beta = Spectrum(w, np.array([1.0 / D], dtype=complex))
        with pytest.raises(NumericalError):
            infer_input_spectrum(beta, FixedDeadTime(D))

    def test_noise_amplification_bounded_by_condition(self):
        f = 10.0
        sys = fig3_system(f)
        beta = output_spectrum(sys, solve_active_spectrum(sys))
        lam_hat, cond = infer_input_spectrum(beta, FixedDeadTime(D))
        rng = np.random.default_rng(11)
        noise = 1e-6 * np.abs(beta.coeffs) * rng.standard_normal(beta.coeffs.size)
        noise = noise + noise[::-1]  # keep the spectrum Hermitian
        noisy = Spectrum(beta.omega, beta.coeffs + noise)
        lam_noisy, _ = infer_input_spectrum(noisy, FixedDeadTime(D))
        err = np.max(np.abs(lam_noisy.coeffs - lam_hat.coeffs))
        scale = np.max(np.abs(beta.coeffs))
        assert err <= 10.0 * cond * 1e-6 * scale


class TestPeriodicRate:
    def test_constant_input_is_flat(self):
        w = angular_frequency(5.0)
        lam_spec = signal_spectrum(Constant(LAM0), w, order=1)
        sys = HarmonicSystem(w, 4, FixedDeadTime(D), lam_spec)
        beta = output_spectrum(sys, solve_active_spectrum(sys))
        tr = periodic_rate(sys, beta, TimeGrid(0.0, 0.01, 25))
        assert_allclose(tr.rate, LAM0 / (1 + LAM0 * D), atol=1e-10)
        assert_allclose(tr.active, 1 / (1 + LAM0 * D), atol=1e-12)

    def test_undistorted_transmission_at_resonance(self):
        f = 1.0 / D
        w = angular_frequency(f)
        sys = fig3_system(f)
        beta = output_spectrum(sys, solve_active_spectrum(sys))
        grid = TimeGrid(0.0, 1.0 / f / 64, 65)
        tr = periodic_rate(sys, beta, grid)
        a0 = 1 / (1 + LAM0 * D)
        lam_t = LAM0 + EPS * np.cos(w * grid.times())
        assert_allclose(tr.rate, a0 * lam_t, atol=1e-8)

    def test_max_rate_curve_has_single_harmonic_peak(self):
        # scan of the per-period maximum: highest near the no-distortion
        # frequency band, collapsing toward the mean at very high drive
        def peak(f):
            sys = fig3_system(f)
            beta = output_spectrum(sys, solve_active_spectrum(sys))
            grid = TimeGrid(0.0, 1.0 / f / 256, 257)
            return float(np.max(periodic_rate(sys, beta, grid).rate))

        assert peak(12.5) > peak(4.0)
        assert peak(12.5) > peak(30.0)


class TestGammaChainCrossCheck:
    def test_periodic_steady_state(self):
        from deadtime.core import Cosine as CosineSig
        from deadtime.gamma_chain import equilibrium_state, integrate as chain_integrate

        n, beta_rate = 10, 137.5
        law = GammaDeadTime(order=n, rate=beta_rate)
        f = 10.0
        w = angular_frequency(f)
        sig = CosineSig(base=LAM0, amplitude=EPS, frequency=f)
        lam_spec = signal_spectrum(sig, w, order=1)
        sys = HarmonicSystem(w, 16, law, lam_spec)
        beta = output_spectrum(sys, solve_active_spectrum(sys))

        h = 2.5e-5
        per_period = int(round(1.0 / f / h))
        n_periods = 25
        grid = TimeGrid(0.0, h, n_periods * per_period + 1)
        b0 = equilibrium_state(n, beta_rate, sig.rate(0.0))
        tr = chain_integrate(n, beta_rate, sig, b0, grid)

        tail = TimeGrid(grid.times()[-per_period - 1], h, per_period + 1)
        ref = periodic_rate(sys, beta, tail)
        got = tr.rate[-per_period - 1 :]
        rel_l2 = np.sqrt(np.mean((got - ref.rate) ** 2)) / np.sqrt(np.mean(ref.rate**2))
        assert rel_l2 < 1e-5
