import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from zeroscat import sphere as S
from zeroscat.errors import DomainError, NoPeakError
from zeroscat.potentials import PotentialModel


def test_tchebyshev_examples():
    assert S.tchebyshev(0, 0.3) == 1.0
    assert S.tchebyshev(3, 0.5) == pytest.approx(-1.0, abs=1e-15)
    w = np.linspace(-1, 1, 11)
    assert_allclose(S.tchebyshev(7, w), np.cos(7 * np.arccos(w)), atol=1e-13)
    with pytest.raises(DomainError):
        S.tchebyshev(2, 1.5)


def test_tchebyshev_log_generating_function():
    t, w = 0.3, 0.5
    series = sum(2 * t**l / l * S.tchebyshev(l, w) for l in range(1, 60))
    assert series == pytest.approx(-math.log(1 - 2 * w * t + t * t), abs=1e-10)


def test_gegenbauer_examples():
    assert S.gegenbauer(0.7, 0, 0.2) == 1.0
    assert S.gegenbauer(0.5, 1, 0.3) == pytest.approx(0.3, rel=1e-15)
    t, w = 0.2, -0.4
    series = sum(t**n * S.gegenbauer(1.0, n, w) for n in range(60))
    assert series == pytest.approx((1 - 2 * w * t + t * t) ** -1.0, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(-1.0, 1.0), st.floats(-0.5, 0.5))
def test_gegenbauer_generating_function(alpha, w, t):
    series = sum(t**n * S.gegenbauer(alpha, n, w) for n in range(51))
    # the tail beyond n = 50 is below 1e-9 for |t| <= 1/2 and alpha <= 3
    assert series == pytest.approx((1 - 2 * w * t + t * t) ** -alpha, abs=1e-9)


def test_projection_kernel_examples():
    assert S.projection_kernel(3, 0, 0.4) == pytest.approx(1 / (4 * math.pi), rel=1e-15)
    phi = 0.7
    assert S.projection_kernel(2, 2, math.cos(phi)) == pytest.approx(math.cos(2 * phi) / math.pi,
                                                                     rel=1e-13)
    assert S.projection_kernel(2, 0, 0.1) == pytest.approx(1 / (2 * math.pi), rel=1e-15)


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_projection_trace(d):
    # Q_l(1) |S^{d-1}| is the dimension of the degree-l harmonics
    for l in range(6):
        assert S.projection_kernel(d, l, 1.0) * S.sphere_area(d) == pytest.approx(
            S.harmonic_dimension(d, l), rel=1e-12)


def test_lambda_eigenvalue():
    assert S.lambda_eigenvalue(3, 2) == 2.5
    assert S.lambda_eigenvalue(2, 0) == 0.0
    for d in (2, 3, 6):
        for l in range(5):
            lam = S.lambda_eigenvalue(d, l)
            assert lam**2 - (d / 2 - 1) ** 2 == pytest.approx(l * (l + d - 2), abs=1e-12)


def test_reproduction_and_idempotence():
    targets = [([1.0, 0, 0], [0, 0, 1.0]), ([0.3, 0.5, 0.8], [0.1, -0.7, 0.2])]
    for l in range(6):
        assert S.reproduction_error(l, targets) <= 1e-6
        assert S.idempotence_error(l, targets) <= 1e-6


def test_abel_smoothing_factors():
    f = S.Smoothing.abel(0.9).factors(3, 4)
    assert_allclose(f, 0.9 ** (np.arange(5) + 0.5))
    assert S.Smoothing.abel_default(400).param == pytest.approx(1 - 1 / 400)
    with pytest.raises(DomainError):
        S.Smoothing.abel(1.5)


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("theta", [math.pi / 3, math.pi / 2, 3 * math.pi / 2])
def test_closed_form_matches_series(d, theta):
    eps = 0.05
    w = np.linspace(-1, 1, 41)
    ser = S.wave_kernel_series(d, theta, 800, w, S.Smoothing.abel(math.exp(-eps)))
    closed = S.wave_kernel_closed(d, theta, w, eps)
    assert_allclose(ser.values, closed, rtol=1e-9)


def test_literal_formula_sign_for_odd_d():
    # the formula read literally is 2 pi periodic; for odd d it is off by a sign at 3 pi / 2
    # the two agree to O(eps) away from the singular point
    w = np.array([0.5])
    eps = 1e-5
    good = S.wave_kernel_closed(3, 3 * math.pi / 2, w, eps)
    lit = S.wave_kernel_closed(3, 3 * math.pi / 2, w, eps, literal=True)
    assert_allclose(lit, -good, rtol=1e-4)
    assert_allclose(S.wave_kernel_closed(3, math.pi / 2, w, eps, literal=True),
                    S.wave_kernel_closed(3, math.pi / 2, w, eps), rtol=1e-4)


def test_closed_form_conjugation():
    w = np.array([-0.6, 0.2, 0.9])
    a = S.wave_kernel_closed(3, 1.1, w, 0.01)
    b = S.wave_kernel_closed(3, -1.1, w, 0.01)
    assert_allclose(b, np.conj(a), rtol=1e-12)


def test_closed_form_peak_moves_to_cos_theta():
    w = S.chebyshev_grid(4001)
    theta = 1.0
    peaks = [w[np.argmax(np.abs(S.wave_kernel_closed(3, theta, w, eps)))] for eps in (0.1, 0.01)]
    assert abs(peaks[1] - math.cos(theta)) < abs(peaks[0] - math.cos(theta)) + 1e-12
    assert abs(peaks[1] - math.cos(theta)) < 0.01


def test_special_angles():
    assert S.wave_kernel_special(3, 0.0) == (1.0, "identity")
    phase, kind = S.wave_kernel_special(3, math.pi)
    assert kind == "parity" and phase == pytest.approx(1j, abs=1e-15)
    phase, kind = S.wave_kernel_special(3, 2 * math.pi)
    assert kind == "identity" and phase == pytest.approx(-1.0, abs=1e-15)
    with pytest.raises(DomainError):
        S.wave_kernel_special(3, 1.0)


def test_theta_2pi_concentrates_at_identity():
    ker = S.wave_kernel_series(4, 2 * math.pi, 200)
    assert S.concentration(ker, 1.0, 0.05) > 0.95
    assert S.singularity_locator(ker)[0] == pytest.approx(1.0, abs=1e-12)


def test_theta_pi_is_parity():
    ker = S.wave_kernel_series(3, math.pi, 200)
    assert S.concentration(ker, -1.0, 0.05) > 0.95
    # phase e^{i pi (d/2 - 1)} = i at the peak
    peak = ker.values[0]
    assert np.angle(peak) == pytest.approx(math.pi / 2, abs=1e-9)


def test_two_pi_shift_is_global_factor():
    d = 3
    a = S.wave_coefficients(d, 0.8, 50)
    b = S.wave_coefficients(d, 0.8 + 2 * math.pi, 50)
    assert_allclose(b, np.exp(2j * math.pi * (d / 2 - 1)) * a, atol=1e-12)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_parseval(d):
    rng = np.random.default_rng(d)
    coef = np.exp(1j * rng.uniform(0, 2 * np.pi, 61))
    ker = S.synthesize(d, coef, smoothing=S.Smoothing.abel(0.95))
    assert S.kernel_l2_norm(ker) == pytest.approx(S.coefficient_l2_norm(ker), rel=1e-6)


def test_coefficient_recovery():
    rng = np.random.default_rng(3)
    coef = np.exp(1j * rng.uniform(0, 2 * np.pi, 41))
    ker = S.synthesize(3, coef)
    # project back with Gauss-Legendre on w
    x, wts = np.polynomial.legendre.leggauss(80)
    vals = S.synthesize(3, coef, w=x).values
    for l in (0, 7, 40):
        rec = 2 * math.pi * np.sum(wts * vals * S.projection_kernel(3, l, x)) / S.projection_kernel(3, l, 1.0)
        assert abs(rec) == pytest.approx(1.0, abs=1e-8)
        assert rec == pytest.approx(coef[l], abs=1e-8)
    assert ker.L_max == 40


def test_s0_identity_for_zero_phases():
    m = PotentialModel(0.5, 1.0)
    ker = S.s0_kernel(m, 3, np.zeros(101))
    assert S.singularity_locator(ker)[0] == pytest.approx(1.0, abs=1e-12)


def test_s0_from_wkb_backscatters():
    from zeroscat.potentials import turning_point
    from zeroscat.radial import wkb_phase_shift

    m = PotentialModel(0.5, 1.0, cutoff_mode="PureHomogeneous")
    sig = [2 - math.pi / 4] + [wkb_phase_shift(turning_point(m, l)).sigma for l in range(1, 151)]
    ker = S.s0_kernel(m, 3, sig)
    assert S.concentration(ker, -1.0, 0.1) > 0.5


def test_s0_needs_enough_phases():
    with pytest.raises(DomainError):
        S.s0_kernel(PotentialModel(0.5, 1.0), 3, np.zeros(5), L_max=10)


def test_locator_examples():
    mu = 1.0
    ker = S.wave_kernel_series(3, -S.cone_angle(mu), 200)
    w_peak, _ = S.singularity_locator(ker)
    assert abs(w_peak + 1.0) <= S.grid_cell(ker.w_samples, -1.0)
    ker12 = S.wave_kernel_series(3, -S.cone_angle(1.2), 200)
    w_peak12, _ = S.singularity_locator(ker12)
    assert abs(w_peak12 - 0.0) <= S.grid_cell(ker12.w_samples, 0.0)


def test_locator_phase_invariance():
    ker = S.wave_kernel_series(3, 1.0, 120)
    assert_allclose(S.singularity_locator(ker.scaled(np.exp(0.7j))), S.singularity_locator(ker),
                    rtol=1e-12)


def test_locator_flat_kernel():
    flat = S.KernelGrid(S.chebyshev_grid(101), np.ones(101, complex), 3, 0, S.Smoothing())
    with pytest.raises(NoPeakError):
        S.singularity_locator(flat)


def test_c0_constant():
    assert S.c0_constant(PotentialModel(0.5, 1.0)) == pytest.approx(4.0, rel=1e-15)


def test_c0_consistent_with_intercept():
    from zeroscat.radial import asymptote_intercept

    for mu, d in ((0.7, 3), (1.3, 4)):
        m = PotentialModel(0.8, mu, dim=d, v2_beta=0.1, v2_eps2=1.0)
        lhs = 2 * asymptote_intercept(m) + S.cone_angle(mu) * (d / 2 - 1)
        assert lhs == pytest.approx(S.c0_constant(m), rel=1e-12)


def test_kernel_csv():
    ker = S.wave_kernel_series(3, 1.0, 10, np.array([-1.0, 0.0, 1.0]))
    buf = io.StringIO()
    S.write_kernel_csv(ker, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0].startswith("# d=3, L_max=10, smoothing=Abel(")
    assert "theta_or_model=theta=1.0" in lines[0]
    assert lines[1] == "w,re,im,abs"
    assert len(lines) == 5
