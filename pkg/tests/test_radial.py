import io
import json
import math
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose

from zeroscat import radial as R
from zeroscat.errors import DomainError, NotApplicableError
from zeroscat.potentials import R_CUT_LO, PotentialModel, effective_potential, turning_point

ORACLES = json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())


def cut(gamma=0.5, mu=1.0, **kw):
    return PotentialModel(gamma, mu, **kw)


def pure(gamma=0.5, mu=1.0, **kw):
    return PotentialModel(gamma, mu, cutoff_mode="PureHomogeneous", **kw)


def test_free_region_launch():
    ch = turning_point(cut(), 3)
    sol = R.regular_solution(ch, 40.0, r_start=0.05)
    r = np.array([0.05, 0.1, R_CUT_LO])
    u, _ = sol(r)
    p = ch.frobenius_power
    # u is stored up to the positive factor exp(log_scale)
    assert_allclose(u / u[-1], (r / r[-1]) ** p, rtol=1e-10)


def test_launch_independence():
    ch = turning_point(cut(), 5)
    a = R.regular_solution(ch, 60.0, r_start=0.01, stops=[30.0, 60.0 / 1.001])
    b = R.regular_solution(ch, 60.0, r_start=0.1, stops=[30.0, 60.0 / 1.001])
    ua, _ = a.allowed(30.0)
    ub, _ = b.allowed(30.0)
    assert ua * math.exp(a.log_scale) == pytest.approx(ub * math.exp(b.log_scale), rel=1e-9)


def test_pure_homogeneous_with_v2_rejected():
    with pytest.raises(NotApplicableError):
        R.regular_solution(turning_point(pure(v2_beta=0.1, v2_eps2=1.0), 2), 50.0)


def test_phase_inversion_identity():
    ch = turning_point(pure(), 10)
    r = np.linspace(4 * ch.r0, 8 * ch.r0, 7)
    q = np.sqrt(-np.asarray(effective_potential(ch, r)))
    h = 1e-6 * r
    qp = (np.sqrt(-np.asarray(effective_potential(ch, r + h)))
          - np.sqrt(-np.asarray(effective_potential(ch, r - h)))) / (2 * h)
    S = 0.3 + 2.0 * r
    # u = q**-1/2 sin S with S' = q is the exact inverse of the extraction formula
    for shift in (0.0, math.pi / 2):
        u = q**-0.5 * np.sin(S + shift)
        up = -0.5 * q**-1.5 * qp * np.sin(S + shift) + q**0.5 * np.cos(S + shift)
        amp, phi = R.extract_local_phase(ch, u, up, r)
        assert_allclose(amp, 1.0, rtol=1e-8)
        assert_allclose(np.angle(np.exp(1j * (phi - S - shift))), 0.0, atol=1e-8)


def test_extract_phase_forbidden_region():
    ch = turning_point(pure(), 10)
    with pytest.raises(DomainError):
        R.extract_local_phase(ch, 1.0, 0.0, 0.5 * ch.r0)


def test_frozen_sigma_oracle():
    ref = ORACLES["sigma_l30_mu1"]
    res = R.phase_shift(turning_point(cut(), 30))
    assert res.sigma == pytest.approx(ref["value"], abs=1e-6)
    assert res.uncertainty < 1e-6


@pytest.mark.parametrize("l", [0, 1, 5, 20])
def test_coulomb_exact(l):
    # zero-energy Coulomb, gamma = 1/2: sigma_l = 2 - l pi/2 - pi/4
    res = R.phase_shift(turning_point(pure(), l))
    assert res.sigma == pytest.approx(2 - l * math.pi / 2 - math.pi / 4, abs=1e-7)


def test_s_wave_has_no_turning_point():
    ch = turning_point(cut(), 0)
    assert not ch.has_turning_point
    res = R.phase_shift(ch)
    assert math.isfinite(res.sigma) and res.uncertainty < 1e-6


def test_sigma_assembly():
    m = cut(v2_beta=0.1, v2_eps2=1.0)
    res = R.phase_shift(turning_point(m, 4))
    assert res.sigma == pytest.approx(res.D + R.correction_integral(m) + (0 + 8) * math.pi / 4,
                                      rel=1e-14)


def test_correction_integral():
    assert R.correction_integral(cut()) == 0.0
    assert R.correction_integral(cut(v2_beta=0.1, v2_eps2=1.0)) < 0.0


def test_tolerance_stability():
    ch = turning_point(cut(0.5, 1.4), 7)
    a = R.phase_shift(ch, 1e-10)
    b = R.phase_shift(ch, 1e-12)
    assert abs(a.sigma - b.sigma) <= 10 * max(a.uncertainty, b.uncertainty, 1e-10)


def test_wkb_closed_form_example():
    res = R.wkb_phase_shift(turning_point(pure(), 1))
    assert res.sigma == pytest.approx(-math.pi * math.sqrt(2) + 3 * math.pi / 4 + 2, abs=1e-12)


def test_wkb_needs_positive_k():
    with pytest.raises(NotApplicableError):
        R.wkb_phase_shift(turning_point(cut(), 0))


@pytest.mark.parametrize("mu", [0.5, 1.0, 1.5])
def test_end_polar_identity(mu):
    assert R.end_polar_quadrature(mu) == pytest.approx((2 - math.pi) / (2 - mu), abs=1e-10)


def test_wkb_general_route_matches_closed_form():
    # V2 = 0 but r0 < 1 in CutInterior forces the quadrature route
    m = cut(0.5, 1.0)
    ch = turning_point(m, 40)
    closed = R.wkb_phase_shift(ch).sigma
    shifted = R.wkb_phase_shift(turning_point(cut(0.5, 1.0, v2_beta=1e-12, v2_eps2=1.0), 40)).sigma
    assert shifted == pytest.approx(closed, abs=1e-8)


def test_asymptote_constants():
    m = cut()
    assert R.asymptote_slope(1.0) == pytest.approx(-math.pi / 2, rel=1e-15)
    assert R.asymptote_intercept(m) == pytest.approx(-math.pi / 4 + 2, rel=1e-14)


def test_asymptote_residual_small():
    # a pure power law sits on the asymptote to solver accuracy
    assert np.all(np.abs(R.asymptote_residual(cut(0.5, 0.8), 3, [20, 40])) < 1e-7)
    res = np.abs(R.asymptote_residual(cut(0.5, 0.8, v2_beta=0.3, v2_eps2=1.0), 3, range(20, 81, 20)))
    assert np.all(np.diff(res) < 0)


def test_main1_offset_shrinks():
    m = pure()
    out = {}
    for k in (10, 40):
        ch = turning_point(m, k)
        out[k] = R.prop_main1_residual(ch, (3 * ch.r0, 6 * ch.r0))
    assert abs(out[40][0]) < abs(out[10][0])
    assert out[40][1] < 1e-3


def test_table_order_and_workers():
    m = cut()
    a = R.phase_shift_table(m, [3, 1, 2])
    b = R.phase_shift_table(m, [3, 1, 2], workers=2)
    assert [r.l for r in a] == [3, 1, 2]
    assert [r.sigma for r in a] == [r.sigma for r in b]


def test_phase_table_csv():
    buf = io.StringIO()
    R.write_phase_table_csv(R.phase_shift_table(cut(), [1, 2]), buf, {"mu": 1.0})
    lines = buf.getvalue().splitlines()
    assert lines[1] == "l,k,sigma,D,method,uncertainty"
    assert lines[2].startswith("1,1.0,") and "OdeOracle" in lines[2]
