import io
import json
import math
from pathlib import Path

import pytest

from zeroscat import phases as P
from zeroscat.errors import DomainError, RegimeError
from zeroscat.potentials import PotentialModel

ORACLES = json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())


def model(mu, gamma=1.0, R0=1.0):
    return PotentialModel(gamma, mu, R0=R0)


def test_psi_sr_frozen_oracle():
    ref = ORACLES["psi_sr_mu1.5_lam0.01"]["value"]
    assert P.psi_sr(model(1.5), 0.01) == pytest.approx(ref, rel=1e-10)


def test_psi_sr_two_routes():
    # s-space split quadrature vs r-space split quadrature
    for mu, lam in ((1.2, 1e-3), (1.5, 0.01), (1.9, 10.0)):
        m = model(mu, 0.7, 1.3)
        assert P.psi_sr(m, lam) == pytest.approx(P.psi_sr_direct(m, lam), rel=1e-10)


def test_constants_frozen():
    assert P.c_mu_constant(model(0.75)) == pytest.approx(ORACLES["C_mu_0.75"]["value"], rel=1e-10)
    assert P.c_one_constant(model(1.0)) == pytest.approx(ORACLES["C_1"]["value"], rel=1e-10)
    assert P.sr_constant(model(1.5)) == pytest.approx(ORACLES["sr_constant_1.5"]["value"], rel=1e-10)


def test_c_one_closed_form():
    assert P.c_one_constant(model(1.0)) == pytest.approx(-1 - math.log(2), abs=1e-12)


def test_c_one_R0_dependence():
    a = P.c_one_constant(model(1.0, 0.8, 1.0))
    b = P.c_one_constant(model(1.0, 0.8, 2.5))
    assert b - a == pytest.approx(-0.8 * math.log(2.5), abs=1e-12)


@pytest.mark.parametrize("mu", [1.1, 1.5, 1.9])
def test_dollard_sr_identity(mu):
    m = model(mu, 0.6, 1.4)
    for lam in (1e-4, 0.1, 3.0):
        lhs = P.psi_dol(m, lam) - P.psi_sr(m, lam)
        assert lhs == pytest.approx(P.dollard_tail_term(m, lam), rel=1e-10)


@pytest.mark.parametrize("mu", [0.75, 1.0, 1.5])
def test_small_gamma(mu):
    for g in (1e-2, 1e-4):
        m = model(mu, g)
        assert abs(P.psi_dol(m, 0.5)) < 10 * g * g
    if mu > 1:
        # leading term is -gamma int r**-mu / k
        m = model(mu, 1e-6)
        assert P.psi_sr(m, 0.5) == pytest.approx(-P.dollard_tail_term(m, 0.5), rel=1e-5)


def test_regimes():
    assert P.regime(model(0.75), "dol") is P.Regime.DOLLARD_LOW
    assert P.regime(model(1.0), "dol") is P.Regime.DOLLARD_MID
    assert P.regime(model(1.5), "dol") is P.Regime.DOLLARD_HIGH
    assert P.regime(model(1.5), "sr") is P.Regime.SHORT_RANGE


def test_regime_errors():
    with pytest.raises(RegimeError):
        P.psi_sr(model(0.8), 0.1)
    with pytest.raises(RegimeError):
        P.psi_dol(model(0.4), 0.1)
    with pytest.raises(RegimeError):
        P.c_mu_constant(model(1.2))
    with pytest.raises(RegimeError):
        P.dollard_tail_term(model(1.0), 0.1)
    with pytest.raises(DomainError):
        P.psi_dol(model(1.0), 0.0)


@pytest.mark.parametrize("mu,kind", [(0.75, "dol"), (1.0, "dol"), (1.5, "dol")])
def test_leading_terms_converge(mu, kind):
    m = model(mu)
    errs = [P.modifier(m, lam, kind).rel_err for lam in (1e-4, 1e-6, 1e-8)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-2


def test_sr_leading_term_converges_slowly():
    # relative correction is O(lambda**(1/mu - 1/2)), about 4e-2 at lambda = 1e-8 for mu = 1.5
    m = model(1.5)
    errs = [P.modifier(m, lam, "sr").rel_err for lam in (1e-4, 1e-6, 1e-8)]
    assert errs[0] > errs[1] > errs[2]
    ratio = errs[1] / errs[2]
    assert ratio == pytest.approx(100 ** (1 / 1.5 - 0.5), rel=0.1)


def test_phase_factors():
    m = model(1.5)
    for lam in (1e-3, 1.0):
        f_dol = P.sdol_phase_factor(m, lam)
        f_sr = P.ssr_phase_factor(m, lam)
        assert abs(f_dol) == pytest.approx(1.0, abs=1e-14)
        assert abs(f_sr) == pytest.approx(1.0, abs=1e-14)
        # the two factors differ by exp(-2 i tail)
        ratio = f_dol / f_sr
        assert ratio == pytest.approx(complex(math.cos(2 * P.dollard_tail_term(m, lam)),
                                             -math.sin(2 * P.dollard_tail_term(m, lam))), abs=1e-9)


def test_asymptotic_constants_keys():
    assert set(P.asymptotic_constants(model(0.75))) == {"C_mu"}
    assert set(P.asymptotic_constants(model(1.0))) == {"C_1"}
    assert set(P.asymptotic_constants(model(1.5))) == {"dollard_coefficient", "sr_constant"}


def test_ladder_csv():
    res = P.modifier_ladder(model(1.0), [1e-2, 1e-4], "dol")
    buf = io.StringIO()
    P.write_ladder_csv(res, buf, {"mu": 1.0})
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# mu=1.0"
    assert lines[1] == "lambda,value,asymptotic,rel_err"
    assert len(lines) == 4
    assert float(lines[2].split(",")[1]) == res[0].value
