"""Short-range and Dollard phase modifiers for V1 = -gamma r**-mu.

Both modifiers are stored as the real integrals

    psi_sr(lam)  = int_R0^inf (sqrt(2 lam) - sqrt(2 lam + 2 gamma r**-mu)) dr
    psi_dol(lam) = int_R0^inf (sqrt(2 lam) - sqrt(2 lam + 2 gamma r**-mu)
                               + (2 lam)**-1/2 gamma r**-mu) dr

and the scattering matrices are related by ``S_x(lam) = exp(-2 i psi_x) S(lam)``.
With s = r (2 lam)**(1/mu) both become ``(2 lam)**(1/2 - 1/mu) I(R0 (2 lam)**(1/mu))``
where ``I(a) = int_a^inf f(2 gamma s**-mu) ds``, which is how they are evaluated.
"""

from __future__ import annotations

import cmath
import csv
import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import ConvergenceError, DomainError, RegimeError
from .potentials import PotentialModel


class Regime(str, enum.Enum):
    SHORT_RANGE = "ShortRange"
    DOLLARD_LOW = "DollardLow"
    DOLLARD_MID = "DollardMid"
    DOLLARD_HIGH = "DollardHigh"


class ModifierKind(str, enum.Enum):
    SR = "sr"
    DOL = "dol"


@dataclass(frozen=True)
class PhaseModifierResult:
    lam: float
    value: float
    asymptotic_value: float
    regime: Regime

    @property
    def rel_err(self) -> float:
        return abs(self.value - self.asymptotic_value) / abs(self.asymptotic_value)


def _f_sr(x):
    # 1 - sqrt(1 + x) without cancellation
    return -x / (1.0 + math.sqrt(1.0 + x))


def _f_dol(x):
    # 1 - sqrt(1 + x) + x/2 = (x**2/4) / (1 + x/2 + sqrt(1 + x))
    return 0.25 * x * x / (1.0 + 0.5 * x + math.sqrt(1.0 + x))


def _quad(f, a, b, what):
    val, err = integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-13, limit=500)
    if not err <= 1e-9 * max(abs(val), 1e-300) + 1e-14:
        raise ConvergenceError(f"{what} quadrature did not converge", {"value": val, "abserr": err})
    return val


def _tail(f, gamma, mu, s_star, beta):
    """int_{s_star}^inf f(2 gamma s**-mu) ds; the integrand decays like s**-beta."""
    # s = s_star u**(-q) with q = 1/(beta - 1) makes the integrand bounded at u -> 0
    q = 1.0 / (beta - 1.0)

    def g(u):
        if u == 0.0:
            return 0.0 if beta > 1.0 else math.nan
        s = s_star * u ** (-q)
        return f(2.0 * gamma * s ** (-mu)) * s_star * q * u ** (-q - 1.0)

    return _quad(g, 0.0, 1.0, "tail")


def _head_log(f, gamma, mu, a, s_star):
    """int_a^{s_star} f(2 gamma s**-mu) ds with s = s_star exp(-v)."""
    if a >= s_star:
        return 0.0
    vmax = math.log(s_star / a)

    def g(v):
        s = s_star * math.exp(-v)
        return f(2.0 * gamma * s ** (-mu)) * s

    # split the log range so each piece is resolved
    edges = np.linspace(0.0, vmax, int(max(1, math.ceil(vmax / 8.0))) + 1)
    return sum(_quad(g, lo, hi, "head") for lo, hi in zip(edges[:-1], edges[1:]))


def _head_power(f, gamma, mu, s_star, k):
    """int_0^{s_star} f(2 gamma s**-mu) ds with s = s_star y**k."""
    def g(y):
        if y == 0.0:
            return 0.0
        s = s_star * y**k
        return f(2.0 * gamma * s ** (-mu)) * s_star * k * y ** (k - 1.0)

    return _quad(g, 0.0, 1.0, "head")


def _check_lambda(lam):
    if not (lam > 0.0 and math.isfinite(lam)):
        raise DomainError("lambda must be positive and finite")


def _scaled_integral(kind: ModifierKind, gamma: float, mu: float, a: float) -> float:
    """I(a) = int_a^inf f(2 gamma s**-mu) ds."""
    if gamma == 0.0:
        return 0.0
    f, beta = (_f_sr, mu) if kind is ModifierKind.SR else (_f_dol, 2.0 * mu)
    # the two terms of the integrand balance at s_star
    s_star = max(a, (2.0 * gamma) ** (1.0 / mu))
    return _head_log(f, gamma, mu, a, s_star) + _tail(f, gamma, mu, s_star, beta)


def _psi(kind: ModifierKind, gamma: float, mu: float, R0: float, lam: float) -> float:
    _check_lambda(lam)
    two_lam = 2.0 * lam
    a = R0 * two_lam ** (1.0 / mu)
    return two_lam ** (0.5 - 1.0 / mu) * _scaled_integral(kind, gamma, mu, a)


def psi_sr(model: PotentialModel, lam: float) -> float:
    """Short-range modifier (real integral); needs mu > 1."""
    if not model.mu > 1.0:
        raise RegimeError(f"psi_sr needs mu > 1, got {model.mu}")
    return _psi(ModifierKind.SR, model.gamma, model.mu, model.R0, lam)


def psi_dol(model: PotentialModel, lam: float) -> float:
    """Dollard modifier (real integral); needs 1/2 < mu < 2."""
    if not 0.5 < model.mu < 2.0:
        raise RegimeError(f"psi_dol needs 1/2 < mu < 2, got {model.mu}")
    return _psi(ModifierKind.DOL, model.gamma, model.mu, model.R0, lam)


def psi_sr_direct(model: PotentialModel, lam: float) -> float:
    """psi_sr by quadrature in r, split at r* = (gamma/lam)**(1/mu)."""
    if not model.mu > 1.0:
        raise RegimeError(f"psi_sr needs mu > 1, got {model.mu}")
    _check_lambda(lam)
    g, mu, R0 = model.gamma, model.mu, model.R0
    k = math.sqrt(2.0 * lam)

    def f(r):
        x = 2.0 * g * r ** (-mu)
        return -x / (k + math.sqrt(k * k + x))

    r_star = max(R0, (g / lam) ** (1.0 / mu))
    head = 0.0
    if r_star > R0:
        head = _quad(lambda v: f(R0 * math.exp(v)) * R0 * math.exp(v), 0.0, math.log(r_star / R0),
                     "head")
    q = 1.0 / (mu - 1.0)
    tail = _quad(lambda u: 0.0 if u == 0.0 else f(r_star * u ** (-q)) * r_star * q * u ** (-q - 1.0),
                 0.0, 1.0, "tail")
    return head + tail


def regime(model: PotentialModel, kind: ModifierKind) -> Regime:
    kind = ModifierKind(kind)
    mu = model.mu
    if kind is ModifierKind.SR:
        if not mu > 1.0:
            raise RegimeError("short-range modifier needs mu > 1")
        return Regime.SHORT_RANGE
    if not 0.5 < mu < 2.0:
        raise RegimeError("Dollard modifier needs 1/2 < mu < 2")
    if mu < 1.0:
        return Regime.DOLLARD_LOW
    if mu == 1.0:
        return Regime.DOLLARD_MID
    return Regime.DOLLARD_HIGH


def sr_constant(model: PotentialModel) -> float:
    """int_0^inf (1 - sqrt(1 + 2 gamma s**-mu)) ds for 1 < mu < 2."""
    if not 1.0 < model.mu < 2.0:
        raise RegimeError("sr constant needs 1 < mu < 2")
    g, mu = model.gamma, model.mu
    s_star = (2.0 * g) ** (1.0 / mu)
    # integrand ~ -sqrt(2 gamma) s**(-mu/2) at 0
    k = 1.0 / (1.0 - mu / 2.0)
    return _head_power(_f_sr, g, mu, s_star, k) + _tail(_f_sr, g, mu, s_star, mu)


def c_mu_constant(model: PotentialModel) -> float:
    """C_mu = int_0^inf (1 - sqrt(1 + 2 gamma s**-mu) + gamma s**-mu) ds, 1/2 < mu < 1."""
    if not 0.5 < model.mu < 1.0:
        raise RegimeError("C_mu needs 1/2 < mu < 1")
    g, mu = model.gamma, model.mu
    s_star = (2.0 * g) ** (1.0 / mu)
    # integrand ~ gamma s**-mu at 0
    k = 1.0 / (1.0 - mu)
    return _head_power(_f_dol, g, mu, s_star, k) + _tail(_f_dol, g, mu, s_star, 2.0 * mu)


def c_one_constant(model: PotentialModel) -> float:
    """C_1 = int_1^inf (1 - sqrt(1+2g/s) + g/s) ds + int_0^1 (1 - sqrt(1+2g/s)) ds - g ln R0."""
    if model.mu != 1.0:
        raise RegimeError("C_1 needs mu = 1")
    g = model.gamma
    s_star = max(1.0, 2.0 * g)
    upper = _head_log(_f_dol, g, 1.0, 1.0, s_star) + _tail(_f_dol, g, 1.0, s_star, 2.0)
    # integrand ~ -sqrt(2 gamma / s) at 0
    lower = _head_power(_f_sr, g, 1.0, 1.0, 2.0)
    return upper + lower - g * math.log(model.R0)


def asymptotic_constants(model: PotentialModel) -> dict:
    """The constants entering the leading small-lambda terms for this mu."""
    mu = model.mu
    out = {}
    if 0.5 < mu < 1.0:
        out["C_mu"] = c_mu_constant(model)
    elif mu == 1.0:
        out["C_1"] = c_one_constant(model)
    elif 1.0 < mu < 2.0:
        out["dollard_coefficient"] = model.R0 ** (1.0 - mu) * model.gamma / (mu - 1.0)
        out["sr_constant"] = sr_constant(model)
    else:
        raise RegimeError("no asymptotic constants for mu <= 1/2")
    return out


def psi_sr_leading(model: PotentialModel, lam: float) -> float:
    """(2 lam)**(1/2 - 1/mu) int_0^inf (1 - sqrt(1 + 2 gamma s**-mu)) ds."""
    _check_lambda(lam)
    return (2.0 * lam) ** (0.5 - 1.0 / model.mu) * sr_constant(model)


def psi_dol_leading(model: PotentialModel, lam: float) -> float:
    """Displayed leading small-lambda terms of psi_dol for each mu regime."""
    _check_lambda(lam)
    mu, g = model.mu, model.gamma
    two_lam = 2.0 * lam
    reg = regime(model, ModifierKind.DOL)
    if reg is Regime.DOLLARD_LOW:
        return two_lam ** (0.5 - 1.0 / mu) * c_mu_constant(model)
    if reg is Regime.DOLLARD_MID:
        return two_lam**-0.5 * (-g * math.log(two_lam) + c_one_constant(model))
    return two_lam**-0.5 * model.R0 ** (1.0 - mu) * g / (mu - 1.0)


def modifier(model: PotentialModel, lam: float, kind: ModifierKind) -> PhaseModifierResult:
    kind = ModifierKind(kind)
    reg = regime(model, kind)
    if kind is ModifierKind.SR:
        return PhaseModifierResult(lam, psi_sr(model, lam), psi_sr_leading(model, lam), reg)
    return PhaseModifierResult(lam, psi_dol(model, lam), psi_dol_leading(model, lam), reg)


def modifier_ladder(model: PotentialModel, lams, kind: ModifierKind):
    return [modifier(model, float(lam), kind) for lam in lams]


def sdol_phase_factor(model: PotentialModel, lam: float) -> complex:
    """exp(-2 i psi_dol(lam)), the factor with S_dol(lam) = factor * S(lam)."""
    return cmath.exp(-2j * psi_dol(model, lam))


def ssr_phase_factor(model: PotentialModel, lam: float) -> complex:
    """exp(-2 i psi_sr(lam)), the factor with S_sr(lam) = factor * S(lam)."""
    return cmath.exp(-2j * psi_sr(model, lam))


def dollard_tail_term(model: PotentialModel, lam: float) -> float:
    """(2 lam)**-1/2 int_R0^inf gamma r**-mu dr for mu > 1."""
    if not model.mu > 1.0:
        raise RegimeError("tail term is finite only for mu > 1")
    _check_lambda(lam)
    return (2.0 * lam) ** -0.5 * model.gamma * model.R0 ** (1.0 - model.mu) / (model.mu - 1.0)


def write_ladder_csv(results, fh, metadata: dict | None = None):
    """Columns lambda, value, asymptotic, rel_err."""
    for key, val in (metadata or {}).items():
        fh.write(f"# {key}={val}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["lambda", "value", "asymptotic", "rel_err"])
    for r in results:
        w.writerow([repr(r.lam), repr(r.value), repr(r.asymptotic_value), repr(r.rel_err)])
