"""Radial potential family V(r) ~ -gamma r**(-mu) and derived scalar functions.

The leading term ``V1(r) = -gamma * r**(-mu)`` is exact for ``r >= 1``.  In
``CUT_INTERIOR`` mode it is switched off smoothly on ``[R_CUT_LO, 1]`` so that
``V`` vanishes identically near the origin; ``PURE_HOMOGENEOUS`` keeps the
power law down to ``r = 0``.  An optional correction
``V2(r) = -v2_beta * r**(-mu - v2_eps2)`` acts for ``r >= 1`` and is switched
off below ``r = 1/2``.

All functions accept scalars or numpy arrays for ``r``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .errors import AmbiguityError, ConvergenceError, DegenerateInputError, DomainError

#: inner edge of the interior switch in CUT_INTERIOR mode
R_CUT_LO = 0.25
#: inner edge of the switch applied to the V2 correction
R_V2_LO = 0.5


class CutoffMode(str, enum.Enum):
    CUT_INTERIOR = "CutInterior"
    PURE_HOMOGENEOUS = "PureHomogeneous"


def _mollifier(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)
    a = _mollifier(x)
    b = _mollifier(1.0 - x)
    return a / (a + b)


def _switch(r, lo):
    return smooth_step((np.asarray(r, dtype=float) - lo) / (1.0 - lo))


@dataclass(frozen=True)
class PotentialModel:
    """Parameters of the radial potential and the spatial dimension."""

    gamma: float
    mu: float
    R0: float = 1.0
    cutoff_mode: CutoffMode = CutoffMode.CUT_INTERIOR
    v2_beta: float = 0.0
    v2_eps2: float = 1.0
    dim: int = 3

    def __post_init__(self):
        object.__setattr__(self, "cutoff_mode", CutoffMode(self.cutoff_mode))
        if not (0.0 < self.mu < 2.0):
            raise DomainError(f"mu must lie in (0,2), got {self.mu}")
        if not self.gamma > 0.0:
            raise DomainError(f"gamma must be positive, got {self.gamma}")
        if not self.R0 >= 1.0:
            raise DomainError(f"R0 must be >= 1, got {self.R0}")
        if int(self.dim) != self.dim or self.dim < 2:
            raise DomainError(f"dim must be an integer >= 2, got {self.dim}")
        if not self.v2_eps2 > 0.0:
            raise DomainError(f"v2_eps2 must be positive, got {self.v2_eps2}")
        # V < 0 beyond R0; the worst case for a repulsive V2 is r = R0
        if self.gamma + self.v2_beta * self.R0 ** (-self.v2_eps2) <= 0.0:
            raise DomainError("V must be negative for r > R0; reduce |v2_beta|")

    @property
    def homogeneous(self) -> bool:
        """True when V is exactly -gamma r**-mu everywhere."""
        return self.cutoff_mode is CutoffMode.PURE_HOMOGENEOUS and self.v2_beta == 0.0

    def power_terms(self):
        """``[(c, e), ...]`` with ``V(r) = sum c * r**e`` for ``r >= 1``."""
        terms = [(-self.gamma, -self.mu)]
        if self.v2_beta != 0.0:
            terms.append((-self.v2_beta, -self.mu - self.v2_eps2))
        return terms

    def check_singrad_condition(self):
        """Raise unless the V2 decay is fast enough for the zero-energy phase to exist."""
        if self.v2_beta != 0.0 and not self.v2_eps2 > 1.0 - self.mu / 2.0:
            raise DomainError(
                f"v2_eps2={self.v2_eps2} must exceed 1 - mu/2 = {1.0 - self.mu / 2.0}"
            )

    def with_(self, **changes) -> "PotentialModel":
        fields = dict(
            gamma=self.gamma, mu=self.mu, R0=self.R0, cutoff_mode=self.cutoff_mode,
            v2_beta=self.v2_beta, v2_eps2=self.v2_eps2, dim=self.dim,
        )
        fields.update(changes)
        return PotentialModel(**fields)


def _check_r(r):
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)):
        raise DomainError("r must be finite")
    if np.any(r <= 0.0):
        raise DomainError("r must be positive")
    return r


def _out(x, like):
    return float(x) if np.ndim(like) == 0 else x


def eval_v1(model: PotentialModel, r):
    r = _check_r(r)
    v = -model.gamma * r ** (-model.mu)
    if model.cutoff_mode is CutoffMode.CUT_INTERIOR:
        v = v * _switch(r, R_CUT_LO)
    return _out(v, r)


def eval_v2(model: PotentialModel, r):
    r = _check_r(r)
    if model.v2_beta == 0.0:
        return _out(np.zeros_like(r), r)
    v = -model.v2_beta * r ** (-model.mu - model.v2_eps2) * _switch(r, R_V2_LO)
    return _out(v, r)


def eval_potential(model: PotentialModel, r):
    """V(r) = V1(r) + V2(r)."""
    r = _check_r(r)
    return _out(np.asarray(eval_v1(model, r)) + np.asarray(eval_v2(model, r)), r)


def eval_g(model: PotentialModel, r, lam: float = 0.0):
    """Local classical momentum ``sqrt(2 lam - 2 V1(r))``."""
    if lam < 0:
        raise DomainError("lambda must be nonnegative")
    r = _check_r(r)
    arg = 2.0 * lam - 2.0 * np.asarray(eval_v1(model, r))
    if np.any(arg <= 0.0):
        raise DegenerateInputError("2*lambda - 2*V1(r) <= 0: g vanishes inside the cutoff")
    return _out(np.sqrt(arg), r)


def _h_single(model: PotentialModel, r: float, lam: float, epsabs: float) -> float:
    # s = 1/r' maps [r, inf) to (0, 1/r]; s = x**m / r then absorbs the
    # s**(-mu/2) endpoint behaviour at lam = 0 (the integrand becomes constant)
    m = 2.0 / (2.0 - model.mu)

    def integrand(x):
        if x == 0.0:
            return 0.0 if lam > 0 else m / (r * math.sqrt(2.0 * model.gamma) * r ** (-model.mu / 2.0))
        s = x**m / r
        g = math.sqrt(2.0 * lam + 2.0 * model.gamma * s**model.mu)
        return m * x ** (m - 1.0) / (r * g)

    val, err, info = integrate.quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=epsabs, limit=200,
                                    full_output=True)[:3]
    if err > 1e3 * epsabs * abs(val) + 1e-300:
        raise ConvergenceError("h quadrature did not converge", {"value": val, "abserr": err,
                                                                 "neval": info["neval"]})
    return 1.0 / val


def eval_h(model: PotentialModel, r, lam: float = 0.0, epsrel: float = 1e-13):
    """h(r) = (int_r^inf r'^-2 g(r')^-1 dr')^-1, for r >= 1."""
    if lam < 0:
        raise DomainError("lambda must be nonnegative")
    r = _check_r(r)
    if np.any(r < 1.0):
        raise DomainError("eval_h requires r >= 1")
    vals = np.array([_h_single(model, float(x), lam, epsrel) for x in np.ravel(r)])
    return _out(vals.reshape(r.shape), r)


@dataclass(frozen=True)
class Channel:
    """One partial wave of a model: order ``l`` in dimension ``model.dim``."""

    model: PotentialModel
    l: int
    r0: float = 0.0
    has_turning_point: bool = field(default=False)

    def __post_init__(self):
        if int(self.l) != self.l or self.l < 0:
            raise DomainError(f"l must be a nonnegative integer, got {self.l}")

    @property
    def d(self) -> int:
        return self.model.dim

    @property
    def k(self) -> float:
        return self.l + (self.d - 3) / 2.0

    @property
    def centrifugal(self) -> float:
        """k(k+1) = (l + d/2 - 1)**2 - 1/4."""
        nu = self.l + self.d / 2.0 - 1.0
        return nu * nu - 0.25

    @property
    def frobenius_power(self) -> float:
        """Leading power of the regular solution, l + (d-1)/2."""
        return self.l + (self.d - 1) / 2.0


def effective_potential(channel: Channel, r):
    """V_k(r) = 2 V(r) + k(k+1)/r**2."""
    r = _check_r(r)
    return _out(2.0 * np.asarray(eval_potential(channel.model, r)) + channel.centrifugal / r**2, r)


def effective_potential_derivs(channel: Channel, r, order: int = 3):
    """[V_k, V_k', ..., V_k^(order)] at ``r >= 1`` from the exact power laws."""
    if np.any(np.asarray(r) < 1.0):
        raise DomainError("analytic derivatives are only available for r >= 1")
    terms = [(2.0 * c, e) for c, e in channel.model.power_terms()]
    if channel.centrifugal != 0.0:
        terms.append((channel.centrifugal, -2.0))
    out = []
    for n in range(order + 1):
        total = 0.0
        for c, e in terms:
            fall = 1.0
            for j in range(n):
                fall *= e - j
            total += c * fall * r ** (e - n)
        out.append(total)
    return out


def _scan_brackets(f, lo, hi, n=4000):
    grid = np.geomspace(lo, hi, n)
    vals = f(grid)
    sgn = np.sign(vals)
    idx = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]
    return [(grid[i], grid[i + 1]) for i in idx]


def turning_point(model: PotentialModel, l: int, d: int | None = None,
                  r_lo: float = 1e-3, r_hi: float = 1e12) -> Channel:
    """Channel of order ``l`` with the zero r0 of its effective potential.

    ``d`` defaults to ``model.dim``; passing a different value rebuilds the
    model in that dimension.
    """
    if d is not None and d != model.dim:
        model = model.with_(dim=d)
    base = Channel(model, l)
    kk = base.centrifugal
    if kk <= 0.0:
        return base
    closed = (kk / (2.0 * model.gamma)) ** (1.0 / (2.0 - model.mu))
    if model.v2_beta == 0.0 and (model.cutoff_mode is CutoffMode.PURE_HOMOGENEOUS or closed >= 1.0):
        return Channel(model, l, r0=closed, has_turning_point=True)

    # r**2 V_k(r) has the same sign as V_k and is well scaled on a log grid
    def scaled(r):
        return np.asarray(effective_potential(base, r)) * np.asarray(r) ** 2

    brackets = _scan_brackets(scaled, r_lo, r_hi)
    if not brackets:
        return base
    if len(brackets) > 1:
        raise AmbiguityError(f"effective potential changes sign {len(brackets)} times", brackets)
    a, b = brackets[0]
    r0 = optimize.brentq(lambda x: float(scaled(x)), a, b, xtol=1e-300, rtol=1e-14, maxiter=500)
    return Channel(model, l, r0=r0, has_turning_point=True)
