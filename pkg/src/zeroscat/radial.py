"""Zero-energy partial-wave phase shifts.

The regular solution of ``-u'' + V_k u = 0`` is integrated directly (the
oracle route).  In the classically forbidden region the log-derivative
``y = r u'/u`` is integrated in ``x = ln r`` together with ``ln u``, so the
huge growth of ``u`` near large ``k`` never overflows; past the turning point
``(u, u')`` is integrated with an embedded Runge-Kutta pair.

The WKB phase is read off by inverting ``u = A p**-1/2 sin(Phi)``.  Far out
the second-order WKB momentum ``p`` is used, which makes the tail of the
phase integral converge fast; the remaining
``int_r^inf (p - sqrt(-2 V1)) dr`` is done by quadrature.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, interpolate

from . import _ode
from .errors import ConvergenceError, DomainError, NotApplicableError
from .potentials import (
    R_CUT_LO,
    Channel,
    CutoffMode,
    PotentialModel,
    effective_potential,
    effective_potential_derivs,
    eval_potential,
    eval_v1,
    turning_point,
)

logger = logging.getLogger(__name__)


class PhaseMethod(str, enum.Enum):
    ODE_ORACLE = "OdeOracle"
    WKB_CLOSED_FORM = "WkbClosedForm"


@dataclass(frozen=True)
class PhaseShiftResult:
    l: int
    k: float
    sigma: float
    D: float
    r_match: float
    residual_decay: float
    method: PhaseMethod
    uncertainty: float = 0.0
    ladder: tuple = ()


@dataclass
class RegularSolution:
    """Regular solution, normalised so that ``u(r_switch) = 1``.

    The true regular solution (``u ~ r**(l+(d-1)/2)`` at the origin) equals
    ``u * exp(log_scale)``.  ``forbidden`` holds ``(r, ln u, r u'/u)`` samples
    of the Riccati stage; ``steps``, ``u`` and ``uprime`` are the accepted
    steps of the ``(u, u')`` stage on ``[r_switch, r_max]``.
    """

    channel: Channel
    r_start: float
    r_switch: float
    r_max: float
    log_scale: float
    forbidden: np.ndarray
    steps: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    uprime: np.ndarray = field(repr=False)

    def __post_init__(self):
        upp = np.asarray(effective_potential(self.channel, self.steps)) * self.u
        # quintic Hermite from (u, u', u'' = V_k u) at every step
        self._interp = interpolate.BPoly.from_derivatives(
            self.steps, np.column_stack([self.u, self.uprime, upp]))

    def allowed(self, r):
        """(u, u') on ``[r_switch, r_max]``; exact at the recorded steps."""
        r = np.asarray(r, dtype=float)
        u = self._interp(r)
        up = self._interp(r, 1)
        idx = np.searchsorted(self.steps, r)
        idx = np.clip(idx, 0, self.steps.size - 1)
        hit = self.steps[idx] == r
        u = np.where(hit, self.u[idx], u)
        up = np.where(hit, self.uprime[idx], up)
        return np.array([u, up])

    def __call__(self, r):
        """(u, u') at radii ``r``; inside the Riccati stage u is rescaled too."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        u = np.empty_like(r)
        up = np.empty_like(r)
        inner = r < self.r_switch
        if np.any(inner):
            rf, lnu, y = self.forbidden
            ln_here = np.interp(np.log(r[inner]), np.log(rf), lnu) - self.log_scale
            y_here = np.interp(np.log(r[inner]), np.log(rf), y)
            u[inner] = np.exp(ln_here)
            up[inner] = u[inner] * y_here / r[inner]
        if np.any(~inner):
            vals = self.allowed(r[~inner])
            u[~inner] = vals[0]
            up[~inner] = vals[1]
        return u, up


def _series_start(channel: Channel, r: float):
    """ln u and r u'/u of the regular solution at small r (pure power law V)."""
    s = channel.frobenius_power
    beta = 2.0 - channel.model.mu
    x = 2.0 * channel.model.gamma * r**beta
    a, total, dtotal = 1.0, 1.0, s
    for n in range(1, 200):
        a *= -x / (n * beta * (2.0 * s - 1.0 + n * beta))
        total += a
        dtotal += a * (s + n * beta)
        if abs(a) < 1e-17 * abs(total):
            break
    return s * math.log(r) + math.log(total), dtotal / total


def _launch(channel: Channel, r_start: float | None):
    model = channel.model
    s = channel.frobenius_power
    if model.cutoff_mode is CutoffMode.CUT_INTERIOR:
        # V vanishes for r <= R_CUT_LO: the free solution r**s is exact there
        r = R_CUT_LO if r_start is None else r_start
        if r > R_CUT_LO:
            raise DomainError("r_start must lie inside the interior cutoff")
        return r, s * math.log(r), s
    if model.v2_beta != 0.0:
        raise NotApplicableError("PureHomogeneous mode with a V2 term has no series start")
    r = r_start
    if r is None:
        r = 0.05
        if channel.has_turning_point:
            r = min(r, 0.1 * channel.r0)
    return (r, *_series_start(channel, r))


_STATUS = {1: "step size underflow", 2: "non-finite state"}


def regular_solution(channel: Channel, r_max: float, tol: float = 1e-11,
                     r_start: float | None = None, stops=()) -> RegularSolution:
    """Integrate the regular solution from the origin out to ``r_max``.

    Every radius in ``stops`` beyond the switch point becomes an exact step.
    """
    if not math.isfinite(float(effective_potential(channel, r_max))):
        raise DomainError("effective potential is not finite")
    params = _ode.potential_params(channel)
    r0, lnu0, y0 = _launch(channel, r_start)

    r_sw = r0
    if channel.has_turning_point and channel.r0 > r0:
        r_sw = channel.r0
    forbidden = np.array([[r0], [lnu0], [y0]])
    lnu_sw, y_sw = lnu0, y0
    if r_sw > r0:
        # state order (y, ln u)
        x, ys, lnus, status = _ode.run(_ode.MODE_RICCATI, math.log(r0), math.log(r_sw),
                                       (y0, lnu0), params, tol, tol)
        if status:
            raise ConvergenceError("Riccati stage failed", {"message": _STATUS[status]})
        forbidden = np.vstack([np.exp(x), lnus, ys])
        y_sw, lnu_sw = ys[-1], lnus[-1]

    stops = [s for s in stops if r_sw < s < r_max]
    t, u, up, status = _ode.run(_ode.MODE_LINEAR, r_sw, r_max, (1.0, y_sw / r_sw), params,
                                tol, tol * 1e-3, stops)
    if status or not (np.all(np.isfinite(u)) and np.all(np.isfinite(up))):
        raise ConvergenceError("allowed-region stage failed",
                               {"message": _STATUS.get(status, "overflow"), "r_switch": r_sw})
    return RegularSolution(channel, r0, r_sw, r_max, lnu_sw, forbidden, t, u, up)


def _local_momentum(channel: Channel, r, corrected: bool):
    """(p, p'/p) at r: plain WKB momentum or its second-order correction."""
    r = np.asarray(r, dtype=float)
    if corrected:
        vk, d1, d2, d3 = effective_potential_derivs(channel, r, 3)
        F, F1, F2, F3 = -vk, -d1, -d2, -d3
        if np.any(F <= 0):
            raise DomainError("phase extraction requires the allowed region")
        # p**2 = F + 5/16 (F'/F)**2 - F''/(4F)
        G = F + 5.0 / 16.0 * (F1 / F) ** 2 - F2 / (4.0 * F)
        G1 = F1 + 5.0 / 8.0 * (F1 / F) * (F2 / F - (F1 / F) ** 2) - F3 / (4.0 * F) + F2 * F1 / (4.0 * F * F)
        return np.sqrt(G), G1 / (2.0 * G)
    vkr = np.asarray(effective_potential(channel, r))
    if np.any(vkr >= 0):
        raise DomainError("phase extraction requires the allowed region (V_k < 0)")
    h = 1e-6 * r
    dv = (np.asarray(effective_potential(channel, r + h))
          - np.asarray(effective_potential(channel, r - h))) / (2 * h)
    return np.sqrt(-vkr), dv / (2.0 * vkr)


def extract_local_phase(channel: Channel, u, uprime, r, corrected: bool = False):
    """Invert ``u = A p**(-1/2) sin(Phi)``; returns ``(A, Phi)`` with Phi in (-pi, pi].

    With ``corrected=False`` p is ``q = sqrt(-V_k)``.  ``corrected=True`` uses
    the second-order WKB momentum (r >= 1 only).  Accepts arrays.
    """
    p, dlogp = _local_momentum(channel, r, corrected)
    x = p * np.asarray(u)
    y = np.asarray(uprime) + 0.5 * dlogp * np.asarray(u)
    amp, phi = np.hypot(x, y) / np.sqrt(p), np.arctan2(x, y)
    if np.ndim(amp) == 0:
        return float(amp), float(phi)
    return amp, phi


def _phase_grid(sol: RegularSolution, r_from: float, extra):
    steps = sol.steps[(sol.steps > r_from)]
    edges = np.concatenate([[r_from], steps])
    sub = edges[:-1, None] + (edges[1:] - edges[:-1])[:, None] * np.linspace(0, 1, 5)[None, 1:]
    grid = np.unique(np.concatenate([[r_from], sub.ravel(), np.asarray(extra, dtype=float)]))
    return grid[(grid >= r_from) & (grid <= sol.r_max)]


def unwound_phase(sol: RegularSolution, radii, r_join: float):
    """Continuous WKB phase of ``sol`` at the requested ``radii`` (all >= r_join).

    The plain WKB phase is unwound from the first allowed sample; from
    ``r_join`` on the corrected phase takes over, on the branch closest to the
    plain one.
    """
    ch = sol.channel
    if ch.has_turning_point:
        r_first = ch.r0 * (1.0 + 1e-6)
    else:
        r_first = max(ch.model.R0, sol.r_switch)
    r_first = max(r_first, sol.r_switch)
    grid = _phase_grid(sol, r_first, [r_join])
    plain_grid = grid[grid <= r_join]
    u, up = sol.allowed(plain_grid)
    phi = np.unwrap(extract_local_phase(ch, u, up, plain_grid)[1])

    corr_grid = np.unique(np.concatenate([grid[grid >= r_join], np.asarray(radii, dtype=float)]))
    u, up = sol.allowed(corr_grid)
    phc = np.unwrap(extract_local_phase(ch, u, up, corr_grid, corrected=True)[1])
    phc += 2.0 * math.pi * round((phi[-1] - phc[0]) / (2.0 * math.pi))
    return np.interp(radii, corr_grid, phc)


def _s_integral(model: PotentialModel, a: float, b: float) -> float:
    """int_a^b sqrt(-2 V1) dr for 1 <= a <= b."""
    p = 1.0 - model.mu / 2.0
    return math.sqrt(2.0 * model.gamma) / p * (b**p - a**p)


def _tail_integral(channel: Channel, r: float) -> float:
    """int_r^inf (p - sqrt(-2 V1)) dr with the corrected momentum p."""
    model = channel.model
    kk = channel.centrifugal

    def f(x):
        vk, d1, d2 = effective_potential_derivs(channel, x, 2)
        F, F1, F2 = -vk, -d1, -d2
        s2 = 2.0 * model.gamma * x ** (-model.mu)
        diff = -kk / (x * x) + 5.0 / 16.0 * (F1 / F) ** 2 - F2 / (4.0 * F)
        if model.v2_beta != 0.0:
            diff += 2.0 * model.v2_beta * x ** (-model.mu - model.v2_eps2)
        p = math.sqrt(F + 5.0 / 16.0 * (F1 / F) ** 2 - F2 / (4.0 * F))
        return diff / (p + math.sqrt(s2))

    # x = r / t**2 maps (0, 1] onto [r, inf); the integrand decays like a power
    def g(t):
        if t == 0.0:
            return 0.0
        x = r / (t * t)
        return f(x) * 2.0 * r / t**3

    val, err = integrate.quad(g, 0.0, 1.0, epsabs=1e-15, epsrel=1e-12, limit=400)
    return val


def correction_integral(model: PotentialModel) -> float:
    """int_R0^inf (sqrt(-2 V1) - sqrt(-2 V)) dr; zero when v2_beta = 0."""
    if model.v2_beta == 0.0:
        return 0.0
    model.check_singrad_condition()
    g, mu, b, e = model.gamma, model.mu, model.v2_beta, model.v2_eps2

    def f(x):
        s1 = math.sqrt(2.0 * g * x ** (-mu))
        s = math.sqrt(2.0 * g * x ** (-mu) + 2.0 * b * x ** (-mu - e))
        return -2.0 * b * x ** (-mu - e) / (s1 + s)

    R0 = model.R0

    def h(t):
        if t == 0.0:
            return 0.0
        x = R0 / (t * t)
        return f(x) * 2.0 * R0 / t**3

    val, _ = integrate.quad(h, 0.0, 1.0, epsabs=1e-15, epsrel=1e-13, limit=400)
    return val


def _richardson(values, radii):
    """Extrapolate D(r) -> D(inf) assuming a power-law tail; returns (D, err, exponent)."""
    v = np.asarray(values, dtype=float)
    if len(v) < 3:
        return v[-1], abs(v[-1] - v[-2]) if len(v) > 1 else np.inf, float("nan")
    d1, d2 = v[-2] - v[-3], v[-1] - v[-2]
    ratio = math.log(radii[-1] / radii[-2])
    if d1 != 0.0 and d2 != 0.0 and d1 * d2 > 0 and abs(d2) < abs(d1):
        alpha = math.log(abs(d1 / d2)) / ratio
        factor = math.exp(alpha * ratio) - 1.0
        est = v[-1] + d2 / factor
        return est, max(abs(d2 / factor), 1e-15), alpha
    return v[-1], max(abs(d2), 1e-15), float("nan")


def wkb_reference_radius(model: PotentialModel, target: float = 30.0) -> float:
    """Radius beyond which q r >~ target for the bare power law."""
    return (target / math.sqrt(2.0 * model.gamma)) ** (1.0 / (1.0 - model.mu / 2.0))


def phase_shift(channel: Channel, tol: float = 1e-11, rungs: int = 5,
                target: float = 30.0) -> PhaseShiftResult:
    """sigma_l(0) from the regular solution, with a Richardson ladder in r_match."""
    model = channel.model
    model.check_singrad_condition()
    r_ref = max(model.R0, 1.0, wkb_reference_radius(model, target))
    if channel.has_turning_point:
        r_ref = max(r_ref, 4.0 * channel.r0)
    radii = r_ref * 2.0 ** np.arange(rungs)
    r_join = max(2.0 * channel.r0, model.R0, 1.0) if channel.has_turning_point else max(2.0 * model.R0, 2.0)
    r_join = min(r_join, radii[0])
    sol = regular_solution(channel, radii[-1] * 1.001, tol, stops=[r_join, *radii])
    phis = unwound_phase(sol, radii, r_join)
    ladder = []
    for rm, ph in zip(radii, phis):
        ladder.append(ph - _s_integral(model, model.R0, rm) + _tail_integral(channel, rm))
    D, err, alpha = _richardson(ladder, radii)
    corr = correction_integral(model)
    sigma = D + corr + (model.dim - 3 + 2 * channel.l) * math.pi / 4.0
    logger.debug("l=%d D ladder %s -> %.15g (+-%.2g)", channel.l, ladder, D, err)
    if not err < 1e-4:
        raise ConvergenceError("D ladder did not converge", {"ladder": ladder, "radii": list(radii)})
    return PhaseShiftResult(channel.l, channel.k, sigma, D, float(radii[-1]), alpha,
                            PhaseMethod.ODE_ORACLE, err, tuple(ladder))


def end_polar_constant(mu: float) -> float:
    """int_1^inf (sqrt(r**-mu - r**-2) - sqrt(r**-mu)) dr in closed form."""
    return (2.0 - math.pi) / (2.0 - mu)


def end_polar_quadrature(mu: float, epsrel: float = 1e-12) -> float:
    """The same integral by quadrature (independent route)."""
    # r = t**(-m) with m = 2/(2-mu): r**(-mu/2) dr becomes a power of t that is
    # integrable at both ends; the square-root edge at r = 1 is handled by QAGS
    m = 2.0 / (2.0 - mu)

    def f(t):
        if t == 0.0:
            return 0.0
        r = t ** (-m)
        a = r ** (-mu)
        diff = -(r**-2) / (math.sqrt(a - r**-2) + math.sqrt(a))
        return diff * m * t ** (-m - 1.0)

    val, _ = integrate.quad(f, 0.0, 1.0, epsabs=1e-14, epsrel=epsrel, limit=400)
    return val


def wkb_phase_shift(channel: Channel) -> PhaseShiftResult:
    """Semiclassical sigma_k(0) built from the turning-point phase integral."""
    model = channel.model
    k = channel.k
    if not k > 0:
        raise NotApplicableError("WKB phase shift needs k > 0")
    mu, gamma, R0 = model.mu, model.gamma, model.R0
    kk = channel.centrifugal
    corr = correction_integral(model)
    if model.v2_beta == 0.0 and (model.homogeneous or channel.r0 >= 1.0):
        sigma = (-math.sqrt(kk) * math.pi / (2.0 - mu) + (k + 0.5) * math.pi / 2.0
                 + 2.0 * math.sqrt(2.0 * gamma) / (2.0 - mu) * R0 ** (1.0 - mu / 2.0) + corr)
        D = sigma - corr - (model.dim - 3 + 2 * channel.l) * math.pi / 4.0
        return PhaseShiftResult(channel.l, k, sigma, D, math.inf, float("nan"),
                                PhaseMethod.WKB_CLOSED_FORM)
    # general case: three quadratures
    r0 = channel.r0
    s1 = lambda r: math.sqrt(-2.0 * float(eval_v1(model, r)))  # noqa: E731

    def head(r):
        vk = float(effective_potential(channel, r))
        q = math.sqrt(max(-vk, 0.0))
        return q - s1(r)

    a, _ = integrate.quad(head, r0, 2.0 * r0 + 1.0, limit=400, epsrel=1e-12)
    b, _ = integrate.quad(head, 2.0 * r0 + 1.0, np.inf, limit=400, epsrel=1e-12)
    if r0 >= R0:
        c, _ = integrate.quad(s1, R0, r0, limit=400, epsrel=1e-12)
    else:
        c = -integrate.quad(s1, r0, R0, limit=400, epsrel=1e-12)[0]
    sigma = a + b + corr - c + (k + 0.5) * math.pi / 2.0
    D = sigma - corr - (model.dim - 3 + 2 * channel.l) * math.pi / 4.0
    return PhaseShiftResult(channel.l, k, sigma, D, math.inf, float("nan"),
                            PhaseMethod.WKB_CLOSED_FORM)


def asymptote_intercept(model: PotentialModel) -> float:
    """c/2 of the linear large-l law for sigma_l(0)."""
    mu, gamma, d = model.mu, model.gamma, model.dim
    return (-math.pi * mu * (d - 2) / (4.0 * (2.0 - mu))
            + 2.0 * math.sqrt(2.0 * gamma) / (2.0 - mu) * model.R0 ** (1.0 - mu / 2.0)
            + correction_integral(model))


def asymptote_slope(mu: float) -> float:
    return -mu * math.pi / (2.0 * (2.0 - mu))


def phase_shift_table(model: PotentialModel, ls, tol: float = 1e-11, workers: int = 1):
    """``[PhaseShiftResult]`` for every l in ``ls``, in order.

    Channels are independent; with ``workers > 1`` they run in a process pool
    and are merged by index, so results do not depend on ``workers``.
    """
    ls = [int(l) for l in ls]
    if workers <= 1 or len(ls) < 2:
        return [phase_shift(turning_point(model, l), tol) for l in ls]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_phase_shift_job, [(model, l, tol) for l in ls]))


def _phase_shift_job(args):
    model, l, tol = args
    return phase_shift(turning_point(model, l), tol)


def asymptote_residual(model: PotentialModel, d: int, l_range, tol: float = 1e-11,
                       workers: int = 1):
    """sigma_l(0) - slope*l - c/2 for each l in ``l_range`` (ODE route)."""
    if d != model.dim:
        model = model.with_(dim=d)
    ls = list(l_range)
    res = phase_shift_table(model, ls, tol, workers)
    c2 = asymptote_intercept(model)
    slope = asymptote_slope(model.mu)
    return np.array([r.sigma - slope * l - c2 for r, l in zip(res, ls)])


def phase_integral_from_turning_point(channel: Channel, radii) -> np.ndarray:
    """int_{r0}^r sqrt(-V_k) dr' at each of the sorted ``radii``."""
    def q(r):
        return math.sqrt(max(-float(effective_potential(channel, r)), 0.0))

    out = np.empty(len(radii))
    acc, prev = 0.0, channel.r0
    for i, r in enumerate(radii):
        acc += integrate.quad(q, prev, r, limit=200, epsabs=1e-13, epsrel=1e-13)[0]
        out[i] = acc
        prev = r
    return out


def prop_main1_residual(channel: Channel, r_window, n: int = 400, tol: float = 1e-11):
    """Fit the constant phase offset delta_k of the turning-point WKB form.

    Returns ``(delta, rms, amplitude)`` where ``rms`` is relative to the fitted
    amplitude.
    """
    if not channel.has_turning_point:
        raise NotApplicableError("prop_main1_residual needs a turning point")
    a, b = r_window
    if not (a > channel.r0 and float(effective_potential(channel, a)) < 0):
        raise DomainError("window must lie in the allowed region")
    radii = np.linspace(a, b, n)
    sol = regular_solution(channel, b * 1.001, tol, stops=radii)
    u, _ = sol.allowed(radii)
    q = np.sqrt(-np.asarray(effective_potential(channel, radii)))
    S = phase_integral_from_turning_point(channel, radii) + math.pi / 4.0
    design = np.column_stack([np.sin(S), np.cos(S)])
    target = u * np.sqrt(q)
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    amp = math.hypot(*coef)
    if amp == 0.0:
        raise ConvergenceError("degenerate fit", {"coef": coef.tolist()})
    delta = math.atan2(coef[1], coef[0])
    rms = float(np.sqrt(np.mean((design @ coef - target) ** 2)) / amp)
    return delta, rms, amp


def write_phase_table_csv(results, fh, metadata: dict | None = None):
    """Columns l, k, sigma, D, method, uncertainty."""
    for key, val in (metadata or {}).items():
        fh.write(f"# {key}={val}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["l", "k", "sigma", "D", "method", "uncertainty"])
    for r in results:
        w.writerow([r.l, repr(float(r.k)), repr(float(r.sigma)), repr(float(r.D)), r.method.value,
                    repr(float(r.uncertainty))])
