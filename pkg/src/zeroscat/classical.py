"""Classical orbits for V(r) ~ -gamma r**-mu at zero and positive energy.

Covers direct integration of Newton's equations, the asymptotic deflection
angle, the zero-energy polar law ``sin((1-mu/2) theta) = (r/r_crit)**(mu/2-1)``,
the reduced flow on the scaling quotient of phase space, and the outgoing
angular-momentum function with the spherically symmetric eikonal phase built
from it.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .errors import DomainError, NearCollisionError, NotApplicableError, OutOfConeError
from .potentials import (
    R_CUT_LO,
    CutoffMode,
    PotentialModel,
    eval_g,
    eval_h,
    eval_potential,
)

logger = logging.getLogger(__name__)

#: default half-opening of the outgoing cone for angular_momentum
THETA_MAX = math.pi / 8


def potential_slope(model: PotentialModel, r):
    """dV/dr; exact power laws for r >= 1, central differences inside."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    outer = r >= 1.0
    for c, e in model.power_terms():
        out[outer] += c * e * r[outer] ** (e - 1.0)
    if np.any(~outer):
        ri = r[~outer]
        h = 1e-6 * ri
        out[~outer] = (np.asarray(eval_potential(model, ri + h))
                       - np.asarray(eval_potential(model, ri - h))) / (2.0 * h)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Trajectory:
    """Orbit samples ``t``, positions ``y`` (n, d) and velocities ``v`` (n, d)."""

    model: PotentialModel
    t: np.ndarray
    y: np.ndarray
    v: np.ndarray
    energy: float
    collided: bool = False
    closest_approach: float = field(default=math.nan)

    @property
    def samples(self):
        return list(zip(self.t, self.y, self.v))

    @property
    def radius(self) -> np.ndarray:
        return np.linalg.norm(self.y, axis=1)

    def energy_residual(self) -> np.ndarray:
        speed2 = np.sum(self.v**2, axis=1)
        return 0.5 * speed2 + np.asarray(eval_potential(self.model, self.radius)) - self.energy

    def angular_momentum_norm(self) -> np.ndarray:
        """|y ^ v| = sqrt(|y|^2 |v|^2 - (y.v)^2)."""
        yy = np.sum(self.y**2, axis=1)
        vv = np.sum(self.v**2, axis=1)
        yv = np.sum(self.y * self.v, axis=1)
        return np.sqrt(np.maximum(yy * vv - yv**2, 0.0))

    def plane_basis(self):
        """Orthonormal (e1, e2) spanning the orbit plane."""
        e1 = self.y[0] / np.linalg.norm(self.y[0])
        w = self.v[0] - np.dot(self.v[0], e1) * e1
        nw = np.linalg.norm(w)
        if nw < 1e-14 * max(np.linalg.norm(self.v[0]), 1e-300):
            raise NotApplicableError("radial orbit: no orbit plane")
        return e1, w / nw

    def polar_angle(self) -> np.ndarray:
        """Polar angle in the orbit plane, unwound by continuity."""
        e1, e2 = self.plane_basis()
        return np.unwrap(np.arctan2(self.y @ e2, self.y @ e1))

    def velocity_angle(self) -> np.ndarray:
        """Direction angle of the velocity in the orbit plane, unwound."""
        e1, e2 = self.plane_basis()
        return np.unwrap(np.arctan2(self.v @ e2, self.v @ e1))


def _newton_rhs(model: PotentialModel, d: int):
    def rhs(t, z):
        y = z[:d]
        r = math.sqrt(float(np.dot(y, y)))
        acc = -potential_slope(model, r) / r * y
        return np.concatenate([z[d:], acc])
    return rhs


def integrate_orbit(model: PotentialModel, y0, v0, t_end: float, tol: float = 1e-10,
                    r_stop: float | None = None) -> Trajectory:
    """Integrate y'' = -grad V(y) from (y0, v0) over [0, t_end] (t_end may be negative).

    Every accepted step is kept as a sample.  The run stops early when |y|
    reaches ``r_stop`` moving outward, or when it enters the interior cutoff
    (``r < 1`` in CutInterior mode); the latter sets ``collided``.
    """
    y0 = np.asarray(y0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    d = y0.size
    if v0.size != d:
        raise DomainError("y0 and v0 must have the same dimension")
    if not (np.all(np.isfinite(y0)) and np.all(np.isfinite(v0)) and math.isfinite(t_end)):
        raise DomainError("inputs must be finite")
    r_init = float(np.linalg.norm(y0))
    if not r_init > R_CUT_LO:
        raise DomainError(f"|y0| must exceed {R_CUT_LO}")
    lam = 0.5 * float(v0 @ v0) + float(eval_potential(model, r_init))

    r_in = 1.0 if model.cutoff_mode is CutoffMode.CUT_INTERIOR else 0.0
    events = []

    def hit_interior(t, z):
        return float(np.dot(z[:d], z[:d])) - r_in * r_in
    hit_interior.terminal = True
    hit_interior.direction = -1
    if r_in > 0.0 and r_init > r_in:
        events.append(hit_interior)
    if r_stop is not None:
        def escaped(t, z):
            return float(np.dot(z[:d], z[:d])) - r_stop * r_stop
        escaped.terminal = True
        escaped.direction = 1
        events.append(escaped)

    sol = integrate.solve_ivp(_newton_rhs(model, d), (0.0, t_end), np.concatenate([y0, v0]),
                              method="DOP853", rtol=tol, atol=tol * 1e-12, events=events or None)
    y = sol.y[:d].T
    v = sol.y[d:].T
    radii = np.linalg.norm(y, axis=1)
    if sol.status == -1:
        raise NearCollisionError(f"orbit integration failed: {sol.message}", float(radii.min()))
    collided = False
    if events and r_in > 0.0 and len(sol.t_events[0]) > 0:
        collided = True
        logger.info("orbit entered the interior region at t=%g", sol.t_events[0][0])
    return Trajectory(model, sol.t, y, v, lam, collided, float(radii.min()))


def scattering_orbit(model: PotentialModel, r_peri: float, lam: float = 0.0,
                     r_stop: float | None = None, tol: float = 1e-12, d: int = 2) -> Trajectory:
    """Full orbit through perihelion ``r_peri`` out to ``r_stop`` in both time directions.

    The orbit starts at ``(r_peri, 0, ...)`` with tangential speed
    ``sqrt(2 lam - 2 V(r_peri))`` and is integrated forward and backward.
    """
    if not r_peri >= 1.0:
        raise DomainError("perihelion must lie in the homogeneous region r >= 1")
    speed = math.sqrt(2.0 * lam - 2.0 * float(eval_potential(model, r_peri)))
    if r_stop is None:
        # far out at zero energy the absolute energy error of the integrator
        # competes with |V|, so the ends are extrapolated rather than reached
        r_stop = 1e4 * r_peri
    y0 = np.zeros(d)
    v0 = np.zeros(d)
    y0[0] = r_peri
    v0[1] = speed
    t_big = 1e40
    fwd = integrate_orbit(model, y0, v0, t_big, tol, r_stop)
    bwd = integrate_orbit(model, y0, v0, -t_big, tol, r_stop)
    t = np.concatenate([bwd.t[:0:-1], fwd.t])
    y = np.vstack([bwd.y[:0:-1], fwd.y])
    v = np.vstack([bwd.v[:0:-1], fwd.v])
    traj = Trajectory(model, t, y, v, lam, fwd.collided or bwd.collided,
                      min(fwd.closest_approach, bwd.closest_approach))
    if traj.radius[0] < 0.99 * r_stop or traj.radius[-1] < 0.99 * r_stop:
        raise NearCollisionError("orbit did not escape to r_stop", traj.closest_approach)
    return traj


def _is_zero_energy(traj: Trajectory) -> bool:
    scale = abs(float(eval_potential(traj.model, traj.closest_approach)))
    return abs(traj.energy) <= 1e-12 * scale


def _asymptotic_exponent(model: PotentialModel, zero_energy: bool) -> float:
    # direction corrections decay like r**-(1-mu/2) at zero energy and like
    # r**-min(mu, 1) at positive energy
    if zero_energy:
        return 1.0 - model.mu / 2.0
    return min(model.mu, 1.0)


def _extrapolate_end(angle, radius, p, degree=12, frac=0.7):
    """Value at r = inf of a Chebyshev fit in s = r**-p.

    ``radius[0]`` is the perihelion.  The angles are analytic in s up to the
    perihelion value s_peri, so a fit on s <= frac * s_peri extrapolates to
    s = 0 with geometric accuracy in the degree.
    """
    s = radius ** (-p)
    s_cut = frac * s[0]
    sel = s <= s_cut
    degree = min(degree, max(np.count_nonzero(sel) // 3, 1))
    fit = np.polynomial.Chebyshev.fit(s[sel], angle[sel], degree, domain=[0.0, s_cut])
    return float(fit(0.0))


def _signed_momentum(traj: Trajectory, i: int) -> float:
    e1, e2 = traj.plane_basis()
    y, v = traj.y[i], traj.v[i]
    return float((y @ e1) * (v @ e2) - (y @ e2) * (v @ e1))


def asymptotic_angles(traj: Trajectory, which: str = "velocity", method: str = "tail"):
    """(incoming, outgoing) asymptotic angles in the orbit plane.

    ``method="tail"`` adds the polar angle still to be swept beyond each end
    sample, int_r^inf L r**-2 (2 lam - 2V - L**2 r**-2)**-1/2 dr, computed
    from the conserved L and the energy; asymptotically the velocity is
    radial, which fixes the velocity angle up to the branch read off the
    samples.  ``method="fit"`` extrapolates the sampled angles with a
    Chebyshev fit in s = r**-p instead.
    """
    r = traj.radius
    i_min = int(np.argmin(r))
    if i_min == 0 or i_min == r.size - 1:
        raise NotApplicableError("orbit does not pass a perihelion inside the window")
    if r[0] < 10.0 * r[i_min] or r[-1] < 10.0 * r[i_min]:
        raise NotApplicableError("orbit does not reach large radii at both ends")
    ang = traj.velocity_angle() if which == "velocity" else traj.polar_angle()
    if method == "fit":
        p = _asymptotic_exponent(traj.model, _is_zero_energy(traj))
        out = _extrapolate_end(ang[i_min:], r[i_min:], p)
        inc = _extrapolate_end(ang[: i_min + 1][::-1], r[: i_min + 1][::-1], p)
        return inc, out
    if method != "tail":
        raise DomainError(f"unknown method {method!r}")
    phi = traj.polar_angle()
    lam = traj.energy if not _is_zero_energy(traj) else 0.0
    ends = []
    for i, sgn in ((0, -1.0), (r.size - 1, 1.0)):
        L = _signed_momentum(traj, i)
        limit = phi[i] + sgn * math.copysign(polar_travel(traj.model, r[i], L, lam), L)
        if which == "velocity":
            # outgoing velocity points along +xhat, incoming along -xhat
            limit += 0.0 if sgn > 0 else math.pi
            limit += 2.0 * math.pi * round((ang[i] - limit) / (2.0 * math.pi))
        ends.append(limit)
    return ends[0], ends[1]


def deflection_angle(traj: Trajectory, method: str = "tail") -> float:
    """Unsigned total turn of the velocity between the asymptotic directions."""
    if traj.energy < -1e-12:
        raise NotApplicableError("bound orbit has no deflection angle")
    inc, out = asymptotic_angles(traj, "velocity", method)
    return abs(out - inc)


def deflection_law(mu: float) -> float:
    """mu pi / (2 - mu)."""
    return mu * math.pi / (2.0 - mu)


def polar_invariant_residual(traj: Trajectory, return_details: bool = False):
    """max |sin((1-mu/2) theta) - (r/r_crit)**(mu/2-1)| along a zero-energy orbit.

    theta is the polar angle measured back from the outgoing asymptotic
    direction; r_crit is the perihelion radius.
    """
    model = traj.model
    if not (model.homogeneous or (model.v2_beta == 0.0 and traj.closest_approach >= 1.0)):
        raise NotApplicableError("polar law needs V = -gamma r**-mu along the orbit")
    if not _is_zero_energy(traj):
        raise NotApplicableError("polar law holds at zero energy only")
    p = 1.0 - model.mu / 2.0
    phi = traj.polar_angle()
    r = traj.radius
    _, phi_out = asymptotic_angles(traj, "polar")
    sense = math.copysign(1.0, phi[-1] - phi[0])
    theta = sense * (phi_out - phi)
    i_min = int(np.argmin(r))
    # parabolic refinement of the perihelion from the three nearest samples
    if 0 < i_min < r.size - 1:
        tt = traj.t[i_min - 1: i_min + 2]
        a, b, c = np.polyfit(tt - tt[1], r[i_min - 1: i_min + 2], 2)
        r_crit = c - b * b / (4.0 * a) if a > 0 else r[i_min]
    else:
        r_crit = r[i_min]
    total = 2.0 * math.pi / (2.0 - model.mu)
    if np.any(theta < -1e-6) or np.any(theta > total + 1e-6):
        raise NotApplicableError("polar angle left [0, 2 pi/(2-mu)]: winding ambiguity")
    resid = np.abs(np.sin(p * theta) - (r / r_crit) ** (-p))
    worst = float(resid.max())
    if return_details:
        return worst, {"r_crit": r_crit, "theta_peri": float(theta[i_min]), "theta": theta}
    return worst


# reduced flow on the scaling quotient


class FlowMode(str, enum.Enum):
    FULL = "Full"
    SIMPLIFIED = "Simplified"


@dataclass(frozen=True)
class ReducedState:
    """Point (xhat, b, cbar) of the reduced phase space; cbar is tangent at xhat."""

    xhat: np.ndarray
    b: float
    cbar: np.ndarray

    def __post_init__(self):
        xhat = np.asarray(self.xhat, dtype=float)
        cbar = np.asarray(self.cbar, dtype=float)
        if xhat.shape != cbar.shape:
            raise DomainError("xhat and cbar must have the same dimension")
        if abs(np.linalg.norm(xhat) - 1.0) > 1e-8:
            raise DomainError("xhat must be a unit vector")
        if abs(float(xhat @ cbar)) > 1e-8 * max(1.0, np.linalg.norm(cbar)):
            raise DomainError("cbar must be orthogonal to xhat")
        object.__setattr__(self, "xhat", xhat)
        object.__setattr__(self, "cbar", cbar)
        object.__setattr__(self, "b", float(self.b))

    @property
    def shell(self) -> float:
        """b**2 + |cbar|**2 (equal to 1 on the zero-energy surface)."""
        return self.b**2 + float(self.cbar @ self.cbar)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.xhat, [self.b], self.cbar])

    @classmethod
    def from_vector(cls, z, check: bool = False) -> "ReducedState":
        d = (len(z) - 1) // 2
        if check:
            return cls(z[:d], z[d], z[d + 1:])
        obj = object.__new__(cls)
        object.__setattr__(obj, "xhat", np.asarray(z[:d], dtype=float))
        object.__setattr__(obj, "b", float(z[d]))
        object.__setattr__(obj, "cbar", np.asarray(z[d + 1:], dtype=float))
        return obj


def _reduced_rhs(mu: float, d: int, full: bool):
    p = 1.0 - mu / 2.0

    def rhs(tau, z):
        xhat, b, c = z[:d], z[d], z[d + 1:]
        c2 = float(c @ c)
        db = p * c2
        if full:
            db += 0.5 * mu * (b * b + c2 - 1.0)
        return np.concatenate([c, [db], -p * b * c - c2 * xhat])
    return rhs


def reduced_flow(z0: ReducedState, tau_end: float, mode: FlowMode = FlowMode.FULL,
                 mu: float = 1.0, tol: float = 1e-12, tau_eval=None):
    """Integrate the reduced equations from tau = 0 to ``tau_end`` (either sign).

    Returns ``[(tau, ReducedState), ...]``; ``tau_eval`` selects output times.
    """
    if not (0.0 < mu < 2.0):
        raise DomainError("mu must lie in (0,2)")
    mode = FlowMode(mode)
    d = z0.xhat.size
    rhs = _reduced_rhs(mu, d, mode is FlowMode.FULL)
    sol = integrate.solve_ivp(rhs, (0.0, tau_end), z0.as_vector(), method="DOP853",
                              rtol=tol, atol=tol * 1e-2, t_eval=tau_eval)
    if not sol.success:
        raise NearCollisionError(f"reduced flow failed: {sol.message}", math.nan)
    return [(float(t), ReducedState.from_vector(sol.y[:, i])) for i, t in enumerate(sol.t)]


def simplified_b(k: float, mu: float, tau, tau0: float = 0.0):
    """Closed-form b(tau) of the simplified flow."""
    rk = math.sqrt(k)
    return rk * np.tanh(rk * (1.0 - mu / 2.0) * (np.asarray(tau) - tau0))


def swept_angle(path) -> float:
    """Total polar angle swept by xhat along a reduced-flow path."""
    xs = np.array([z.xhat for _, z in path])
    # 2 atan2(|a - b|, |a + b|) stays accurate for tiny steps, unlike arccos(a.b)
    a, b = xs[:-1], xs[1:]
    steps = 2.0 * np.arctan2(np.linalg.norm(a - b, axis=1), np.linalg.norm(a + b, axis=1))
    return float(np.sum(steps))


# outgoing angular momentum and eikonal phase


def _radial_kinetic(model: PotentialModel, lam: float):
    """u -> 2 lam - 2 V(1/u)."""
    def f(u):
        return 2.0 * lam - 2.0 * float(eval_potential(model, 1.0 / u))
    return f


def polar_travel(model: PotentialModel, r1: float, L: float, lam: float = 0.0) -> float:
    """int_{r1}^inf |L| r**-2 (2 lam - 2V - L**2 r**-2)**-1/2 dr for |L| below the cone edge."""
    L = abs(L)
    if L == 0.0:
        return 0.0
    u1 = 1.0 / r1
    kin = _radial_kinetic(model, lam)
    m = 2.0 / (2.0 - model.mu)

    # u = u1 (1 - w**2)**m absorbs the square-root edge at u1 (w -> 0) and
    # the u**(-mu/2) behaviour at u -> 0 when lam = 0 (w -> 1)
    def integrand(w):
        one = 1.0 - w * w
        if one <= 0.0:
            if lam > 0.0:
                return 0.0
            # limit of the integrand as u -> 0 at zero energy
            return L * u1 * m * 2.0 / math.sqrt(2.0 * model.gamma * u1**model.mu)
        u = u1 * one**m
        rad = kin(u) - L * L * u * u
        if rad <= 0.0:
            return 0.0
        du = u1 * m * one ** (m - 1.0) * 2.0 * w
        return L * du / math.sqrt(rad)

    # at the cone edge the radicand cancels to ~1e-16 relative; QUADPACK then
    # reports roundoff although the result is accurate to that level
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=1e-15, epsrel=1e-13, limit=400)
    return val


def cone_edge(model: PotentialModel, r1: float, lam: float = 0.0) -> float:
    """Largest |L| for which the orbit is outgoing on all of [r1, inf)."""
    return r1 * math.sqrt(2.0 * lam - 2.0 * float(eval_potential(model, r1)))


def angular_momentum(model: PotentialModel, r1: float, theta1: float, lam: float = 0.0,
                     theta_max: float = THETA_MAX) -> float:
    """L(r1, theta1, lam) of the outgoing orbit with r(1)=r1, theta(1)=theta1, theta(inf)=0.

    Since theta' = L r**-2 and theta decreases to 0, L has the sign of -theta1.
    """
    if lam < 0:
        raise DomainError("lambda must be nonnegative")
    if r1 < model.R0:
        raise DomainError("r1 must be >= R0")
    if abs(theta1) > theta_max:
        raise OutOfConeError(f"|theta1|={abs(theta1)} exceeds theta_max={theta_max}")
    if theta1 == 0.0:
        return 0.0
    target = abs(theta1)
    edge = cone_edge(model, r1, lam) * (1.0 - 1e-13)
    f_edge = polar_travel(model, r1, edge, lam) - target
    if f_edge < 0.0:
        raise OutOfConeError(f"theta1={theta1} lies outside the outgoing cone at r1={r1}")
    L = optimize.brentq(lambda x: polar_travel(model, r1, x, lam) - target, 0.0, edge,
                        xtol=1e-15 * edge, rtol=1e-15, maxiter=200)
    return -math.copysign(L, theta1)


def eikonal_phase_sph(model: PotentialModel, r: float, theta: float, lam: float = 0.0,
                      theta_max: float = THETA_MAX) -> float:
    """phi+ = sqrt(2 lam) R0 + int_R0^r sqrt(2 lam - 2V) + int_0^theta L(r, t, lam) dt."""
    if r < model.R0:
        raise DomainError("r must be >= R0")
    radial = radial_action(model, r, lam)
    if theta == 0.0:
        return radial
    ang, _ = integrate.quad(lambda t: angular_momentum(model, r, t, lam, theta_max), 0.0, theta,
                            epsabs=1e-13, epsrel=1e-11, limit=100)
    return radial + ang


def radial_action(model: PotentialModel, r: float, lam: float = 0.0) -> float:
    """sqrt(2 lam) R0 + int_R0^r sqrt(2 lam - 2V(r')) dr'."""
    R0 = model.R0
    if model.v2_beta == 0.0 and lam == 0.0:
        p = 1.0 - model.mu / 2.0
        return math.sqrt(2.0 * model.gamma) / p * (r**p - R0**p)
    val, _ = integrate.quad(lambda x: math.sqrt(2.0 * lam - 2.0 * float(eval_potential(model, x))),
                            R0, r, epsabs=1e-14, epsrel=1e-13, limit=200)
    return math.sqrt(2.0 * lam) * R0 + val


def eikonal_closed_form(model: PotentialModel, r: float, theta: float) -> float:
    """Zero-energy phi+ for the bare power law."""
    p = 1.0 - model.mu / 2.0
    return math.sqrt(2.0 * model.gamma) / p * (r**p * math.cos(p * theta) - model.R0**p)


def eikonal_residual(model: PotentialModel, r: float, theta: float, lam: float = 0.0,
                     h: float = 1e-3) -> float:
    """1/2 |grad phi+|**2 + V - lam by central differences in the orbit plane."""
    def phi(x, y):
        return eikonal_phase_sph(model, math.hypot(x, y), math.atan2(y, x), lam)

    x, y = r * math.cos(theta), r * math.sin(theta)
    step = h * r
    gx = (phi(x + step, y) - phi(x - step, y)) / (2.0 * step)
    gy = (phi(x, y + step) - phi(x, y - step)) / (2.0 * step)
    return 0.5 * (gx * gx + gy * gy) + float(eval_potential(model, r)) - lam


def wkb_amplitude(model: PotentialModel, r: float, lam: float = 0.0) -> float:
    """g(r)**-1/2 (h(r)/r)**((d-1)/2)."""
    if r < model.R0:
        raise DomainError("r must be >= R0")
    g = eval_g(model, r, lam)
    h = eval_h(model, r, lam)
    return g**-0.5 * (h / r) ** ((model.dim - 1) / 2.0)


# CSV export


def write_trajectory_csv(traj: Trajectory, fh, metadata: dict | None = None):
    """Columns t, y1..yd, v1..vd, energy_residual."""
    d = traj.y.shape[1]
    for key, val in (metadata or {}).items():
        fh.write(f"# {key}={val}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t"] + [f"y{i + 1}" for i in range(d)] + [f"v{i + 1}" for i in range(d)]
               + ["energy_residual"])
    res = traj.energy_residual()
    for i in range(traj.t.size):
        w.writerow([repr(float(traj.t[i]))] + [repr(float(x)) for x in traj.y[i]]
                   + [repr(float(x)) for x in traj.v[i]] + [repr(float(res[i]))])


def write_flow_csv(path, fh, metadata: dict | None = None):
    """Columns tau, b, cbar_norm, xhat1..xhatd."""
    d = path[0][1].xhat.size
    for key, val in (metadata or {}).items():
        fh.write(f"# {key}={val}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["tau", "b", "cbar_norm"] + [f"xhat{i + 1}" for i in range(d)])
    for tau, z in path:
        w.writerow([repr(tau), repr(z.b), repr(float(np.linalg.norm(z.cbar)))]
                   + [repr(float(x)) for x in z.xhat])
