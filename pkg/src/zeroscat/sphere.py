"""Special functions and zonal kernels on the sphere S^{d-1}.

A zonal kernel K(w), w = omega . omega', is synthesised from coefficients
c_l as ``sum_l c_l f_l Q_l(w)`` where Q_l is the projection kernel onto
degree-l spherical harmonics and f_l a smoothing factor.  The half-wave
group ``exp(i theta Lambda)`` has ``c_l = exp(i theta (l + d/2 - 1))``; the
zero-energy scattering matrix has ``c_l = exp(2 i sigma_l(0))``.
"""

from __future__ import annotations

import cmath
import csv
import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import DomainError, NoPeakError
from .potentials import PotentialModel
from .radial import correction_integral

logger = logging.getLogger(__name__)


def _check_w(w):
    w = np.asarray(w, dtype=float)
    if np.any(np.abs(w) > 1.0 + 1e-12):
        raise DomainError("w must lie in [-1, 1]")
    return np.clip(w, -1.0, 1.0)


def _out(x, like):
    return float(x) if np.ndim(like) == 0 else x


def tchebyshev(n: int, w):
    """T_n(w) by the three-term recurrence."""
    if n < 0 or int(n) != n:
        raise DomainError("n must be a nonnegative integer")
    w = _check_w(w)
    t0, t1 = np.ones_like(w), w.copy()
    if n == 0:
        return _out(t0, w)
    for _ in range(n - 1):
        t0, t1 = t1, 2.0 * w * t1 - t0
    return _out(t1, w)


def gegenbauer(alpha: float, n: int, w):
    """C_n^alpha(w) from n C_n = 2w(n+alpha-1) C_{n-1} - (n+2alpha-2) C_{n-2}."""
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if n < 0 or int(n) != n:
        raise DomainError("n must be a nonnegative integer")
    w = _check_w(w)
    c0, c1 = np.ones_like(w), 2.0 * alpha * w
    if n == 0:
        return _out(c0, w)
    for m in range(2, n + 1):
        c0, c1 = c1, (2.0 * w * (m + alpha - 1.0) * c1 - (m + 2.0 * alpha - 2.0) * c0) / m
    return _out(c1, w)


def sphere_area(d: int) -> float:
    """|S^{d-1}| = 2 pi**(d/2) / Gamma(d/2)."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def harmonic_dimension(d: int, l: int) -> int:
    """Dimension of the degree-l spherical harmonics on S^{d-1}."""
    if d == 2:
        return 1 if l == 0 else 2
    return math.comb(l + d - 1, d - 1) - (math.comb(l + d - 3, d - 1) if l >= 2 else 0)


def _projection_prefactor(d: int, l: int) -> float:
    if d == 2:
        return 1.0 / (2.0 * math.pi) if l == 0 else 1.0 / math.pi
    return (d - 2 + 2 * l) * math.gamma(d / 2.0 - 1.0) / (4.0 * math.pi ** (d / 2.0))


def projection_kernel(d: int, l: int, w):
    """Q_l^{d-1}(w), the kernel of the projection onto degree-l harmonics."""
    if d < 2 or int(d) != d:
        raise DomainError("d must be an integer >= 2")
    if d == 2:
        return _projection_prefactor(2, l) * tchebyshev(l, w)
    return _projection_prefactor(d, l) * gegenbauer(d / 2.0 - 1.0, l, w)


def lambda_eigenvalue(d: int, l: int) -> float:
    """Eigenvalue l + d/2 - 1 of Lambda on degree-l harmonics."""
    return l + d / 2.0 - 1.0


def projection_kernel_table(d: int, L_max: int, w) -> np.ndarray:
    """Array (L_max+1, len(w)) of Q_l(w) for l = 0..L_max, one recurrence pass."""
    w = _check_w(np.atleast_1d(w))
    out = np.empty((L_max + 1, w.size))
    if d == 2:
        p0, p1 = np.ones_like(w), w.copy()
        alpha = None
    else:
        alpha = d / 2.0 - 1.0
        p0, p1 = np.ones_like(w), 2.0 * alpha * w
    out[0] = _projection_prefactor(d, 0) * p0
    if L_max >= 1:
        out[1] = _projection_prefactor(d, 1) * p1
    for m in range(2, L_max + 1):
        if alpha is None:
            p0, p1 = p1, 2.0 * w * p1 - p0
        else:
            p0, p1 = p1, (2.0 * w * (m + alpha - 1.0) * p1 - (m + 2.0 * alpha - 2.0) * p0) / m
        out[m] = _projection_prefactor(d, m) * p1
    return out


# smoothing and grids


class SmoothingKind(str, enum.Enum):
    NONE = "None"
    ABEL = "Abel"
    GAUSS = "Gauss"


@dataclass(frozen=True)
class Smoothing:
    """Per-degree damping: Abel ``t**(l+d/2-1)`` or Gauss ``exp(-(l/width)**2)``."""

    kind: SmoothingKind = SmoothingKind.NONE
    param: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", SmoothingKind(self.kind))
        if self.kind is SmoothingKind.ABEL and not (0.0 < self.param <= 1.0):
            raise DomainError("Abel parameter t must lie in (0, 1]")
        if self.kind is SmoothingKind.GAUSS and not self.param > 0.0:
            raise DomainError("Gauss width must be positive")

    @classmethod
    def abel(cls, t: float) -> "Smoothing":
        return cls(SmoothingKind.ABEL, t)

    @classmethod
    def abel_default(cls, L_max: int) -> "Smoothing":
        return cls(SmoothingKind.ABEL, 1.0 - 1.0 / L_max)

    @classmethod
    def gauss(cls, width: float) -> "Smoothing":
        return cls(SmoothingKind.GAUSS, width)

    def factors(self, d: int, L_max: int) -> np.ndarray:
        l = np.arange(L_max + 1, dtype=float)
        if self.kind is SmoothingKind.ABEL:
            # damping by exp(-eps Lambda) with t = exp(-eps)
            return self.param ** (l + d / 2.0 - 1.0)
        if self.kind is SmoothingKind.GAUSS:
            return np.exp(-((l / self.param) ** 2))
        return np.ones_like(l)

    def describe(self) -> str:
        return self.kind.value if self.kind is SmoothingKind.NONE else f"{self.kind.value}({self.param!r})"


def chebyshev_grid(n: int = 2001) -> np.ndarray:
    """n Chebyshev extreme points on [-1, 1], ascending and including the ends."""
    if n < 3:
        raise DomainError("grid needs at least 3 nodes")
    return -np.cos(np.pi * np.arange(n) / (n - 1))


@dataclass(frozen=True)
class KernelGrid:
    """Samples of a zonal kernel on ``w_samples`` with its synthesis data."""

    w_samples: np.ndarray
    values: np.ndarray
    d: int
    L_max: int
    smoothing: Smoothing
    coefficients: np.ndarray = field(repr=False, default=None)
    label: str = ""

    @property
    def factors(self) -> np.ndarray:
        return self.smoothing.factors(self.d, self.L_max)

    def scaled(self, c: complex) -> "KernelGrid":
        coef = None if self.coefficients is None else c * self.coefficients
        return KernelGrid(self.w_samples, c * self.values, self.d, self.L_max, self.smoothing,
                          coef, self.label)


def synthesize(d: int, coefficients, w=None, smoothing: Smoothing | None = None,
               label: str = "") -> KernelGrid:
    """KernelGrid of sum_l c_l f_l Q_l(w) for l = 0..len(coefficients)-1."""
    coefficients = np.asarray(coefficients, dtype=complex)
    if coefficients.ndim != 1 or coefficients.size == 0:
        raise DomainError("coefficients must be a nonempty sequence")
    L_max = coefficients.size - 1
    w = chebyshev_grid() if w is None else np.asarray(w, dtype=float)
    smoothing = smoothing or Smoothing()
    f = smoothing.factors(d, L_max)
    table = projection_kernel_table(d, L_max, w)
    values = (coefficients * f) @ table
    return KernelGrid(w, values, d, L_max, smoothing, coefficients, label)


# half-wave group exp(i theta Lambda)


def wave_coefficients(d: int, theta: float, L_max: int) -> np.ndarray:
    l = np.arange(L_max + 1)
    return np.exp(1j * theta * (l + d / 2.0 - 1.0))


def wave_kernel_series(d: int, theta: float, L_max: int, w=None,
                       smoothing: Smoothing | None = None) -> KernelGrid:
    """Truncated, smoothed series sum_l exp(i theta (l+d/2-1)) Q_l(w)."""
    if smoothing is None:
        smoothing = Smoothing.abel_default(L_max)
    return synthesize(d, wave_coefficients(d, theta, L_max), w, smoothing,
                      label=f"theta={theta!r}")


def wave_kernel_closed(d: int, theta: float, w, eps: float, literal: bool = False):
    """Closed-form kernel of exp(i (theta + i eps) Lambda).

    With t = exp(i (theta + i eps)) the kernel is

        Gamma(d/2) / (2 pi**(d/2)) * (1 - t**2) * t**(d/2 - 1)
            / ((1 - t e**(i phi)) (1 - t e**(-i phi)))**(d/2),    w = cos(phi),

    each factor on its principal branch and ``t**(d/2-1)`` taken as
    ``exp(i (d/2-1)(theta + i eps))``.  This equals the Abel-damped series
    with t_Abel = exp(-eps) exactly and, as eps -> 0, the distribution
    ``-i sin(theta) Gamma(d/2) (2 pi)**(-d/2) (cos(theta) - w -+ i0)**(-d/2)``.

    ``literal=True`` evaluates that last expression with ``-+ i eps sin``
    instead; it is 2 pi periodic in theta and therefore misses the factor
    exp(2 pi i (d/2-1)) per turn of the series when d is odd.
    """
    if d < 2 or int(d) != d:
        raise DomainError("d must be an integer >= 2")
    if not eps > 0:
        raise DomainError("eps must be positive")
    w = _check_w(w)
    if literal:
        s = math.sin(theta)
        z = math.cos(theta) - w - 1j * eps * s
        val = -1j * s * math.gamma(d / 2.0) * (2.0 * math.pi) ** (-d / 2.0) * z ** (-d / 2.0)
        return complex(val) if np.ndim(w) == 0 else val
    th = complex(theta, eps)
    t = cmath.exp(1j * th)
    phi = np.arccos(w)
    f1 = 1.0 - t * np.exp(1j * phi)
    f2 = 1.0 - t * np.exp(-1j * phi)
    pref = math.gamma(d / 2.0) / (2.0 * math.pi ** (d / 2.0))
    val = pref * (1.0 - t * t) * np.exp(1j * (d / 2.0 - 1.0) * th) * f1 ** (-d / 2.0) * f2 ** (-d / 2.0)
    return complex(val) if np.ndim(w) == 0 else val


def wave_kernel_special(d: int, theta: float):
    """exp(i theta Lambda) for theta in pi Z: (phase, 'identity' | 'parity')."""
    m = theta / math.pi
    k = round(m)
    if abs(m - k) > 1e-12:
        raise DomainError("theta must be an integer multiple of pi")
    phase = cmath.exp(1j * k * math.pi * (d / 2.0 - 1.0))
    return phase, ("identity" if k % 2 == 0 else "parity")


def concentration(kernel: KernelGrid, w0: float, delta: float) -> float:
    """Fraction of the kernel's L2 mass with |w - w0| < delta."""
    dens = _l2_density(kernel)
    wts = _l2_weights(kernel.w_samples, kernel.d)
    near = np.abs(kernel.w_samples - w0) < delta
    return float(np.sum((wts * dens)[near]) / np.sum(wts * dens))


# L2 norms on the sphere


def _clenshaw_curtis_weights(n: int) -> np.ndarray:
    """Weights for the n ascending Chebyshev extreme points on [-1, 1]."""
    N = n - 1
    theta = np.pi * np.arange(n) / N
    w = np.zeros(n)
    v = np.ones(n - 2)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N * N - 1)
        for k in range(1, N // 2):
            v -= 2.0 * np.cos(2 * k * theta[1:-1]) / (4 * k * k - 1)
        v -= np.cos(N * theta[1:-1]) / (N * N - 1)
    else:
        w[0] = w[N] = 1.0 / (N * N)
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[1:-1]) / (4 * k * k - 1)
    w[1:-1] = 2.0 * v / N
    return w[::-1]


def _l2_weights(w: np.ndarray, d: int) -> np.ndarray:
    """Weights W with int_{S^{d-1}} F(omega.e) d omega ~ sum W F(w)."""
    n = w.size
    if not np.allclose(w, chebyshev_grid(n), atol=1e-14, rtol=0):
        raise DomainError("L2 norms need the Chebyshev grid")
    area = sphere_area(d - 1)
    if d % 2 == 1:
        # polynomial weight (1 - w**2)**((d-3)/2): Clenshaw-Curtis in w
        return area * _clenshaw_curtis_weights(n) * (1.0 - w * w) ** ((d - 3) / 2.0)
    # even d: trapezoid in phi = arccos(w) with weight sin(phi)**(d-2)
    h = np.pi / (n - 1)
    tw = np.full(n, h)
    tw[0] = tw[-1] = h / 2.0
    return area * tw * (1.0 - w * w) ** ((d - 2) / 2.0)


def _l2_density(kernel: KernelGrid) -> np.ndarray:
    return np.abs(kernel.values) ** 2


def kernel_l2_norm(kernel: KernelGrid) -> float:
    """(int_{S^{d-1}} |K(omega . e)|**2 d omega)**(1/2) by quadrature on the grid."""
    return math.sqrt(float(np.sum(_l2_weights(kernel.w_samples, kernel.d) * _l2_density(kernel))))


def coefficient_l2_norm(kernel: KernelGrid) -> float:
    """The same norm from the coefficients: sum |c_l f_l|**2 Q_l(1)."""
    if kernel.coefficients is None:
        raise DomainError("kernel carries no coefficients")
    d = kernel.d
    q1 = np.array([harmonic_dimension(d, l) for l in range(kernel.L_max + 1)]) / sphere_area(d)
    return math.sqrt(float(np.sum(np.abs(kernel.coefficients * kernel.factors) ** 2 * q1)))


def relative_l2_distance(a: KernelGrid, b: KernelGrid) -> float:
    """||a - b|| / ||b|| by grid quadrature."""
    if a.d != b.d or a.w_samples.shape != b.w_samples.shape:
        raise DomainError("kernels live on different grids")
    diff = KernelGrid(a.w_samples, a.values - b.values, a.d, a.L_max, a.smoothing)
    return kernel_l2_norm(diff) / kernel_l2_norm(b)


# quadrature on S^2


def sphere_quadrature(n: int):
    """Product rule on S^2: n Gauss-Legendre nodes in cos(theta) times 2n uniform in phi.

    Exact for polynomials of degree <= 2n - 1.  Returns (points (m, 3), weights (m,)).
    """
    x, wx = np.polynomial.legendre.leggauss(n)
    phi = 2.0 * np.pi * np.arange(2 * n) / (2 * n)
    st = np.sqrt(1.0 - x * x)
    pts = np.stack([np.outer(st, np.cos(phi)), np.outer(st, np.sin(phi)),
                    np.outer(x, np.ones_like(phi))], axis=-1).reshape(-1, 3)
    wts = np.outer(wx, np.full(phi.size, 2.0 * np.pi / phi.size)).ravel()
    return pts, wts


def reproduction_error(l: int, targets, n_quad: int | None = None) -> float:
    """max |int_{S^2} Q_l(x.y) P_l(y.z) dy - P_l(x.z)| over the target pairs (x, z)."""
    n_quad = n_quad or (l + 2)
    pts, wts = sphere_quadrature(n_quad)
    worst = 0.0
    for x, z in targets:
        x = np.asarray(x, float) / np.linalg.norm(x)
        z = np.asarray(z, float) / np.linalg.norm(z)
        q = projection_kernel(3, l, np.clip(pts @ x, -1, 1))
        p = special.eval_legendre(l, np.clip(pts @ z, -1, 1))
        worst = max(worst, abs(float(np.sum(wts * q * p)) - float(special.eval_legendre(l, x @ z))))
    return worst


def idempotence_error(l: int, targets, n_quad: int | None = None) -> float:
    """max |int Q_l(x.y) Q_l(y.z) dy - Q_l(x.z)| over target pairs."""
    n_quad = n_quad or (l + 2)
    pts, wts = sphere_quadrature(n_quad)
    worst = 0.0
    for x, z in targets:
        x = np.asarray(x, float) / np.linalg.norm(x)
        z = np.asarray(z, float) / np.linalg.norm(z)
        q1 = projection_kernel(3, l, np.clip(pts @ x, -1, 1))
        q2 = projection_kernel(3, l, np.clip(pts @ z, -1, 1))
        worst = max(worst, abs(float(np.sum(wts * q1 * q2)) - projection_kernel(3, l, float(x @ z))))
    return worst


# zero-energy scattering matrix


def cone_angle(mu: float) -> float:
    """mu pi / (2 - mu)."""
    return mu * math.pi / (2.0 - mu)


def cone_location(mu: float) -> float:
    """w = cos(mu pi / (2 - mu)) where the kernel of S(0) is singular."""
    return math.cos(cone_angle(mu))


def c0_constant(model: PotentialModel) -> float:
    """4 sqrt(2 gamma) R0**(1-mu/2) / (2-mu) + 2 int_R0^inf (sqrt(-2V1) - sqrt(-2V))."""
    mu = model.mu
    return (4.0 * math.sqrt(2.0 * model.gamma) * model.R0 ** (1.0 - mu / 2.0) / (2.0 - mu)
            + 2.0 * correction_integral(model))


def s0_kernel(model: PotentialModel, d: int, sigmas, L_max: int | None = None, w=None,
              smoothing: Smoothing | None = None) -> KernelGrid:
    """sum_l exp(2 i sigma_l(0)) f_l Q_l(w) for l = 0..L_max."""
    sigmas = np.asarray(sigmas, dtype=float)
    if L_max is None:
        L_max = sigmas.size - 1
    if sigmas.size < L_max + 1:
        raise DomainError(f"need sigma_l for l = 0..{L_max}, got {sigmas.size}")
    if smoothing is None:
        smoothing = Smoothing.abel_default(L_max)
    coef = np.exp(2j * sigmas[: L_max + 1])
    return synthesize(d, coef, w, smoothing, label=f"S(0) mu={model.mu!r} gamma={model.gamma!r}")


def singular_part_kernel(model: PotentialModel, d: int, L_max: int, w=None,
                         smoothing: Smoothing | None = None) -> KernelGrid:
    """exp(i c0) exp(-i (mu pi/(2-mu)) Lambda), smoothed like s0_kernel."""
    if smoothing is None:
        smoothing = Smoothing.abel_default(L_max)
    ker = wave_kernel_series(d, -cone_angle(model.mu), L_max, w, smoothing)
    return ker.scaled(cmath.exp(1j * c0_constant(model)))


def singularity_locator(kernel: KernelGrid, min_sharpness: float = 2.0):
    """(w_peak, sharpness): argmax |K| refined by a parabola, and peak / median."""
    a = np.abs(kernel.values)
    w = kernel.w_samples
    i = int(np.argmax(a))
    med = float(np.median(a))
    sharp = float(a[i] / med) if med > 0 else math.inf
    if not sharp >= min_sharpness:
        raise NoPeakError(f"kernel has no dominant peak (sharpness {sharp:.3g})", sharp)
    if 0 < i < w.size - 1:
        x, y = w[i - 1: i + 2], a[i - 1: i + 2]
        c2, c1, _ = np.polyfit(x - x[1], y, 2)
        if c2 < 0:
            shift = -c1 / (2.0 * c2)
            if abs(shift) <= max(x[2] - x[1], x[1] - x[0]):
                return float(x[1] + shift), sharp
    return float(w[i]), sharp


def grid_cell(w: np.ndarray, w0: float) -> float:
    """Width of the grid cell nearest to w0."""
    i = int(np.clip(np.searchsorted(w, w0), 1, w.size - 1))
    return float(w[i] - w[i - 1])


def compact_remainder_residuals(model: PotentialModel, d: int, sigmas, l_range) -> np.ndarray:
    """exp(2 i sigma_l) - exp(i (c0 - (mu pi/(2-mu)) (l + d/2 - 1))) for l in l_range."""
    sigmas = np.asarray(sigmas, dtype=float)
    ls = np.asarray(list(l_range), dtype=int)
    if ls.size and ls.max() >= sigmas.size:
        raise DomainError("sigmas do not cover l_range")
    c0 = c0_constant(model)
    target = np.exp(1j * (c0 - cone_angle(model.mu) * (ls + d / 2.0 - 1.0)))
    return np.exp(2j * sigmas[ls]) - target


def write_kernel_csv(kernel: KernelGrid, fh, metadata: dict | None = None):
    """Columns w, re, im, abs after a metadata comment line."""
    meta = {"d": kernel.d, "L_max": kernel.L_max, "smoothing": kernel.smoothing.describe(),
            "theta_or_model": kernel.label}
    meta.update(metadata or {})
    fh.write("# " + ", ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["w", "re", "im", "abs"])
    for x, v in zip(kernel.w_samples, kernel.values):
        w.writerow([repr(float(x)), repr(float(v.real)), repr(float(v.imag)), repr(float(abs(v)))])
