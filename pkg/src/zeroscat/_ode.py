"""Compiled DOP853 integrator for the zero-energy radial equation.

Two systems share the stepper:

* ``MODE_LINEAR``:   z = (u, u') in r,       u'' = V_k(r) u
* ``MODE_RICCATI``:  z = (y, ln u) in ln r,  y = r u'/u, y' = y - y**2 + r**2 V_k

The tableau is scipy's Dormand-Prince 8(5,3); stepping, error control and
output are compiled with numba because the per-step overhead of a Python
right-hand side dominates otherwise.
"""

from __future__ import annotations

import math

import numba
import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop

MODE_LINEAR = 0
MODE_RICCATI = 1

_NS = _dop.N_STAGES
_A = np.ascontiguousarray(_dop.A[:_NS, :_NS])
_B = np.ascontiguousarray(_dop.B)
_C = np.ascontiguousarray(_dop.C[:_NS])
_E3 = np.ascontiguousarray(_dop.E3)
_E5 = np.ascontiguousarray(_dop.E5)


def potential_params(channel) -> np.ndarray:
    """Pack a Channel into the flat parameter vector used by the kernels."""
    m = channel.model
    cut = 1.0 if m.cutoff_mode.value == "CutInterior" else 0.0
    return np.array([m.gamma, m.mu, m.v2_beta, m.v2_eps2, channel.centrifugal, cut])


@numba.njit(cache=True)
def _step01(x):
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    a = math.exp(-1.0 / x)
    b = math.exp(-1.0 / (1.0 - x))
    return a / (a + b)


@numba.njit(cache=True)
def vk_scalar(r, p):
    gamma, mu, beta, eps2, kk, cut = p[0], p[1], p[2], p[3], p[4], p[5]
    v1 = -gamma * r ** (-mu)
    if cut > 0.0 and r < 1.0:
        v1 *= _step01((r - 0.25) / 0.75)
    v2 = 0.0
    if beta != 0.0:
        v2 = -beta * r ** (-mu - eps2)
        if r < 1.0:
            v2 *= _step01((r - 0.5) / 0.5)
    return 2.0 * (v1 + v2) + kk / (r * r)


@numba.njit(cache=True)
def _rhs(mode, t, z0, z1, p, out):
    if mode == MODE_LINEAR:
        out[0] = z1
        out[1] = vk_scalar(t, p) * z0
    else:
        r = math.exp(t)
        out[0] = z0 - z0 * z0 + r * r * vk_scalar(r, p)
        out[1] = z0


@numba.njit(cache=True)
def integrate(mode, t0, t1, za, zb, p, rtol, atol, stops, A, B, C, E3, E5):
    """Adaptive DOP853 from t0 to t1; lands exactly on every point of ``stops``.

    Returns ``(t, z0, z1, status)``; every accepted step is recorded.
    status 0 = ok, 1 = step underflow, 2 = non-finite state.
    """
    ns = 12
    cap = 4096
    ts = np.empty(cap)
    y0s = np.empty(cap)
    y1s = np.empty(cap)
    n = 0
    ts[0] = t0
    y0s[0] = za
    y1s[0] = zb
    n = 1
    K0 = np.empty(ns + 1)
    K1 = np.empty(ns + 1)
    f = np.empty(2)
    t = t0
    y0 = za
    y1 = zb
    _rhs(mode, t, y0, y1, p, f)
    K0[0] = f[0]
    K1[0] = f[1]
    # initial step from the local scale of the derivative
    scale = atol + rtol * max(abs(y0), abs(y1))
    dn = math.sqrt(0.5 * ((f[0] / scale) ** 2 + (f[1] / scale) ** 2))
    h = 1e-6 * abs(t1 - t0)
    if dn > 0.0:
        h = min(h, 0.01 / dn)
    h = max(h, 1e-14 * max(abs(t0), 1.0))
    istop = 0
    while istop < stops.size and stops[istop] <= t0:
        istop += 1
    status = 0
    while t < t1:
        target = t1
        if istop < stops.size and stops[istop] < t1:
            target = stops[istop]
        hit = False
        if t + h >= target:
            h = target - t
            hit = True
        if h < 1e-15 * max(abs(t), 1.0):
            status = 1
            break
        for s in range(1, ns):
            d0 = 0.0
            d1 = 0.0
            for j in range(s):
                d0 += A[s, j] * K0[j]
                d1 += A[s, j] * K1[j]
            _rhs(mode, t + C[s] * h, y0 + h * d0, y1 + h * d1, p, f)
            K0[s] = f[0]
            K1[s] = f[1]
        b0 = 0.0
        b1 = 0.0
        for j in range(ns):
            b0 += B[j] * K0[j]
            b1 += B[j] * K1[j]
        n0 = y0 + h * b0
        n1 = y1 + h * b1
        _rhs(mode, t + h, n0, n1, p, f)
        K0[ns] = f[0]
        K1[ns] = f[1]
        e50 = 0.0
        e51 = 0.0
        e30 = 0.0
        e31 = 0.0
        for j in range(ns + 1):
            e50 += E5[j] * K0[j]
            e51 += E5[j] * K1[j]
            e30 += E3[j] * K0[j]
            e31 += E3[j] * K1[j]
        sc0 = atol + rtol * max(abs(y0), abs(n0))
        sc1 = atol + rtol * max(abs(y1), abs(n1))
        err5 = (e50 / sc0) ** 2 + (e51 / sc1) ** 2
        err3 = (e30 / sc0) ** 2 + (e31 / sc1) ** 2
        den = err5 + 0.01 * err3
        err = 0.0
        if den > 0.0:
            err = abs(h) * err5 / math.sqrt(den * 2.0)
        if not (math.isfinite(n0) and math.isfinite(n1)):
            if h < 1e-12:
                status = 2
                break
            h *= 0.2
            continue
        if err <= 1.0:
            t = target if hit else t + h
            y0 = n0
            y1 = n1
            K0[0] = K0[ns]
            K1[0] = K1[ns]
            if hit and istop < stops.size and target == stops[istop]:
                istop += 1
            if n == cap:
                cap *= 2
                nt = np.empty(cap)
                n0a = np.empty(cap)
                n1a = np.empty(cap)
                nt[:n] = ts[:n]
                n0a[:n] = y0s[:n]
                n1a[:n] = y1s[:n]
                ts = nt
                y0s = n0a
                y1s = n1a
            ts[n] = t
            y0s[n] = y0
            y1s[n] = y1
            n += 1
            fac = 10.0 if err == 0.0 else min(10.0, 0.9 * err ** (-1.0 / 8.0))
            h = h * fac
        else:
            h = h * max(0.2, 0.9 * err ** (-1.0 / 8.0))
    return ts[:n], y0s[:n], y1s[:n], status


def run(mode, t0, t1, z, params, rtol, atol, stops=()):
    """Python entry point; ``stops`` are forced output abscissae."""
    stops = np.asarray(sorted(float(s) for s in stops), dtype=float)
    return integrate(mode, float(t0), float(t1), float(z[0]), float(z[1]), params,
                     float(rtol), float(atol), stops, _A, _B, _C, _E3, _E5)
