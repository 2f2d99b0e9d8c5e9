"""Regenerate tests/oracles/frozen.json.

Phase-shift oracles come from the ODE route at the tightest tolerance of a
ladder (1e-10 .. 1e-13); the spread across the ladder is stored as ``spread``.
Modifier oracles share no code with the package: psi_sr by mpmath quadrature
at 30 digits, C_mu from its Mellin-transform closed form and C_1 from the
elementary antiderivative of sqrt(1 + 2/s).

    python tests/oracles/generate_oracles.py
"""

import json
from pathlib import Path

import mpmath as mp

from zeroscat.potentials import PotentialModel, turning_point
from zeroscat.radial import phase_shift

mp.mp.dps = 30
OUT = Path(__file__).with_name("frozen.json")


def sigma_oracle(l):
    model = PotentialModel(0.5, 1.0)
    vals = [float(phase_shift(turning_point(model, l), tol).sigma)
            for tol in (1e-10, 1e-11, 1e-12, 1e-13)]
    return {"value": vals[-1], "spread": max(vals) - min(vals),
            "config": {"gamma": 0.5, "mu": 1.0, "R0": 1.0, "dim": 3, "cutoff_mode": "CutInterior",
                       "l": l, "tolerances": [1e-10, 1e-11, 1e-12, 1e-13]}}


def psi_sr_oracle(gamma, mu, lam, R0=1):
    gamma, mu, lam = mp.mpf(gamma), mp.mpf(mu), mp.mpf(lam)
    k = mp.sqrt(2 * lam)
    f = lambda r: k - mp.sqrt(k * k + 2 * gamma * r ** (-mu))  # noqa: E731
    rs = (gamma / lam) ** (1 / mu)
    return float(mp.quad(f, [R0, rs, 10 * rs, mp.inf]))


def mellin_constant(gamma, mu):
    """int_0^inf (1 - sqrt(1+2 gamma s**-mu) [+ gamma s**-mu]) ds, continued in a = 1/mu.

    Valid for 1/2 < a < 1 (short-range form) and 1 < a < 2 (Dollard form).
    """
    gamma, mu = mp.mpf(gamma), mp.mpf(mu)
    a = 1 / mu
    return float(-(2 * gamma) ** a / mu * mp.gamma(-a) * mp.gamma(a - mp.mpf(1) / 2)
                 / mp.gamma(-mp.mpf(1) / 2))


def c_one_oracle():
    """gamma = R0 = 1: the antiderivative sqrt(s(s+2)) + 2 asinh(sqrt(s/2)) gives -1 - ln 2."""
    return float(-1 - mp.log(2))


def main():
    data = {
        "sigma_l30_mu1": sigma_oracle(30),
        "psi_sr_mu1.5_lam0.01": {"value": psi_sr_oracle(1, 1.5, 0.01),
                                 "config": {"gamma": 1.0, "mu": 1.5, "R0": 1.0, "lambda": 0.01}},
        "C_mu_0.75": {"value": mellin_constant(1, 0.75), "config": {"gamma": 1.0, "mu": 0.75}},
        "C_1": {"value": c_one_oracle(), "config": {"gamma": 1.0, "R0": 1.0}},
        "sr_constant_1.5": {"value": mellin_constant(1, 1.5), "config": {"gamma": 1.0, "mu": 1.5}},
    }
    OUT.write_text(json.dumps(data, indent=2) + "\n")
    print(json.dumps(data, indent=2))


if __name__ == "__main__":
    main()
