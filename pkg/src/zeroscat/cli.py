"""Batch front end: ``python -m zeroscat --config run.cfg --out results/``.

The configuration is line oriented::

    [model]
    gamma = 0.5
    mu = 1
    [run]
    command = phase-shifts
    l_max = 10

Keys given before any section header are assigned to the section that owns
them.  Every key is validated before anything is computed.
"""

from __future__ import annotations

import argparse
import io
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import classical, phases, radial, sphere
from .errors import ConfigError, ConvergenceError, DomainError, ZeroScatError
from .potentials import CutoffMode, PotentialModel, eval_h

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3
EXIT_IO = 4

COMMANDS = ("phase-shifts", "kernel", "wave-kernel", "orbit", "flow", "phases", "selftest")


def _float_list(text):
    items = [x.strip() for x in text.split(",") if x.strip()]
    if not items:
        raise ValueError("empty list")
    return tuple(float(x) for x in items)


def _command(text):
    if text not in COMMANDS:
        raise ValueError(f"command must be one of {', '.join(COMMANDS)}")
    return text


def _smoothing(text):
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    if name not in ("none", "abel", "gauss"):
        raise ValueError("smoothing must be none, abel, abel:t or gauss:width")
    if name == "none" and arg:
        raise ValueError("smoothing none takes no parameter")
    if name == "gauss" and not arg:
        raise ValueError("gauss smoothing needs a width")
    return (name, float(arg) if arg else None)


def _int(text):
    return int(text, 10)


# key -> (section, parser, default)
SCHEMA = {
    "gamma": ("model", float, None),
    "mu": ("model", float, None),
    "R0": ("model", float, 1.0),
    "dim": ("model", _int, 3),
    "cutoff_mode": ("model", CutoffMode, CutoffMode.CUT_INTERIOR),
    "v2_beta": ("model", float, 0.0),
    "v2_eps2": ("model", float, 1.0),
    "command": ("run", _command, None),
    "l_min": ("run", _int, 0),
    "l_max": ("run", _int, 20),
    "L_max": ("run", _int, 200),
    "theta": ("run", float, math.pi / 2),
    "lambda_ladder": ("run", _float_list, (1e-2, 1e-4, 1e-6, 1e-8)),
    "kind": ("run", phases.ModifierKind, phases.ModifierKind.DOL),
    "grid_size": ("run", _int, 2001),
    "smoothing": ("run", _smoothing, ("abel", None)),
    "tol": ("run", float, 1e-11),
    "r_peri": ("run", float, 2.0),
    "lambda": ("run", float, 0.0),
    "k": ("run", float, 1.0),
    "tau_end": ("run", float, 10.0),
    "output_path": ("run", str, None),
    "threads": ("run", _int, None),
}

_DEFAULT_NAMES = {
    "phase-shifts": "phase_shifts.csv",
    "kernel": "s0_kernel.csv",
    "wave-kernel": "wave_kernel.csv",
    "orbit": "orbit.csv",
    "flow": "flow.csv",
    "phases": "phases.csv",
    "selftest": "selftest.csv",
}


@dataclass
class RunConfig:
    command: str
    model: PotentialModel | None
    params: dict
    lines: dict = field(default_factory=dict)

    def get(self, key):
        return self.params[key]

    def metadata(self) -> dict:
        """Every key needed to re-run, in config syntax and a fixed order."""
        meta = {"command": self.command}
        for key in SCHEMA:
            if key in ("command", "threads", "output_path"):
                continue
            val = self.params.get(key)
            if val is None:
                continue
            if isinstance(val, (CutoffMode, phases.ModifierKind)):
                val = val.value
            elif key == "smoothing":
                val = val[0] if val[1] is None else f"{val[0]}:{val[1]!r}"
            elif key == "lambda_ladder":
                val = ",".join(repr(x) for x in val)
            elif isinstance(val, float):
                val = repr(val)
            meta[key] = val
        return meta


def parse_config(text: str) -> RunConfig:
    """Validate ``text`` and return a RunConfig, or raise ConfigError with all diagnostics."""
    diags = []
    raw = {}
    lines = {}
    section = None
    for ln, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].rstrip()
        stripped = body.strip()
        if not stripped:
            continue
        col = len(body) - len(body.lstrip()) + 1
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                diags.append((ln, col, "malformed section header"))
                continue
            name = stripped[1:-1].strip()
            if name not in ("model", "run"):
                diags.append((ln, col, f"unknown section [{name}]"))
                section = "?"
                continue
            section = name
            continue
        if "=" not in body:
            diags.append((ln, col, "expected 'key = value'"))
            continue
        key_part, value_part = body.split("=", 1)
        key = key_part.strip()
        value = value_part.strip()
        vcol = len(key_part) + 2 + (len(value_part) - len(value_part.lstrip()))
        if key not in SCHEMA:
            diags.append((ln, col, f"unknown key '{key}'"))
            continue
        owner = SCHEMA[key][0]
        if section not in (None, owner):
            diags.append((ln, col, f"key '{key}' belongs in [{owner}]"))
            continue
        if key in raw:
            diags.append((ln, col, f"duplicate key '{key}' (first set on line {lines[key]})"))
            continue
        try:
            raw[key] = SCHEMA[key][1](value)
        except (ValueError, TypeError) as exc:
            diags.append((ln, vcol, f"type mismatch for '{key}': {exc}"))
            continue
        lines[key] = ln

    params = {key: raw.get(key, default) for key, (_, _, default) in SCHEMA.items()}
    command = params["command"]
    if command is None and not any(d[2].startswith("type mismatch for 'command'") for d in diags):
        diags.append((0, 0, "missing required key 'command'"))

    model = None
    needs_model = command not in (None, "wave-kernel", "flow", "selftest")
    if needs_model or "gamma" in raw or "mu" in raw:
        missing = [k for k in ("gamma", "mu") if k not in raw]
        for k in missing:
            if not any(f"'{k}'" in d[2] for d in diags):
                diags.append((0, 0, f"missing required key '{k}'"))
        if not missing:
            try:
                model = PotentialModel(
                    gamma=params["gamma"], mu=params["mu"], R0=params["R0"],
                    cutoff_mode=params["cutoff_mode"], v2_beta=params["v2_beta"],
                    v2_eps2=params["v2_eps2"], dim=params["dim"])
            except DomainError as exc:
                culprit = str(exc).split()[0]
                diags.append((lines.get(culprit, 0), 1, str(exc)))
    diags.extend(_check_run(params, lines))
    if diags:
        raise ConfigError(diags)
    return RunConfig(command, model, params, lines)


def _check_run(p, lines):
    out = []

    def bad(key, msg):
        out.append((lines.get(key, 0), 1, msg))

    if p["l_min"] < 0:
        bad("l_min", "l_min must be >= 0")
    if p["l_max"] < p["l_min"]:
        bad("l_max", "l_max must be >= l_min")
    if p["L_max"] < 1:
        bad("L_max", "L_max must be >= 1")
    if p["grid_size"] < 3:
        bad("grid_size", "grid_size must be >= 3")
    if not 0.0 < p["tol"] < 1e-3:
        bad("tol", "tol must lie in (0, 1e-3)")
    if p["threads"] is not None and p["threads"] < 1:
        bad("threads", "threads must be >= 1")
    if any(not lam > 0.0 for lam in p["lambda_ladder"]):
        bad("lambda_ladder", "every lambda must be positive")
    if p["lambda"] < 0.0:
        bad("lambda", "lambda must be >= 0")
    if p["r_peri"] < 1.0:
        bad("r_peri", "r_peri must be >= 1")
    if not p["k"] > 0.0:
        bad("k", "k must be positive")
    name, arg = p["smoothing"]
    if name == "abel" and arg is not None and not 0.0 < arg <= 1.0:
        bad("smoothing", "Abel parameter must lie in (0, 1]")
    if name == "gauss" and not arg > 0.0:
        bad("smoothing", "Gauss width must be positive")
    return out


def _make_smoothing(spec, L_max):
    name, arg = spec
    if name == "none":
        return sphere.Smoothing()
    if name == "gauss":
        return sphere.Smoothing.gauss(arg)
    return sphere.Smoothing.abel(arg) if arg is not None else sphere.Smoothing.abel_default(L_max)


# commands; each writes CSV text to ``fh``


def _run_phase_shifts(cfg, fh, threads):
    model = cfg.model
    ls = range(cfg.get("l_min"), cfg.get("l_max") + 1)
    res = radial.phase_shift_table(model, ls, cfg.get("tol"), threads)
    meta = cfg.metadata()
    meta["target_slope"] = repr(radial.asymptote_slope(model.mu))
    meta["target_intercept"] = repr(radial.asymptote_intercept(model))
    if len(res) >= 2:
        slope, icpt = np.polyfit([r.l for r in res], [r.sigma for r in res], 1)
        meta["fitted_slope"] = repr(float(slope))
        meta["fitted_intercept"] = repr(float(icpt))
    radial.write_phase_table_csv(res, fh, meta)


def _run_kernel(cfg, fh, threads):
    model = cfg.model
    L_max = cfg.get("L_max")
    res = radial.phase_shift_table(model, range(L_max + 1), cfg.get("tol"), threads)
    sigmas = [r.sigma for r in res]
    w = sphere.chebyshev_grid(cfg.get("grid_size"))
    ker = sphere.s0_kernel(model, model.dim, sigmas, L_max, w,
                           _make_smoothing(cfg.get("smoothing"), L_max))
    meta = cfg.metadata()
    meta["expected_peak_w"] = repr(sphere.cone_location(model.mu))
    meta["c0"] = repr(sphere.c0_constant(model))
    sphere.write_kernel_csv(ker, fh, meta)


def _run_wave_kernel(cfg, fh, threads):
    d = cfg.get("dim")
    L_max = cfg.get("L_max")
    theta = cfg.get("theta")
    w = sphere.chebyshev_grid(cfg.get("grid_size"))
    ker = sphere.wave_kernel_series(d, theta, L_max, w, _make_smoothing(cfg.get("smoothing"), L_max))
    meta = cfg.metadata()
    meta["expected_peak_w"] = repr(math.cos(theta))
    sphere.write_kernel_csv(ker, fh, meta)


def _run_orbit(cfg, fh, threads):
    model = cfg.model
    traj = classical.scattering_orbit(model, cfg.get("r_peri"), cfg.get("lambda"))
    meta = cfg.metadata()
    meta["deflection"] = repr(classical.deflection_angle(traj))
    if cfg.get("lambda") == 0.0:
        meta["deflection_law"] = repr(classical.deflection_law(model.mu))
    classical.write_trajectory_csv(traj, fh, meta)


def _run_flow(cfg, fh, threads):
    mu = cfg.get("mu") if cfg.get("mu") is not None else 1.0
    if not 0.0 < mu < 2.0:
        raise DomainError("mu must lie in (0,2)")
    k = cfg.get("k")
    tau_end = cfg.get("tau_end")
    z0 = classical.ReducedState(np.array([1.0, 0.0]), 0.0, np.array([0.0, math.sqrt(k)]))
    taus = np.linspace(-abs(tau_end), abs(tau_end), 201)
    mode = classical.FlowMode.FULL if k == 1.0 else classical.FlowMode.SIMPLIFIED
    back = classical.reduced_flow(z0, taus[0], mode, mu, tau_eval=taus[100::-1])
    fwd = classical.reduced_flow(z0, taus[-1], mode, mu, tau_eval=taus[100:])
    path = back[::-1] + fwd[1:]
    meta = cfg.metadata()
    meta["mode"] = mode.value
    classical.write_flow_csv(path, fh, meta)


def _run_phases(cfg, fh, threads):
    model = cfg.model
    res = phases.modifier_ladder(model, cfg.get("lambda_ladder"), cfg.get("kind"))
    meta = cfg.metadata()
    meta["regime"] = res[0].regime.value
    phases.write_ladder_csv(res, fh, meta)


def selftest_checks():
    """``[(name, error, tolerance)]`` for the identity suite."""
    rows = []
    for mu in (0.5, 1.0, 1.5):
        err = abs(radial.end_polar_quadrature(mu) - radial.end_polar_constant(mu))
        rows.append((f"end-polar integral mu={mu}", err, 1e-8))

    # generating functions of the Chebyshev and Gegenbauer families
    w = np.linspace(-1.0, 1.0, 9)
    t = 0.3
    n = np.arange(80)
    cheb = sum(sphere.tchebyshev(int(j), w) * t**j for j in n)
    rows.append(("Chebyshev generating function",
                 float(np.max(np.abs(cheb - (1 - t * w) / (1 - 2 * t * w + t * t)))), 1e-12))
    for alpha in (0.5, 1.5):
        geg = sum(sphere.gegenbauer(alpha, int(j), w) * t**j for j in n)
        rows.append((f"Gegenbauer generating function alpha={alpha}",
                     float(np.max(np.abs(geg - (1 - 2 * t * w + t * t) ** -alpha))), 1e-12))

    for k in (0.5, 1.0):
        mu = 1.0
        z0 = classical.ReducedState(np.array([1.0, 0.0]), 0.0, np.array([0.0, math.sqrt(k)]))
        taus = np.linspace(0.0, 10.0, 101)
        path = classical.reduced_flow(z0, 10.0, classical.FlowMode.SIMPLIFIED, mu, tau_eval=taus)
        b = np.array([z.b for _, z in path])
        err = float(np.max(np.abs(b - classical.simplified_b(k, mu, taus))))
        rows.append((f"reduced flow tanh law k={k}", err, 1e-6))

    m = PotentialModel(0.5, 1.0)
    r = np.array([1.0, 3.0, 10.0, 100.0])
    p = 1.0 - m.mu / 2.0
    h_closed = math.sqrt(2.0 * m.gamma) * p * r**p
    rows.append(("h closed form", float(np.max(np.abs(eval_h(m, r) / h_closed - 1.0))), 1e-10))

    m = PotentialModel(1.0, 1.5)
    rows.append(("eikonal residual", abs(classical.eikonal_residual(m, 4.0, 0.1)), 1e-5))
    return rows


def _run_selftest(cfg, fh, threads, echo=True):
    rows = selftest_checks()
    for key, val in cfg.metadata().items():
        if key == "command":
            fh.write(f"# {key}={val}\n")
    fh.write("check,error,tolerance,status\n")
    failed = 0
    for name, err, tol in rows:
        ok = err <= tol
        failed += not ok
        fh.write(f"{name},{err!r},{tol!r},{'PASS' if ok else 'FAIL'}\n")
        if echo:
            print(f"{'PASS' if ok else 'FAIL'}  {name:45s} err={err:.3e}  tol={tol:.0e}")
    if failed:
        raise ConvergenceError(f"{failed} self-test identities failed", {"rows": rows})


_RUNNERS = {
    "phase-shifts": _run_phase_shifts,
    "kernel": _run_kernel,
    "wave-kernel": _run_wave_kernel,
    "orbit": _run_orbit,
    "flow": _run_flow,
    "phases": _run_phases,
    "selftest": _run_selftest,
}


def render(cfg: RunConfig, threads: int = 1) -> str:
    """CSV text of ``cfg`` (raises on failure)."""
    buf = io.StringIO()
    _RUNNERS[cfg.command](cfg, buf, threads)
    return buf.getvalue()


def run(cfg: RunConfig, out_dir: str | os.PathLike = ".", threads: int | None = None) -> int:
    """Execute ``cfg`` and write its CSV; returns the exit status."""
    if threads is None:
        threads = cfg.get("threads") or os.cpu_count() or 1
    try:
        text = render(cfg, threads)
    except ConvergenceError as exc:
        logger.error("convergence error: %s", exc)
        return EXIT_CONVERGENCE
    except ZeroScatError as exc:
        logger.error("%s", exc)
        return EXIT_VALIDATION
    path = Path(out_dir) / (cfg.get("output_path") or _DEFAULT_NAMES[cfg.command])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        logger.error("cannot write %s: %s", path, exc)
        return EXIT_IO
    logger.info("wrote %s", path)
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="zeroscat", description="Zero-energy scattering computations.")
    ap.add_argument("--config", required=True, help="configuration file")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--threads", type=int, default=None, help="worker processes")
    ap.add_argument("--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        for ln, col, msg in exc.diagnostics:
            print(f"{args.config}:{ln}:{col}: {msg}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    return run(cfg, args.out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
