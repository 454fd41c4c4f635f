"""Experiment drivers shared by the command line and the test-suite."""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from fractions import Fraction

import numpy as np

from . import functionals as fn
from .analysis.bounds import check_exp_weighted_bounds
from .analysis.constants import constants_chain
from .analysis.support import SupportTrace, fit_spreading_exponent, support_edges
from .config import ExperimentConfig, build_initial
from .errors import ConfigError, FitFailure
from .model import ProblemParams, exact, growth_rate, regime_report, theorem_applicability, classify_regime
from .solver import SolverConfig, continue_global, continue_to_blowup, lift_initial_data, run_segment

log = logging.getLogger(__name__)


def thread_cap() -> int:
    raw = os.environ.get("THINFILM_THREADS", "")
    try:
        cap = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        raise ConfigError(f"THINFILM_THREADS must be an integer, got {raw!r}") from None
    return max(1, cap)


def pool_map(func, items):
    """Order-preserving map over independent runs on a capped worker pool."""
    items = list(items)
    workers = min(thread_cap(), max(1, len(items)))
    if workers == 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(func, items))


# -- simulate -------------------------------------------------------------------

def energy_checks(ledger, p: ProblemParams, tol_ineq: float) -> dict:
    E = ledger.column("energy")
    D = ledger.column("dissipation")
    out: dict = {}
    if p.a1 == 0:
        rise = float(np.max(np.diff(E))) if E.size > 1 else 0.0
        out["energy_max_increase"] = rise
        out["energy_monotone"] = rise <= 1e-10
    Ee = ledger.column("energy_eps")
    scale = max(abs(Ee[0]), D[-1], 1e-300)
    defect = float(np.max(np.abs(Ee + D - Ee[0]))) / scale
    out["energy_identity_defect"] = defect
    out["energy_identity_ok"] = defect <= tol_ineq
    return out


def mass_drift(ledger) -> float:
    M = ledger.column("mass")
    return float(np.max(np.abs(M - M[0])) / M[0])


def constancy_applies(p: ProblemParams) -> bool:
    return p.n_exact == p.m_exact and (p.a1 == 0 or p.length**2 < p.a0 / p.a1)


def simulate(cfg: ExperimentConfig):
    """Run ``simulate`` and build its report.  Returns ``(ledger, report)``."""
    p = cfg.problem
    scfg = replace(cfg.solver, keep_snapshots=True)
    h0 = build_initial(cfg)
    opts = cfg.simulate
    if opts.mode == "global":
        ledger = continue_global(h0, p, scfg, scfg.t_end, eps_interp=opts.eps_interp)
    else:
        hl = lift_initial_data(h0, scfg)
        _, ledger = run_segment(hl, p, scfg, scfg.t_end)
    if scfg.smooth:
        ledger.event("smoothing", 0.0, 0, note="initial data low-pass filtered before lifting")
    hl = fn.Field.on_grid(ledger.initial, p)
    consts = ledger.constants or constants_chain(
        p, scfg, fn.mass(hl), fn.entropy_value(hl, fn.EntropySpec(p.n)), fn.hx_sq(hl),
        eps_interp=opts.eps_interp, energy0=fn.energy(hl, p))

    checks: dict = {"mass_drift": mass_drift(ledger)}
    checks["mass_ok"] = checks["mass_drift"] <= 1e-10
    checks.update(energy_checks(ledger, p, opts.tol_ineq))
    weighted = check_exp_weighted_bounds(ledger, p, opts.tol_ineq)
    checks["weighted_bounds"] = weighted.to_dict()
    if cfg.initial.kind == "constant" and not cfg.initial.perturb:
        drift = max(float(np.max(np.abs(h - ledger.initial))) for _, h in ledger.snapshots)
        checks["constancy_drift"] = drift
        checks["constancy"] = ("PASS" if drift < 1e-12 else "FAIL") if constancy_applies(p) else "N/A"
    violated = [k for k in ("mass_ok", "energy_monotone", "energy_identity_ok") if checks.get(k) is False]
    if not weighted.passed:
        violated.append("weighted_bounds")
    if checks.get("constancy") == "FAIL":
        violated.append("constancy")
    report = {
        "command": "simulate",
        "mode": opts.mode,
        "problem": problem_dict(p),
        "seed": cfg.seed,
        "final_time": ledger.samples[-1].t,
        "steps": ledger.samples[-1].step,
        "collapsed": ledger.has_event("collapse"),
        "events": event_counts(ledger),
        "constants": consts.to_dict(),
        "checks": checks,
        "violations": violated,
        "segments": len(ledger.segments),
    }
    return ledger, report


def problem_dict(p: ProblemParams) -> dict:
    rep = regime_report(p)
    return {"n": p.n, "m": p.m, "a0": p.a0, "a1": p.a1, "a": p.a, "Nx": p.Nx,
            "regime": rep.regime.value, "existence_ok": rep.existence_ok, "fsp_ok": rep.fsp_ok,
            "blowup_ok": rep.blowup_ok, "critical_mass": rep.critical_mass}


def event_counts(ledger) -> dict:
    out: dict = {}
    for e in ledger.events:
        key = e["kind"] if e["kind"] != "reject" else f"reject:{e.get('reason')}"
        out[key] = out.get(key, 0) + 1
    return dict(sorted(out.items()))


# -- dispersion ---------------------------------------------------------------

def measure_growth(p: ProblemParams, scfg: SolverConfig, hbar: float, amplitude: float, mode: int,
                   t_end: float) -> tuple[float, float, float, float]:
    """Fitted exponential rate of mode ``mode`` of a perturbed flat film.

    Returns ``(xi, sigma_measured, sigma_formula, fit_residual)``; the formula
    uses the lifted film height.
    """
    xi = math.pi * mode / p.a
    x = p.grid()
    h0 = fn.Field.on_grid(hbar * (1.0 + amplitude * np.cos(xi * x)), p)
    run_cfg = replace(scfg, keep_snapshots=True, sample_every=max(1, scfg.sample_every))
    _, led = run_segment(lift_initial_data(h0, run_cfg), p, run_cfg, t_end)
    t = np.array([s[0] for s in led.snapshots])
    amp = np.array([abs(np.fft.rfft(h)[mode]) for _, h in led.snapshots]) * 2.0 / p.Nx
    keep = amp > 1e-13 * hbar
    A = np.column_stack([t[keep], np.ones(int(keep.sum()))])
    coef, *_ = np.linalg.lstsq(A, np.log(amp[keep]), rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - np.log(amp[keep])) ** 2)))
    hbar_lift = hbar + run_cfg.lift
    return xi, float(coef[0]), growth_rate(xi, hbar_lift, p), resid


def default_modes(p: ProblemParams, hbar: float) -> list[int]:
    if p.a1 == 0:
        return [1, 2, 3]
    edge = math.sqrt(p.a1 / p.a0 * hbar ** (p.m - p.n))
    kmax = max(1, int(math.floor(1.5 * edge * p.a / math.pi)))
    return list(range(1, kmax + 1))


def dispersion_table(p: ProblemParams, scfg: SolverConfig, hbar: float = 1.0, amplitude: float = 1e-6,
                     modes=None, t_end: float = 2.0, fit_tol: float = 1e-3):
    """Rows ``(xi, sigma_measured, sigma_formula, rel_err)``.

    ``rel_err`` is relative to the largest |sigma_formula| in the table so a
    neutral mode does not divide by zero.
    """
    modes = list(modes) if modes else default_modes(p, hbar)
    if any(k < 1 or k > p.Nx // 2 - 1 for k in modes):
        raise ConfigError("dispersion modes must lie in 1 .. Nx/2 - 1")

    def one(k):
        # long enough for growth, short enough that decaying modes stay above round-off
        sig = abs(growth_rate(math.pi * k / p.a, hbar, p))
        horizon = t_end if sig == 0 else min(t_end, 15.0 / sig)
        return measure_growth(p, scfg, hbar, amplitude, k, horizon)

    results = pool_map(one, modes)
    scale = max(abs(r[2]) for r in results) or 1.0
    rows = []
    for xi, sm, sf, resid in results:
        if resid > fit_tol:
            raise FitFailure(f"exponential fit residual {resid:.3g} at xi = {xi:.6g}")
        rows.append((xi, sm, sf, abs(sm - sf) / scale))
    return rows


# -- spreading ---------------------------------------------------------------

def spreading(cfg: ExperimentConfig):
    """Droplet run with support tracking.  Returns ``(trace, ledger, report)``."""
    p = cfg.problem
    if p.a1 > 0 and not cfg.spreading.allow_a1:
        log.warning("spreading with a1 > 0: the support law is stated for the stable equation")
    h0 = build_initial(cfg)
    xl0, xr0 = support_edges(h0, 0.0)
    center = h0.center
    r0 = max(abs(xl0 - center), abs(xr0 - center))
    scfg = cfg.solver
    _, ledger = run_segment(lift_initial_data(h0, scfg), p, scfg, scfg.t_end)
    trace = SupportTrace.from_ledger(ledger, r0, center=center, dx=p.dx)
    expo, C, resid = fit_spreading_exponent(trace, (cfg.spreading.t_a, cfg.spreading.t_b),
                                            cfg.spreading.min_samples)
    target = 1.0 / (p.n + 4.0)
    report = {
        "command": "spreading",
        "problem": problem_dict(p),
        "r0": r0,
        "window": [cfg.spreading.t_a, cfg.spreading.t_b],
        "fitted_exponent": expo,
        "fitted_C": C,
        "fit_residual": resid,
        "predicted_exponent": target,
        "exponent_error": expo - target,
        "supp_tol": scfg.support_tol,
        "events": event_counts(ledger),
    }
    return trace, ledger, report


# -- blow-up --------------------------------------------------------------------

def certify_blowup(cfg: ExperimentConfig):
    p = cfg.problem
    h0 = build_initial(cfg)
    opts = cfg.certify
    scfg = cfg.solver
    if not math.isfinite(scfg.h1_cap):
        scfg = replace(scfg, h1_cap=opts.h1_factor * fn.h1_norm(lift_initial_data(h0, scfg)))
    ledger, cert = continue_to_blowup(h0, p, scfg, force=opts.force, eps_interp=opts.eps_interp,
                                      tol_ineq=opts.tol_ineq)
    report = {
        "command": "certify-blowup",
        "problem": problem_dict(p),
        "certificate": cert.to_dict(),
        "h1_cap": scfg.h1_cap,
        "constants": ledger.constants.to_dict() if ledger.constants else None,
        "events": event_counts(ledger),
    }
    return ledger, cert, report


# -- regime map ----------------------------------------------------------------

def _frange(lo: Fraction, hi: Fraction, step: Fraction) -> list[Fraction]:
    if step <= 0:
        raise ConfigError("regime step must be positive")
    out = []
    v = lo
    while v <= hi:
        out.append(v)
        v += step
    return out


def regime_rows(cfg: ExperimentConfig) -> list[tuple]:
    r = cfg.regime
    p = cfg.problem
    try:
        n_lo = exact(r.n_min) if r.n_min else p.n_exact
        n_hi = exact(r.n_max) if r.n_max else n_lo
        m_lo = exact(r.m_min) if r.m_min else p.m_exact
        m_hi = exact(r.m_max) if r.m_max else m_lo
        n_step, m_step = exact(r.n_step), exact(r.m_step)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"regime: {exc}") from None
    cells = [(n, m) for n in _frange(n_lo, n_hi, n_step) for m in _frange(m_lo, m_hi, m_step)]

    def one(cell):
        n, m = cell
        if n <= 0 or m <= 0:
            raise ConfigError("regime ranges must stay positive")
        q = ProblemParams(n, m, a0=p.a0, a1=p.a1, a=p.a, Nx=p.Nx)
        return (n, m, classify_regime(q).value) + theorem_applicability(q)

    return pool_map(one, cells)
