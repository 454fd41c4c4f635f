"""Implicit integration of the regularised thin film problem on a periodic grid.

The scheme is backward Euler in conservative flux form::

    h_new = h_old - dt * Div[ F * (a0 * D3 h_new + a1 * S * D1 h_new) ]

with face mobility ``F`` (arithmetic mean of the nodal regularised mobility)
and face pressure coupling ``S`` (secant of ``D_eps'`` across the face), both
frozen at a coefficient state ``h_dag``.  In ``"lagged"`` mode ``h_dag`` is the
previous time level and one cyclic pentadiagonal solve is made per step.  In
``"newton"`` mode the coefficients are re-frozen at the latest iterate until
the nonlinear residual drops below ``newton_tol``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import functionals as fn
from .errors import (
    LinearSolveFailure,
    DomainTooSmall,
    EmptyData,
    NoBlowupWithinHorizon,
    NotNegativeEnergy,
    RegionError,
)
from .linalg import cyclic_matvec, solve_cyclic_penta
from .model import ProblemParams, Regime, classify_regime, critical_mass, theorem_applicability

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    eps: float = 1e-6
    delta: float = 0.0
    theta: float = 0.3
    dt_init: float = 1e-6
    dt_min: float = 1e-14
    dt_max: float = math.inf
    # cap on dt / t, keeps self-similar runs accurate over many decades
    dt_rel: float = math.inf
    t_end: float = 1.0
    newton_tol: float = 1e-9
    newton_max: int = 25
    h1_cap: float = math.inf
    supp_tol: float | None = None
    mode: str = "lagged"
    sample_every: int = 10
    # relative sup-norm change above which a step is rejected as unresolved
    max_change: float = 0.25
    alpha: float = 0.5
    smooth: bool = False
    # floor on segment length; None means dt_init (the printed T_loc can be astronomically small)
    seg_min: float | None = None
    seg_max: float = math.inf
    grow_after: int = 5
    grow_factor: float = 1.2
    max_steps: int = 2_000_000
    keep_snapshots: bool = False

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be > 0")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if not 0 < self.theta < 0.4:
            raise ValueError("theta must lie in (0, 2/5)")
        if not 0 < self.dt_min < self.dt_init:
            raise ValueError("need 0 < dt_min < dt_init")
        if not self.dt_max >= self.dt_init:
            raise ValueError("dt_max must be >= dt_init")
        if not (self.newton_tol > 0 and self.h1_cap > 0 and self.max_change > 0):
            raise ValueError("tolerances must be positive")
        if self.supp_tol is not None and not self.supp_tol > 0:
            raise ValueError("supp_tol must be positive")
        if self.mode not in ("lagged", "newton"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.newton_max < 1 or self.sample_every < 1:
            raise ValueError("newton_max and sample_every must be >= 1")

    @property
    def lift(self) -> float:
        return self.eps**self.theta

    @property
    def segment_floor(self) -> float:
        return self.dt_init if self.seg_min is None else self.seg_min

    @property
    def support_tol(self) -> float:
        return self.supp_tol if self.supp_tol is not None else 10.0 * self.lift


@dataclass
class FunctionalSample:
    t: float
    mass: float
    energy: float
    entropy: float
    alpha_entropy: float
    hx_sq: float
    sup: float
    moment: float
    B1: float
    B2: float
    Btilde: float
    # not part of ledger.csv
    h1: float = math.nan
    energy_eps: float = math.nan
    dissipation: float = 0.0
    x2_hxx_sq: float = math.nan
    g_weight: float = 0.0
    k2_integral: float = 0.0
    step: int = 0
    dt: float = math.nan


@dataclass
class RunLedger:
    samples: list[FunctionalSample] = field(default_factory=list)
    support: list[tuple[float, float]] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    segments: list[dict] = field(default_factory=list)
    snapshots: list[tuple[float, np.ndarray]] = field(default_factory=list)
    initial: np.ndarray | None = None
    domain: tuple[float, float, float] | None = None  # (lower end, upper end, dx)
    constants: object | None = None

    def event(self, kind: str, t: float, step: int, **detail):
        self.events.append({"kind": kind, "t": t, "step": step, **detail})

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.samples], dtype=float)

    @property
    def times(self) -> np.ndarray:
        return self.column("t")

    def has_event(self, kind: str) -> bool:
        return any(e["kind"] == kind for e in self.events)


@dataclass
class RunState:
    h: fn.Field
    t: float
    dt: float
    ledger: RunLedger
    step_count: int = 0
    accepts_in_row: int = 0
    B1: float = 0.0
    B2: float = 0.0
    Btilde: float = 0.0
    dissipation: float = 0.0
    g_weight: float = 0.0
    k2_integral: float = 0.0
    collapsed: bool = False
    stop_reason: str = ""


@dataclass
class StepReport:
    accepted: bool
    h: np.ndarray | None
    residual: float
    iterations: int
    dt_used: float
    dt_next: float
    reason: str = ""
    dissipation: float = 0.0


# -- initial data -------------------------------------------------------------

def lowpass(values: np.ndarray) -> np.ndarray:
    """Zero every Fourier mode above a third of the grid wavenumbers."""
    spec = np.fft.rfft(values)
    cut = values.size // 3
    spec[cut + 1:] = 0.0
    return np.fft.irfft(spec, n=values.size)


def lift_initial_data(h0: fn.Field, cfg: SolverConfig) -> fn.Field:
    if np.any(h0.values < 0):
        raise ValueError("initial data must be nonnegative")
    if not fn.mass(h0) > 0:
        raise EmptyData("initial data has zero mass")
    values = h0.values
    extra = 0.0
    if cfg.smooth:
        values = lowpass(values)
        extra = max(0.0, -float(values.min()))
        log.warning("initial data low-pass smoothed (extra lift %.3g)", extra)
    return h0.with_values(values + cfg.lift + extra)


# -- discrete operator -----------------------------------------------------------

@dataclass
class _FaceCoefficients:
    F: np.ndarray
    S: np.ndarray


def _coefficients(h: np.ndarray, p: ProblemParams, cfg: SolverConfig) -> _FaceCoefficients:
    F = fn.face_mobility(h, np.roll(h, -1), p.n, cfg.eps, cfg.delta)
    if p.a1:
        S = fn.pressure_coupling_secant(h, np.roll(h, -1), p.n, p.m, cfg.eps)
    else:
        S = np.zeros_like(h)
    return _FaceCoefficients(F, S)


def face_flux(h: np.ndarray, c: _FaceCoefficients, p: ProblemParams, dx: float) -> np.ndarray:
    """Flux through face i+1/2, ``F (a0 h_xxx + a1 S h_x)``."""
    return c.F * (p.a0 * fn.face_third_derivative(h, dx) + p.a1 * c.S * fn.face_gradient(h, dx))


def flux_divergence(J: np.ndarray, dx: float) -> np.ndarray:
    return (J - np.roll(J, 1)) / dx


def _system_diagonals(c: _FaceCoefficients, p: ProblemParams, dx: float, dt: float) -> np.ndarray:
    """Row-diagonal form of ``I + dt * Div J(.)`` for offsets -2..2."""
    F = c.F
    g3 = p.a0 * F / dx**3
    g1 = p.a1 * F * c.S / dx
    # J_j = cm1*h[j-1] + c0*h[j] + c1*h[j+1] + c2*h[j+2]
    cm1 = -g3
    c0 = 3 * g3 - g1
    c1 = -3 * g3 + g1
    c2 = g3
    # row i: (J_i - J_{i-1}) / dx
    Jm = lambda arr: np.roll(arr, 1)  # noqa: E731  coefficient of face i-1
    d = np.zeros((5, F.size))
    d[0] = -Jm(cm1)                  # h[i-2]
    d[1] = cm1 - Jm(c0)              # h[i-1]
    d[2] = c0 - Jm(c1)               # h[i]
    d[3] = c1 - Jm(c2)               # h[i+1]
    d[4] = c2                        # h[i+2]
    d *= dt / dx
    d[2] += 1.0
    return d


def _dissipation(h: np.ndarray, c: _FaceCoefficients, p: ProblemParams, dx: float) -> float:
    inner = p.a0 * fn.face_third_derivative(h, dx) + p.a1 * c.S * fn.face_gradient(h, dx)
    return float(np.sum(c.F * inner * inner) * dx)


def _row_norm(diags: np.ndarray) -> float:
    return float(np.max(np.sum(np.abs(diags), axis=0)))


def implicit_step(state: RunState, p: ProblemParams, cfg: SolverConfig) -> StepReport:
    """Attempt one backward Euler step of size ``state.dt``; never mutates ``state``."""
    h_old = state.h.values
    dx = state.h.dx
    dt = state.dt
    scale = max(float(np.max(np.abs(h_old))), 1e-300)

    # residuals are backward errors: max |r| over (scale * ||I + dt DivJ||_inf)
    h_dag = h_old
    residual = math.inf
    iters = 0
    for iters in range(1, (cfg.newton_max if cfg.mode == "newton" else 1) + 1):
        coef = _coefficients(h_dag, p, cfg)
        diags = _system_diagonals(coef, p, dx, dt)
        h_lin = solve_cyclic_penta(diags, h_old)
        if cfg.mode == "lagged":
            r = cyclic_matvec(diags, h_lin) - h_old
            residual = float(np.max(np.abs(r))) / (scale * _row_norm(diags))
            break
        if not np.all(h_lin > 0):
            break
        c_new = _coefficients(h_lin, p, cfg)
        d_new = _system_diagonals(c_new, p, dx, dt)
        r = cyclic_matvec(d_new, h_lin) - h_old
        residual = float(np.max(np.abs(r))) / (scale * _row_norm(d_new))
        h_dag = h_lin
        if residual < cfg.newton_tol:
            break
    # conservative update: the telescoping flux sum keeps the mass to round-off
    h_new = h_old - dt * flux_divergence(face_flux(h_lin, coef, p, dx), dx)

    reason = ""
    if not np.all(np.isfinite(h_new)):
        reason = "nonfinite"
    elif residual >= cfg.newton_tol:
        reason = "residual"
    elif float(h_new.min()) <= 0.0:
        reason = "positivity"
    elif float(np.max(np.abs(h_new - h_old))) > cfg.max_change * scale:
        reason = "change"
    if reason:
        return StepReport(False, None, residual, iters, dt, 0.5 * dt, reason)

    dt_next = dt
    if state.accepts_in_row + 1 >= cfg.grow_after:
        dt_next = min(dt * cfg.grow_factor, cfg.dt_max)
    return StepReport(True, h_new, residual, iters, dt, dt_next, "",
                      dt * _dissipation(h_new, coef, p, dx))


# -- sampling -----------------------------------------------------------------

def _entropy_specs(p: ProblemParams, cfg: SolverConfig) -> tuple[fn.EntropySpec, fn.EntropySpec]:
    return fn.EntropySpec(p.n), fn.EntropySpec(p.n, alpha=cfg.alpha)


def sample_state(state: RunState, p: ProblemParams, cfg: SolverConfig) -> FunctionalSample:
    h = state.h
    ent, alpha_ent = _entropy_specs(p, cfg)
    moment = fn.second_moment_entropy(h, p.n) if 0 < p.n < 2 else math.nan
    return FunctionalSample(
        t=state.t,
        mass=fn.mass(h),
        energy=fn.energy(h, p),
        entropy=fn.entropy_value(h, ent),
        alpha_entropy=fn.entropy_value(h, alpha_ent),
        hx_sq=fn.hx_sq(h),
        sup=fn.sup_norm(h),
        moment=moment,
        B1=state.B1,
        B2=state.B2,
        Btilde=state.Btilde,
        h1=fn.h1_norm(h),
        energy_eps=fn.energy_eps(h, p, cfg.eps),
        dissipation=state.dissipation,
        x2_hxx_sq=fn.moment_hxx_sq(h),
        g_weight=state.g_weight,
        k2_integral=state.k2_integral,
        step=state.step_count,
        dt=state.dt,
    )


def _record(state: RunState, p: ProblemParams, cfg: SolverConfig):
    from .analysis.support import support_edges

    led = state.ledger
    if led.samples and state.t <= led.samples[-1].t:
        return
    led.samples.append(sample_state(state, p, cfg))
    led.support.append(support_edges(state.h, cfg.support_tol))
    if cfg.keep_snapshots:
        led.snapshots.append((state.t, state.h.values.copy()))


def new_state(h0: fn.Field, cfg: SolverConfig, ledger: RunLedger | None = None) -> RunState:
    if np.any(h0.values <= 0):
        raise ValueError("run_segment needs lifted, strictly positive data")
    led = ledger if ledger is not None else RunLedger()
    if led.initial is None:
        led.initial = h0.values.copy()
        lo = h0.origin - 0.5 * h0.dx
        led.domain = (lo, lo + h0.length, h0.dx)
    return RunState(h=h0, t=0.0, dt=cfg.dt_init, ledger=led)


StopHook = Callable[[RunState], str]


def advance(state: RunState, p: ProblemParams, cfg: SolverConfig, t_stop: float,
            stop_hook: StopHook | None = None) -> RunState:
    """Advance ``state`` in place to ``t_stop`` (or until a stop condition fires)."""
    led = state.ledger
    if not led.samples:
        _record(state, p, cfg)
    since_sample = 0
    while state.t < t_stop * (1 - 1e-14) and not state.collapsed:
        if state.step_count >= cfg.max_steps:
            state.stop_reason = "max_steps"
            led.event("max_steps", state.t, state.step_count)
            break
        if math.isfinite(cfg.dt_rel):
            state.dt = min(state.dt, max(cfg.dt_rel * state.t, cfg.dt_init))
        dt = min(state.dt, t_stop - state.t)
        trial = replace(state, dt=dt) if dt != state.dt else state
        try:
            rep = implicit_step(trial, p, cfg)
        except LinearSolveFailure as exc:
            rep = StepReport(False, None, math.inf, 0, dt, 0.5 * dt, f"linear: {exc}")
        if not rep.accepted:
            led.event("reject", state.t, state.step_count, reason=rep.reason, dt=dt,
                      residual=rep.residual)
            state.accepts_in_row = 0
            state.dt = rep.dt_next
            if state.dt < cfg.dt_min:
                state.collapsed = True
                state.stop_reason = "collapse"
                led.event("collapse", state.t, state.step_count, dt=state.dt)
            continue
        sup_old = float(np.max(state.h.values))
        x2_old = fn.moment_hxx_sq(state.h)
        w_old = math.exp(-state.Btilde)
        state.h = state.h.with_values(rep.h)
        state.t += rep.dt_used
        state.step_count += 1
        sup_new = float(np.max(rep.h))
        for name in ("B1", "B2", "Btilde"):
            r0, r1 = fn.weight_rate([sup_old, sup_new], p, name)
            setattr(state, name, getattr(state, name) + 0.5 * (r0 + r1) * rep.dt_used)
        w_new = math.exp(-state.Btilde)
        state.g_weight += 0.5 * (w_old + w_new) * rep.dt_used
        state.k2_integral += 0.5 * (w_old * x2_old + w_new * fn.moment_hxx_sq(state.h)) * rep.dt_used
        state.dissipation += rep.dissipation
        state.accepts_in_row += 1
        if dt == state.dt:
            # a step clipped to hit t_stop does not drive the step-size controller
            if rep.dt_next > state.dt:
                state.accepts_in_row = 0
            state.dt = rep.dt_next
        since_sample += 1
        reason = stop_hook(state) if stop_hook else ""
        if reason:
            state.stop_reason = reason
            led.event(reason, state.t, state.step_count)
            _record(state, p, cfg)
            break
        if since_sample >= cfg.sample_every:
            _record(state, p, cfg)
            since_sample = 0
    _record(state, p, cfg)
    return state


def run_segment(h0: fn.Field, p: ProblemParams, cfg: SolverConfig,
                t_span: tuple[float, float] | float) -> tuple[RunState, RunLedger]:
    if isinstance(t_span, tuple):
        t0, t1 = t_span
    else:
        t0, t1 = 0.0, float(t_span)
    if t1 < t0:
        raise ValueError("t_span must be increasing")
    state = new_state(h0, cfg)
    state.t = t0
    advance(state, p, cfg, t1)
    return state, state.ledger


# -- continuation ------------------------------------------------------------

def continue_global(h0: fn.Field, p: ProblemParams, cfg: SolverConfig, t_goal: float,
                    eps_interp: float = 0.1) -> RunLedger:
    """March over the local-existence schedule up to ``t_goal``.

    ``h0`` is the unlifted initial datum; the lift is applied here.
    """
    from .analysis.constants import constants_chain, tloc_estimate

    regime = classify_regime(p)
    if regime is Regime.SUPERCRITICAL:
        raise RegionError("global continuation needs m <= n + 2")
    if regime is Regime.CRITICAL:
        if p.a1 > 0 and fn.mass(h0) >= critical_mass(p, eps_interp):
            raise RegionError("critical regime needs mass below the critical mass")
    if not theorem_applicability(p)[0]:
        raise RegionError("existence needs m >= n/2")
    led = RunLedger()
    if t_goal <= 0:
        return led
    hl = lift_initial_data(h0, cfg)
    ent = fn.EntropySpec(p.n)
    consts = constants_chain(p, cfg, fn.mass(hl), fn.entropy_value(hl, ent), fn.hx_sq(hl),
                             eps_interp=eps_interp, energy0=fn.energy(hl, p))
    led.constants = consts
    state = new_state(hl, cfg, led)
    while state.t < t_goal * (1 - 1e-14) and not state.collapsed and state.stop_reason != "max_steps":
        raw = tloc_estimate(consts, state.h)
        used = min(max(raw, cfg.segment_floor), cfg.seg_max, t_goal - state.t)
        led.segments.append({"t_start": state.t, "t_loc": raw, "t_used": used,
                             "entropy": fn.entropy_value(state.h, ent)})
        if raw < cfg.segment_floor:
            led.event("tloc_floor", state.t, state.step_count, t_loc=raw)
        advance(state, p, cfg, state.t + used)
    return led


def continue_to_blowup(h0: fn.Field, p: ProblemParams, cfg: SolverConfig,
                       force: bool = False, eps_interp: float = 0.1, tol_ineq: float = 0.05):
    """Run until the H1 norm exceeds ``cfg.h1_cap`` or the step size collapses.

    Returns ``(ledger, certificate)``.
    """
    from .analysis.certificates import moment_certificate
    from .analysis.constants import constants_chain, tloc_estimate
    from .analysis.support import support_edges

    if not force and not theorem_applicability(p)[2]:
        raise RegionError(f"(n, m) = ({p.n}, {p.m}) lies outside the blow-up region")
    E0 = fn.energy(h0, p)
    if not E0 < 0:
        raise NotNegativeEnergy(f"initial energy {E0:.6g} is not negative")
    tol0 = 0.5 * float(np.max(h0.values)) * 1e-12
    xl, xr = support_edges(h0, tol0)
    margin = 0.2 * h0.length
    lo = h0.center - 0.5 * h0.length
    if not (xl - lo >= margin and lo + h0.length - xr >= margin):
        raise DomainTooSmall("initial support must keep a 20% margin from the boundary")

    hl = lift_initial_data(h0, cfg)
    led = RunLedger()
    state = new_state(hl, cfg, led)
    ent = fn.EntropySpec(p.n)
    consts = constants_chain(p, cfg, fn.mass(hl), fn.entropy_value(hl, ent), fn.hx_sq(hl),
                             eps_interp=eps_interp, energy0=fn.energy(hl, p))
    led.constants = consts
    boundary = (lo + state.h.dx, lo + h0.length - state.h.dx)

    def hook(s: RunState) -> str:
        if fn.h1_norm(s.h) > cfg.h1_cap:
            return "h1_cap"
        el, er = support_edges(s.h, cfg.support_tol)
        if el <= boundary[0] or er >= boundary[1]:
            return "boundary"
        return ""

    while state.t < cfg.t_end * (1 - 1e-14):
        raw = tloc_estimate(consts, state.h)
        used = min(max(raw, cfg.segment_floor), cfg.seg_max, cfg.t_end - state.t)
        led.segments.append({"t_start": state.t, "t_loc": raw, "t_used": used})
        if raw < cfg.segment_floor:
            led.event("tloc_floor", state.t, state.step_count, t_loc=raw)
        advance(state, p, cfg, state.t + used, stop_hook=hook)
        if state.stop_reason or state.collapsed:
            break
    if state.stop_reason == "boundary":
        raise DomainTooSmall("support reached the domain boundary")
    if not (state.stop_reason == "h1_cap" or state.collapsed):
        raise NoBlowupWithinHorizon(f"no blow-up detected up to t = {state.t:.6g}", ledger=led)
    cert = moment_certificate(led, p, tol_ineq=tol_ineq, h0=h0, T_star=state.t)
    cert.trigger = "h1_cap" if state.stop_reason == "h1_cap" else "dt_collapse"
    cert.h1_initial = led.samples[0].h1
    cert.h1_final = fn.h1_norm(state.h)
    cert.dt_final = state.dt
    return led, cert
