from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import discrete_fourth_order_rate
from thinfilm import functionals as fn
from thinfilm.errors import DomainTooSmall, EmptyData, NoBlowupWithinHorizon, NotNegativeEnergy, RegionError
from thinfilm.model import ProblemParams
from thinfilm.solver import (
    RunState,
    SolverConfig,
    continue_global,
    continue_to_blowup,
    implicit_step,
    lift_initial_data,
    new_state,
    run_segment,
)


def field(p, func):
    return fn.Field.from_function(func, p)


def test_config_validation():
    for bad in (dict(eps=0), dict(theta=0.5), dict(dt_init=1e-20), dict(mode="rk4"), dict(delta=-1)):
        with pytest.raises(ValueError):
            SolverConfig(**bad)


def test_lift_values():
    p = ProblemParams(1, 1, Nx=64)
    cfg = SolverConfig(eps=1e-6)
    h0 = field(p, lambda x: np.clip(1 - x * x, 0, None))
    hl = lift_initial_data(h0, cfg)
    assert cfg.lift == pytest.approx(1e-6**0.3)
    assert cfg.lift == pytest.approx(1.585e-2, rel=1e-3)
    assert fn.mass(hl) == pytest.approx(fn.mass(h0) + p.length * cfg.lift, rel=1e-14)
    assert hl.values.min() >= cfg.lift
    with pytest.raises(EmptyData):
        lift_initial_data(field(p, lambda x: 0 * x), cfg)


def test_lift_with_smoothing_stays_above_lift():
    p = ProblemParams(1, 1, Nx=128)
    cfg = SolverConfig(eps=1e-6, smooth=True)
    hl = lift_initial_data(field(p, lambda x: (np.abs(x) < 1).astype(float)), cfg)
    assert hl.values.min() >= cfg.lift - 1e-15


@pytest.mark.parametrize("n,m,a0,a1", [(1, 1, 1, 1), (2, 3.5, 0.3, 2), (0.5, 0.4, 1, 0)])
def test_constant_is_fixed_point(n, m, a0, a1):
    p = ProblemParams(n, m, a0=a0, a1=a1, Nx=64)
    cfg = SolverConfig(eps=1e-6, dt_init=1e-3, dt_max=1e-3)
    st_ = new_state(field(p, lambda x: 0.7 + 0 * x), cfg)
    rep = implicit_step(st_, p, cfg)
    assert rep.accepted
    assert np.max(np.abs(rep.h - 0.7)) < 1e-13


def test_zero_length_span_gives_single_sample():
    p = ProblemParams(1, 1, Nx=64)
    cfg = SolverConfig()
    st_, led = run_segment(lift_initial_data(field(p, lambda x: 1 + 0.1 * np.cos(x)), cfg), p, cfg, 0.0)
    assert len(led.samples) == 1 and st_.t == 0.0


@settings(max_examples=15)
@given(st.floats(0.5, 2.5), st.floats(0.5, 4), st.floats(0.1, 2), st.integers(1, 4), st.floats(0.05, 0.6))
def test_mass_conservation_and_positivity(n, m, a1, k, amp):
    p = ProblemParams(n, m, a1=a1, Nx=64)
    cfg = SolverConfig(eps=1e-6, dt_init=1e-5, t_end=0.02, sample_every=1)
    h0 = lift_initial_data(field(p, lambda x: 1 + amp * np.cos(k * x)), cfg)
    st_, led = run_segment(h0, p, cfg, 0.02)
    M = led.column("mass")
    assert np.max(np.abs(M - M[0])) / M[0] <= 1e-10
    assert all(e["kind"] != "collapse" for e in led.events)
    assert st_.h.values.min() > 0


def test_stable_decay_rate_matches_assembled_operator():
    # a1 = 0: the mode decays at the backward-Euler rate of the discrete fourth difference
    p = ProblemParams(1, 1, a1=0, Nx=128)
    dt = 1e-3
    cfg = SolverConfig(eps=1e-12, dt_init=dt, dt_max=dt, t_end=0.5, sample_every=1, keep_snapshots=True)
    h0 = field(p, lambda x: 1 + 1e-6 * np.cos(2 * x))
    _, led = run_segment(lift_initial_data(h0, cfg), p, cfg, 0.5)
    t = np.array([s[0] for s in led.snapshots])
    amp = np.array([abs(np.fft.rfft(h)[2]) for _, h in led.snapshots])
    measured = np.polyfit(t, np.log(amp), 1)[0]
    hbar = 1 + cfg.lift
    oracle = discrete_fourth_order_rate(2, p.Nx, p.dx, p.a0, fn.mobility(hbar, 1, cfg.eps), dt)
    assert measured == pytest.approx(oracle, rel=1e-4)
    assert measured == pytest.approx(-16 * hbar, rel=2e-2)  # continuum -a0 xi^4 hbar^n


def test_energy_nonincreasing_without_destabilisation():
    p = ProblemParams(1.5, 1, a1=0, Nx=128)
    cfg = SolverConfig(eps=1e-8, dt_init=1e-6, t_end=0.2, sample_every=1)
    h0 = lift_initial_data(field(p, lambda x: 1 + 0.5 * np.cos(x) + 0.3 * np.sin(3 * x)), cfg)
    _, led = run_segment(h0, p, cfg, 0.2)
    assert np.max(np.diff(led.column("energy"))) <= 1e-10


def test_eps_refinement_is_monotone():
    p = ProblemParams(1, 1, Nx=64)
    h0 = field(p, lambda x: 0.2 + 0.15 * np.cos(x))
    finals = []
    for eps in (1e-3, 5e-4, 2.5e-4):
        cfg = SolverConfig(eps=eps, theta=0.3, dt_init=1e-4, dt_max=1e-3, t_end=0.5)
        st_, _ = run_segment(lift_initial_data(h0, cfg), p, cfg, 0.5)
        finals.append(st_.h.values)
    d1 = np.max(np.abs(finals[0] - finals[1]))
    d2 = np.max(np.abs(finals[1] - finals[2]))
    assert d2 < d1


def test_global_continuation_schedule():
    p = ProblemParams(1, 1, Nx=64)
    cfg = SolverConfig(eps=1e-6, dt_init=1e-6)
    h0 = field(p, lambda x: 1 + 0.5 * np.cos(x))
    assert continue_global(h0, p, cfg, 0.0).samples == []
    t_goal = 4e-3
    led = continue_global(h0, p, cfg, t_goal)
    first = led.segments[0]["t_loc"]
    assert len(led.segments) >= math.ceil(t_goal / first)
    assert led.samples[-1].t == pytest.approx(t_goal)
    # entropy growth stays under the linear-in-time envelope
    beta = led.constants.entropy_growth
    G0 = led.segments[0]["entropy"]
    for seg in led.segments:
        assert seg["entropy"] <= G0 + beta * seg["t_start"] + 1e-12


def test_global_continuation_preconditions():
    cfg = SolverConfig()
    p = ProblemParams(1, 3.5, Nx=64)
    with pytest.raises(RegionError):
        continue_global(field(p, lambda x: 1 + 0 * x), p, cfg, 1.0)
    pc = ProblemParams(1, 3, Nx=64)
    with pytest.raises(RegionError):
        continue_global(field(pc, lambda x: 1 + 0 * x), pc, cfg, 1.0)  # mass 2 pi > critical mass


def _bump(p, A):
    return field(p, lambda x: np.where(np.abs(x) < math.pi, A * (1 + np.cos(x)), 0.0))


def test_blowup_guards():
    p = ProblemParams(1, 3, a=3 * math.pi, Nx=256)
    cfg = SolverConfig(eps=1e-12, t_end=0.01)
    with pytest.raises(NotNegativeEnergy):
        continue_to_blowup(_bump(p, 0.5), p, cfg)
    tight = ProblemParams(1, 3, a=1.2 * math.pi, Nx=256)
    with pytest.raises(DomainTooSmall):
        continue_to_blowup(_bump(tight, 1.5), tight, cfg)
    with pytest.raises(RegionError):
        q = ProblemParams(1, 2, a=3 * math.pi, Nx=256)
        continue_to_blowup(_bump(q, 1.5), q, cfg)


def test_stable_equation_has_no_negative_energy():
    p = ProblemParams(1, 3, a1=0, a=3 * math.pi, Nx=256)
    cfg = SolverConfig(eps=1e-12, dt_init=1e-6, t_end=0.05, h1_cap=1e3)
    with pytest.raises(NotNegativeEnergy):
        continue_to_blowup(_bump(p, 1.5), p, cfg, force=True)


def test_short_horizon_reports_no_blowup():
    q = ProblemParams(1, 3, a1=1e-3, a=3 * math.pi, Nx=256)
    h0 = _bump(q, 40.0)
    assert fn.energy(h0, q) < 0
    with pytest.raises(NoBlowupWithinHorizon) as info:
        continue_to_blowup(h0, q, SolverConfig(eps=1e-12, dt_init=1e-8, t_end=1e-5, h1_cap=1e6))
    assert info.value.ledger.samples
