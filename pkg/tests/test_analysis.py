from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import rk4_comparison
from thinfilm import functionals as fn
from thinfilm.analysis import (
    StampacchiaSystem,
    SupportTrace,
    bihari_bound,
    check_exp_weighted_bounds,
    constants_chain,
    fit_spreading_exponent,
    interpolation_bound,
    localized_integrals,
    moment_certificate,
    sampled,
    stampacchia_s0,
    support_edges,
    tloc_estimate,
)
from thinfilm.analysis.constants import b_constants, tloc_from_functional
from thinfilm.errors import (
    BadShape,
    BoundaryContact,
    ExponentOutOfRange,
    HypothesisFailed,
    InsufficientSpread,
)
from thinfilm.model import ProblemParams
from thinfilm.solver import RunLedger, SolverConfig, lift_initial_data, run_segment

GOLDEN = json.loads((Path(__file__).parent / "golden" / "constants.json").read_text())


# -- interpolation ------------------------------------------------------------

def test_interpolation_p1_is_mass():
    assert interpolation_bound(1.0, 2.5, 7.0, 2 * math.pi) == 2.5


def test_interpolation_constant_field_sharp_as_eps_to_one():
    L, C = 2 * math.pi, 1.3
    M = C * L
    for p_exp in (2.0, 4.0):
        exact = C**p_exp * L
        ratios = [interpolation_bound(p_exp, M, 0.0, L, eps_interp=1 - d) / exact
                  for d in (1e-1, 1e-3, 1e-6, 1e-12)]
        assert all(r >= 1.0 for r in ratios)
        assert all(a > b for a, b in zip(ratios, ratios[1:]))
        assert ratios[-1] < 1 + 1e-3


def test_interpolation_bounds_random_fields():
    rng = np.random.default_rng(7)
    p = ProblemParams(1, 1, Nx=512)
    x = p.grid()
    for _ in range(50):
        coef = rng.normal(size=4)
        raw = 1 + sum(c * np.sin((k + 1) * x + rng.uniform(0, 2 * np.pi)) / (k + 1) for k, c in enumerate(coef))
        h = np.abs(raw)
        h *= 1.0 / (np.sum(h) * p.dx)  # unit mass
        f = fn.Field.on_grid(h, p)
        lp = float(np.sum(h**4) * p.dx)
        assert lp <= interpolation_bound(4.0, 1.0, fn.hx_sq(f), p.length)


# -- constants --------------------------------------------------------------------

class _Cfg:
    def __init__(self, eps, delta, alpha=0.5):
        self.eps, self.delta, self.alpha = eps, delta, alpha


@pytest.mark.parametrize("case", GOLDEN, ids=["n1m3", "n1m1", "n04m03"])
def test_constants_golden(case):
    i = case["inputs"]
    p = ProblemParams(i["n"], i["m"], a0=i["a0"], a1=i["a1"], a=i["L"] / 2)
    led = constants_chain(p, _Cfg(i["eps"], i["delta"]), i["M"], i["G0"], i["hx0"])
    for key, val in case["expected"].items():
        assert getattr(led, key) == pytest.approx(val, rel=1e-12, abs=0.0), key


def test_constants_examples():
    p = ProblemParams(1, 3, a0=2, a1=4)
    led = constants_chain(p, _Cfg(1e-6, 0.0), 1.0, 0.2, 0.3)
    assert led.c2 == pytest.approx(2.0)
    assert ProblemParams(1, 3) and constants_chain(ProblemParams(1, 3), _Cfg(1e-6, 0), 1, 0, 0).gamma1 == 5
    z = constants_chain(ProblemParams(1, 3, a1=0), _Cfg(1e-6, 0.0), 1.0, 0.4, 0.3)
    assert z.c2 == z.c3 == z.c4 == 0
    assert z.K == pytest.approx(2 ** (1 / 4) * 1.0)
    b = b_constants(3.0, 2.0)
    assert b["b1"] == pytest.approx(8.0)
    assert b["b4"] == pytest.approx(4.0 * b["b3"])
    assert b["b5"] == pytest.approx(1.0)
    assert b_constants(4.0, 1.0)["b2"] == pytest.approx(2.0)


def test_tloc_branches():
    led = constants_chain(ProblemParams(1, 3), _Cfg(1e-6, 0.0), 1.0, 0.2, 0.3)
    g = led.gamma1 - 1
    cap = 9 / (20 * led.c11 * g)
    assert tloc_from_functional(led, 0.5) == pytest.approx(cap)
    assert tloc_from_functional(led, 4.0) / tloc_from_functional(led, 2.0) == pytest.approx(2.0**-g)


@given(st.lists(st.floats(0.0, 1e3), min_size=2, max_size=20))
def test_tloc_antitone(values):
    led = constants_chain(ProblemParams(1, 1), _Cfg(1e-6, 0.0), 1.0, 0.2, 0.3)
    vals = sorted(values)
    t = [tloc_from_functional(led, v) for v in vals]
    assert all(a >= b for a, b in zip(t, t[1:]))


def test_tloc_shrinks_with_gradient():
    p = ProblemParams(1, 1, Nx=128)
    led = constants_chain(p, _Cfg(1e-6, 0.0), 2 * math.pi, 0.2, 0.3)
    t = [tloc_estimate(led, fn.Field.from_function(lambda x, a=a: 1 + a * np.cos(x), p)) for a in (0.1, 0.5, 0.9)]
    assert t[0] >= t[1] >= t[2]


# -- Bihari -------------------------------------------------------------------------

def test_bihari_examples():
    B, tb = bihari_bound(2.0, 1.0, 3.0)
    assert B(0.1) == pytest.approx(0.05**-0.5, rel=1e-12)
    assert B(0.1) == pytest.approx(4.47214, rel=1e-6)
    C, _ = bihari_bound(0.5, 1.0, 3.0)
    assert C(0.5) == pytest.approx(1.0)
    assert C(0.5 - 1e-12) == pytest.approx(C(0.5 + 1e-12), abs=1e-9)
    assert np.isinf(B(tb))


@settings(max_examples=100)
@given(st.floats(0.0, 3.0), st.floats(0.05, 5.0), st.floats(1.2, 5.0))
def test_bihari_dominates_rk4(v0, c, gamma):
    B, tb = bihari_bound(v0, c, gamma)
    t, v = rk4_comparison(v0, c, gamma, 0.95 * tb, steps=3000)
    # RK4 truncation error is the only slack allowed
    assert np.all(B(t) >= v * (1 - 1e-6))


# -- weighted bounds ------------------------------------------------------------

def test_weighted_bounds_stable_and_constant():
    p = ProblemParams(1, 1, a1=0, Nx=64)
    cfg = SolverConfig(eps=1e-6, dt_init=1e-5, t_end=0.05, sample_every=1)
    h0 = lift_initial_data(fn.Field.from_function(lambda x: 1 + 0.3 * np.cos(x), p), cfg)
    _, led = run_segment(h0, p, cfg, 0.05)
    rep = check_exp_weighted_bounds(led, p)
    assert np.all(led.column("B1") == 0) and np.all(led.column("B2") == 0)
    assert rep.passed
    c0 = lift_initial_data(fn.Field.from_function(lambda x: 1 + 0 * x, p), cfg)
    _, led = run_segment(c0, p, cfg, 0.05)
    assert check_exp_weighted_bounds(led, p).worst == pytest.approx(0.0, abs=1e-9)


# -- moment certificate ----------------------------------------------------------

def test_moment_certificate_coefficients_and_errors():
    p = ProblemParams(1, 3, a=3 * math.pi, Nx=256)
    cfg = SolverConfig(eps=1e-12, dt_init=1e-6, t_end=1e-3)
    h0 = fn.Field.from_function(lambda x: np.where(np.abs(x) < math.pi, 0.5 * (1 + np.cos(x)), 0.0), p)
    _, led = run_segment(lift_initial_data(h0, cfg), p, cfg, 1e-3)
    cert = moment_certificate(led, p, h0=h0)
    assert (cert.k1, cert.k2) == (6.0, 0.0)
    assert cert.E0 > 0 and cert.T_ub is None
    assert np.all(led.column("Btilde") == 0)
    with pytest.raises(ExponentOutOfRange):
        moment_certificate(led, ProblemParams(2, 3))
    bad = RunLedger(samples=led.samples, support=[(-3 * math.pi, 3 * math.pi)] * len(led.samples),
                    domain=led.domain)
    with pytest.raises(BoundaryContact):
        moment_certificate(bad, p)


def test_moment_certificate_flags_violation():
    p = ProblemParams(1, 3, a=3 * math.pi, Nx=256)
    cfg = SolverConfig(eps=1e-12, dt_init=1e-6, t_end=1e-3)
    h0 = fn.Field.from_function(lambda x: np.where(np.abs(x) < math.pi, 0.5 * (1 + np.cos(x)), 0.0), p)
    _, led = run_segment(lift_initial_data(h0, cfg), p, cfg, 1e-3)
    for s in led.samples[1:]:
        s.moment *= 2.0  # tamper: the moment doubles, far beyond the bound
    assert moment_certificate(led, p).verdict.value == "InequalityViolated"


# -- support -------------------------------------------------------------------------

def test_support_edges_examples():
    p = ProblemParams(1, 1, a=3.0, Nx=300)
    assert all(math.isnan(v) for v in support_edges(fn.Field.from_function(lambda x: 0 * x, p), 1e-9))
    bump = fn.Field.from_function(lambda x: (np.abs(x) <= 1).astype(float), p)
    xl, xr = support_edges(bump, 0.5)
    assert abs(xl + 1) <= p.dx and abs(xr - 1) <= p.dx
    cfg = SolverConfig(eps=1e-6)
    lifted = lift_initial_data(bump, cfg)
    assert support_edges(lifted, 0.5 * cfg.lift) == (-3.0, 3.0)
    assert abs(support_edges(lifted, cfg.support_tol)[1] - 1) <= p.dx


def test_fit_exact_power_law_and_guard():
    t = np.geomspace(1, 10, 30)
    g = 2 * t**0.2
    tr = SupportTrace(t, -(0.1 + g), 0.1 + g, r0=0.1, dx=1e-3)
    expo, C, res = fit_spreading_exponent(tr, (1, 10))
    assert expo == pytest.approx(0.2, abs=1e-12) and C == pytest.approx(2.0, rel=1e-12)
    small = SupportTrace(t, -np.full(30, 0.1005), np.full(30, 0.1005), r0=0.1, dx=1e-3)
    with pytest.raises(InsufficientSpread):
        fit_spreading_exponent(small, (1, 10))


@given(st.lists(st.floats(-0.01, 0.01), min_size=5, max_size=40))
def test_envelope_makes_gamma_nondecreasing(jitter):
    t = np.arange(1, len(jitter) + 1, dtype=float)
    r = 0.5 + 0.05 * np.sqrt(t) + np.array(jitter)
    tr = SupportTrace(t, -r, r, r0=0.5)
    assert np.all(np.diff(tr.Gamma) >= 0)


def test_localized_integrals():
    p = ProblemParams(1, 1, a=2.0, Nx=200)
    x = p.grid()
    inside = np.where(np.abs(x) < 0.5, 1 - (2 * x) ** 2, 0.0)
    snaps = [(0.0, inside), (1.0, inside)]
    s = np.linspace(0.01, 2.0, 30)
    G = localized_integrals(snaps, x, p.dx, 0.5, s, [1.0, 2.0])
    assert np.all(G == 0)
    wide = [(0.0, 1 + 0 * x), (0.5, 1 + np.cos(x) ** 2), (2.0, 2 + 0 * x)]
    G = localized_integrals(wide, x, p.dx, 0.5, s, [1.0, 1.5])
    assert np.all(np.diff(G, axis=1) <= 0)
    assert np.all(G[:, s >= 2.0 - 0.5] == 0)


# -- Stampacchia --------------------------------------------------------------------

def test_stampacchia_single_example():
    sys_ = StampacchiaSystem([1.0], [2.0], [1.0], [lambda s: 0.25], c_user=2.0)
    assert stampacchia_s0(sys_, 0.3) == pytest.approx(1.3, rel=1e-14)
    zero = StampacchiaSystem([1.0, 3.0], [2.0, 1.5], [1.0, 0.5], [lambda s: 0.0] * 2)
    assert stampacchia_s0(zero, 0.7) == 0.7


def test_stampacchia_guards():
    with pytest.raises(BadShape):
        StampacchiaSystem([1.0], [1.0], [1.0], [lambda s: 0.1])
    with pytest.raises(BadShape):
        StampacchiaSystem([-1.0], [2.0], [1.0], [lambda s: 0.1])
    with pytest.raises(BadShape):
        sampled([0, 1, 2], [1, 2, 0])
    sys_ = StampacchiaSystem([1.0, 5.0], [2.0, 3.0], [1.0, 0.0], [lambda s: 0.1, lambda s: 0.9])
    with pytest.raises(HypothesisFailed) as info:
        stampacchia_s0(sys_, 0.0)
    assert info.value.H >= 1


def _synthetic(rng):
    """Single inequality with a known vanishing point.

    ``G(s) = A (s_v - s)_+^k`` with ``k = alpha beta / (beta - 1)`` satisfies
    ``G(s + d) <= c (G(s) / d^alpha)^beta`` whenever ``c A^(beta - 1) >= 1``.
    """
    beta = rng.uniform(1.2, 4.0)
    alpha = rng.uniform(0.2, 3.0)
    A = rng.uniform(0.05, 5.0)
    c = rng.uniform(1.0, 3.0) * A ** (1 - beta)
    s_v = rng.uniform(0.5, 5.0)
    k = alpha * beta / (beta - 1)
    return beta, alpha, A, c, s_v, (lambda s: A * max(s_v - s, 0.0) ** k)


def test_stampacchia_synthetic_randomized():
    rng = np.random.default_rng(2024)
    hits = 0
    for _ in range(100):
        beta, alpha, A, c, s_v, G = _synthetic(rng)
        # confirm the hypothesis on a grid before trusting the case
        s_grid = np.linspace(0, s_v, 25)
        for s in s_grid:
            for d in np.geomspace(1e-3, s_v, 15):
                g = G(s)
                if g > 0:
                    assert G(s + d) <= c * (g / d**alpha) ** beta * (1 + 1e-9)
        s1 = rng.uniform(0.0, 0.9 * s_v)
        s0 = stampacchia_s0(StampacchiaSystem([c], [beta], [alpha], [G], c_user=2.0), s1)
        hits += s0 >= s_v
    assert hits == 100


@settings(max_examples=30)
@given(st.floats(1.0, 3.0), st.floats(0.1, 3.0), st.floats(1.2, 4.0))
def test_bihari_matches_pure_power_law_above_one(v0, c, gamma):
    B, tb = bihari_bound(v0, c, gamma)
    t, v = rk4_comparison(v0, c, gamma, 0.5 * tb, steps=4000, saturate=False)
    assert np.allclose(B(t), v, rtol=1e-6)
