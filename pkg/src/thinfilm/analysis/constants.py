"""Interpolation constants, the a-priori constants chain and local existence times."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .. import functionals as fn
from ..model import ProblemParams, Regime, classify_regime, critical_mass, interpolation_k1


def interpolation_k2(p_exp: float, length: float, eps_interp: float = 0.1) -> float:
    if p_exp == 1:
        return 1.0
    return length ** (1.0 - p_exp) * (1.0 - (1.0 - eps_interp) ** (1.0 / (p_exp - 1.0))) ** (1.0 - p_exp)


def interpolation_bound(p_exp: float, M: float, hx_sq: float, length: float,
                        eps_interp: float = 0.1) -> float:
    """Upper bound on ``||h||_p^p`` for nonnegative ``h`` of mass ``M``."""
    if p_exp < 1:
        raise ValueError("p_exp must be >= 1")
    if not M > 0 or hx_sq < 0:
        raise ValueError("need M > 0 and hx_sq >= 0")
    if not 0 < eps_interp < 1:
        raise ValueError("eps_interp must lie in (0, 1)")
    if p_exp == 1:
        return M
    k1 = interpolation_k1(p_exp, eps_interp)
    k2 = interpolation_k2(p_exp, length, eps_interp)
    return k1 * M ** ((p_exp + 2.0) / 3.0) * hx_sq ** ((p_exp - 1.0) / 3.0) + k2 * M**p_exp


def b_constants(p_exp: float, length: float, r: float = 2.0) -> dict[str, float]:
    """Poincare / Ladyzhenskaya / L^p-H^1 constants for exponent ``p_exp``."""
    p = p_exp
    b1 = length**p
    a = (1.0 / r - 1.0 / p) / (1.0 / r + 0.5)
    b2 = (1.0 + r / 2.0) ** (a * p)
    if p <= 2:
        b3 = b1 * length ** ((2.0 - p) / p)
    else:
        # Ladyzhenskaya with r = 2 combined with Poincare
        b2_lady = (1.0 + 1.0) ** ((0.5 - 1.0 / p) * p)
        b3 = b1 ** ((p + 2.0) / 2.0) * b2_lady
    b4 = 2.0 ** (p - 1.0) * b3
    b5 = (2.0 / length) ** (p - 1.0)
    out = {"p": p, "b1": b1, "b2": b2, "b3": b3, "b4": b4, "b5": b5}
    if p < 1:
        out["b4t"] = length ** (1.0 - p / 2.0) * b4 ** (p / 2.0)
        out["b5t"] = length ** (1.0 - p / 2.0) * b5 ** (p / 2.0)
    return out


def _b45(p_exp: float, length: float) -> tuple[float, float]:
    b = b_constants(p_exp, length)
    if p_exp < 1:
        return b["b4t"], b["b5t"]
    return b["b4"], b["b5"]


@dataclass
class ConstantsLedger:
    n: float
    m: float
    a0: float
    a1: float
    length: float
    M: float
    eps: float
    delta: float
    alpha: float
    entropy0: float
    hx0_sq: float
    p_exponent: float
    b1: float
    b2: float
    b3: float
    b4: float
    b5: float
    b4t: float | None
    b5t: float | None
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float
    c6: float
    c7: float
    c8: float
    c9: float
    c10: float
    c11: float
    c11_delta: float
    gamma1: float
    gamma2: float
    gamma3: float
    K: float
    critical_mass: float | None = None
    entropy_growth: float | None = None
    b_sites: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def constants_chain(p: ProblemParams, cfg, M: float, entropy0: float, hx0_sq: float,
                    eps_interp: float = 0.1, energy0: float | None = None) -> ConstantsLedger:
    n, m, a0, a1, L = p.n, p.m, p.a0, p.a1, p.length
    eps, delta = cfg.eps, cfg.delta
    alpha = getattr(cfg, "alpha", 0.5)

    p_main = 2.0 * (2.0 * m - n)
    bm = b_constants(p_main, L)
    b4_main, b5_main = _b45(p_main, L)
    b2_c3 = b_constants(4.0, L, r=2.0)["b2"]
    p_c8 = 2.0 * (m - n + 1.0)
    b4_c8, b5_c8 = _b45(p_c8, L)

    c1 = M ** (2.0 * (2.0 * m - n)) * b5_main / 2.0
    c2 = a1**2 / (4.0 * a0)
    c3 = a1**2 * b2_c3**2 / (16.0 * a0)
    c4 = a1**2 * b4_main / (4.0 * a0)
    c5 = a1**2 / (2.0 * a0) * delta / eps**2
    c6 = a1**2 / (2.0 * a0) * c1
    c7 = c3 + c4 + c5 + c6
    q1 = (m - n + 1.0) ** 2
    c8 = a1**2 * b4_c8 / (2.0 * a0 * q1)
    c9 = a1**2 * b5_c8 * M ** (2.0 * (m - n + 1.0)) / (2.0 * a0 * q1)
    c10 = c8 + c9
    c11 = 2.0 * c2 * c10 / a0 + 2.0 * c7
    c11_delta = 2.0 * c2 * a1 / (eps * a0) + 2.0 * c7

    gamma1 = max(3.0, 2.0 * m - n)
    gamma2 = max(3.0, m - n + 1.0)
    gamma3 = max(alpha / 2.0 + m - n + 1.0, 2.0 * m - n + 1.0 - alpha / 2.0)
    K = 2.0 ** (1.0 / (gamma1 - 1.0)) * max(1.0, hx0_sq + 2.0 * c2 / a0 * entropy0)

    regime = classify_regime(p)
    mc = critical_mass(p, eps_interp) if regime is Regime.CRITICAL and a1 > 0 else None
    beta = None
    if regime is Regime.SUBCRITICAL:
        E0 = 0.5 * a0 * hx0_sq if energy0 is None else energy0
        beta = entropy_growth_rate(p, M, eps_interp, c10, gamma2, E0)

    return ConstantsLedger(
        n=n, m=m, a0=a0, a1=a1, length=L, M=M, eps=eps, delta=delta, alpha=alpha,
        entropy0=entropy0, hx0_sq=hx0_sq, p_exponent=p_main,
        b1=bm["b1"], b2=bm["b2"], b3=bm["b3"], b4=bm["b4"], b5=bm["b5"],
        b4t=bm.get("b4t"), b5t=bm.get("b5t"),
        c1=c1, c2=c2, c3=c3, c4=c4, c5=c5, c6=c6, c7=c7, c8=c8, c9=c9, c10=c10,
        c11=c11, c11_delta=c11_delta, gamma1=gamma1, gamma2=gamma2, gamma3=gamma3, K=K,
        critical_mass=mc, entropy_growth=beta,
        b_sites={"c3": {"p": 4.0, "r": 2.0, "b2": b2_c3},
                 "c4": {"p": p_main, "b4": b4_main, "b5": b5_main},
                 "c8": {"p": p_c8, "b4": b4_c8, "b5": b5_c8}},
    )


def energy_cap(p: ProblemParams, M: float, eps_interp: float = 0.1) -> float:
    """Mass-only constant bounding ``int h_x^2`` by the energy when m < n + 2."""
    q = p.m - p.n
    pe = q + 2.0
    k1 = interpolation_k1(pe, eps_interp)
    k2 = interpolation_k2(pe, p.length, eps_interp)
    d = (q + 1.0) * (q + 2.0)
    g1 = ((p.a1 * k1 / d) ** (3.0 / (2.0 - q)) * (8.0 * (q + 1.0) / (3.0 * p.a0)) ** ((q + 1.0) / (2.0 - q))
          * (2.0 - q) / 3.0)
    g2 = p.a1 * k2 / d
    g3 = p.a0 / 2.0 * (8.0 * math.sqrt(3.0) / 3.0 + 1.0 / p.length)
    return g1 * M ** ((q + 4.0) / (2.0 - q)) + g2 * M**pe + g3 * M**2


def entropy_growth_rate(p: ProblemParams, M: float, eps_interp: float, c10: float, gamma2: float,
                        E0: float) -> float:
    """Linear-in-time growth rate of the entropy along the global continuation."""
    K = energy_cap(p, M, eps_interp)
    base = max(1.0, 4.0 / p.a0 * (E0 + K))
    return c10 * base**gamma2


def tloc_functional(led: ConstantsLedger, h: fn.Field) -> float:
    G = fn.entropy_value(h, fn.EntropySpec(led.n))
    return fn.hx_sq(h) + 2.0 * led.c2 / led.a0 * G


def tloc_from_functional(led: ConstantsLedger, value: float) -> float:
    g = led.gamma1 - 1.0
    if not (led.c11 > 0 and g > 0):
        return math.inf
    return 9.0 / (20.0 * led.c11 * g) * (1.0 if value <= 1.0 else value ** (-g))


def tloc_estimate(led: ConstantsLedger, h: fn.Field) -> float:
    return tloc_from_functional(led, tloc_functional(led, h))
