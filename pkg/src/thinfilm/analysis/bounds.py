"""Nonlinear Gronwall (Bihari) bound and the exponential-weighted H1 checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..model import ProblemParams


@dataclass(frozen=True)
class BihariBound:
    """Closed-form bound for ``v' <= c max{1, v^gamma}``, ``v(0) = v0``."""
    v0: float
    c: float
    gamma: float

    def __post_init__(self):
        if not (self.v0 >= 0 and self.c > 0 and self.gamma > 1):
            raise ValueError("need v0 >= 0, c > 0, gamma > 1")

    @property
    def t0(self) -> float:
        """End of the linear phase (0 when v0 >= 1)."""
        return max(0.0, (1.0 - self.v0) / self.c)

    @property
    def blow_time(self) -> float:
        g = self.gamma - 1.0
        if self.v0 < 1:
            return self.t0 + 1.0 / (self.c * g)
        return self.v0 ** (-g) / (self.c * g)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        g = self.gamma - 1.0
        with np.errstate(invalid="ignore", divide="ignore"):
            if self.v0 < 1:
                lin = self.v0 + self.c * t
                tail = (1.0 - self.c * g * (t - self.t0)) ** (-1.0 / g)
                out = np.where(t <= self.t0, lin, tail)
            else:
                out = (self.v0 ** (-g) - self.c * g * t) ** (-1.0 / g)
        out = np.where(t >= self.blow_time, np.inf, out)
        return float(out) if out.ndim == 0 else out


def bihari_bound(v0: float, c: float, gamma: float) -> tuple[BihariBound, float]:
    b = BihariBound(v0, c, gamma)
    return b, b.blow_time


@dataclass
class WeightedCheck:
    tol_ineq: float
    rows: list[tuple[float, float, float, float, float]] = field(default_factory=list)
    worst_h1: float = -math.inf
    worst_h1_entropy: float = -math.inf

    @property
    def passed(self) -> bool:
        return self.worst_h1 <= self.tol_ineq and self.worst_h1_entropy <= self.tol_ineq

    @property
    def worst(self) -> float:
        return max(self.worst_h1, self.worst_h1_entropy)

    def to_dict(self) -> dict:
        return {"tol_ineq": self.tol_ineq, "worst_h1": self.worst_h1,
                "worst_h1_entropy": self.worst_h1_entropy, "passed": self.passed}


def check_exp_weighted_bounds(ledger, p: ProblemParams, tol_ineq: float = 0.05) -> WeightedCheck:
    """Check ``int h_x^2 <= e^B1 int h0x^2`` and the entropy-augmented version.

    Margins are relative excesses ``lhs / rhs - 1``; the check passes when both
    stay at or below ``tol_ineq`` at every sample.
    """
    out = WeightedCheck(tol_ineq)
    if not ledger.samples:
        return out
    s0 = ledger.samples[0]
    base1 = s0.hx_sq
    base2 = s0.hx_sq + s0.entropy
    for s in ledger.samples:
        lhs1, rhs1 = s.hx_sq, math.exp(s.B1) * base1
        lhs2, rhs2 = s.hx_sq + s.entropy, math.exp(s.B2) * base2
        out.rows.append((s.t, lhs1, rhs1, lhs2, rhs2))
        out.worst_h1 = max(out.worst_h1, _excess(lhs1, rhs1))
        out.worst_h1_entropy = max(out.worst_h1_entropy, _excess(lhs2, rhs2))
    return out


def _excess(lhs: float, rhs: float, atol: float = 1e-12) -> float:
    # absolute floor so round-off on an identically flat state is not a violation
    return (lhs - rhs) / max(rhs, atol)
