"""Extinction point for systems of Stampacchia-type functional inequalities.

For nonincreasing ``G_i >= 0`` with
``G_i(s + d) <= c_i (sum_j G_j(s) / d^alpha_j)^beta_i`` the components with
``alpha_i > 0`` vanish beyond an explicit ``s0``.  The lemma leaves its
constant ``c > 1`` undetermined; it is the user input ``c_user``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import BadShape, HypothesisFailed


def sampled(s_grid: Sequence[float], values: Sequence[float]) -> Callable[[float], float]:
    """Piecewise-linear ``G`` from a table, constant beyond either end."""
    s_grid = np.asarray(s_grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.any(np.diff(s_grid) <= 0):
        raise BadShape("s grid must be increasing")
    if np.any(np.diff(values) > 1e-14 * max(1.0, float(np.max(np.abs(values))))):
        raise BadShape("sampled G must be nonincreasing")
    return lambda s: float(np.interp(s, s_grid, values))


@dataclass
class StampacchiaSystem:
    c: Sequence[float]
    beta: Sequence[float]
    alpha: Sequence[float]
    G: Sequence[Callable[[float], float]]
    c_user: float = 2.0
    m_count: int = field(init=False)
    ell: int = field(init=False)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        self.alpha = np.asarray(self.alpha, dtype=float)
        k = self.c.size
        if not (self.beta.size == self.alpha.size == len(self.G) == k) or k == 0:
            raise BadShape("c, beta, alpha and G must have the same nonzero length")
        if np.any(self.c <= 0) or np.any(self.beta <= 1) or np.any(self.alpha < 0):
            raise BadShape("need c_i > 0, beta_i > 1, alpha_i >= 0")
        if not self.c_user > 0:
            raise BadShape("c_user must be positive")
        self.m_count = k
        self.ell = int(np.sum(self.alpha > 0))

    @property
    def beta_total(self) -> float:
        return float(np.prod(self.beta))

    @property
    def beta_bar(self) -> np.ndarray:
        return self.beta_total / self.beta

    def _powers(self) -> tuple[np.ndarray, np.ndarray]:
        """``c_i^{beta_bar_i}`` and the cross products ``prod_{j != i} c_j^{beta_bar_j}``."""
        cb = self.c ** self.beta_bar
        cross = np.array([np.prod(np.delete(cb, i)) for i in range(self.m_count)])
        return cb, cross

    def values(self, s: float) -> np.ndarray:
        out = np.array([float(g(s)) for g in self.G])
        if np.any(out < 0):
            raise BadShape("G_i must be nonnegative")
        return out

    def G_total(self, s: float) -> float:
        _, cross = self._powers()
        return float(np.sum(cross * self.values(s) ** self.beta_bar))

    def H(self, s: float) -> float:
        cb, cross = self._powers()
        g = self.values(s)
        rest = self.alpha == 0
        terms = cb * cross ** (1.0 - self.beta) * g ** (self.beta - 1.0)
        return float(self.m_count**self.beta_total * np.sum(terms[rest]))


def stampacchia_s0(sys: StampacchiaSystem, s1: float) -> float:
    """Point past which every component with ``alpha_i > 0`` vanishes."""
    if s1 < 0:
        raise BadShape("s1 must be >= 0")
    H = sys.H(s1)
    if not H < 1:
        raise HypothesisFailed(f"H(s1) = {H:.6g} is not below 1", H=H)
    cb, cross = sys._powers()
    G = sys.G_total(s1)
    beta = sys.beta_total
    pos = sys.alpha > 0
    base = cb[pos] * cross[pos] ** (1.0 - sys.beta[pos]) * G ** (sys.beta[pos] - 1.0)
    return float(s1 + sys.c_user * np.sum(base ** (1.0 / (sys.alpha[pos] * beta))))
