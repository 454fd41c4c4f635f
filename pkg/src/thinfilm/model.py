"""Problem parameters, regime classification and the linear dispersion relation.

The equation is ``h_t = -a0 (h^n h_xxx)_x - a1 (h^m h_x)_x`` on the periodic
interval ``(-a, a)``.  Regime and theorem-region tests are done in exact
rational arithmetic so that the critical line ``m = n + 2`` can be selected
deliberately from decimal input.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from .errors import NotCritical, ZeroDestabilization

Number = Union[int, float, Fraction, str]


def exact(value: Number) -> Fraction:
    """Rational reading of a user-supplied number.

    Floats are read through their shortest decimal repr, so ``0.1`` becomes
    ``1/10`` rather than the binary approximation.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("boolean is not a number")
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"non-finite exponent {value!r}")
        return Fraction(repr(value))
    return Fraction(str(value).strip())


class Regime(str, enum.Enum):
    SUBCRITICAL = "Subcritical"
    CRITICAL = "Critical"
    SUPERCRITICAL = "Supercritical"


@dataclass(frozen=True)
class ProblemParams:
    n: float
    m: float
    a0: float = 1.0
    a1: float = 1.0
    a: float = math.pi
    Nx: int = 256

    def __post_init__(self):
        # keep the exact reading of n, m around for regime tests
        object.__setattr__(self, "_n_exact", exact(self.n))
        object.__setattr__(self, "_m_exact", exact(self.m))
        object.__setattr__(self, "n", float(self._n_exact))  # type: ignore[attr-defined]
        object.__setattr__(self, "m", float(self._m_exact))  # type: ignore[attr-defined]
        for name in ("a0", "a1", "a"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.n > 0:
            raise ValueError(f"n must be > 0, got {self.n}")
        if not self.m > 0:
            raise ValueError(f"m must be > 0, got {self.m}")
        if not self.a0 > 0:
            raise ValueError(f"a0 must be > 0, got {self.a0}")
        if not self.a1 >= 0:
            raise ValueError(f"a1 must be >= 0, got {self.a1}")
        if not self.a > 0:
            raise ValueError(f"a must be > 0, got {self.a}")
        if int(self.Nx) != self.Nx or self.Nx < 16 or self.Nx % 2:
            raise ValueError(f"Nx must be an even integer >= 16, got {self.Nx}")
        object.__setattr__(self, "Nx", int(self.Nx))

    @property
    def n_exact(self) -> Fraction:
        return self._n_exact  # type: ignore[attr-defined]

    @property
    def m_exact(self) -> Fraction:
        return self._m_exact  # type: ignore[attr-defined]

    @property
    def length(self) -> float:
        return 2.0 * self.a

    @property
    def dx(self) -> float:
        return 2.0 * self.a / self.Nx

    def grid(self) -> np.ndarray:
        """Cell-centred nodes, symmetric about the origin."""
        return -self.a + (np.arange(self.Nx) + 0.5) * self.dx


@dataclass(frozen=True)
class RegimeReport:
    regime: Regime
    existence_ok: bool
    fsp_ok: bool
    blowup_ok: bool
    unstable_band_edge: float | None
    critical_mass: float | None


def classify_regime(p: ProblemParams) -> Regime:
    diff = p.m_exact - (p.n_exact + 2)
    if diff < 0:
        return Regime.SUBCRITICAL
    if diff == 0:
        return Regime.CRITICAL
    return Regime.SUPERCRITICAL


def _regions(n: Fraction, m: Fraction) -> tuple[bool, bool, bool]:
    half = Fraction(1, 2)
    existence = n > 0 and m >= n / 2
    fsp = (0 < n <= half and n / 2 < m < 6 - n) or (half < n < 3 and m >= n / 2)
    blowup = (
        (0 < n <= half and 4 - n <= m < 6 - n)
        or (half < n <= 1 and m >= 4 - n)
        or (1 < n < 2 and m >= n + 2)
    )
    return existence, fsp, blowup


def theorem_applicability(p: ProblemParams) -> tuple[bool, bool, bool]:
    """Return ``(existence_ok, fsp_ok, blowup_ok)`` for the exponents of ``p``."""
    return _regions(p.n_exact, p.m_exact)


def regions_for(n: Number, m: Number) -> tuple[bool, bool, bool]:
    return _regions(exact(n), exact(m))


def growth_rate(xi, hbar: float, p: ProblemParams):
    """Linear growth rate of a ``cos(xi x)`` perturbation of the level ``hbar``."""
    if not hbar > 0:
        raise ValueError("hbar must be positive")
    xi = np.asarray(xi, dtype=float)
    xi2 = xi * xi
    sigma = -p.a0 * xi2 * hbar**p.n * (xi2 - (p.a1 / p.a0) * hbar ** (p.m - p.n))
    return float(sigma) if sigma.ndim == 0 else sigma


def band_edge(hbar: float, p: ProblemParams) -> float:
    """Wavenumber where the growth rate changes sign (0 if a1 = 0)."""
    return math.sqrt((p.a1 / p.a0) * hbar ** (p.m - p.n))


def fastest_wavenumber(hbar: float, p: ProblemParams) -> float:
    return math.sqrt(p.a1 / (2.0 * p.a0) * hbar ** (p.m - p.n))


def interpolation_k1(p_exp: float, eps_interp: float = 0.1) -> float:
    if not 0.0 < eps_interp < 1.0:
        raise ValueError("eps_interp must lie in (0, 1)")
    return 2.0 ** ((4.0 - p_exp) / 3.0) * 3.0 ** (2.0 * (p_exp - 1.0) / 3.0) / (1.0 - eps_interp)


def critical_mass(p: ProblemParams, eps_interp: float = 0.1) -> float:
    if classify_regime(p) is not Regime.CRITICAL:
        raise NotCritical(f"critical mass needs m = n + 2, got n={p.n}, m={p.m}")
    if p.a1 == 0:
        raise ZeroDestabilization("critical mass is undefined for a1 = 0")
    k1 = interpolation_k1(4.0, eps_interp)
    return math.sqrt(6.0 * p.a0 / (p.a1 * k1))


def regime_report(p: ProblemParams, hbar: float = 1.0, eps_interp: float = 0.1) -> RegimeReport:
    regime = classify_regime(p)
    existence, fsp, blowup = theorem_applicability(p)
    mc = None
    if regime is Regime.CRITICAL and p.a1 > 0:
        mc = critical_mass(p, eps_interp)
    edge = band_edge(hbar, p) if p.a1 > 0 else None
    return RegimeReport(regime, existence, fsp, blowup, edge, mc)
