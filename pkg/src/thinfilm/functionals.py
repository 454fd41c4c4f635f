"""Continuum functionals evaluated on periodic grid functions.

Spatial derivatives are second-order centred differences with periodic wrap.
The first derivative lives on cell faces, ``(h[i+1] - h[i]) / dx`` at
``x[i] + dx/2``, which is what makes the discrete energy a Lyapunov function
of the solver in ``solver.py``.  Integrals use the rectangle rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import optimize, special

from .errors import DomainError, ExponentOutOfRange, NonpositiveField, UnorderedSamples
from .model import ProblemParams, exact


@dataclass(frozen=True)
class Field:
    values: np.ndarray
    dx: float
    origin: float

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 4:
            raise ValueError("field values must be a 1-D array with at least 4 points")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        if not self.dx > 0:
            raise ValueError("dx must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def on_grid(cls, values, p: ProblemParams) -> "Field":
        return cls(values, p.dx, -p.a + 0.5 * p.dx)

    @classmethod
    def from_function(cls, func, p: ProblemParams) -> "Field":
        return cls.on_grid(func(p.grid()), p)

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def length(self) -> float:
        return self.size * self.dx

    @property
    def x(self) -> np.ndarray:
        return self.origin + np.arange(self.size) * self.dx

    @property
    def center(self) -> float:
        """Midpoint of the periodic cell the nodes tile."""
        return self.origin - 0.5 * self.dx + 0.5 * self.length

    def with_values(self, values) -> "Field":
        return Field(values, self.dx, self.origin)


# -- grid operators --------------------------------------------------------

def face_gradient(v: np.ndarray, dx: float) -> np.ndarray:
    return (np.roll(v, -1) - v) / dx


def laplacian(v: np.ndarray, dx: float) -> np.ndarray:
    return (np.roll(v, -1) - 2.0 * v + np.roll(v, 1)) / (dx * dx)


def face_third_derivative(v: np.ndarray, dx: float) -> np.ndarray:
    lap = laplacian(v, dx)
    return (np.roll(lap, -1) - lap) / dx


def mass(h: Field) -> float:
    return float(np.sum(h.values) * h.dx)


def hx_sq(h: Field) -> float:
    g = face_gradient(h.values, h.dx)
    return float(np.sum(g * g) * h.dx)


def h1_norm(h: Field) -> float:
    return math.sqrt(float(np.sum(h.values**2) * h.dx) + hx_sq(h))


def sup_norm(h: Field) -> float:
    return float(np.max(np.abs(h.values)))


def moment_hxx_sq(h: Field) -> float:
    """``int x^2 h_xx^2`` with x measured from the domain centre."""
    xc = h.x - h.center
    lap = laplacian(h.values, h.dx)
    return float(np.sum(xc * xc * lap * lap) * h.dx)


# -- regularised coefficients ----------------------------------------------

def mobility(z, n: float, eps: float, delta: float = 0.0):
    """Regularised mobility ``|z|^(4+n) / (|z|^4 + eps |z|^n) + delta``."""
    z = np.abs(np.asarray(z, dtype=float))
    if eps < 0 or delta < 0:
        raise DomainError("eps and delta must be nonnegative")
    if eps == 0:
        if n > 0 and np.any(z == 0):
            raise DomainError("unregularised mobility requested at z = 0")
        out = z**n + delta
    else:
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            # z^n / (1 + eps z^(n-4)) avoids overflow of z^(4+n)
            out = np.where(z > 0, z**n / (1.0 + eps * z ** (n - 4.0)), 0.0) + delta
    return float(out) if out.ndim == 0 else out


def pressure_coupling(z, n: float, m: float, eps: float):
    """Saturated ``|z|^(m-n) / (1 + eps |z|^(m-n))``."""
    z = np.abs(np.asarray(z, dtype=float))
    q = m - n
    if eps < 0:
        raise DomainError("eps must be nonnegative")
    if q >= 0:
        zq = z**q
        out = zq / (1.0 + eps * zq)
    else:
        if eps == 0 and np.any(z == 0):
            raise DomainError("z = 0 with m < n needs eps > 0")
        with np.errstate(divide="ignore"):
            out = 1.0 / (z ** (-q) + eps)
    return float(out) if out.ndim == 0 else out


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


def _ratio_phi(L: np.ndarray, k: float) -> np.ndarray:
    """``expm1(k L) / (k expm1(L))`` with the limits at ``k = 0`` and ``L = 0``."""
    with np.errstate(invalid="ignore", divide="ignore"):
        den = np.expm1(L)
        num = L if k == 0 else np.expm1(k * L) / k
        out = num / den
    return np.where(np.abs(L) < 1e-12, 1.0, out)


def face_mobility(za: np.ndarray, zb: np.ndarray, n: float, eps: float, delta: float = 0.0) -> np.ndarray:
    """Reciprocal mean of ``1 / mobility`` over ``[za, zb]``.

    This is ``(zb - za) / (G'(zb) - G'(za))`` for the entropy ``G'' = 1/f``;
    with it the discrete scheme dissipates the discrete entropy, which keeps
    solutions positive.  Both arguments must be positive.
    """
    za = np.asarray(za, dtype=float)
    zb = np.asarray(zb, dtype=float)
    if delta > 0:
        pts = za[..., None] + _GL_NODES * (zb - za)[..., None]
        inv = np.sum(_GL_WEIGHTS / mobility(pts, n, eps, delta), axis=-1)
        return 1.0 / inv
    L = np.log(zb) - np.log(za)
    # mean of z^-n over the segment
    inv = za ** (-n) * _ratio_phi(L, 1.0 - n)
    if eps:
        inv = inv + eps / 3.0 * (za * za + za * zb + zb * zb) / (za * zb) ** 3
    return 1.0 / inv


def _hyp_1b_pfaff(c: float, x):
    """``2F1(1, c - 1; c; x)`` for ``x <= 0`` and large ``c``.

    scipy's hyp2f1 returns nan here for large ``c`` (already at c = 129); the Pfaff
    form ``(1 - x)^-1 sum_k k!/(c)_k w^k`` with ``w = x/(x - 1)`` in [0, 1)
    converges fast because the terms fall off like ``k^(2 - c)``.
    """
    x = np.asarray(x, dtype=float)
    w = x / (x - 1.0)
    term = np.ones_like(w)
    total = term.copy()
    for k in range(5000):
        term = term * (k + 1.0) / (c + k) * w
        total += term
        if np.all(term <= 1e-17 * total):
            break
    return total / (1.0 - x)


def _hyp_1b(c: float, x):
    """``2F1(1, c - 1; c; x)``, switching to the Pfaff series for large ``c``."""
    if c > 40.0:
        return _hyp_1b_pfaff(c, x)
    if c == 2.0:
        # scipy loses this one for large |x|; it is log(1 - x) / (-x)
        x = np.asarray(x, dtype=float)
        safe = np.where(x == 0, -1.0, x)
        return np.where(x == 0, 1.0, np.log1p(-safe) / -safe)
    return special.hyp2f1(1.0, c - 1.0, c, x)


def regularized_potential_derivative(z, n: float, m: float, eps: float):
    """``D_eps'(z) = int_0^z pressure_coupling``, in closed form via 2F1."""
    z = np.abs(np.asarray(z, dtype=float))
    q = m - n
    if eps == 0:
        if q <= -1 and np.any(z == 0):
            raise DomainError("z = 0 with m <= n - 1 needs eps > 0")
        out = np.log(z) if q == -1 else z ** (q + 1.0) / (q + 1.0)
    elif q > 0:
        out = z ** (q + 1.0) / (q + 1.0) * _hyp_1b(2.0 + 1.0 / q, -eps * z**q)
    elif q == 0:
        out = z / (1.0 + eps)
    else:
        r = -q
        out = z / eps * _hyp_1b(1.0 + 1.0 / r, -(z**r) / eps)
    return float(out) if np.ndim(out) == 0 else out


def pressure_coupling_secant(za: np.ndarray, zb: np.ndarray, n: float, m: float, eps: float) -> np.ndarray:
    """Mean of the pressure coupling over ``[za, zb]``, i.e. the secant of ``D_eps'``.

    Well separated endpoints use the closed-form difference quotient; close
    ones use 8-point Gauss-Legendre, which avoids the cancellation.
    """
    za = np.asarray(za, dtype=float)
    zb = np.asarray(zb, dtype=float)
    pts = za[..., None] + _GL_NODES * (zb - za)[..., None]
    out = np.sum(pressure_coupling(pts, n, m, eps) * _GL_WEIGHTS, axis=-1)
    far = np.abs(zb - za) > 1e-2 * np.maximum(np.abs(za), np.abs(zb))
    if eps > 0 and np.any(far):
        da = regularized_potential_derivative(za[far], n, m, eps)
        db = regularized_potential_derivative(zb[far], n, m, eps)
        out = np.array(out, dtype=float)
        out[far] = (db - da) / (zb[far] - za[far])
    return out


def regularized_potential(z, n: float, m: float, eps: float):
    """``D_eps`` with ``D_eps'' = pressure_coupling`` and ``D_eps(0) = D_eps'(0) = 0``."""
    z = np.abs(np.asarray(z, dtype=float))
    q = m - n
    if eps == 0:
        return potential_D0(z, n, m)
    if q > 0:
        w = -eps * z**q
        f1 = _hyp_1b(2.0 + 1.0 / q, w)
        f2 = _hyp_1b(2.0 + 2.0 / q, w)
        out = z ** (q + 2.0) * (f1 / (q + 1.0) - f2 / (q + 2.0))
    elif q == 0:
        out = z * z / (2.0 * (1.0 + eps))
    else:
        r = -q
        w = -(z**r) / eps
        f1 = _hyp_1b(1.0 + 1.0 / r, w)
        f2 = _hyp_1b(1.0 + 2.0 / r, w)
        out = z * z / eps * (f1 - 0.5 * f2)
    return float(out) if np.ndim(out) == 0 else out


def potential_D0(z, n: float, m: float):
    """Destabilising potential with ``D0'' = z^(m-n)``."""
    z = np.asarray(z, dtype=float)
    q = exact(m) - exact(n)
    if q == -2 or q == -1:
        if np.any(z <= 0):
            raise DomainError("logarithmic potential branch needs z > 0")
        out = -np.log(z) if q == -2 else z * np.log(z)
    else:
        qf = float(q)
        if qf + 2.0 < 0 and np.any(z <= 0):
            raise DomainError("negative-power potential branch needs z > 0")
        out = z ** (qf + 2.0) / ((qf + 1.0) * (qf + 2.0))
    return float(out) if out.ndim == 0 else out


# -- entropies -------------------------------------------------------------

def _entropy_branch(n: float, alpha: float) -> str:
    a, nn = exact(alpha), exact(n)
    if a == nn - 1:
        return "log"
    if a == nn - 2:
        return "neglog"
    if nn - 2 < a < nn - 1:
        return "offset"
    return "power"


def _raw_entropy(z, n: float, alpha: float, eps: float, branch: str):
    z = np.asarray(z, dtype=float)
    if branch == "log":
        g = z * np.log(z) - z + 1.0
    elif branch == "neglog":
        g = -np.log(z) + z / math.e
    else:
        s = 2.0 - n + alpha
        g = z**s / (s * (s - 1.0))
        if branch == "offset":
            g = g + z
    if eps:
        g = g + eps * z ** (alpha - 2.0) / ((alpha - 3.0) * (alpha - 2.0))
    return g


def entropy_offset(n: float, alpha: float = 0.0, eps: float = 0.0) -> float:
    """Smallest constant making the entropy density nonnegative on (0, inf).

    Only the branch with ``alpha`` strictly between ``n - 2`` and ``n - 1``
    needs one.  Without eps it is ``(-s)^(1 + 1/s) / (1 + s)`` with
    ``s = 1 - n + alpha``; with eps it is found by golden-section search on
    ``log z``.  When ``alpha`` is close to ``n - 1`` the minimiser sits near
    ``exp(log(-s)/s)`` and the offset can exceed the float range, in which
    case ``inf`` is returned.
    """
    branch = _entropy_branch(n, alpha)
    if branch != "offset":
        return 0.0

    def g(u):
        return float(_raw_entropy(math.exp(u), n, alpha, eps, branch))

    s = 1.0 - n + alpha
    # eps-free critical point z* = (n-1-alpha)^(1/s)
    u0 = math.log(-s) / s
    log_off = (1.0 + 1.0 / s) * math.log(-s) - math.log1p(s)
    if not eps or u0 > 600.0:
        # at such z* the eps term is below round-off of the offset
        return math.exp(log_off) if log_off < 709.0 else math.inf
    lo, hi = u0 - 1.0, u0 + 1.0
    while g(lo) <= g(u0):
        lo -= 2.0 * (u0 - lo)
    while g(hi) <= g(u0):
        hi += 2.0 * (hi - u0)
    res = optimize.minimize_scalar(g, bracket=(lo, u0, hi), method="golden", tol=1e-12)
    return -float(res.fun)


@dataclass(frozen=True)
class EntropySpec:
    """Which entropy density to integrate.

    ``alpha = 0`` selects the plain entropy; any other alpha the alpha-entropy.
    ``eps > 0`` adds the regularising ``eps z^(alpha-2)/((alpha-3)(alpha-2))``.
    ``offset`` is computed when left as ``None``.
    """
    n: float
    alpha: float = 0.0
    eps: float = 0.0
    offset: float | None = None
    branch: str = field(init=False, default="")

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("n must be positive")
        if self.alpha != 0 and not -0.5 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (-1/2, 1)")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        object.__setattr__(self, "branch", _entropy_branch(self.n, self.alpha))
        if self.offset is None:
            object.__setattr__(self, "offset", entropy_offset(self.n, self.alpha, self.eps))

    def density(self, z):
        z = np.asarray(z, dtype=float)
        needs_positive = self.branch in ("log", "neglog") or self.eps > 0 or (2.0 - self.n + self.alpha) < 0
        if needs_positive and np.any(z <= 0):
            raise NonpositiveField("entropy branch needs a strictly positive field")
        with np.errstate(divide="ignore", invalid="ignore"):
            g = _raw_entropy(z, self.n, self.alpha, self.eps, self.branch)
            if self.branch == "log":
                g = np.where(z == 0, 1.0, g)
        return g + self.offset

    def second_derivative(self, z):
        z = np.asarray(z, dtype=float)
        return z ** (self.alpha - self.n) + self.eps * z ** (self.alpha - 4.0)


def entropy_value(h: Field, spec: EntropySpec) -> float:
    # a near-degenerate offset may legitimately sum past the float range
    with np.errstate(over="ignore"):
        return float(np.sum(spec.density(h.values)) * h.dx)


def energy(h: Field, p: ProblemParams) -> float:
    """``int a0/2 h_x^2 - a1 D0(h)``."""
    g = face_gradient(h.values, h.dx)
    pot = potential_D0(h.values, p.n, p.m) if p.a1 else 0.0
    return float(np.sum(0.5 * p.a0 * g * g - p.a1 * pot) * h.dx)


def energy_eps(h: Field, p: ProblemParams, eps: float) -> float:
    """Energy with the saturated potential of the regularised problem."""
    g = face_gradient(h.values, h.dx)
    pot = regularized_potential(h.values, p.n, p.m, eps) if p.a1 else 0.0
    return float(np.sum(0.5 * p.a0 * g * g - p.a1 * pot) * h.dx)


def second_moment_entropy(h: Field, n: float) -> float:
    """``int x^2 z^(2-n)/(2-n)`` with x measured from the domain centre."""
    if not 0 < n < 2:
        raise ExponentOutOfRange(f"second moment entropy needs 0 < n < 2, got n={n}")
    if np.any(h.values < 0):
        raise NonpositiveField("second moment entropy needs h >= 0")
    xc = h.x - h.center
    return float(np.sum(xc * xc * h.values ** (2.0 - n)) * h.dx / (2.0 - n))


# -- accumulated weights ---------------------------------------------------

def weight_rate(sup, p: ProblemParams, mode: str):
    """Integrand of the B1 / B2 / Btilde accumulators as a function of ``||h||_inf``."""
    sup = np.asarray(sup, dtype=float)
    n, m, a0, a1 = p.n, p.m, p.a0, p.a1
    if mode not in ("B1", "B2", "Btilde"):
        raise ValueError(f"unknown weight mode {mode!r}")
    if a1 == 0:
        return np.zeros_like(sup)
    if mode != "B1" and (m - n + 1 == 0 or 2 * m - n + 1 == 0):
        # the weights are undefined on these exponent lines
        return np.full_like(sup, np.nan)
    if mode == "B1":
        return a1**2 / a0 * sup ** (2 * m - n)
    if mode == "B2":
        return (a1**4 / (2 * a0**3 * (2 * m - n + 1) ** 2) * sup ** (4 * m - n)
                + a1**2 / (2 * a0 * (m - n + 1) ** 2) * sup ** (2 * m - n))
    if mode == "Btilde":
        factor = abs((exact(1) - exact(n)) * (2 - exact(n)))
        if factor == 0:
            return np.zeros_like(sup)
        return a1**2 * float(factor) / (2 * a0 * (m - n + 1) ** 2) * sup ** (2 * m - n)


def weighted_history(samples: Sequence, p: ProblemParams, mode: str) -> np.ndarray:
    """Trapezoid-in-time accumulation of a weight over a sample sequence.

    Returns the accumulated value at every sample; the last entry is B(T).
    """
    t = np.array([s.t for s in samples], dtype=float)
    if t.size == 0:
        return np.zeros(0)
    if np.any(np.diff(t) <= 0):
        raise UnorderedSamples("samples must be strictly increasing in time")
    rate = weight_rate([s.sup for s in samples], p, mode)
    out = np.zeros_like(t)
    out[1:] = np.cumsum(0.5 * (rate[1:] + rate[:-1]) * np.diff(t))
    return out
