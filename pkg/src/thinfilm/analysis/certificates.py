"""Second-moment blow-up certificate."""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import functionals as fn
from ..errors import BoundaryContact, ExponentOutOfRange
from ..model import ProblemParams


class Verdict(str, enum.Enum):
    CONSISTENT = "CertifiedConsistent"
    VIOLATED = "InequalityViolated"
    NO_BLOWUP = "NoBlowup"


@dataclass
class BlowupCertificate:
    k1: float
    k2: float
    E0: float
    V0: float
    T_ub: float | None
    T_star: float | None
    margin: float
    verdict: Verdict
    tol_ineq: float = 0.05
    trigger: str = ""
    h1_initial: float = math.nan
    h1_final: float = math.nan
    dt_final: float = math.nan
    rows: list[tuple[float, float, float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["verdict"] = self.verdict.value
        d.pop("rows")
        return d


def moment_coefficients(n: float, a0: float) -> tuple[float, float]:
    return 2.0 * (4.0 - n), 1.5 * a0 * (n - 1.0)


def _first_root(t: np.ndarray, f: np.ndarray) -> float | None:
    idx = np.flatnonzero(f <= 0)
    if idx.size == 0:
        return None
    i = int(idx[0])
    if i == 0:
        return float(t[0])
    return float(t[i - 1] + (t[i] - t[i - 1]) * f[i - 1] / (f[i - 1] - f[i]))


def _touches_boundary(ledger) -> bool:
    if ledger.domain is None:
        return False
    lo, hi, dx = ledger.domain
    for xl, xr in ledger.support:
        if math.isnan(xl):
            continue
        if xl <= lo + dx or xr >= hi - dx:
            return True
    return False


def moment_certificate(ledger, p: ProblemParams, tol_ineq: float = 0.05, h0: fn.Field | None = None,
                       T_star: float | None = None) -> BlowupCertificate:
    """Evaluate ``e^{-B~} int x^2 G~(h) <= V0 + int e^{-B~}(k1 E0 + k2 int x^2 h_xx^2)``.

    ``h0`` (unlifted) is used for the reported ``E0``/``V0``/``T_ub``; the
    inequality itself is checked against the ledger's own first sample.
    """
    n = p.n
    if not 0 < n < 2:
        raise ExponentOutOfRange(f"moment certificate needs 0 < n < 2, got n={n}")
    if _touches_boundary(ledger):
        raise BoundaryContact("support reached the domain boundary")
    k1, k2 = moment_coefficients(n, p.a0)
    s = ledger.samples
    t = np.array([x.t for x in s])
    lhs = np.exp(-np.array([x.Btilde for x in s])) * np.array([x.moment for x in s])
    E_run, V_run = s[0].energy, s[0].moment
    rhs = V_run + k1 * E_run * np.array([x.g_weight for x in s]) + k2 * np.array([x.k2_integral for x in s])
    excess = lhs - rhs
    rel = np.where(np.abs(rhs) > 0, excess / np.abs(rhs), np.where(excess > 0, np.inf, 0.0))
    margin = float(np.max(rel)) if rel.size else 0.0

    E0, V0 = (fn.energy(h0, p), fn.second_moment_entropy(h0, n)) if h0 is not None else (E_run, V_run)
    T_ub = None
    if E0 < 0 and n <= 1:
        if n == 1:
            T_ub = V0 / (6.0 * abs(E0))
        else:
            T_ub = _first_root(t, rhs)
    if margin > tol_ineq:
        verdict = Verdict.VIOLATED
    elif T_star is None:
        verdict = Verdict.NO_BLOWUP
    else:
        verdict = Verdict.CONSISTENT
    rows = [(float(a), float(b), float(c), float(d)) for a, b, c, d in zip(t, lhs, rhs, excess)]
    return BlowupCertificate(k1, k2, E0, V0, T_ub, T_star, margin, verdict, tol_ineq, rows=rows)
