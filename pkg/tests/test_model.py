from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import optimize

from thinfilm.errors import NotCritical, ZeroDestabilization
from thinfilm.model import (
    ProblemParams,
    Regime,
    band_edge,
    classify_regime,
    critical_mass,
    exact,
    fastest_wavenumber,
    growth_rate,
    regime_report,
    regions_for,
    theorem_applicability,
)


def test_exact_reads_decimal_floats():
    assert exact(0.1) == Fraction(1, 10)
    assert exact("2.5") == Fraction(5, 2)
    assert exact(np.float64(0.3)) == Fraction(3, 10)


@pytest.mark.parametrize("n,m,regime", [
    (1, 1, Regime.SUBCRITICAL),
    (1, 3, Regime.CRITICAL),
    (0.1, 2.1, Regime.CRITICAL),  # 0.1 + 2 != 2.1 in binary, equal as decimals
    (1, 3.5, Regime.SUPERCRITICAL),
    (1.5, 3.4999, Regime.SUBCRITICAL),
])
def test_regime(n, m, regime):
    assert classify_regime(ProblemParams(n, m)) is regime


def test_regions_spot_values():
    assert regions_for(1, 3) == (True, True, True)
    assert regions_for(1, 0.4) == (False, False, False)
    assert regions_for(0.25, 3.9) == (True, True, True)   # 4 - n <= m < 6 - n
    assert regions_for(0.25, 6) == (True, False, False)   # m = 6 - n excluded
    assert regions_for(1.5, 3.4) == (True, True, False)   # 1 < n < 2 needs m >= n + 2
    assert regions_for(3, 4) == (True, False, False)


@given(st.fractions(min_value=Fraction(1, 100), max_value=4), st.fractions(min_value=Fraction(1, 100), max_value=8))
def test_region_nesting(n, m):
    existence, fsp, blowup = regions_for(n, m)
    # blow-up region lies inside the finite-speed region, which lies inside existence
    assert not blowup or fsp
    assert not fsp or existence


def test_invalid_params():
    for bad in (dict(n=0, m=1), dict(n=1, m=-1), dict(n=1, m=1, a0=0), dict(n=1, m=1, a1=-1),
                dict(n=1, m=1, Nx=15), dict(n=1, m=1, a=0)):
        with pytest.raises(ValueError):
            ProblemParams(**bad)


def test_grid_is_cell_centred():
    p = ProblemParams(1, 1, a=2.0, Nx=16)
    x = p.grid()
    assert x[0] == pytest.approx(-2 + p.dx / 2)
    assert np.allclose(x + x[::-1], 0.0)


def test_growth_rate_example():
    p = ProblemParams(1, 1)
    assert growth_rate(math.sqrt(0.5), 1.0, p) == pytest.approx(0.25, rel=1e-14)
    assert growth_rate(1.0, 1.0, p) == pytest.approx(0.0, abs=1e-15)


@given(st.floats(0.2, 3), st.floats(0.2, 3), st.floats(0.1, 4), st.floats(0.1, 4), st.floats(0.2, 3))
def test_fastest_wavenumber_maximises_growth(n, m, a0, a1, hbar):
    p = ProblemParams(n, m, a0=a0, a1=a1)
    edge = band_edge(hbar, p)
    res = optimize.minimize_scalar(lambda k: -growth_rate(k, hbar, p), bounds=(0, edge), method="bounded",
                                   options={"xatol": 1e-12 * edge})
    assert fastest_wavenumber(hbar, p) == pytest.approx(res.x, rel=1e-5)
    assert growth_rate(edge, hbar, p) == pytest.approx(0.0, abs=1e-9 * max(1.0, a0 * edge**4 * hbar**n))


def test_a1_zero_all_modes_decay():
    p = ProblemParams(1, 1, a1=0)
    assert np.all(growth_rate(np.linspace(0.1, 5, 20), 1.0, p) < 0)


def test_critical_mass():
    assert critical_mass(ProblemParams(1, 3)) == pytest.approx(math.sqrt(0.6), rel=1e-12)
    with pytest.raises(NotCritical):
        critical_mass(ProblemParams(1, 2))
    with pytest.raises(ZeroDestabilization):
        critical_mass(ProblemParams(1, 3, a1=0))


def test_regime_report_fields():
    rep = regime_report(ProblemParams(1, 3))
    assert rep.regime is Regime.CRITICAL
    assert (rep.existence_ok, rep.fsp_ok, rep.blowup_ok) == theorem_applicability(ProblemParams(1, 3))
    assert rep.critical_mass == pytest.approx(math.sqrt(0.6))
