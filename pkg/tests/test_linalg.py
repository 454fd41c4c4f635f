from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from thinfilm.errors import LinearSolveFailure
from thinfilm.linalg import cyclic_dense, cyclic_matvec, solve_cyclic_penta


@given(st.integers(5, 80), st.integers(0, 2**31 - 1))
def test_cyclic_solve_matches_dense(n, seed):
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(5, n))
    d[2] += 8.0  # diagonally dominant keeps the dense reference well conditioned
    rhs = rng.normal(size=n)
    A = cyclic_dense(d)
    x = solve_cyclic_penta(d, rhs)
    assert np.allclose(x, np.linalg.solve(A, rhs), atol=1e-11)
    assert np.allclose(cyclic_matvec(d, x), rhs, atol=1e-11)
    assert np.allclose(A @ x, cyclic_matvec(d, x), atol=1e-11)


def test_too_small_and_singular():
    with pytest.raises(ValueError):
        solve_cyclic_penta(np.ones((5, 4)), np.ones(4))
    d = np.zeros((5, 8))
    d[2] = 1.0
    d[2, 3] = 0.0
    with pytest.raises(LinearSolveFailure):
        solve_cyclic_penta(d, np.ones(8))
