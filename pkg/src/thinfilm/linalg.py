"""Cyclic (periodic) pentadiagonal solves.

The periodic matrix is split into its banded part plus the four wrap-around
corners; the banded part goes to LAPACK via ``scipy.linalg.solve_banded``
and the corners are folded back in with a rank-4 Woodbury correction.
"""
from __future__ import annotations

import numpy as np
from scipy import linalg

from .errors import LinearSolveFailure

OFFSETS = (-2, -1, 0, 1, 2)


def cyclic_matvec(diags: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``A @ v`` where ``diags[k, i]`` is ``A[i, (i + OFFSETS[k]) % N]``."""
    out = np.zeros_like(v)
    for k, off in enumerate(OFFSETS):
        out += diags[k] * np.roll(v, -off)
    return out


def cyclic_dense(diags: np.ndarray) -> np.ndarray:
    n = diags.shape[1]
    A = np.zeros((n, n))
    rows = np.arange(n)
    for k, off in enumerate(OFFSETS):
        np.add.at(A, (rows, (rows + off) % n), diags[k])
    return A


def solve_cyclic_penta(diags: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve the periodic pentadiagonal system given in row-diagonal form."""
    diags = np.asarray(diags, dtype=float)
    n = diags.shape[1]
    if n < 5:
        raise ValueError("need at least 5 unknowns")
    # LAPACK banded storage: ab[2 + i - j, j] = A[i, j]
    ab = np.zeros((5, n))
    rows = np.arange(n)
    for k, off in enumerate(OFFSETS):
        cols = rows + off
        inside = (cols >= 0) & (cols < n)
        ab[2 - off, cols[inside]] = diags[k, inside]

    # wrap-around entries, expressed through the index set {0, 1, n-2, n-1}
    idx = np.array([0, 1, n - 2, n - 1])
    K = np.zeros((4, 4))
    for k, off in enumerate(OFFSETS):
        for r_pos, r in enumerate(idx):
            c = r + off
            if 0 <= c < n:
                continue
            c %= n
            K[r_pos, int(np.where(idx == c)[0][0])] += diags[k, r]

    U = np.zeros((n, 4))
    U[idx, np.arange(4)] = 1.0
    try:
        sol = linalg.solve_banded((2, 2), ab, np.column_stack([rhs, U]), check_finite=False)
    except (linalg.LinAlgError, ValueError) as exc:
        raise LinearSolveFailure(str(exc)) from exc
    y, Z = sol[:, 0], sol[:, 1:]
    cap = np.eye(4) + K @ Z[idx]
    try:
        corr = np.linalg.solve(cap, K @ y[idx])
    except np.linalg.LinAlgError as exc:
        raise LinearSolveFailure(str(exc)) from exc
    x = y - Z @ corr
    if not np.all(np.isfinite(x)):
        raise LinearSolveFailure("non-finite solution")
    return x
