"""Two-player zero-sum matrix games by support enumeration.

Every finite matrix game has an optimal pair supported on a square
submatrix whose bordered equalisation system is nonsingular, so it is
enough to scan square support pairs in a fixed order (smaller supports
first, then lexicographic) and keep the first pair that passes the duality
certificate.  The row player maximises.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

MAX_SIZE = 8
CERT_TOL = 1e-9
_NEG_TOL = 1e-10


class NumericallySingularError(ArithmeticError):
    """No support pair produced a certified solution."""

    def __init__(self, message: str, horizon: int | None = None, state=None):
        self.horizon = horizon
        self.state = state
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class GameSolution:
    value: float
    x: np.ndarray
    y: np.ndarray

    def certificate(self, A) -> tuple[float, float]:
        """``(min_j (x^T A)_j, max_i (A y)_i)``; these bracket the value."""
        A = np.asarray(A, dtype=float)
        return float((self.x @ A).min()), float((A @ self.y).max())


def as_matrix(A) -> np.ndarray:
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError(f"payoff matrix must be 2-D and nonempty, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("payoff matrix has non-finite entries")
    return A


def _equalize(M: np.ndarray):
    """Solve ``M^T x = v 1, sum x = 1`` for ``(x, v)``; None if singular."""
    k = M.shape[0]
    K = np.zeros((k + 1, k + 1))
    K[:k, :k] = M.T
    K[:k, k] = -1.0
    K[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(sol)):
        return None
    return sol[:k], sol[k]


def _normalize(p: np.ndarray) -> np.ndarray | None:
    if np.any(p < -_NEG_TOL):
        return None
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if total <= 0:
        return None
    return p / total


def _search(A: np.ndarray, tol: float) -> GameSolution | None:
    m, n = A.shape
    for k in range(1, min(m, n) + 1):
        for rows in combinations(range(m), k):
            for cols in combinations(range(n), k):
                M = A[np.ix_(rows, cols)]
                if k == 1:
                    xs, ys = np.ones(1), np.ones(1)
                else:
                    sx = _equalize(M)
                    sy = _equalize(-M.T)
                    if sx is None or sy is None:
                        continue
                    xs, ys = _normalize(sx[0]), _normalize(sy[0])
                    if xs is None or ys is None:
                        continue
                x = np.zeros(m)
                y = np.zeros(n)
                x[list(rows)] = xs
                y[list(cols)] = ys
                lower = (x @ A).min()
                upper = (A @ y).max()
                if upper - lower <= tol:
                    value = float(x @ A @ y)
                    if lower >= value - tol and upper <= value + tol:
                        return GameSolution(value, x, y)
    return None


def solve_matrix_game(A, tol: float = CERT_TOL) -> GameSolution:
    """Value and optimal mixed strategies of the game with payoff matrix ``A``.

    Raises :class:`NumericallySingularError` when no support pair yields a
    solution passing the certificate within ``tol``.
    """
    A = as_matrix(A)
    m, n = A.shape
    # a single row or column only needs the k = 1 pass
    if min(m, n) > 1 and max(m, n) > MAX_SIZE:
        raise ValueError(f"support enumeration is capped at {MAX_SIZE}x{MAX_SIZE}, got {m}x{n}")
    # a tight first pass keeps near-degenerate games from settling on a
    # support that only certifies thanks to the slack
    strict = 1e-12 * max(1.0, float(np.abs(A).max()))
    for eps in (min(strict, tol), tol):
        sol = _search(A, eps)
        if sol is not None:
            return sol
    raise NumericallySingularError(f"no certified solution for {m}x{n} game")


def value(A) -> float:
    return solve_matrix_game(A).value


def best_response_value(A, x) -> float:
    """Payoff the row strategy ``x`` guarantees: ``min_j (x^T A)_j``."""
    A = as_matrix(A)
    x = np.asarray(x, dtype=float)
    if x.shape != (A.shape[0],):
        raise ValueError(f"row strategy must have length {A.shape[0]}")
    if np.any(x < -_NEG_TOL) or abs(x.sum() - 1.0) > 1e-12:
        raise ValueError("row strategy must be a probability vector")
    return float((x @ A).min())
