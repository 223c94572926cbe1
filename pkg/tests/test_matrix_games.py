import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import closed_form_2x2, lp_value
from trajlens.matrix_games import (
    CERT_TOL,
    NumericallySingularError,
    best_response_value,
    solve_matrix_game,
)


def check_solution(A, sol):
    A = np.asarray(A, dtype=float)
    for p in (sol.x, sol.y):
        assert np.all(p >= 0) and abs(p.sum() - 1) <= 1e-12
    lo, hi = sol.certificate(A)
    assert lo >= sol.value - CERT_TOL and hi <= sol.value + CERT_TOL


def test_matching_pennies():
    sol = solve_matrix_game([[1, -1], [-1, 1]])
    assert sol.value == pytest.approx(0, abs=1e-12)
    assert sol.x == pytest.approx([0.5, 0.5]) and sol.y == pytest.approx([0.5, 0.5])


def test_identity():
    sol = solve_matrix_game([[1, 0], [0, 1]])
    assert sol.value == pytest.approx(0.5, abs=1e-12)
    assert sol.x == pytest.approx([0.5, 0.5]) and sol.y == pytest.approx([0.5, 0.5])


def test_dominant_row():
    sol = solve_matrix_game([[1, 1], [0, 0]])
    assert sol.value == 1
    assert list(sol.x) == [1, 0]


def test_single_row_and_column():
    assert solve_matrix_game([[0.3, -0.2, 0.9]]).value == -0.2
    assert solve_matrix_game(np.arange(10.0).reshape(10, 1) / 10).value == 0.9


def test_size_cap():
    with pytest.raises(ValueError):
        solve_matrix_game(np.zeros((9, 2)))


def test_rejects_non_finite():
    with pytest.raises(ValueError):
        solve_matrix_game([[np.nan, 0], [0, 1]])


def test_degenerate_game_is_deterministic():
    A = np.zeros((3, 3))
    a, b = solve_matrix_game(A), solve_matrix_game(A)
    assert a.value == 0 and list(a.x) == [1, 0, 0] and list(a.y) == [1, 0, 0]
    assert np.array_equal(a.x, b.x)


def test_best_response_value():
    assert best_response_value([[1, 0], [0, 1]], [0.5, 0.5]) == 0.5
    assert best_response_value([[0.4, 0.4, 0.4]], [1]) == 0.4
    assert best_response_value([[1, -1], [-1, 1]], [1, 0]) == -1
    with pytest.raises(ValueError):
        best_response_value([[1, 0], [0, 1]], [0.7, 0.7])


def test_singular_error_carries_location():
    err = NumericallySingularError("x", horizon=3, state="s")
    assert err.horizon == 3 and err.state == "s"


matrices = st.integers(2, 4).flatmap(
    lambda m: st.integers(2, 4).flatmap(
        lambda n: arrays(np.float64, (m, n), elements=st.floats(-1, 1, allow_nan=False))
    )
)


@settings(max_examples=150, deadline=None)
@given(matrices)
def test_certificate_and_lp_agreement(A):
    sol = solve_matrix_game(A)
    check_solution(A, sol)
    assert sol.value == pytest.approx(lp_value(A), abs=1e-6)


@settings(max_examples=150, deadline=None)
@given(arrays(np.float64, (2, 2), elements=st.integers(-8, 8).map(lambda k: k / 8)))
def test_two_by_two_closed_form(A):
    assert solve_matrix_game(A).value == pytest.approx(float(closed_form_2x2(A)), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(matrices, st.floats(0.1, 3), st.floats(-1, 1))
def test_shift_scale_value(A, alpha, beta):
    base = solve_matrix_game(A)
    moved = solve_matrix_game(alpha * A + beta)
    assert moved.value == pytest.approx(alpha * base.value + beta, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 3), st.floats(-1, 1))
def test_shift_scale_strategies(seed, alpha, beta):
    # generic matrices have unique optimal strategies
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1, 1, size=tuple(rng.integers(2, 5, size=2)))
    base = solve_matrix_game(A)
    moved = solve_matrix_game(alpha * A + beta)
    assert moved.x == pytest.approx(base.x, abs=1e-9)
    assert moved.y == pytest.approx(base.y, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(matrices)
def test_transpose_swaps_players(A):
    assert solve_matrix_game(-A.T).value == pytest.approx(-solve_matrix_game(A).value, abs=1e-9)
