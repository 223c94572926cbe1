import json
import random
from fractions import Fraction

import numpy as np
import pytest

from trajlens import corpus
from trajlens.dp import ModelError
from trajlens.matrix_games import NumericallySingularError
from trajlens.stochastic import (
    GameState,
    MarkovProfile,
    ProfileError,
    StochasticGameModel,
    eval_profile,
    expected_deviation_profile,
    induced_value,
    optimal_markov_profiles,
    propagate,
    shapley_discounted,
    shapley_finite,
)


@pytest.fixture(scope="module")
def big():
    return corpus.big_match().model


@pytest.fixture(scope="module")
def gamma10():
    return corpus.gamma_game(10)


def random_markov(game, player, n, rng):
    axis = player - 1
    stages = []
    for _ in range(n):
        stage = {}
        for s, st in enumerate(game.states):
            if st.absorbing:
                continue
            w = [Fraction(rng.randint(0, 8)) for _ in range(st.payoff.shape[axis])]
            if sum(w) == 0:
                w[0] = Fraction(1)
            stage[s] = [x / sum(w) for x in w]
        stages.append(stage)
    return MarkovProfile(player, stages=stages)


def all_absorbing(rhos=(-1.0, -0.25, 0.5, 1.0)):
    return StochasticGameModel(tuple(GameState(f"r{k}", True, r) for k, r in enumerate(rhos)))


# -- values ----------------------------------------------------------------


def test_big_match_values(big):
    table = shapley_finite(big, 200)
    assert np.max(np.abs(table.values[1:, 0] - 0.5)) <= 1e-9
    assert list(table.values[5]) == [pytest.approx(0.5, abs=1e-12), 1.0, 0.0]


def test_big_match_first_stages_by_hand(big):
    # W_1 = val [[1,0],[0,1]] = 1/2; W_2 = val [[2,0],[1/2,3/2]] = 3/3 = 1
    table = shapley_finite(big, 2)
    assert table.totals[1, 0] == pytest.approx(0.5, abs=1e-15)
    assert table.totals[2, 0] == pytest.approx(1.0, abs=1e-15)
    sol = table.solutions[1][0]
    assert sol.x == pytest.approx([0.5, 0.5]) and sol.y == pytest.approx([0.5, 0.5])


def test_all_absorbing_values():
    game = all_absorbing()
    table = shapley_finite(game, 6)
    assert np.array_equal(table.values[1:], np.tile(game.rho, (6, 1)))
    assert np.array_equal(shapley_discounted(game, 0.1).values, game.rho)


def test_gamma_values(gamma10):
    table = shapley_finite(gamma10.model, 21)
    assert np.max(np.abs(table.values[1:, 0])) <= 1e-9
    assert np.all(np.abs(table.values) <= 1 + 1e-12)


@pytest.mark.parametrize("lam", [0.1, 0.01])
def test_big_match_discounted(big, lam):
    res = shapley_discounted(big, lam, tol=1e-10)
    assert res.values[0] == pytest.approx(0.5, abs=1e-6)
    assert list(res.values[1:]) == [1.0, 0.0]
    assert res.residual <= 1e-10


def test_gamma_discounted(gamma10):
    res = shapley_discounted(gamma10.model, 0.1, tol=1e-10)
    assert abs(res.values[0]) <= 1e-10


def test_discounted_rejects_bad_rate(big):
    for lam in (0, 1, 1.5):
        with pytest.raises(ValueError):
            shapley_discounted(big, lam)


def test_repeated_stage_game():
    P = np.zeros((2, 2, 1))
    P[:, :, 0] = 1.0
    game = StochasticGameModel((GameState("only", False, payoff=np.array([[0.1, 0.2], [0.3, 0.4]]), transition=P),))
    table = shapley_finite(game, 3)
    assert table.values[1:, 0] == pytest.approx([0.3] * 3)


def test_stage_failure_names_horizon_and_state(monkeypatch):
    from trajlens import stochastic

    def fail(_):
        raise NumericallySingularError("no support")

    monkeypatch.setattr(stochastic, "solve_matrix_game", fail)
    with pytest.raises(NumericallySingularError) as info:
        shapley_finite(corpus.big_match().model, 2)
    assert (info.value.horizon, info.value.state) == (1, "play")


# -- profiles --------------------------------------------------------------


def test_big_match_stationary_column_gives_half(big):
    rng = random.Random(7)
    tau = MarkovProfile(2, {0: [Fraction(1, 2), Fraction(1, 2)]})
    for _ in range(5):
        sigma = random_markov(big, 1, 30, rng)
        cum = eval_profile(big, sigma, tau, "play", 30, exact_mode=True)
        assert cum == [Fraction(k, 2) for k in range(31)]


def test_big_match_deviation_floor_error(big):
    tau = MarkovProfile(2, {0: [0.5, 0.5]})
    sigma = MarkovProfile.pure(big, 1, default=1)
    n = 15
    prof = expected_deviation_profile(big, sigma, tau, "play", n, 0.5)
    assert max(abs(d) for d in prof.D) <= 1 / (2 * n) + 1e-15


def test_gamma_cooperate_profile(gamma10):
    sigma, tau = corpus.gamma_cooperate_profiles(gamma10, 5)
    cum = eval_profile(gamma10.model, sigma, tau, "s", 11, exact_mode=True)
    assert cum == [0, 0, 1, 2, 3, 4, 5, 4, 3, 2, 1, 0]
    prof = expected_deviation_profile(gamma10.model, sigma, tau, "s", 11, 0, grid=[Fraction(6, 11)],
                                      exact_mode=True)
    assert prof.D == [Fraction(5, 11)]


def test_zero_length_prefix(big):
    tau = MarkovProfile.uniform(big, 2)
    sigma = MarkovProfile.uniform(big, 1)
    assert eval_profile(big, sigma, tau, 0, 0) == [0.0]


def test_all_absorbing_deviation():
    game = all_absorbing()
    sigma, tau = MarkovProfile(1), MarkovProfile(2)
    n = 9
    for s, c in enumerate(game.rho):
        prof = expected_deviation_profile(game, sigma, tau, s, n, c)
        assert max(abs(d) for d in prof.D) <= abs(c) / n + 1e-15


def test_mass_conservation(gamma10):
    rng = random.Random(3)
    game = gamma10.model
    sigma = random_markov(game, 1, 21, rng)
    tau = random_markov(game, 2, 21, rng)
    _, dists = propagate(game, sigma, tau, "s", 21)
    for d in dists:
        assert abs(d.sum() - 1) <= 1e-12
    _, dists = propagate(game, sigma, tau, "s", 21, exact_mode=True)
    assert all(d.sum() == 1 for d in dists)


@pytest.mark.parametrize("seed", range(5))
def test_profile_value_between_induced_values(big, gamma10, seed):
    rng = random.Random(seed)
    for game, s, n in ((big, "play", 12), (gamma10.model, "s", 9)):
        sigma = random_markov(game, 1, n, rng)
        tau = random_markov(game, 2, n, rng)
        avg = eval_profile(game, sigma, tau, s, n)[-1] / n
        assert induced_value(game, sigma, s, n) - 1e-12 <= avg <= induced_value(game, tau, s, n) + 1e-12


def test_optimal_profiles_attain_value(big, gamma10):
    for game, s, n in ((big, 0, 8), (gamma10.model, 0, 7)):
        table = shapley_finite(game, n)
        sigma, tau = optimal_markov_profiles(game, table, n)
        avg = eval_profile(game, sigma, tau, s, n)[-1] / n
        assert avg == pytest.approx(table.values[n, s], abs=1e-9)
        # each side guarantees the value against best responses
        assert induced_value(game, sigma, s, n) == pytest.approx(table.values[n, s], abs=1e-9)
        assert induced_value(game, tau, s, n) == pytest.approx(table.values[n, s], abs=1e-9)


def test_profile_shape_errors(big):
    tau = MarkovProfile(2, {0: [1.0]})
    with pytest.raises(ProfileError):
        eval_profile(big, MarkovProfile.uniform(big, 1), tau, 0, 3)
    with pytest.raises(ProfileError):
        eval_profile(big, MarkovProfile(1, {0: [0.7, 0.7]}), MarkovProfile.uniform(big, 2), 0, 3)
    with pytest.raises(ProfileError):
        eval_profile(big, MarkovProfile(1, stages=[{0: [1, 0]}]), MarkovProfile.uniform(big, 2), 0, 2)
    with pytest.raises(ProfileError):
        MarkovProfile(3)


# -- model I/O -------------------------------------------------------------


def test_json_round_trip(gamma10, big):
    for game in (big, gamma10.model):
        data = json.loads(json.dumps(game.to_dict()))
        again = StochasticGameModel.from_dict(data)
        assert again.to_dict() == game.to_dict()


@pytest.mark.parametrize(
    "mutate, where",
    [
        (lambda d: d["states"][1].update(rho=1.5), "states[1].rho"),
        (lambda d: d["states"][0]["payoff"][0].__setitem__(0, 2.0), "states[0].payoff"),
        (lambda d: d["states"][0]["next"][1][0][0].update(p=0.9), "states[0].next[1][0]"),
        (lambda d: d["states"][0]["next"][0][0][0].update(s="nowhere"), "states[0].next[0][0][0].s"),
        (lambda d: d["states"][2].update(id="play"), "states[2].id"),
        (lambda d: d.update(type="dp"), "type"),
    ],
)
def test_validation_locations(big, mutate, where):
    data = json.loads(json.dumps(big.to_dict()))
    mutate(data)
    with pytest.raises(ModelError) as info:
        StochasticGameModel.from_dict(data)
    assert info.value.location == where
