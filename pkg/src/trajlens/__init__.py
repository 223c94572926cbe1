"""Values, epsilon-optimal trajectories and running-average checks for
dynamic programs and zero-sum stochastic games."""

__version__ = "0.1.0"

from .dp import (
    DPModel,
    ModelError,
    Play,
    ValueTable,
    check_monotone_limit,
    discounted_value,
    finite_values,
    limit_value_estimate,
)
from .matrix_games import GameSolution, NumericallySingularError, best_response_value, solve_matrix_game
from .stochastic import (
    MarkovProfile,
    StochasticGameModel,
    eval_profile,
    expected_deviation_profile,
    shapley_discounted,
    shapley_finite,
)
from .trajectories import (
    DeviationProfile,
    PReport,
    check_property_P,
    check_property_Pprime,
    deviation_profile,
    enumerate_eps_optimal_plays,
    optimal_play,
    uniform_value_probe,
)
