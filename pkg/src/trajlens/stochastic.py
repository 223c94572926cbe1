"""Zero-sum stochastic games with absorbing states.

Finite-horizon values follow the Shapley recursion on totals,
``W_n(s) = val[g(s) + sum_t P(t | s, i, j) W_{n-1}(t)]`` with ``W_n = n rho``
at absorbing states.  An absorbing payoff counts at the stage it is reached
and at every later stage.  Markov strategy profiles are evaluated exactly by
forward propagation of the state distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .dp import ModelError, exact
from .matrix_games import GameSolution, NumericallySingularError, solve_matrix_game
from .trajectories import DEFAULT_GRID, DeviationProfile

_ROW_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class GameState:
    """One state: absorbing with payoff ``rho``, or active with a stage matrix."""

    id: str
    absorbing: bool
    rho: float = 0.0
    payoff: np.ndarray | None = None  # (a1, a2)
    transition: np.ndarray | None = None  # (a1, a2, |S|)

    @property
    def actions(self) -> tuple[int, int]:
        if self.absorbing:
            return (0, 0)
        return self.payoff.shape


@dataclass(frozen=True, eq=False)
class StochasticGameModel:
    states: tuple[GameState, ...]

    def __post_init__(self):
        states = tuple(self.states)
        object.__setattr__(self, "states", states)
        if not states:
            raise ModelError("game has no states", "states")
        S = len(states)
        ids = set()
        for k, st in enumerate(states):
            loc = f"states[{k}]"
            if st.id in ids:
                raise ModelError(f"duplicate state id {st.id!r}", f"{loc}.id")
            ids.add(st.id)
            if st.absorbing:
                if not -1.0 <= st.rho <= 1.0:
                    raise ModelError(f"absorbing payoff {st.rho!r} outside [-1,1]", f"{loc}.rho")
                continue
            g, P = st.payoff, st.transition
            if g is None or P is None or g.ndim != 2 or g.size == 0:
                raise ModelError("active state needs a nonempty payoff matrix", f"{loc}.payoff")
            if not np.all(np.isfinite(g)) or np.any(np.abs(g) > 1.0):
                raise ModelError("stage payoffs must lie in [-1,1]", f"{loc}.payoff")
            if P.shape != g.shape + (S,):
                raise ModelError(
                    f"transition shape {P.shape} does not match {g.shape + (S,)}", f"{loc}.next"
                )
            if np.any(P < 0):
                raise ModelError("negative transition probability", f"{loc}.next")
            sums = P.sum(axis=2)
            bad = np.argwhere(np.abs(sums - 1.0) > _ROW_TOL)
            if len(bad):
                i, j = bad[0]
                raise ModelError(
                    f"transition row sums to {sums[i, j]!r}", f"{loc}.next[{i}][{j}]"
                )

    # -- construction -------------------------------------------------------

    @classmethod
    def from_dict(cls, data: Mapping) -> "StochasticGameModel":
        if not isinstance(data, Mapping):
            raise ModelError("game must be a JSON object", "$")
        if data.get("type") != "zsg":
            raise ModelError(f"expected type 'zsg', got {data.get('type')!r}", "type")
        raw = data.get("states")
        if not isinstance(raw, list) or not raw:
            raise ModelError("'states' must be a nonempty list", "states")
        index = {}
        for k, st in enumerate(raw):
            if not isinstance(st, Mapping) or not isinstance(st.get("id"), str):
                raise ModelError("state record needs a string 'id'", f"states[{k}]")
            if st["id"] in index:
                raise ModelError(f"duplicate state id {st['id']!r}", f"states[{k}].id")
            index[st["id"]] = k
        S = len(raw)
        states = []
        for k, st in enumerate(raw):
            loc = f"states[{k}]"
            absorbing = st.get("absorbing")
            if not isinstance(absorbing, bool):
                raise ModelError("'absorbing' must be true or false", f"{loc}.absorbing")
            if absorbing:
                extra = set(st) - {"id", "absorbing", "rho"}
                if extra:
                    raise ModelError(f"unknown keys {sorted(extra)}", loc)
                rho = st.get("rho")
                if isinstance(rho, bool) or not isinstance(rho, (int, float)):
                    raise ModelError("'rho' must be a number", f"{loc}.rho")
                states.append(GameState(st["id"], True, float(rho)))
                continue
            extra = set(st) - {"id", "absorbing", "payoff", "next"}
            if extra:
                raise ModelError(f"unknown keys {sorted(extra)}", loc)
            try:
                g = np.array(st["payoff"], dtype=float)
            except (KeyError, TypeError, ValueError):
                raise ModelError("'payoff' must be a rectangular matrix of numbers", f"{loc}.payoff") from None
            if g.ndim != 2 or g.size == 0:
                raise ModelError("'payoff' must be a nonempty matrix", f"{loc}.payoff")
            nxt = st.get("next")
            if not isinstance(nxt, list) or len(nxt) != g.shape[0]:
                raise ModelError(f"'next' must have {g.shape[0]} rows", f"{loc}.next")
            P = np.zeros(g.shape + (S,))
            for i, row in enumerate(nxt):
                if not isinstance(row, list) or len(row) != g.shape[1]:
                    raise ModelError(f"'next' row must have {g.shape[1]} cells", f"{loc}.next[{i}]")
                for j, dist in enumerate(row):
                    cell = f"{loc}.next[{i}][{j}]"
                    if not isinstance(dist, list) or not dist:
                        raise ModelError("distribution must be a nonempty list", cell)
                    for e, entry in enumerate(dist):
                        if not isinstance(entry, Mapping) or set(entry) != {"s", "p"}:
                            raise ModelError("entries must be {'s': id, 'p': prob}", f"{cell}[{e}]")
                        if entry["s"] not in index:
                            raise ModelError(f"dangling state id {entry['s']!r}", f"{cell}[{e}].s")
                        p = entry["p"]
                        if isinstance(p, bool) or not isinstance(p, (int, float)):
                            raise ModelError("'p' must be a number", f"{cell}[{e}].p")
                        P[i, j, index[entry["s"]]] += float(p)
            states.append(GameState(st["id"], False, payoff=g, transition=P))
        return cls(tuple(states))

    def to_dict(self) -> dict:
        out = []
        for st in self.states:
            if st.absorbing:
                out.append({"id": st.id, "absorbing": True, "rho": st.rho})
                continue
            a1, a2 = st.payoff.shape
            nxt = [
                [
                    [{"s": self.states[t].id, "p": float(st.transition[i, j, t])}
                     for t in np.flatnonzero(st.transition[i, j])]
                    for j in range(a2)
                ]
                for i in range(a1)
            ]
            out.append({
                "id": st.id,
                "absorbing": False,
                "payoff": st.payoff.tolist(),
                "next": nxt,
            })
        return {"type": "zsg", "states": out}

    # -- access -------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.states)

    @cached_property
    def ids(self) -> tuple[str, ...]:
        return tuple(st.id for st in self.states)

    def index(self, state) -> int:
        if isinstance(state, (int, np.integer)) and not isinstance(state, bool):
            if not 0 <= state < len(self.states):
                raise ModelError(f"state index {state} out of range")
            return int(state)
        try:
            return self.ids.index(str(state))
        except ValueError:
            raise ModelError(f"unknown state {state!r}") from None

    @cached_property
    def rho(self) -> np.ndarray:
        return np.array([st.rho if st.absorbing else 0.0 for st in self.states])

    @cached_property
    def absorbing_mask(self) -> np.ndarray:
        return np.array([st.absorbing for st in self.states])


# --------------------------------------------------------------------------
# values


@dataclass
class GameValueTable:
    """``values[n, s] = v_n(s)`` for ``n = 0..N`` and the stage solutions used."""

    totals: np.ndarray
    values: np.ndarray
    solutions: list[dict[int, GameSolution]] = field(repr=False, default_factory=list)

    @property
    def N(self) -> int:
        return self.totals.shape[0] - 1


def _solve_stage(matrix, n, s, game):
    try:
        return solve_matrix_game(matrix)
    except NumericallySingularError as err:
        raise NumericallySingularError(
            f"stage game at horizon {n}, state {game.ids[s]!r}: {err}", horizon=n, state=game.ids[s]
        ) from err


def shapley_finite(game: StochasticGameModel, N: int) -> GameValueTable:
    """Values ``v_n(s)`` for ``n <= N``; ``solutions[n][s]`` holds the stage optima."""
    if int(N) != N or N < 1:
        raise ValueError(f"horizon must be a positive integer, got {N!r}")
    N = int(N)
    S = len(game)
    W = np.zeros((N + 1, S))
    solutions: list[dict[int, GameSolution]] = [{}]
    for n in range(1, N + 1):
        stage = {}
        for s, st in enumerate(game.states):
            if st.absorbing:
                W[n, s] = n * st.rho
                continue
            sol = _solve_stage(st.payoff + st.transition @ W[n - 1], n, s, game)
            stage[s] = sol
            W[n, s] = sol.value
        solutions.append(stage)
    values = np.zeros_like(W)
    values[1:] = W[1:] / np.arange(1, N + 1)[:, None]
    # absorbing states are exact by construction
    values[1:, game.absorbing_mask] = game.rho[game.absorbing_mask]
    return GameValueTable(W, values, solutions)


@dataclass(frozen=True)
class GameDiscountedValue:
    values: np.ndarray
    iterations: int
    residual: float
    lam: float


def shapley_discounted(game: StochasticGameModel, lam: float, tol: float = 1e-10) -> GameDiscountedValue:
    """Fixed point of ``v(s) = val[lam g(s) + (1 - lam) P v]`` from the zero vector."""
    if not 0.0 < lam < 1.0:
        raise ValueError(f"discount rate must lie in (0, 1), got {lam!r}")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    absorbing = game.absorbing_mask

    def step(v, it):
        out = np.where(absorbing, game.rho, 0.0)
        for s, st in enumerate(game.states):
            if not st.absorbing:
                out[s] = _solve_stage(lam * st.payoff + (1 - lam) * (st.transition @ v), it, s, game).value
        return out

    bound = math.ceil(math.log(tol) / math.log1p(-lam)) + 64
    v = np.zeros(len(game))
    it = 0
    while True:
        it += 1
        nxt = step(v, it)
        gap = float(np.max(np.abs(nxt - v)))
        v = nxt
        if gap <= tol or it > bound:
            break
    residual = float(np.max(np.abs(step(v, it + 1) - v)))
    return GameDiscountedValue(v, it, residual, lam)


# --------------------------------------------------------------------------
# Markov profiles


class ProfileError(ValueError):
    pass


@dataclass
class MarkovProfile:
    """Stage- and state-dependent mixed actions of one player.

    ``stages[m - 1]`` maps a state index to the mixed action used at stage
    ``m``; states missing there fall back to ``stationary``.
    """

    player: int
    stationary: dict[int, Sequence] = field(default_factory=dict)
    stages: list[dict[int, Sequence]] = field(default_factory=list)

    def __post_init__(self):
        if self.player not in (1, 2):
            raise ProfileError("player must be 1 or 2")

    def action(self, m: int, s: int):
        if m - 1 < len(self.stages) and s in self.stages[m - 1]:
            return self.stages[m - 1][s]
        if s in self.stationary:
            return self.stationary[s]
        raise ProfileError(f"player {self.player} has no action at stage {m}, state {s}")

    def validate(self, game: StochasticGameModel, n: int) -> None:
        axis = self.player - 1
        for m in range(1, n + 1):
            for s, st in enumerate(game.states):
                if st.absorbing:
                    continue
                p = self.action(m, s)
                count = st.payoff.shape[axis]
                if len(p) != count:
                    raise ProfileError(
                        f"player {self.player} at stage {m}, state {st.id!r}: "
                        f"expected {count} probabilities, got {len(p)}"
                    )
                if any(q < 0 for q in p) or abs(float(sum(p)) - 1.0) > 1e-12:
                    raise ProfileError(
                        f"player {self.player} at stage {m}, state {st.id!r}: not a probability vector"
                    )

    @classmethod
    def uniform(cls, game: StochasticGameModel, player: int) -> "MarkovProfile":
        axis = player - 1
        return cls(player, {
            s: [Fraction(1, st.payoff.shape[axis])] * st.payoff.shape[axis]
            for s, st in enumerate(game.states) if not st.absorbing
        })

    @classmethod
    def pure(cls, game: StochasticGameModel, player: int, choice: Mapping[int, int] | None = None,
             default: int = 0) -> "MarkovProfile":
        """Stationary pure profile: ``choice[s]`` (else ``default``, clipped)."""
        axis = player - 1
        choice = choice or {}
        out = {}
        for s, st in enumerate(game.states):
            if st.absorbing:
                continue
            count = st.payoff.shape[axis]
            a = min(choice.get(s, default), count - 1)
            out[s] = [Fraction(int(k == a)) for k in range(count)]
        return cls(player, out)


def optimal_markov_profiles(game: StochasticGameModel, table: GameValueTable, n: int):
    """Profiles playing the stage optima of ``G_n``: stage ``m`` uses horizon ``n - m + 1``."""
    if table.N < n:
        raise ValueError("value table too short")
    sigma = MarkovProfile(1, stages=[
        {s: sol.x.tolist() for s, sol in table.solutions[n - m + 1].items()} for m in range(1, n + 1)
    ])
    tau = MarkovProfile(2, stages=[
        {s: sol.y.tolist() for s, sol in table.solutions[n - m + 1].items()} for m in range(1, n + 1)
    ])
    return sigma, tau


def _arrays(game: StochasticGameModel, exact_mode: bool):
    if not exact_mode:
        return [(st.rho, st.payoff, st.transition) for st in game.states]
    out = []
    for st in game.states:
        if st.absorbing:
            out.append((exact(st.rho), None, None))
            continue
        g = np.vectorize(exact, otypes=[object])(st.payoff)
        P = np.vectorize(exact, otypes=[object])(st.transition)
        out.append((None, g, P))
    return out


def propagate(game: StochasticGameModel, sigma: MarkovProfile, tau: MarkovProfile, s, n: int,
              exact_mode: bool = False):
    """Expected stage payoffs and state distributions under ``(sigma, tau)``.

    Returns ``(payoffs, distributions)`` with ``payoffs[m-1] = E[f_m]`` and
    ``distributions[m-1]`` the law of the state at stage ``m``.  With
    ``exact_mode`` everything is computed in Fractions.
    """
    if sigma.player != 1 or tau.player != 2:
        raise ProfileError("expected a player-1 profile and a player-2 profile")
    s = game.index(s)
    if n < 0:
        raise ValueError("horizon must be nonnegative")
    sigma.validate(game, n)
    tau.validate(game, n)
    S = len(game)
    conv = exact if exact_mode else float
    data = _arrays(game, exact_mode)
    if exact_mode:
        dist = np.array([Fraction(0)] * S, dtype=object)
        dist[s] = Fraction(1)
    else:
        dist = np.zeros(S)
        dist[s] = 1.0
    payoffs, dists = [], []
    for m in range(1, n + 1):
        dists.append(dist.copy())
        stage = conv(0)
        nxt = dist * 0
        for k, st in enumerate(game.states):
            mass = dist[k]
            if mass == 0:
                continue
            rho, g, P = data[k]
            if st.absorbing:
                stage += mass * rho
                nxt[k] += mass
                continue
            x = np.array([conv(p) for p in sigma.action(m, k)], dtype=object if exact_mode else float)
            y = np.array([conv(p) for p in tau.action(m, k)], dtype=object if exact_mode else float)
            stage += mass * (x @ g @ y)
            nxt = nxt + mass * np.tensordot(np.outer(x, y), P, axes=([0, 1], [0, 1]))
        payoffs.append(stage)
        total = nxt.sum()
        if (total != 1) if exact_mode else abs(total - 1.0) > 1e-12:
            raise ArithmeticError(f"probability mass {total} at stage {m + 1}")
        dist = nxt
    return payoffs, dists


def eval_profile(game: StochasticGameModel, sigma: MarkovProfile, tau: MarkovProfile, s, n: int,
                 exact_mode: bool = False) -> list:
    """Cumulative expected payoffs ``E[sum_{m<=k} f_m]`` for ``k = 0..n``."""
    payoffs, _ = propagate(game, sigma, tau, s, n, exact_mode)
    out = [Fraction(0) if exact_mode else 0.0]
    for p in payoffs:
        out.append(out[-1] + (p if exact_mode else float(p)))
    return out


def expected_deviation_profile(game, sigma, tau, s, n: int, v_ref, grid=DEFAULT_GRID,
                               exact_mode: bool = False) -> DeviationProfile:
    """Deviation profile of the expected running payoff under ``(sigma, tau)``."""
    cumulative = eval_profile(game, sigma, tau, s, n, exact_mode)
    v_ref = exact(v_ref) if exact_mode else float(v_ref)
    return DeviationProfile.from_cumulative(cumulative, game.ids[game.index(s)], v_ref, grid)


def induced_value(game: StochasticGameModel, profile: MarkovProfile, s, n: int) -> float:
    """Best-response value against a fixed Markov profile of the opponent.

    If ``profile`` belongs to player 2, player 1 maximises the induced
    n-stage problem; if it belongs to player 1, player 2 minimises.  Returns
    the average ``W_n(s) / n``.
    """
    s = game.index(s)
    profile.validate(game, n)
    if n == 0:
        return 0.0
    S = len(game)
    W = np.zeros(S)
    for k in range(1, n + 1):
        m = n - k + 1  # stage at which k stages remain
        new = np.zeros(S)
        for q, st in enumerate(game.states):
            if st.absorbing:
                new[q] = k * st.rho
                continue
            Q = st.payoff + st.transition @ W
            mix = np.array([float(p) for p in profile.action(m, q)])
            if profile.player == 2:
                new[q] = (Q @ mix).max()
            else:
                new[q] = (mix @ Q).min()
        W = new
    return float(W[s] / n)
