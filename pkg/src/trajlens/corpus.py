"""Parametric example models with their analytic reference values.

* ``ls-nonregular``: a program where ``v_{2n} = 1/2`` is reached only by
  ``n`` zeros followed by ``n`` ones, so the running average is not constant
  on optimal plays.
* ``big-match``: the 2x2 absorbing game with value 1/2.
* ``gamma``: the game whose subgames ``(2n, m)`` are jointly controlled, so
  that every feasible path of length ``2n`` totals 0.
* ``two-state``, ``three-cycle``, ``absorbing``, ``constant``: regular
  programs used as positive controls.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .dp import DPModel, finite_values
from .stochastic import GameState, MarkovProfile, StochasticGameModel, shapley_finite

SELF_CHECK_K = 6
SELF_CHECK_GAMMA = 3


@dataclass
class CorpusEntry:
    name: str
    params: dict
    model: DPModel | StochasticGameModel
    reference: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return "dp" if isinstance(self.model, DPModel) else "zsg"


# --------------------------------------------------------------------------
# dynamic programs


def ls_nonregular(K: int) -> CorpusEntry:
    """Truncated non-regular program with depth ``K``.

    ``a_1 .. a_K`` pay 0; leaving the spine at ``a_k`` enters the chain
    ``b_{k,1} .. b_{k,k}`` of ones, which ends in a zero-payoff sink.
    """
    K = int(K)
    if K < 2:
        raise ValueError("ls-nonregular needs K >= 2")
    records = []
    for k in range(1, K + 1):
        succ = [f"a{k + 1}", f"b{k},1"] if k < K else [f"b{K},1"]
        records.append((f"a{k}", 0, succ))
    for k in range(1, K + 1):
        for j in range(1, k + 1):
            records.append((f"b{k},{j}", 1, [f"b{k},{j + 1}" if j < k else "sink"]))
    records.append(("sink", 0, ["sink"]))
    model = DPModel.from_records(records)
    entry = CorpusEntry(
        name="ls-nonregular",
        params={"K": K},
        model=model,
        reference={
            "start": "a1",
            # v_{2n}(a1) = 1/2 for n <= K, reached only by jumping at a_n
            "v_2n_start": {2 * n: Fraction(1, 2) for n in range(1, K + 1)},
            "v_n_start": {h: Fraction(max(min(k, h - k) for k in range(1, K + 1)), h)
                          for h in range(1, 2 * K + 1)},
            "optimal_D_half": Fraction(-1, 4),
            # every play of the truncated model ends in the sink
            "limit": [Fraction(0)] * len(model),
        },
        expected={"P": {"epsilon_below": Fraction(1, 12), "verdict": "VIOLATED",
                        "horizons_up_to": 2 * K}},
    )
    if K <= SELF_CHECK_K:
        _check_dp_reference(entry)
    return entry


def _check_dp_reference(entry: CorpusEntry) -> None:
    from .cycles import max_mean_cycle_values

    model = entry.model
    ref = entry.reference
    if "v_n_start" in ref:
        s = model.index(ref["start"])
        table = finite_values(model, max(ref["v_n_start"]))
        for h, v in ref["v_n_start"].items():
            if table.exact_value(h, s) != v:
                raise AssertionError(f"{entry.name}: v_{h}({ref['start']}) != {v}")
    if "limit" in ref and max_mean_cycle_values(model) != list(ref["limit"]):
        raise AssertionError(f"{entry.name}: limit reference disagrees with cycle oracle")


def two_state() -> CorpusEntry:
    model = DPModel.from_records([("s0", 0, ["s0", "s1"]), ("s1", 1, ["s1"])])
    entry = CorpusEntry("two-state", {}, model, reference={
        "limit": [Fraction(1), Fraction(1)],
        "start": "s0",
        "v_n_start": {n: Fraction(n - 1, n) for n in range(1, 11)},
    }, expected={"P": {"verdict": "HOLDS"}})
    _check_dp_reference(entry)
    return entry


def three_cycle() -> CorpusEntry:
    model = DPModel.from_records([("c0", 0, ["c1"]), ("c1", 1, ["c2"]), ("c2", 1, ["c0"])])
    entry = CorpusEntry("three-cycle", {}, model, reference={
        "limit": [Fraction(2, 3)] * 3,
    }, expected={"P": {"verdict": "HOLDS"}})
    _check_dp_reference(entry)
    return entry


def absorbing(payoffs=(0.0, 0.25, 0.5, 1.0)) -> CorpusEntry:
    records = [(f"z{k}", p, [f"z{k}"]) for k, p in enumerate(payoffs)]
    model = DPModel.from_records(records)
    entry = CorpusEntry("absorbing", {"payoffs": list(payoffs)}, model, reference={
        "limit": [Fraction(p) for p in model.payoffs],
    }, expected={"P": {"verdict": "HOLDS"}})
    _check_dp_reference(entry)
    return entry


def constant(c: float = 0.6) -> CorpusEntry:
    model = DPModel.from_records([("c", c, ["c"])])
    entry = CorpusEntry("constant", {"c": c}, model, reference={
        "limit": [Fraction(model.payoffs[0])],
    }, expected={"P": {"verdict": "HOLDS", "worst_deviation": "<= 1/n"}})
    _check_dp_reference(entry)
    return entry


def simple_regulars() -> list[CorpusEntry]:
    """Positive controls on which the P and P' checkers must hold."""
    return [two_state(), three_cycle(), absorbing(), constant()]


# --------------------------------------------------------------------------
# games


def _absorbing_state(sid: str, rho) -> GameState:
    return GameState(sid, True, float(rho))


def big_match() -> CorpusEntry:
    """Row ``a`` absorbs (1 against alpha, 0 against beta); row ``b`` pays 0/1 and stays."""
    S = 3
    P = np.zeros((2, 2, S))
    P[0, 0, 1] = 1.0  # (a, alpha) -> 1*
    P[0, 1, 2] = 1.0  # (a, beta)  -> 0*
    P[1, :, 0] = 1.0
    game = StochasticGameModel((
        GameState("play", False, payoff=np.array([[1.0, 0.0], [0.0, 1.0]]), transition=P),
        _absorbing_state("win", 1),
        _absorbing_state("lose", 0),
    ))
    entry = CorpusEntry("big-match", {}, game, reference={
        "start": "play",
        "value": Fraction(1, 2),
        "limit": [Fraction(1, 2), Fraction(1), Fraction(0)],
        "stationary_column": [Fraction(1, 2), Fraction(1, 2)],
    })
    table = shapley_finite(game, 2)
    if any(abs(table.values[n, 0] - 0.5) > 1e-12 for n in (1, 2)):
        raise AssertionError("big-match: v_1, v_2 != 1/2")
    return entry


def gamma_absorbing_payoff(n: int, m: int) -> Fraction:
    """``x_{2n,m}`` solving ``(m - 1) + (2n - (m - 1)) x = 0``."""
    return Fraction(-(m - 1), 2 * n - (m - 1))


def gamma_game(n_max: int) -> CorpusEntry:
    """Root ``s`` (player 1 picks a subgame, payoff 0) above subgames ``(2n, m)``.

    In ``(2n, m)``, agreement on C pays 1 and moves to ``(2n, m+1)`` (from
    ``(2n, n)`` to the absorbing -1 state); any other cell absorbs at
    ``x_{2n,m}``.
    """
    n_max = int(n_max)
    if n_max < 1:
        raise ValueError("gamma needs n_max >= 1")
    ids = ["s"]
    for n in range(1, n_max + 1):
        ids += [f"({2 * n},{m})" for m in range(1, n + 1)]
    for n in range(1, n_max + 1):
        ids += [f"x({2 * n},{m})" for m in range(1, n + 1)]
    ids.append("-1*")
    index = {sid: k for k, sid in enumerate(ids)}
    S = len(ids)

    states = []
    P = np.zeros((n_max, 1, S))
    for n in range(1, n_max + 1):
        P[n - 1, 0, index[f"({2 * n},1)"]] = 1.0
    states.append(GameState("s", False, payoff=np.zeros((n_max, 1)), transition=P))
    for n in range(1, n_max + 1):
        for m in range(1, n + 1):
            g = np.zeros((2, 2))
            g[0, 0] = 1.0
            x = float(gamma_absorbing_payoff(n, m))
            g[0, 1] = g[1, 0] = g[1, 1] = x
            P = np.zeros((2, 2, S))
            P[0, 0, index[f"({2 * n},{m + 1})" if m < n else "-1*"]] = 1.0
            stop = index[f"x({2 * n},{m})"]
            P[0, 1, stop] = P[1, 0, stop] = P[1, 1, stop] = 1.0
            states.append(GameState(f"({2 * n},{m})", False, payoff=g, transition=P))
    for n in range(1, n_max + 1):
        for m in range(1, n + 1):
            states.append(_absorbing_state(f"x({2 * n},{m})", gamma_absorbing_payoff(n, m)))
    states.append(_absorbing_state("-1*", -1))
    game = StochasticGameModel(tuple(states))

    entry = CorpusEntry("gamma", {"n_max": n_max}, game, reference={
        "start": "s",
        "value": Fraction(0),
        "x": {(2 * n, m): gamma_absorbing_payoff(n, m)
              for n in range(1, n_max + 1) for m in range(1, n + 1)},
    })
    if n_max <= SELF_CHECK_GAMMA:
        table = shapley_finite(game, 2 * n_max + 1)
        if np.max(np.abs(table.values[1:, 0])) > 1e-12:
            raise AssertionError("gamma: v_n(s) != 0")
    return entry


def gamma_cooperate_profiles(entry: CorpusEntry, n: int):
    """Player 1 enters the subgame ``2n`` and both players always play C."""
    game = entry.model
    if not 1 <= n <= entry.params["n_max"]:
        raise ValueError(f"subgame index must lie in 1..{entry.params['n_max']}")
    sigma = MarkovProfile.pure(game, 1, {0: n - 1}, default=0)
    tau = MarkovProfile.pure(game, 2, default=0)
    return sigma, tau


# --------------------------------------------------------------------------
# registry

_REGISTRY: dict[str, tuple[Callable[..., CorpusEntry], dict[str, type], str]] = {
    "ls-nonregular": (ls_nonregular, {"K": int}, "non-regular program, v_2n(a1) = 1/2 via 0^n 1^n"),
    "big-match": (big_match, {}, "2x2 absorbing game, value 1/2"),
    "gamma": (gamma_game, {"n_max": int}, "jointly controlled subgames, v_n(s) = 0"),
    "two-state": (two_state, {}, "s0 -> {s0, s1}, s1 absorbing with payoff 1"),
    "three-cycle": (three_cycle, {}, "deterministic cycle with payoffs 0, 1, 1"),
    "absorbing": (absorbing, {}, "self-loops with payoffs 0, 1/4, 1/2, 1"),
    "constant": (constant, {"c": float}, "single self-loop with constant payoff"),
}

DEFAULTS = {"ls-nonregular": {"K": 50}, "gamma": {"n_max": 10}}


def names() -> list[str]:
    return list(_REGISTRY)


def describe(name: str) -> str:
    return _REGISTRY[name][2]


def generate(name: str, params: dict | None = None) -> CorpusEntry:
    """Build a corpus entry by name; string parameter values are converted."""
    if name not in _REGISTRY:
        raise KeyError(f"unknown corpus entry {name!r}; known: {', '.join(_REGISTRY)}")
    fn, types, _ = _REGISTRY[name]
    merged = dict(DEFAULTS.get(name, {}))
    for key, value in (params or {}).items():
        if key not in types:
            raise ValueError(f"{name} takes no parameter {key!r}")
        try:
            merged[key] = types[key](value)
        except (TypeError, ValueError):
            raise ValueError(f"parameter {key}={value!r} is not a valid {types[key].__name__}") from None
    return fn(**merged)
