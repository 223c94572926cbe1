"""Independent reference computations used by the tests.

Nothing here calls the solvers under test.
"""

from __future__ import annotations

import math
import random
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

from trajlens.dp import DPModel


def random_dp(rng: random.Random, max_states: int = 6, max_branch: int = 3, denom: int = 64) -> DPModel:
    """Random program with payoffs on the grid k/denom."""
    S = rng.randint(1, max_states)
    records = []
    for s in range(S):
        k = rng.randint(1, min(max_branch, S))
        succ = rng.sample(range(S), k)
        records.append((f"q{s}", rng.randint(0, denom) / denom, [f"q{t}" for t in succ]))
    return DPModel.from_records(records)


def all_plays(model: DPModel, s: int, n: int):
    """Every feasible play of length n at s, in successor-position order."""
    if n == 1:
        yield (s,)
        return
    for t in model.states[s].successors:
        for rest in all_plays(model, t, n - 1):
            yield (s,) + rest


def play_total(model: DPModel, seq) -> Fraction:
    return sum((Fraction(model.states[s].payoff) for s in seq), Fraction(0))


def brute_force_best_totals(model: DPModel, N: int) -> list[list[Fraction]]:
    """best[n][s] = max total over all feasible plays of length n, by expansion.

    All plays of length n are materialised level by level (no max is taken
    before the last stage), with integer arithmetic on the payoff grid.
    """
    payoffs = [Fraction(st.payoff) for st in model.states]
    denom = 1
    for p in payoffs:
        denom = math.lcm(denom, p.denominator)
    # Python ints: binary-rational denominators can exceed int64
    f = np.array([int(p * denom) for p in payoffs], dtype=object)
    S = len(model)
    best = [[Fraction(0)] * S]
    # one row per play: (start, current state, running total)
    start = np.arange(S)
    cur = np.arange(S)
    total = f.copy()
    for n in range(1, N + 1):
        if n > 1:
            starts, curs, totals = [], [], []
            for s in range(S):
                mask = cur == s
                for t in model.states[s].successors:
                    starts.append(start[mask])
                    curs.append(np.full(mask.sum(), t))
                    totals.append(total[mask] + f[t])
            start, cur, total = np.concatenate(starts), np.concatenate(curs), np.concatenate(totals)
        row = [Fraction(int(max(total[start == s])), denom) for s in range(S)]
        best.append(row)
    return best


def lp_value(A) -> float:
    """Value of the matrix game by linear programming (row player maximises)."""
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    # variables x_1..x_m, v ; maximise v s.t. A^T x >= v, sum x = 1
    c = np.zeros(m + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-A.T, np.ones((n, 1))])
    b_ub = np.zeros(n)
    A_eq = np.hstack([np.ones((1, m)), np.zeros((1, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * m + [(None, None)], method="highs")
    assert res.status == 0
    return float(res.x[-1])


def closed_form_2x2(A) -> Fraction:
    """Exact value of a 2x2 game: saddle point if any, else (ad - bc)/(a - b - c + d)."""
    (a, b), (c, d) = [[Fraction(x) for x in row] for row in A]
    lower = max(min(a, b), min(c, d))
    upper = min(max(a, c), max(b, d))
    if lower == upper:
        return lower
    return (a * d - b * c) / (a - b - c + d)


def cycle_means_bruteforce(model: DPModel) -> list[Fraction]:
    """Best reachable simple-cycle mean per state by explicit cycle listing."""
    import networkx as nx

    g = nx.DiGraph()
    g.add_nodes_from(range(len(model)))
    for s, st in enumerate(model.states):
        for t in st.successors:
            g.add_edge(s, t)
    means = []
    for cyc in nx.simple_cycles(g):
        means.append((set(cyc), sum(Fraction(model.states[u].payoff) for u in cyc) / len(cyc)))
    out = []
    for s in range(len(model)):
        reach = nx.descendants(g, s) | {s}
        out.append(max(m for nodes, m in means if nodes & reach))
    return out
