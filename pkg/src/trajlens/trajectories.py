"""Epsilon-optimal plays, deviation profiles and the average-payoff checks.

Along a long epsilon-optimal play of a regular program the running payoff
``(1/n) * sum_{m <= [tn]} f_m`` should stay within ``3 * eps`` of
``t * v(s)`` for every ``t`` in [0, 1].  The checkers here test that claim on
finite horizons (:func:`check_property_P`) and on discounted evaluations
(:func:`check_property_Pprime`), with exact arithmetic for the undiscounted
case.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .dp import (
    DPModel,
    Play,
    ValueTable,
    discounted_value,
    exact,
    finite_values,
    int_array,
)

DEFAULT_GRID = tuple(Fraction(k, 20) for k in range(21))


def worker_count() -> int:
    """Worker processes allowed by ``TRAJLENS_THREADS`` (default: all cores)."""
    raw = os.environ.get("TRAJLENS_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"TRAJLENS_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def _ensure_table(model: DPModel, n: int, table: ValueTable | None) -> ValueTable:
    if table is None or table.N < n:
        return finite_values(model, n)
    return table


def optimal_play(model: DPModel, s: int, n: int, table: ValueTable | None = None) -> Play:
    """A 0-optimal play of ``G_n(s)``; ties go to the lowest state index."""
    table = _ensure_table(model, n, table)
    W = table.totals
    seq = [s]
    for remaining in range(n - 1, 0, -1):
        row = W[remaining]
        cur = seq[-1]
        nxt = max(sorted(model.successors(cur)), key=lambda t: row[t])
        seq.append(nxt)
    return Play.of(model, seq)


# --------------------------------------------------------------------------
# enumeration


def iter_eps_optimal_plays(
    model: DPModel, s: int, n: int, eps, table: ValueTable | None = None
) -> Iterator[tuple[int, ...]]:
    """Yield every feasible play of length ``n`` at ``s`` with total
    ``>= n * (v_n(s) - eps)``, in lexicographic order of successor positions.

    A branch is cut as soon as ``prefix total + W_{remaining}(next)`` falls
    below the threshold; since ``W`` is the exact best continuation, nothing
    is pruned that could still reach it.
    """
    if n < 1:
        raise ValueError("horizon must be >= 1")
    eps = exact(eps)
    if eps < 0:
        raise ValueError("epsilon must be nonnegative")
    table = _ensure_table(model, n, table)
    W = table.total_rows()
    f = model.int_payoffs
    # totals are integers, so compare against the ceiling of the threshold
    threshold = math.ceil(W[n][s] - n * eps * model.scale)
    succ = [st.successors for st in model.states]

    path = [s]
    prefix = [f[s]]
    pos = [0]
    while pos:
        if len(path) == n:
            if prefix[-1] >= threshold:
                yield tuple(path)
            path.pop()
            prefix.pop()
            pos.pop()
            continue
        cur = path[-1]
        k = pos[-1]
        options = succ[cur]
        if k >= len(options):
            path.pop()
            prefix.pop()
            pos.pop()
            continue
        pos[-1] = k + 1
        nxt = options[k]
        remaining = n - len(path)
        if prefix[-1] + W[remaining][nxt] >= threshold:
            path.append(nxt)
            prefix.append(prefix[-1] + f[nxt])
            pos.append(0)


@dataclass
class Enumeration:
    plays: list[Play]
    limit_reached: bool

    def __iter__(self):
        return iter(self.plays)

    def __len__(self) -> int:
        return len(self.plays)


def enumerate_eps_optimal_plays(
    model: DPModel,
    s: int,
    n: int,
    eps,
    limit: int | None = None,
    table: ValueTable | None = None,
) -> Enumeration:
    """All epsilon-optimal plays of ``G_n(s)``, truncated after ``limit``.

    ``limit_reached`` is set only when at least one further play exists.
    """
    out: list[Play] = []
    it = iter_eps_optimal_plays(model, s, n, eps, table)
    for seq in it:
        if limit is not None and len(out) >= limit:
            return Enumeration(out, True)
        out.append(Play.of(model, seq))
    return Enumeration(out, False)


# --------------------------------------------------------------------------
# deviation profiles


def _floor_tn(t: Fraction, n: int) -> int:
    return math.floor(t * n)


def _as_t(t) -> Fraction:
    t = exact(t)
    if not 0 <= t <= 1:
        raise ValueError(f"t must lie in [0,1], got {t}")
    return t


@dataclass
class DeviationProfile:
    """Running-average deviation ``D(t) = (1/n) sum_{m<=[tn]} f_m - t * v_ref``.

    ``cumulative[k]`` is the (possibly expected) payoff total of the first
    ``k`` stages.  Exact when the totals and ``v_ref`` are Fractions.
    """

    horizon: int
    start: int | str
    v_ref: object
    grid: list
    D: list
    cumulative: tuple = field(repr=False)

    @classmethod
    def from_cumulative(cls, cumulative, start, v_ref, grid=DEFAULT_GRID) -> "DeviationProfile":
        cumulative = tuple(cumulative)
        n = len(cumulative) - 1
        if n < 1:
            raise ValueError("profile needs at least one stage")
        grid = [_as_t(t) for t in grid]
        prof = cls(n, start, v_ref, grid, [], cumulative)
        prof.D = [prof.at(t) for t in grid]
        return prof

    def at(self, t):
        """``D(t)`` for any ``t`` in [0, 1]."""
        t = _as_t(t)
        m = _floor_tn(t, self.horizon)
        t_term = t if isinstance(self.v_ref, Fraction) else float(t)
        return self.cumulative[m] / self.horizon - t_term * self.v_ref

    def interval(self, t1, t2):
        """``D(t1, t2)``: payoff over stages ``[t1 n]+1 .. [t2 n]`` minus ``(t2-t1) v_ref``."""
        t1, t2 = _as_t(t1), _as_t(t2)
        n = self.horizon
        lo, hi = _floor_tn(t1, n), _floor_tn(t2, n)
        dt = t2 - t1 if isinstance(self.v_ref, Fraction) else float(t2 - t1)
        return (self.cumulative[hi] - self.cumulative[lo]) / n - dt * self.v_ref

    def breakpoints(self) -> list[tuple[Fraction, object]]:
        """``(m/n, D(m/n))`` for ``m = 0..n``."""
        return [(Fraction(m, self.horizon), self.at(Fraction(m, self.horizon)))
                for m in range(self.horizon + 1)]


def deviation_profile(play: Play, v_ref, grid: Sequence = DEFAULT_GRID) -> DeviationProfile:
    """Exact deviation profile of a play against the reference value ``v_ref``."""
    cumulative = [Fraction(0)]
    for f in play.payoffs:
        cumulative.append(cumulative[-1] + exact(f))
    return DeviationProfile.from_cumulative(cumulative, play.start, exact(v_ref), grid)


# --------------------------------------------------------------------------
# Property P


@dataclass
class Witness:
    """A play violating the ``3 eps`` bound, with the offending ``t``."""

    key: object  # horizon n, or discount rate lambda
    state: int
    play: Play
    t: object
    deviation: object
    v_ref: object


@dataclass
class StateCheck:
    key: object
    state: int
    plays: int
    limit_reached: bool
    worst_upper: object
    worst_lower: object
    violated: bool
    witness: Witness | None
    grid_worst: list[float]
    v_ref: object = None
    flags: list[str] = field(default_factory=list)


@dataclass
class PReport:
    """Outcome of a Property P (``kind='P'``) or P' (``kind="P'"``) check.

    ``threshold`` is the empirical ``n0`` (smallest tested horizon from which
    every larger tested horizon passes) or ``lambda0`` (largest tested rate
    from which every smaller tested rate passes); ``None`` when violated.
    """

    kind: str
    epsilon: float
    keys: list
    grid: list
    checks: list[StateCheck]
    verdict: str
    threshold: object
    witness: Witness | None
    flags: list[str]

    @property
    def partial_coverage(self) -> bool:
        return "PARTIAL_COVERAGE" in self.flags

    @property
    def worst_deviation(self) -> float:
        return max(
            max(abs(float(c.worst_upper)), abs(float(c.worst_lower))) for c in self.checks
        )

    def worst_by_key(self) -> dict:
        out: dict = {}
        for c in self.checks:
            d = max(abs(float(c.worst_upper)), abs(float(c.worst_lower)))
            out[c.key] = max(out.get(c.key, 0.0), d)
        return out


def _check_state_horizon(model: DPModel, table: ValueTable, n: int, s: int, eps: Fraction,
                         limit, grid, v_override) -> StateCheck:
    scale = model.scale
    Wn = int(table.totals[n, s])
    if v_override is None:
        v_ref = Fraction(Wn, n * scale)
    else:
        v_ref = exact(v_override)
    if v_ref < 0:
        raise ValueError("reference value must be nonnegative")
    # D(m/n) = (vden * n * P_m - m * vnum) / (vden * n^2 * scale)
    vref_scaled = v_ref * n * scale
    vnum, vden = vref_scaled.numerator, vref_scaled.denominator
    denom = vden * n * n * scale
    bound_num = 3 * eps.numerator * denom  # |X| * eps.den <= bound_num  <=>  |D| <= 3 eps
    bound_den = eps.denominator

    enum = enumerate_eps_optimal_plays(model, s, n, eps, limit=limit, table=table)
    plays = enum.plays
    magnitude = vden * n * n * scale + n * abs(vnum) + denom
    f_int = model.int_payoffs
    m_idx = int_array(list(range(n + 1)), magnitude)

    worst_upper = None
    worst_lower = None
    grid_floor = [_floor_tn(t, n) for t in grid]
    grid_worst = [0.0] * len(grid)
    vref_f = float(v_ref)
    best_violation = None  # (total, order, play, t, deviation)
    for order, play in enumerate(plays):
        P = [0]
        for st in play.sequence:
            P.append(P[-1] + f_int[st])
        Parr = int_array(P, magnitude)
        X = vden * n * Parr - m_idx * vnum  # breakpoints
        L = vden * n * Parr[:-1] - m_idx[1:] * vnum  # left limits at (m+1)/n
        hi = int(X.max())
        lo = int(min(X.min(), L.min()))
        if worst_upper is None or hi > worst_upper:
            worst_upper = hi
        if worst_lower is None or lo < worst_lower:
            worst_lower = lo
        for g, (t, m) in enumerate(zip(grid, grid_floor)):
            d = P[m] / (n * scale) - float(t) * vref_f
            if abs(d) > abs(grid_worst[g]):
                grid_worst[g] = d
        if max(abs(hi), abs(lo)) * bound_den > bound_num:
            if best_violation is None or P[-1] > best_violation[0]:
                t, dev = _offending_t(P, X, L, n, scale, v_ref, eps, denom, bound_num, bound_den)
                best_violation = (P[-1], order, play, t, dev)

    witness = None
    if best_violation is not None:
        _, _, play, t, dev = best_violation
        witness = _make_witness(model, table, n, s, eps, play, t, v_ref)
    return StateCheck(
        key=n,
        state=s,
        plays=len(plays),
        limit_reached=enum.limit_reached,
        worst_upper=Fraction(int(worst_upper), denom),
        worst_lower=Fraction(int(worst_lower), denom),
        violated=witness is not None,
        witness=witness,
        grid_worst=grid_worst,
        v_ref=v_ref,
        flags=["LIMIT_REACHED"] if enum.limit_reached else [],
    )


def _offending_t(P, X, L, n, scale, v_ref, eps, denom, bound_num, bound_den):
    # prefer an attained breakpoint; fall back to a point just left of one
    absX = [abs(int(x)) for x in X]
    m = max(range(len(absX)), key=lambda i: absX[i])
    if absX[m] * bound_den > bound_num:
        return Fraction(m, n), Fraction(int(X[m]), denom)
    m = min(range(len(L)), key=lambda i: L[i])
    # on [m/n, (m+1)/n): D(t) = P_m/(n scale) - t v, below -3 eps for t > crossing
    crossing = (Fraction(P[m], n * scale) + 3 * eps) / v_ref
    t = (max(crossing, Fraction(m, n)) + Fraction(m + 1, n)) / 2
    return t, Fraction(P[m], n * scale) - t * v_ref


def _make_witness(model, table, n, s, eps, play, t, v_ref) -> Witness:
    # re-validate independently of the vectorised scan
    Play.of(model, play.sequence)
    if play.total() < table.total(n, s) - n * eps:
        raise RuntimeError("witness play is not epsilon-optimal")
    dev = deviation_profile(play, v_ref, grid=[t]).D[0]
    if not abs(dev) > 3 * eps:
        raise RuntimeError("witness deviation does not exceed 3*eps")
    return Witness(key=n, state=s, play=play, t=t, deviation=dev, v_ref=v_ref)


def _check_chunk(args):
    model, table, tasks, eps, limit, grid, v_ref = args
    return [
        _check_state_horizon(model, table, n, s, eps, limit, grid,
                             None if v_ref is None else v_ref[s])
        for n, s in tasks
    ]


def _run_tasks(model, table, tasks, eps, limit, grid, v_ref, workers) -> list[StateCheck]:
    if workers is None:
        workers = worker_count()
    if workers <= 1 or len(tasks) < 64:
        return _check_chunk((model, table, tasks, eps, limit, grid, v_ref))
    size = math.ceil(len(tasks) / (4 * workers))
    chunks = [tasks[i:i + size] for i in range(0, len(tasks), size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_check_chunk, [(model, table, c, eps, limit, grid, v_ref) for c in chunks])
        return [c for part in parts for c in part]


def _verdict(checks: list[StateCheck], keys: list, kind: str, eps, grid, flags) -> PReport:
    # keys are ordered from "short" to "long" (horizons up, discount rates down)
    violated_keys = {c.key for c in checks if c.violated}
    threshold = None
    for i in range(len(keys)):
        if not any(k in violated_keys for k in keys[i:]):
            threshold = keys[i]
            break
    witness = None
    if threshold is None:
        last = keys[-1]
        witness = next(c.witness for c in checks if c.key == last and c.violated)
    if any(c.limit_reached for c in checks):
        flags = flags + ["PARTIAL_COVERAGE"]
    return PReport(
        kind=kind,
        epsilon=float(eps),
        keys=list(keys),
        grid=list(grid),
        checks=checks,
        verdict="HOLDS" if threshold is not None else "VIOLATED",
        threshold=threshold,
        witness=witness,
        flags=sorted(set(flags)),
    )


def check_property_P(
    model: DPModel,
    eps,
    horizons: Sequence[int],
    grid: Sequence = DEFAULT_GRID,
    limit: int | None = None,
    states: Sequence[int] | None = None,
    v_ref: Sequence | None = None,
    workers: int | None = None,
) -> PReport:
    """Check the ``3 eps`` running-average bound on all epsilon-optimal plays.

    Extremes of ``D`` are taken over every breakpoint ``m/n`` (and the left
    limits just before them), so the grid only sets the report resolution.
    The reference value defaults to ``v_n(s)`` at the horizon under test;
    pass ``v_ref`` (one entry per state) to check against a known limit.
    """
    eps = exact(eps)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    horizons = sorted(set(int(n) for n in horizons))
    if not horizons or horizons[0] < 1:
        raise ValueError("horizons must be a nonempty list of positive integers")
    grid = [_as_t(t) for t in grid]
    table = finite_values(model, horizons[-1])
    states = list(range(len(model))) if states is None else [model.index(s) for s in states]
    tasks = [(n, s) for n in horizons for s in states]
    checks = _run_tasks(model, table, tasks, eps, limit, grid, v_ref, workers)
    return _verdict(checks, horizons, "P", eps, grid, [])


@dataclass
class TailCheck:
    """Outcome of :func:`check_tail_bound`.

    ``epsilon`` bounds ``|v_m(s) - v(s)|`` for every state and every tail
    length ``m`` in ``[min_tail, n]``; prefixes whose tail is shorter than
    ``min_tail`` (``<= eps * n`` stages) are counted in ``skipped``.
    """

    horizon: int
    epsilon: Fraction
    min_tail: int
    checked: int
    skipped: int
    violations: list[tuple[int, int, tuple[int, ...]]]


def tail_epsilon(table: ValueTable, n: int, v_limit, mode: str = "uniform") -> tuple[Fraction, int]:
    """``(eps, L)`` for the prefix/tail inequality at horizon ``n``.

    ``mode="horizon"`` takes ``eps = sup_s |v_n(s) - v(s)|`` with ``L = 1``.
    ``mode="uniform"`` minimises ``max(G(L), (L - 1)/n)`` over ``L``, where
    ``G(L) = sup_s sup_{L <= m <= n} |v_m(s) - v(s)|``: tails of length at
    least ``L`` are covered by the uniform bound, shorter ones make up at
    most an ``eps`` fraction of the horizon.
    """
    v = [exact(x) for x in v_limit]
    S = len(v)

    def gap(m):
        return max(abs(table.exact_value(m, s) - v[s]) for s in range(S))

    if mode == "horizon":
        return gap(n), 1
    if mode != "uniform":
        raise ValueError(f"unknown mode {mode!r}")
    best = None
    G = Fraction(0)
    for L in range(n, 0, -1):
        G = max(G, gap(L))
        cand = max(G, Fraction(L - 1, n))
        if best is None or cand <= best[0]:
            best = (cand, L)
    return best


def check_tail_bound(
    model: DPModel, n: int, v_limit: Sequence, table: ValueTable | None = None,
    mode: str = "uniform",
) -> TailCheck:
    """Check the prefix/tail inequality behind the lower-bound argument.

    Every 0-optimal play of ``G_n(s)`` must satisfy
    ``sum_{m<=k} f_m + (n - k)(v(s) + eps) >= n (v_n(s) - eps)`` at every
    breakpoint ``k`` whose tail ``n - k`` is at least ``min_tail``; see
    :func:`tail_epsilon` for how ``eps`` is chosen.  Exact arithmetic.
    """
    table = _ensure_table(model, n, table)
    v = [exact(x) for x in v_limit]
    eps, L = tail_epsilon(table, n, v, mode)
    out = []
    checked = skipped = 0
    for s in range(len(model)):
        rhs = n * (table.exact_value(n, s) - eps)
        for seq in iter_eps_optimal_plays(model, s, n, 0, table):
            prefix = Fraction(0)
            for k in range(n + 1):
                if k:
                    prefix += exact(model.states[seq[k - 1]].payoff)
                if n - k < L:
                    skipped += 1
                    continue
                checked += 1
                if prefix + (n - k) * (v[s] + eps) < rhs:
                    out.append((s, k, seq))
    return TailCheck(n, eps, L, checked, skipped, out)


# --------------------------------------------------------------------------
# Property P' (discounted)


def stage_of_fraction(t, lam) -> int | float:
    """``n(t; lam)``: smallest ``p`` with ``1 - (1 - lam)^p >= t`` (``inf`` if none)."""
    t, lam = _as_t(t), exact(lam)
    if not 0 < lam <= 1:
        raise ValueError("discount rate must lie in (0, 1]")
    if t == 0:
        return 0
    if lam == 1:
        return 1
    if t == 1:
        return math.inf
    q = 1 - lam
    p = max(0, math.ceil(math.log(1 - float(t)) / math.log(float(q))) - 2)
    while 1 - q**p < t:
        p += 1
    return p


def effective_horizon(lam: float, eps: float) -> int:
    """Smallest ``p`` with ``(1 - lam)^p <= eps / 10``."""
    if lam >= 1:
        return 1
    p = max(1, math.ceil(math.log(eps / 10) / math.log1p(-lam)) - 2)
    while (1 - lam) ** p > eps / 10:
        p += 1
    return p


_TAIL = 1e-12
_SLACK = 1e-12


def _discounted_check(model, s, lam, eps, v, limit, grid, max_depth, v_ref):
    f = model.payoffs
    succ = [st.successors for st in model.states]
    q = 1.0 - lam
    H = effective_horizon(lam, eps)
    flags = []
    if max_depth is not None and H > max_depth:
        H = max_depth
        flags.append("EFFECTIVE_HORIZON_TOO_SHORT")
    full = max(H, math.ceil(math.log(_TAIL) / math.log(q)) if q > 0 else 1)
    threshold = v[s] - eps - _SLACK
    ref = v[s] if v_ref is None else float(v_ref)
    weights = lam * q ** np.arange(full)  # stage m+1 weight
    T = 1.0 - q ** np.arange(full + 1)  # T[p] = 1 - q^p

    def extend(seq):
        seq = list(seq)
        while len(seq) < full:
            cur = seq[-1]
            seq.append(max(sorted(succ[cur]), key=lambda t: v[t]))
        return seq

    plays = []
    limit_reached = False
    path, prefix, pos, disc = [s], [lam * f[s]], [0], [q]
    while pos:
        if len(path) == H:
            if limit is not None and len(plays) >= limit:
                limit_reached = True
                break
            plays.append(extend(path))
            path.pop(); prefix.pop(); pos.pop(); disc.pop()
            continue
        options = succ[path[-1]]
        k = pos[-1]
        if k >= len(options):
            path.pop(); prefix.pop(); pos.pop(); disc.pop()
            continue
        pos[-1] = k + 1
        nxt = options[k]
        w = disc[-1]  # (1-lam)^p with p = len(path)
        if prefix[-1] + w * v[nxt] >= threshold:
            path.append(nxt)
            prefix.append(prefix[-1] + lam * w * f[nxt])
            pos.append(0)
            disc.append(w * q)

    worst_upper, worst_lower = 0.0, 0.0
    grid_worst = [0.0] * len(grid)
    grid_stage = [stage_of_fraction(t, lam) for t in grid]
    best = None
    bound = 3 * eps
    for order, seq in enumerate(plays):
        S = np.concatenate([[0.0], np.cumsum(weights * f[seq])])
        total = S[-1] + q**full * max(v[t] for t in succ[seq[-1]])
        lower = S - T * ref  # attained at t = T[p]
        upper = S[1:] - T[:-1] * ref  # right limits at T[p-1]
        lower_all = np.append(lower, total - ref)
        hi, lo = float(upper.max()), float(lower_all.min())
        worst_upper = max(worst_upper, hi)
        worst_lower = min(worst_lower, lo)
        for g, (t, p) in enumerate(zip(grid, grid_stage)):
            partial = total if p == math.inf or p > full else S[p]
            d = partial - float(t) * ref
            if abs(d) > abs(grid_worst[g]):
                grid_worst[g] = d
        if max(hi, -lo) > bound and (best is None or total > best[0]):
            if -lo >= hi:
                p = int(np.argmin(lower_all))
                if p == len(lower):
                    t, dev = 1.0, total - ref
                else:
                    t, dev = float(T[p]), float(lower[p])
            else:
                p = int(np.argmax(upper)) + 1
                crossing = (S[p] - bound) / ref if ref > 0 else T[p]
                t = (T[p - 1] + min(T[p], crossing)) / 2
                dev = float(S[p] - t * ref)
            best = (total, order, seq, t, dev)
    witness = None
    if best is not None:
        total, _, seq, t, dev = best
        if total < threshold:
            raise RuntimeError("witness play is not epsilon-optimal")
        witness = Witness(key=lam, state=s, play=Play.of(model, seq), t=t, deviation=dev, v_ref=ref)
    if limit_reached:
        flags.append("LIMIT_REACHED")
    return StateCheck(
        key=lam,
        state=s,
        plays=len(plays),
        limit_reached=limit_reached,
        worst_upper=worst_upper,
        worst_lower=worst_lower,
        violated=witness is not None,
        witness=witness,
        grid_worst=grid_worst,
        v_ref=ref,
        flags=flags,
    )


def check_property_Pprime(
    model: DPModel,
    eps: float,
    lambdas: Sequence[float],
    grid: Sequence = DEFAULT_GRID,
    limit: int | None = None,
    states: Sequence[int] | None = None,
    v_ref: Sequence | None = None,
    max_depth: int | None = None,
) -> PReport:
    """Discounted counterpart of :func:`check_property_P`.

    Plays are enumerated to the effective horizon ``H`` (``(1-lam)^H <=
    eps/10``) by branch and bound against ``v_lam`` and then continued
    greedily until the remaining weight is below ``1e-12``.  Stage ``n(t;
    lam)`` replaces ``[tn]``; ``t = 1`` means the full discounted sum.
    Floating point throughout, with a ``1e-12`` inclusion slack.
    """
    eps = float(eps)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    lambdas = sorted(set(float(x) for x in lambdas), reverse=True)
    if not lambdas or any(not 0 < x < 1 for x in lambdas):
        raise ValueError("discount rates must lie in (0, 1)")
    grid = [_as_t(t) for t in grid]
    states = list(range(len(model))) if states is None else [model.index(s) for s in states]
    checks = []
    flags = []
    for lam in lambdas:
        v = discounted_value(model, lam, tol=1e-13).values
        for s in states:
            c = _discounted_check(model, s, lam, eps, v, limit, grid, max_depth,
                                  None if v_ref is None else v_ref[s])
            flags.extend(fl for fl in c.flags if fl != "LIMIT_REACHED")
            checks.append(c)
    return _verdict(checks, lambdas, "P'", eps, grid, flags)


# --------------------------------------------------------------------------
# uniform value probe


@dataclass
class UniformProbe:
    state: int
    epsilon: float
    threshold: int
    horizon: int
    reference: float
    play: Play
    condition1: bool
    first_fail_condition1: int | None
    condition2: bool
    first_fail_condition2: int | None
    any_play_condition1: bool | None = None

    @property
    def passes(self) -> bool:
        return self.condition1 and self.condition2


def uniform_value_probe(
    model: DPModel,
    s: int,
    eps,
    N: int,
    Nmax: int,
    v_ref=None,
    search_all: bool = False,
) -> UniformProbe:
    """Finite-range evidence for the two uniform-value conditions at ``s``.

    Condition 1 is tested on the single play ``optimal_play(model, s, Nmax)``:
    its running average must stay ``>= v - eps`` for every ``n`` in
    ``[N, Nmax]``.  Condition 2 asks ``v_n(s) <= v + eps`` on the same range.
    ``v`` defaults to ``v_Nmax(s)``.  With ``search_all`` the probe also
    decides, by pruned search, whether *any* play satisfies condition 1.
    """
    if not 1 <= N <= Nmax:
        raise ValueError("need 1 <= N <= Nmax")
    eps = exact(eps)
    table = finite_values(model, Nmax)
    v = table.exact_value(Nmax, s) if v_ref is None else exact(v_ref)
    play = optimal_play(model, s, Nmax, table)
    total = Fraction(0)
    fail1 = None
    for n, f in enumerate(play.payoffs, start=1):
        total += exact(f)
        if n >= N and total < n * (v - eps):
            fail1 = n
            break
    fail2 = next(
        (n for n in range(N, Nmax + 1) if table.exact_value(n, s) > v + eps), None
    )
    probe = UniformProbe(
        state=s,
        epsilon=float(eps),
        threshold=N,
        horizon=Nmax,
        reference=float(v),
        play=play,
        condition1=fail1 is None,
        first_fail_condition1=fail1,
        condition2=fail2 is None,
        first_fail_condition2=fail2,
    )
    if search_all:
        probe.any_play_condition1 = _exists_uniform_play(model, table, s, v - eps, N, Nmax)
    return probe


def _exists_uniform_play(model, table, s, level: Fraction, N, Nmax) -> bool:
    scale = model.scale
    f = model.int_payoffs
    W = table.totals
    need = [math.ceil(n * level * scale) if n >= N else None for n in range(Nmax + 1)]
    succ = [st.successors for st in model.states]
    seen: set = set()

    def ok(n, total):
        return need[n] is None or total >= need[n]

    stack = [(s, 1, f[s])]
    while stack:
        cur, n, total = stack.pop()
        if not ok(n, total):
            continue
        if n == Nmax:
            return True
        key = (cur, n, total)
        if key in seen:
            continue
        seen.add(key)
        for nxt in reversed(succ[cur]):
            # a prefix that cannot reach the final requirement is dead
            if need[Nmax] is not None and total + int(W[Nmax - n, nxt]) < need[Nmax]:
                continue
            stack.append((nxt, n + 1, total + f[nxt]))
    return False
