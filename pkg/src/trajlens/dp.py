"""Finite deterministic dynamic programs.

A program is a finite state set, a nonempty successor list per state and a
payoff in [0, 1] per state.  The n-stage value is computed on unnormalized
totals ``W_n = n * v_n``; payoffs are handled as exact binary rationals (the
exact value of their double representation) scaled to a common integer
denominator, so totals are exact integers and normalisation happens only on
output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

# int64 headroom kept below 2**62 so sums of two entries never overflow
_INT64_SAFE = 2**62
_FLOAT_EXACT = 2**53


class ModelError(ValueError):
    """A model (or model file) violates a structural invariant.

    ``location`` names the offending place, e.g. ``states[3].successors``.
    """

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        self.message = message
        super().__init__(f"{location}: {message}" if location else message)


class State(NamedTuple):
    id: str
    payoff: float
    successors: tuple[int, ...]


def exact(x) -> Fraction:
    """Exact rational value of a number (floats by their binary value)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    return Fraction(float(x))


def int_array(values: Sequence[int], bound: int) -> np.ndarray:
    """Integer array, int64 when ``bound`` leaves headroom, else Python ints."""
    if bound < _INT64_SAFE:
        return np.asarray(values, dtype=np.int64)
    out = np.empty(len(values), dtype=object)
    out[:] = [int(v) for v in values]
    return out


@dataclass(frozen=True, eq=False)
class DPModel:
    """Deterministic dynamic program ``(S, Phi, f)``.

    State order fixes indices.  Payoffs are stored as floats; anything else
    (ints, Fractions) is rounded once to the nearest double on construction.
    """

    states: tuple[State, ...]

    def __post_init__(self):
        states = tuple(
            State(str(s[0]), float(s[1]), tuple(int(j) for j in s[2])) for s in self.states
        )
        object.__setattr__(self, "states", states)
        if not states:
            raise ModelError("model has no states", "states")
        seen: dict[str, int] = {}
        for i, st in enumerate(states):
            loc = f"states[{i}]"
            if st.id in seen:
                raise ModelError(f"duplicate state id {st.id!r}", f"{loc}.id")
            seen[st.id] = i
            if not (0.0 <= st.payoff <= 1.0) or math.isnan(st.payoff):
                raise ModelError(
                    f"payoff {st.payoff!r} of state {st.id!r} outside [0,1]", f"{loc}.payoff"
                )
            if not st.successors:
                raise ModelError(f"state {st.id!r} has no successors", f"{loc}.successors")
            if len(set(st.successors)) != len(st.successors):
                raise ModelError(
                    f"state {st.id!r} lists a successor twice", f"{loc}.successors"
                )
            for j in st.successors:
                if not 0 <= j < len(states):
                    raise ModelError(
                        f"state {st.id!r} has dangling successor index {j}", f"{loc}.successors"
                    )

    @classmethod
    def from_records(cls, records: Iterable[tuple[str, float, Sequence[str]]]) -> "DPModel":
        """Build from ``(id, payoff, successor ids)`` triples."""
        records = list(records)
        index: dict[str, int] = {}
        for i, (sid, _, _) in enumerate(records):
            if str(sid) in index:
                raise ModelError(f"duplicate state id {sid!r}", f"states[{i}].id")
            index[str(sid)] = i
        states = []
        for i, (sid, payoff, succ) in enumerate(records):
            idx = []
            for k, t in enumerate(succ):
                if str(t) not in index:
                    raise ModelError(
                        f"state {sid!r} has dangling successor {t!r}",
                        f"states[{i}].successors[{k}]",
                    )
                idx.append(index[str(t)])
            states.append(State(str(sid), payoff, tuple(idx)))
        return cls(tuple(states))

    @classmethod
    def from_dict(cls, data: Mapping) -> "DPModel":
        if not isinstance(data, Mapping):
            raise ModelError("model must be a JSON object", "$")
        if data.get("type") != "dp":
            raise ModelError(f"expected type 'dp', got {data.get('type')!r}", "type")
        raw = data.get("states")
        if not isinstance(raw, list):
            raise ModelError("'states' must be a list", "states")
        records = []
        for i, st in enumerate(raw):
            loc = f"states[{i}]"
            if not isinstance(st, Mapping):
                raise ModelError("state record must be an object", loc)
            extra = set(st) - {"id", "payoff", "successors"}
            if extra:
                raise ModelError(f"unknown keys {sorted(extra)}", loc)
            for key in ("id", "payoff", "successors"):
                if key not in st:
                    raise ModelError(f"missing key {key!r}", loc)
            if not isinstance(st["id"], str):
                raise ModelError("id must be a string", f"{loc}.id")
            payoff = st["payoff"]
            if isinstance(payoff, bool) or not isinstance(payoff, (int, float)):
                raise ModelError("payoff must be a number", f"{loc}.payoff")
            if not isinstance(st["successors"], list) or not all(
                isinstance(t, str) for t in st["successors"]
            ):
                raise ModelError("successors must be a list of state ids", f"{loc}.successors")
            records.append((st["id"], payoff, st["successors"]))
        return cls.from_records(records)

    def to_dict(self) -> dict:
        return {
            "type": "dp",
            "states": [
                {
                    "id": st.id,
                    "payoff": st.payoff,
                    "successors": [self.states[j].id for j in st.successors],
                }
                for st in self.states
            ],
        }

    def __len__(self) -> int:
        return len(self.states)

    @cached_property
    def ids(self) -> tuple[str, ...]:
        return tuple(st.id for st in self.states)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {sid: i for i, sid in enumerate(self.ids)}

    def index(self, state: str | int) -> int:
        """Index of a state given by id or index."""
        if isinstance(state, (int, np.integer)) and not isinstance(state, bool):
            if not 0 <= state < len(self.states):
                raise ModelError(f"state index {state} out of range")
            return int(state)
        try:
            return self._index[str(state)]
        except KeyError:
            raise ModelError(f"unknown state {state!r}") from None

    @cached_property
    def payoffs(self) -> np.ndarray:
        return np.array([st.payoff for st in self.states], dtype=float)

    def successors(self, s: int) -> tuple[int, ...]:
        return self.states[s].successors

    @cached_property
    def scale(self) -> int:
        """Common denominator of all payoffs (a power of two)."""
        return math.lcm(*(exact(st.payoff).denominator for st in self.states))

    @cached_property
    def int_payoffs(self) -> tuple[int, ...]:
        """Payoffs times :attr:`scale`, as exact Python ints."""
        return tuple(int(exact(st.payoff) * self.scale) for st in self.states)

    @cached_property
    def successor_matrix(self) -> np.ndarray:
        """Successor lists padded to equal width by repeating the first entry."""
        width = max(len(st.successors) for st in self.states)
        out = np.empty((len(self.states), width), dtype=np.intp)
        for i, st in enumerate(self.states):
            row = list(st.successors)
            out[i] = row + [row[0]] * (width - len(row))
        return out


@dataclass(frozen=True)
class Play:
    """Feasible state sequence ``s_1 = start, ..., s_n`` with its payoffs."""

    start: int
    sequence: tuple[int, ...]
    payoffs: tuple[float, ...]

    @classmethod
    def of(cls, model: DPModel, sequence: Sequence[int]) -> "Play":
        seq = tuple(int(s) for s in sequence)
        if not seq:
            raise ValueError("a play has at least one state")
        for m in range(len(seq) - 1):
            if seq[m + 1] not in model.successors(seq[m]):
                raise ValueError(
                    f"infeasible transition {model.ids[seq[m]]!r} -> {model.ids[seq[m + 1]]!r} "
                    f"at stage {m + 1}"
                )
        return cls(seq[0], seq, tuple(model.states[s].payoff for s in seq))

    def __len__(self) -> int:
        return len(self.sequence)

    def total(self) -> Fraction:
        return sum((exact(f) for f in self.payoffs), Fraction(0))


@dataclass
class ValueTable:
    """Finite-horizon values ``v_n(s)`` for ``n = 0..N`` (row 0 is all zeros).

    ``totals[n, s]`` holds ``scale * n * v_n(s)`` exactly.
    """

    totals: np.ndarray
    scale: int
    horizon_values: np.ndarray
    discounted_values: dict[float, np.ndarray] = field(default_factory=dict)
    cauchy_gap: dict[tuple[int, int], float] = field(default_factory=dict)
    _rows: list | None = field(default=None, repr=False, compare=False)

    @property
    def N(self) -> int:
        return self.totals.shape[0] - 1

    def total_rows(self) -> list[list[int]]:
        """``totals`` as nested lists of Python ints (cached)."""
        if self._rows is None:
            self._rows = self.totals.tolist()
        return self._rows

    def total(self, n: int, s: int) -> Fraction:
        """Exact maximal total payoff of the n-stage program at ``s``."""
        return Fraction(int(self.totals[n, s]), self.scale)

    def exact_value(self, n: int, s: int) -> Fraction:
        if n == 0:
            return Fraction(0)
        return Fraction(int(self.totals[n, s]), self.scale * n)

    def value(self, n: int, s: int) -> float:
        return float(self.horizon_values[n, s])


def finite_values(model: DPModel, N: int) -> ValueTable:
    """Exact n-stage values for every ``n <= N`` by backward induction on totals.

    ``W_1 = f`` and ``W_n(s) = f(s) + max_{s' in Phi(s)} W_{n-1}(s')``.
    """
    if int(N) != N or N < 1:
        raise ValueError(f"horizon must be a positive integer, got {N!r}")
    N = int(N)
    S = len(model)
    bound = model.scale * N
    f = int_array(model.int_payoffs, bound)
    succ = model.successor_matrix
    totals = np.zeros((N + 1, S), dtype=f.dtype)
    totals[1] = f
    for n in range(2, N + 1):
        totals[n] = f + totals[n - 1][succ].max(axis=1)

    values = np.zeros((N + 1, S), dtype=float)
    if bound < _FLOAT_EXACT:
        # both operands exact doubles, so IEEE division rounds correctly
        denom = np.arange(1, N + 1, dtype=float)[:, None] * float(model.scale)
        values[1:] = totals[1:].astype(float) / denom
    else:
        for n in range(1, N + 1):
            values[n] = [float(Fraction(int(w), model.scale * n)) for w in totals[n]]
    return ValueTable(totals=totals, scale=model.scale, horizon_values=values)


@dataclass(frozen=True)
class DiscountedValue:
    values: np.ndarray
    iterations: int
    residual: float
    lam: float


def discounted_value(model: DPModel, lam: float, tol: float = 1e-12) -> DiscountedValue:
    """Fixed point of ``v = lam * f + (1 - lam) * max_{Phi} v`` from the zero vector."""
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"discount rate must lie in (0, 1], got {lam!r}")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    f = model.payoffs
    succ = model.successor_matrix

    def step(v):
        return lam * f + (1.0 - lam) * v[succ].max(axis=1)

    if lam == 1.0:
        bound = 1
    else:
        bound = math.ceil(math.log(tol) / math.log1p(-lam)) + 1
    v = np.zeros(len(model))
    iterations = 0
    while True:
        nxt = step(v)
        iterations += 1
        gap = float(np.max(np.abs(nxt - v)))
        v = nxt
        # float rounding can stall slightly above tol; the a-priori bound caps it
        if gap <= tol or iterations > bound + 64:
            break
    residual = float(np.max(np.abs(step(v) - v)))
    return DiscountedValue(values=v, iterations=iterations, residual=residual, lam=lam)


def horizon_ladder(N: int) -> list[int]:
    """Horizons ``N, N//2, N//4, ..., 1`` in increasing order."""
    out = []
    h = N
    while h >= 1:
        out.append(h)
        h //= 2
    return sorted(set(out))


@dataclass
class RegularityReport:
    horizon: int
    cauchy_gap: dict[tuple[int, int], float]
    discounted_gap: float
    cycle_values: np.ndarray
    oracle_gap: float
    status: str  # "CONVERGED" or "NON_CONVERGED"


def limit_value_estimate(
    model: DPModel, N: int, tol: float = 1e-2, table: ValueTable | None = None
) -> tuple[np.ndarray, RegularityReport]:
    """Estimate ``lim v_n`` by ``v_N`` and report convergence diagnostics.

    The Cauchy gaps cover the windows of consecutive horizons in
    :func:`horizon_ladder`; ``NON_CONVERGED`` is raised as a flag (not an
    exception) when the gap of the largest window exceeds ``tol``.
    """
    from .cycles import max_mean_cycle_values

    if N < 2:
        raise ValueError("limit estimation needs N >= 2")
    if table is None or table.N < N:
        table = finite_values(model, N)
    ladder = horizon_ladder(N)
    gaps = {}
    for a, b in zip(ladder, ladder[1:]):
        gaps[(a, b)] = float(np.max(np.abs(table.horizon_values[a] - table.horizon_values[b])))
    table.cauchy_gap.update(gaps)
    estimate = table.horizon_values[N].copy()

    disc = discounted_value(model, 1.0 / N, tol=1e-12)
    table.discounted_values[1.0 / N] = disc.values
    cycles = np.array([float(c) for c in max_mean_cycle_values(model)])
    last = gaps[(ladder[-2], ladder[-1])]
    report = RegularityReport(
        horizon=N,
        cauchy_gap=gaps,
        discounted_gap=float(np.max(np.abs(estimate - disc.values))),
        cycle_values=cycles,
        oracle_gap=float(np.max(np.abs(estimate - cycles))),
        status="NON_CONVERGED" if last > tol else "CONVERGED",
    )
    return estimate, report


def check_monotone_limit(model: DPModel, v: Sequence, tol: float = 0.0) -> list[tuple[int, int]]:
    """Pairs ``(s, s')`` with ``s' in Phi(s)`` and ``v(s') > v(s) + tol``."""
    if len(v) != len(model):
        raise ValueError(f"expected {len(model)} values, got {len(v)}")
    return [
        (s, t)
        for s, st in enumerate(model.states)
        for t in st.successors
        if v[t] - v[s] > tol
    ]
