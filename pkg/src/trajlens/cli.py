"""Command-line front end.

Exit status: 0 on success or HOLDS, 2 on VIOLATED (witness in the report),
1 on input errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import corpus
from .dp import DPModel, ModelError, discounted_value, finite_values, limit_value_estimate
from .io import load_model, load_profile, model_hash, model_json
from .matrix_games import NumericallySingularError
from .report import envelope, jsonable, preport_csv, preport_dict, rows_csv
from .stochastic import (
    ProfileError,
    StochasticGameModel,
    eval_profile,
    expected_deviation_profile,
    shapley_discounted,
    shapley_finite,
)
from .trajectories import (
    DEFAULT_GRID,
    check_property_P,
    check_property_Pprime,
    enumerate_eps_optimal_plays,
    uniform_value_probe,
)

EXIT_OK, EXIT_INPUT, EXIT_VIOLATED = 0, 1, 2
MAX_HORIZON = 100_000


class InputError(Exception):
    pass


# -- argument parsing helpers ------------------------------------------------


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if not 1 <= value <= MAX_HORIZON:
        raise argparse.ArgumentTypeError(f"expected an integer in [1, {MAX_HORIZON}], got {value}")
    return value


def _int_list(text: str) -> list[int]:
    return [_positive_int(x) for x in text.split(",") if x.strip()]


def _float_in(lo, hi, lo_open=True, hi_open=True):
    def parse(text: str) -> float:
        try:
            value = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
        below = value <= lo if lo_open else value < lo
        above = value >= hi if hi_open else value > hi
        if below or above:
            lb, rb = "(" if lo_open else "[", ")" if hi_open else "]"
            raise argparse.ArgumentTypeError(f"expected a number in {lb}{lo}, {hi}{rb}, got {value}")
        return value
    return parse


_epsilon = _float_in(0, float("inf"))
_rate = _float_in(0, 1)
_tol = _float_in(0, 1, hi_open=False)


def _rate_list(text: str) -> list[float]:
    return [_rate(x) for x in text.split(",") if x.strip()]


def _grid(text: str) -> list[Fraction]:
    parse = _float_in(0, 1, lo_open=False, hi_open=False)
    return [Fraction(x.strip()) if "/" in x else Fraction(parse(x)) for x in text.split(",") if x.strip()]


def _add_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", help="model JSON file")
    p.add_argument("--corpus", help="corpus entry name (see `corpus list`)")
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                   help="corpus generator parameter (repeatable)")


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trajlens", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="finite-horizon and discounted values of a program")
    _add_source(p)
    p.add_argument("--horizon", type=_positive_int, required=True)
    p.add_argument("--lambdas", type=_rate_list, default=[])
    p.add_argument("--tol", type=_tol, default=1e-12)
    _add_output(p)

    p = sub.add_parser("check-p", help="running-average bound on epsilon-optimal plays")
    _add_source(p)
    p.add_argument("--epsilon", type=_epsilon, required=True)
    p.add_argument("--horizons", type=_int_list, required=True)
    p.add_argument("--grid", type=_grid, default=list(DEFAULT_GRID))
    p.add_argument("--limit", type=_positive_int, default=None)
    _add_output(p)

    p = sub.add_parser("check-pprime", help="discounted running-average bound")
    _add_source(p)
    p.add_argument("--epsilon", type=_epsilon, required=True)
    p.add_argument("--lambdas", type=_rate_list, required=True)
    p.add_argument("--grid", type=_grid, default=list(DEFAULT_GRID))
    p.add_argument("--limit", type=_positive_int, default=None)
    _add_output(p)

    p = sub.add_parser("enumerate", help="list epsilon-optimal plays")
    _add_source(p)
    p.add_argument("--state", required=True)
    p.add_argument("--horizon", type=_positive_int, required=True)
    p.add_argument("--epsilon", type=_float_in(0, float("inf"), lo_open=False), default=0.0)
    p.add_argument("--limit", type=_positive_int, default=1000)
    _add_output(p)

    p = sub.add_parser("game-solve", help="Shapley values of a stochastic game")
    _add_source(p)
    p.add_argument("--horizon", type=_positive_int, required=True)
    p.add_argument("--lambdas", type=_rate_list, default=[])
    p.add_argument("--tol", type=_tol, default=1e-10)
    _add_output(p)

    p = sub.add_parser("eval-profile", help="expected running payoff under Markov profiles")
    _add_source(p)
    p.add_argument("--sigma", default="uniform", help="player 1: uniform | pure[:ID=K;...] | FILE")
    p.add_argument("--tau", default="uniform", help="player 2: uniform | pure[:ID=K;...] | FILE")
    p.add_argument("--state", required=True)
    p.add_argument("--horizon", type=_positive_int, required=True)
    p.add_argument("--v-ref", type=float, default=None, help="reference value (default v_n(s))")
    p.add_argument("--grid", type=_grid, default=list(DEFAULT_GRID))
    p.add_argument("--exact", action="store_true", help="rational arithmetic")
    _add_output(p)

    p = sub.add_parser("probe-uniform", help="finite-range uniform value diagnostic")
    _add_source(p)
    p.add_argument("--state", required=True)
    p.add_argument("--epsilon", type=_epsilon, required=True)
    p.add_argument("--threshold", type=_positive_int, required=True)
    p.add_argument("--nmax", type=_positive_int, required=True)
    p.add_argument("--search-all", action="store_true")
    _add_output(p)

    p = sub.add_parser("corpus", help="bundled example models")
    csub = p.add_subparsers(dest="corpus_command", required=True)
    q = csub.add_parser("list")
    q.add_argument("--format", choices=("text", "json"), default="text")
    q.add_argument("--out")
    q = csub.add_parser("emit")
    q.add_argument("name")
    q.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    q.add_argument("--out")
    return parser


# -- model source ------------------------------------------------------------


def _params(items: list[str]) -> dict[str, str]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise InputError(f"--param expects KEY=VALUE, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _resolve_source(args) -> tuple[object, dict]:
    if bool(args.model) == bool(args.corpus):
        raise InputError("give exactly one of --model or --corpus")
    if args.model:
        if args.param:
            raise InputError("--param only applies to --corpus")
        return load_model(args.model), {"model": str(args.model)}
    try:
        entry = corpus.generate(args.corpus, _params(args.param))
    except (KeyError, ValueError) as err:
        raise InputError(str(err).strip("'\"")) from None
    return entry.model, {"corpus": entry.name, "params": jsonable(entry.params)}


def _expect(model, kind, command):
    if not isinstance(model, kind):
        want = "dynamic program ('dp')" if kind is DPModel else "stochastic game ('zsg')"
        raise InputError(f"{command} needs a {want} model")


def _provenance(model, source, args) -> dict:
    skip = {"command", "model", "corpus", "param", "out", "format", "corpus_command"}
    params = {k: jsonable(v) for k, v in sorted(vars(args).items()) if k not in skip}
    return {"model_sha256": model_hash(model), "source": source, "parameters": params}


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_json(command, model, source, args, result) -> None:
    doc = envelope(command, _provenance(model, source, args), jsonable(result))
    _emit(json.dumps(doc, indent=2) + "\n", args.out)


# -- commands ----------------------------------------------------------------


def cmd_solve(args) -> int:
    model, source = _resolve_source(args)
    _expect(model, DPModel, "solve")
    table = finite_values(model, args.horizon)
    disc = {lam: discounted_value(model, lam, args.tol) for lam in args.lambdas}
    ids = model.ids
    if args.format == "csv":
        rows = [("finite", n, ids[s], float(table.horizon_values[n, s]))
                for n in range(1, args.horizon + 1) for s in range(len(model))]
        rows += [("discounted", lam, ids[s], float(d.values[s]))
                 for lam, d in disc.items() for s in range(len(model))]
        _emit(rows_csv(("kind", "param", "state", "value"), rows), args.out)
        return EXIT_OK
    result = {
        "finite": {
            "horizon": args.horizon,
            "values": {ids[s]: table.horizon_values[1:, s].tolist() for s in range(len(model))},
        },
        "discounted": [
            {"lambda": lam, "iterations": d.iterations, "residual": d.residual,
             "values": dict(zip(ids, d.values.tolist()))}
            for lam, d in disc.items()
        ],
    }
    if args.horizon >= 2:
        _, rep = limit_value_estimate(model, args.horizon, table=table)
        result["regularity"] = {
            "status": rep.status,
            "cauchy_gap": [{"window": list(k), "gap": v} for k, v in rep.cauchy_gap.items()],
            "discounted_gap": rep.discounted_gap,
            "cycle_values": dict(zip(ids, rep.cycle_values.tolist())),
            "oracle_gap": rep.oracle_gap,
        }
    _emit_json("solve", model, source, args, result)
    return EXIT_OK


def _check(args, kind) -> int:
    model, source = _resolve_source(args)
    command = "check-p" if kind == "P" else "check-pprime"
    _expect(model, DPModel, command)
    if kind == "P":
        report = check_property_P(model, args.epsilon, args.horizons, args.grid, args.limit)
    else:
        report = check_property_Pprime(model, args.epsilon, args.lambdas, args.grid, args.limit)
    if args.format == "csv":
        _emit(preport_csv(report, model.ids), args.out)
    else:
        _emit_json(command, model, source, args, preport_dict(report, model.ids))
    return EXIT_VIOLATED if report.verdict == "VIOLATED" else EXIT_OK


def cmd_enumerate(args) -> int:
    model, source = _resolve_source(args)
    _expect(model, DPModel, "enumerate")
    s = model.index(args.state)
    result = enumerate_eps_optimal_plays(model, s, args.horizon, args.epsilon, args.limit)
    ids = model.ids
    if args.format == "csv":
        rows = [(k, float(p.total()), " ".join(ids[x] for x in p.sequence))
                for k, p in enumerate(result.plays)]
        _emit(rows_csv(("index", "total", "sequence"), rows), args.out)
    else:
        _emit_json("enumerate", model, source, args, {
            "state": ids[s],
            "horizon": args.horizon,
            "epsilon": args.epsilon,
            "count": len(result.plays),
            "flags": ["LIMIT_REACHED"] if result.limit_reached else [],
            "plays": [{"sequence": [ids[x] for x in p.sequence], "total": float(p.total())}
                      for p in result.plays],
        })
    return EXIT_OK


def cmd_game_solve(args) -> int:
    model, source = _resolve_source(args)
    _expect(model, StochasticGameModel, "game-solve")
    table = shapley_finite(model, args.horizon)
    disc = {lam: shapley_discounted(model, lam, args.tol) for lam in args.lambdas}
    ids = model.ids
    if args.format == "csv":
        rows = [("finite", n, ids[s], float(table.values[n, s]))
                for n in range(1, args.horizon + 1) for s in range(len(model))]
        rows += [("discounted", lam, ids[s], float(d.values[s]))
                 for lam, d in disc.items() for s in range(len(model))]
        _emit(rows_csv(("kind", "param", "state", "value"), rows), args.out)
        return EXIT_OK
    _emit_json("game-solve", model, source, args, {
        "finite": {
            "horizon": args.horizon,
            "values": {ids[s]: table.values[1:, s].tolist() for s in range(len(model))},
        },
        "discounted": [
            {"lambda": lam, "iterations": d.iterations, "residual": d.residual,
             "values": dict(zip(ids, d.values.tolist()))}
            for lam, d in disc.items()
        ],
    })
    return EXIT_OK


def cmd_eval_profile(args) -> int:
    model, source = _resolve_source(args)
    _expect(model, StochasticGameModel, "eval-profile")
    s = model.index(args.state)
    sigma = load_profile(args.sigma, model, 1)
    tau = load_profile(args.tau, model, 2)
    n = args.horizon
    v_ref = args.v_ref
    if v_ref is None:
        v_ref = float(shapley_finite(model, n).values[n, s])
    cumulative = eval_profile(model, sigma, tau, s, n, exact_mode=args.exact)
    prof = expected_deviation_profile(model, sigma, tau, s, n, v_ref, args.grid, exact_mode=args.exact)
    breakpoints = prof.breakpoints()
    worst_t, worst_d = max(breakpoints, key=lambda b: abs(b[1]))
    if args.format == "csv":
        rows = [(float(t), float(d)) for t, d in zip(prof.grid, prof.D)]
        _emit(rows_csv(("t", "deviation"), rows), args.out)
        return EXIT_OK
    _emit_json("eval-profile", model, source, args, {
        "state": model.ids[s],
        "horizon": n,
        "v_ref": float(v_ref),
        "cumulative": [float(c) for c in cumulative],
        "grid": [float(t) for t in prof.grid],
        "deviation": [float(d) for d in prof.D],
        "worst": {"t": float(worst_t), "t_exact": str(worst_t), "deviation": float(worst_d)},
    })
    return EXIT_OK


def cmd_probe(args) -> int:
    model, source = _resolve_source(args)
    _expect(model, DPModel, "probe-uniform")
    if args.threshold > args.nmax:
        raise InputError("--threshold must not exceed --nmax")
    s = model.index(args.state)
    probe = uniform_value_probe(model, s, args.epsilon, args.threshold, args.nmax,
                                search_all=args.search_all)
    result = {
        "state": model.ids[s],
        "epsilon": probe.epsilon,
        "threshold": probe.threshold,
        "horizon": probe.horizon,
        "reference": probe.reference,
        "condition1": probe.condition1,
        "first_fail_condition1": probe.first_fail_condition1,
        "condition2": probe.condition2,
        "first_fail_condition2": probe.first_fail_condition2,
        "any_play_condition1": probe.any_play_condition1,
        "passes": probe.passes,
    }
    if args.format == "csv":
        _emit(rows_csv(tuple(result), [tuple(result.values())]), args.out)
    else:
        _emit_json("probe-uniform", model, source, args, result)
    return EXIT_OK if probe.passes else EXIT_VIOLATED


def cmd_corpus(args) -> int:
    if args.corpus_command == "list":
        if args.format == "json":
            text = json.dumps([{"name": n, "description": corpus.describe(n),
                                "defaults": corpus.DEFAULTS.get(n, {})} for n in corpus.names()],
                              indent=2) + "\n"
        else:
            text = "".join(f"{n}\t{corpus.describe(n)}\n" for n in corpus.names())
        _emit(text, args.out)
        return EXIT_OK
    try:
        entry = corpus.generate(args.name, _params(args.param))
    except (KeyError, ValueError) as err:
        raise InputError(str(err).strip("'\"")) from None
    _emit(model_json(entry.model), args.out)
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "check-p": lambda a: _check(a, "P"),
    "check-pprime": lambda a: _check(a, "P'"),
    "enumerate": cmd_enumerate,
    "game-solve": cmd_game_solve,
    "eval-profile": cmd_eval_profile,
    "probe-uniform": cmd_probe,
    "corpus": cmd_corpus,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except (InputError, ModelError, ProfileError, NumericallySingularError, ValueError) as err:
        print(f"trajlens {args.command}: error: {err}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
