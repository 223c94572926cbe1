"""Reading and writing model and profile files."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Mapping

from .dp import DPModel, ModelError
from .stochastic import MarkovProfile, ProfileError, StochasticGameModel


def parse_model(data) -> DPModel | StochasticGameModel:
    if not isinstance(data, Mapping):
        raise ModelError("model must be a JSON object", "$")
    kind = data.get("type")
    if kind == "dp":
        return DPModel.from_dict(data)
    if kind == "zsg":
        return StochasticGameModel.from_dict(data)
    raise ModelError(f"unknown model type {kind!r} (expected 'dp' or 'zsg')", "type")


def _read_json(path) -> object:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ModelError(f"cannot read file: {err.strerror}", str(path)) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise ModelError(f"malformed JSON: {err.msg}", f"{path}:{err.lineno}:{err.colno}") from None


def load_model(path) -> DPModel | StochasticGameModel:
    data = _read_json(path)
    try:
        return parse_model(data)
    except ModelError as err:
        where = f"{path}:{err.location}" if err.location else str(path)
        raise ModelError(err.message, where) from None


def model_json(model) -> str:
    return json.dumps(model.to_dict(), indent=2) + "\n"


def model_hash(model) -> str:
    canonical = json.dumps(model.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def parse_profile(data, game: StochasticGameModel, player: int) -> MarkovProfile:
    """Profile JSON: ``{"type": "markov-profile", "stationary": {id: [...]},
    "stages": [{id: [...]}, ...]}``; stage entries override the stationary ones."""
    if not isinstance(data, Mapping) or data.get("type") != "markov-profile":
        raise ProfileError("profile must be an object with type 'markov-profile'")
    if "player" in data and data["player"] != player:
        raise ProfileError(f"profile is for player {data['player']}, expected {player}")

    def states(block, where):
        if not isinstance(block, Mapping):
            raise ProfileError(f"{where} must map state ids to probability lists")
        out = {}
        for sid, probs in block.items():
            try:
                s = game.index(sid)
            except ModelError:
                raise ProfileError(f"{where}: unknown state {sid!r}") from None
            if not isinstance(probs, list) or not all(
                isinstance(p, (int, float)) and not isinstance(p, bool) for p in probs
            ):
                raise ProfileError(f"{where}.{sid}: expected a list of numbers")
            out[s] = [float(p) for p in probs]
        return out

    stationary = states(data.get("stationary", {}), "stationary")
    raw_stages = data.get("stages", [])
    if not isinstance(raw_stages, list):
        raise ProfileError("stages must be a list")
    stages = [states(b, f"stages[{m}]") for m, b in enumerate(raw_stages)]
    return MarkovProfile(player, stationary, stages)


def load_profile(source: str, game: StochasticGameModel, player: int) -> MarkovProfile:
    """``uniform``, ``pure`` / ``pure:ID=K;ID=K`` or a path to a profile file."""
    if source == "uniform":
        return MarkovProfile.uniform(game, player)
    if source == "pure" or source.startswith("pure:"):
        choice = {}
        body = source[5:]
        for item in filter(None, body.split(";")):
            sid, _, k = item.rpartition("=")
            try:
                choice[game.index(sid)] = int(k)
            except (ModelError, ValueError):
                raise ProfileError(f"bad pure choice {item!r}") from None
        return MarkovProfile.pure(game, player, choice)
    try:
        data = _read_json(source)
    except ModelError as err:
        raise ProfileError(str(err)) from None
    return parse_profile(data, game, player)
