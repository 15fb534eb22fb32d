"""JSON documents: game specs ("csg-1"), strategies, canonical output."""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from csg.errors import SpecFormatError
from csg.model import GameSpec, MultiStrategy, StationaryStrategy

SPEC_FORMAT = "csg-1"
SPEC_KEYS = {"format", "players", "states", "actions", "transition", "costs", "kappa", "alpha", "eta"}


def _require(doc: dict, keys: set[str], what: str) -> None:
    if not isinstance(doc, dict):
        raise SpecFormatError(f"{what}: expected a JSON object")
    unknown = set(doc) - keys
    if unknown:
        raise SpecFormatError(f"{what}: unknown keys {sorted(unknown)}")
    missing = keys - set(doc)
    if missing:
        raise SpecFormatError(f"{what}: missing keys {sorted(missing)}")


def _read(source) -> Any:
    if isinstance(source, (str, Path)):
        with open(source) as fh:
            return json.load(fh)
    return source


def _row(row, states: list[str], index: dict[str, int], where: str) -> np.ndarray:
    # a transition row is either dense over states or a {state: prob} map
    if isinstance(row, dict):
        out = np.zeros(len(states))
        for y, p in row.items():
            if y not in index:
                raise SpecFormatError(f"{where}: unknown target state {y!r}")
            out[index[y]] += float(p)
        return out
    if len(row) != len(states):
        raise SpecFormatError(f"{where}: dense row has {len(row)} entries, expected {len(states)}")
    return np.asarray(row, dtype=float)


def spec_from_dict(doc: dict) -> GameSpec:
    """Parse a csg-1 document. Structural problems raise SpecFormatError;
    numeric invariants are left to `validate_spec`."""
    _require(doc, SPEC_KEYS, "game spec")
    if doc["format"] != SPEC_FORMAT:
        raise SpecFormatError(f"unsupported format {doc['format']!r}, expected {SPEC_FORMAT!r}")
    try:
        n = int(doc["players"])
        states = [str(s) for s in doc["states"]]
        index = {s: k for k, s in enumerate(states)}
        actions = doc["actions"]
        if len(actions) != n or any(len(per_i) != len(states) for per_i in actions):
            raise SpecFormatError("actions: need one list per player, each with one entry per state")
        kappa = doc["kappa"]
        if len(kappa) != n:
            raise SpecFormatError("kappa: need one list per player")
        L = len(kappa[0]) if n else 0
        if any(len(k) != L for k in kappa):
            raise SpecFormatError("kappa: every player needs the same number of constraints")
        trans_doc = doc["transition"]
        if set(trans_doc) != set(states):
            raise SpecFormatError("transition: need exactly one entry per state")
        transition = [np.array([_row(r, states, index, f"transition[{s}]") for r in trans_doc[s]])
                      .reshape(len(trans_doc[s]), len(states)) for s in states]
        costs_doc = doc["costs"]
        if len(costs_doc) != n or any(len(c) != L + 1 for c in costs_doc):
            raise SpecFormatError("costs: need L+1 tables per player")
        costs = []
        for x, s in enumerate(states):
            J = len(trans_doc[s])
            block = np.zeros((n, L + 1, J))
            for i in range(n):
                for ell in range(L + 1):
                    table = costs_doc[i][ell]
                    if set(table) != set(states):
                        raise SpecFormatError(f"costs[{i}][{ell}]: need exactly one entry per state")
                    vals = table[s]
                    if len(vals) != J:
                        raise SpecFormatError(f"costs[{i}][{ell}][{s}]: {len(vals)} profiles, "
                                              f"transition lists {J}")
                    block[i, ell] = vals
            costs.append(block)
        eta = doc["eta"]
        if isinstance(eta, dict):
            eta = _row(eta, states, index, "eta")
        return GameSpec(n_players=n, states=states, actions=actions, transition=transition,
                        costs=costs, kappa=np.array(kappa, dtype=float).reshape(n, L),
                        alpha=float(doc["alpha"]), eta=eta)
    except SpecFormatError:
        raise
    except (TypeError, ValueError, KeyError, IndexError) as exc:
        raise SpecFormatError(f"malformed game spec: {exc}") from exc


def load_spec(source) -> GameSpec:
    return spec_from_dict(_read(source))


def spec_to_dict(spec: GameSpec) -> dict:
    L = spec.n_constraints
    return {
        "format": SPEC_FORMAT,
        "players": spec.n_players,
        "states": list(spec.states),
        "actions": [[list(a) for a in per_i] for per_i in spec.actions],
        "transition": {s: spec.transition[x].tolist() for x, s in enumerate(spec.states)},
        "costs": [[{s: spec.costs[x][i, ell].tolist() for x, s in enumerate(spec.states)}
                   for ell in range(L + 1)] for i in range(spec.n_players)],
        "kappa": spec.kappa.tolist(),
        "alpha": spec.alpha,
        "eta": spec.eta.tolist(),
    }


def strategy_to_dict(spec: GameSpec, i: int, s: StationaryStrategy) -> dict:
    return {st: {a: float(p) for a, p in zip(spec.actions[i][x], s[x])}
            for x, st in enumerate(spec.states)}


def strategy_from_dict(spec: GameSpec, i: int, doc: dict) -> StationaryStrategy:
    if not isinstance(doc, dict) or set(doc) != set(spec.states):
        raise SpecFormatError(f"strategy of player {i + 1}: need exactly one entry per state")
    rows = []
    for x, st in enumerate(spec.states):
        acts = spec.actions[i][x]
        unknown = set(doc[st]) - set(acts)
        if unknown:
            raise SpecFormatError(f"strategy of player {i + 1}, state {st}: unknown actions {sorted(unknown)}")
        rows.append(np.array([float(doc[st].get(a, 0.0)) for a in acts]))
    return StationaryStrategy(tuple(rows))


def multistrategy_to_dict(spec: GameSpec, phi: MultiStrategy) -> dict:
    return {"strategies": [strategy_to_dict(spec, i, s) for i, s in enumerate(phi)]}


def load_multistrategy(spec: GameSpec, source, skip: int | None = None) -> MultiStrategy:
    """Read {"strategies": [...]}. With `skip`, entry `skip` may be null or
    omitted (n-1 entries) and is filled with the uniform strategy."""
    doc = _read(source)
    _require(doc, {"strategies"}, "strategy document")
    entries = list(doc["strategies"])
    n = spec.n_players
    if skip is not None and len(entries) == n - 1:
        entries.insert(skip, None)
    if len(entries) != n:
        raise SpecFormatError(f"strategy document has {len(entries)} entries, game has {n} players")
    out = []
    for i, e in enumerate(entries):
        if e is None:
            if i != skip:
                raise SpecFormatError(f"strategy of player {i + 1} is missing")
            out.append(StationaryStrategy.uniform(spec, i))
        else:
            out.append(strategy_from_dict(spec, i, e))
    return MultiStrategy(tuple(out))


def _encode(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return '"nan"'
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        if x == 0.0:
            x = 0.0  # drop the sign of -0.0
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ",".join(f"{json.dumps(k, ensure_ascii=False)}:{_encode(v)}" for k, v in items) + "}"
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def canonical_json(obj) -> str:
    """Sorted keys, 17 significant digits, non-finite floats as strings."""
    return _encode(obj) + "\n"
