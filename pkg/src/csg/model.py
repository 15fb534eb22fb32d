"""Finite constrained stochastic games.

Profiles at a state are indexed row-major over (a_1, ..., a_n) with the last
player varying fastest, i.e. numpy C-order over the per-player action axes.
Transitions and costs are stored per state because the number of profiles
depends on the state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce as _fold
from typing import NamedTuple, Sequence

import numpy as np

from csg.errors import InvalidPlayerError

INPUT_TOL = 1e-12
COMPUTED_TOL = 1e-9


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GameSpec:
    """A finite constrained discounted stochastic game.

    transition[x] has shape (J_x, S); costs[x] has shape (n, L+1, J_x) with
    cost index 0 the objective and 1..L the constraint costs; kappa has shape
    (n, L). Construction only normalises containers; use `validate_spec` for
    the invariants.
    """

    n_players: int
    states: tuple[str, ...]
    actions: tuple[tuple[tuple[str, ...], ...], ...]
    transition: tuple[np.ndarray, ...]
    costs: tuple[np.ndarray, ...]
    kappa: np.ndarray
    alpha: float
    eta: np.ndarray
    _state_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "n_players", int(self.n_players))
        set_(self, "states", tuple(str(s) for s in self.states))
        set_(self, "actions", tuple(tuple(tuple(str(a) for a in per_x) for per_x in per_i)
                                    for per_i in self.actions))
        set_(self, "transition", tuple(_frozen(t) for t in self.transition))
        set_(self, "costs", tuple(_frozen(c) for c in self.costs))
        kappa = np.array(self.kappa, dtype=float)
        if kappa.ndim == 1 and kappa.size == 0:
            kappa = kappa.reshape(self.n_players, 0)
        kappa.setflags(write=False)
        set_(self, "kappa", kappa)
        set_(self, "alpha", float(self.alpha))
        set_(self, "eta", _frozen(self.eta))
        set_(self, "_state_index", {s: k for k, s in enumerate(self.states)})

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_constraints(self) -> int:
        return self.kappa.shape[1] if self.kappa.ndim == 2 else 0

    def state_index(self, state: str) -> int:
        return self._state_index[state]

    def profile_shape(self, x: int) -> tuple[int, ...]:
        return tuple(len(self.actions[i][x]) for i in range(self.n_players))

    def n_profiles(self, x: int) -> int:
        return math.prod(self.profile_shape(x))

    def profile_index(self, x: int, profile: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(profile), self.profile_shape(x)))

    def max_abs_cost(self) -> float:
        return max((float(np.max(np.abs(c))) for c in self.costs if c.size), default=0.0)

    def check_player(self, i: int) -> int:
        if not 0 <= i < self.n_players:
            raise InvalidPlayerError(f"player index {i} out of range for {self.n_players} players")
        return i


class Violation(NamedTuple):
    invariant: str
    index: tuple
    detail: str


def validate_spec(spec: GameSpec) -> list[Violation]:
    """Return every invariant violation, sorted by (invariant, index)."""
    out: list[Violation] = []
    S, n = spec.n_states, spec.n_players
    if n < 1:
        out.append(Violation("players not positive", (), f"n_players={n}"))
    if S < 1:
        out.append(Violation("no states", (), "state list is empty"))
    if len(set(spec.states)) != S:
        out.append(Violation("duplicate state id", (), "state identifiers must be unique"))
    if not (0.0 < spec.alpha < 1.0):
        out.append(Violation("alpha out of range", (), f"alpha={spec.alpha!r} not in (0, 1)"))
    if len(spec.actions) != n or any(len(per_i) != S for per_i in spec.actions):
        out.append(Violation("action table shape", (), "need one action list per player and state"))
        return sorted(out, key=_violation_key)
    for i in range(n):
        for x in range(S):
            if not spec.actions[i][x]:
                out.append(Violation("empty action set", (i, x), "A_i(x) is empty"))
            elif len(set(spec.actions[i][x])) != len(spec.actions[i][x]):
                out.append(Violation("duplicate action id", (i, x), "action ids must be unique"))
    L = spec.n_constraints
    if spec.kappa.shape != (n, L):
        out.append(Violation("kappa shape", (), f"kappa shape {spec.kappa.shape} != ({n}, L)"))
    elif not np.all(np.isfinite(spec.kappa)):
        out.append(Violation("non-finite value", ("kappa",), "kappa has non-finite entries"))
    if len(spec.transition) != S or len(spec.costs) != S:
        out.append(Violation("profile count mismatch", (), "need one transition/cost block per state"))
        return sorted(out, key=_violation_key)
    for x in range(S):
        J = spec.n_profiles(x)
        P = spec.transition[x]
        if P.shape != (J, S):
            out.append(Violation("profile count mismatch", (x,),
                                 f"transition block shape {P.shape} != ({J}, {S})"))
        elif not np.all(np.isfinite(P)):
            out.append(Violation("non-finite value", ("transition", x), "non-finite probability"))
        else:
            for j, y in zip(*np.nonzero(P < 0)):
                out.append(Violation("negative transition", (x, int(j), int(y)), f"p={P[j, y]!r}"))
            sums = P.sum(axis=1)
            for j in np.nonzero(np.abs(sums - 1.0) > INPUT_TOL)[0]:
                out.append(Violation("row not stochastic", (x, int(j)), f"row sums to {sums[j]!r}"))
        C = spec.costs[x]
        if C.shape != (n, L + 1, J):
            out.append(Violation("profile count mismatch", (x,),
                                 f"cost block shape {C.shape} != ({n}, {L + 1}, {J})"))
        elif not np.all(np.isfinite(C)):
            out.append(Violation("non-finite value", ("costs", x), "non-finite cost"))
    eta = spec.eta
    if eta.shape != (S,):
        out.append(Violation("eta shape", (), f"eta shape {eta.shape} != ({S},)"))
    else:
        for x in np.nonzero(eta < 0)[0]:
            out.append(Violation("eta negative", (int(x),), f"eta={eta[x]!r}"))
        if abs(eta.sum() - 1.0) > INPUT_TOL:
            out.append(Violation("eta not normalized", (), f"eta sums to {eta.sum()!r}"))
    return sorted(out, key=_violation_key)


def _violation_key(v: Violation):
    return v.invariant, tuple((0, k, "") if isinstance(k, int) else (1, 0, str(k)) for k in v.index)


def describe_violation(spec: GameSpec, v: Violation) -> dict:
    """Violation as a JSON-ready dict using the original identifiers."""
    idx = {}
    names = {1: ("x",), 2: ("x", "j"), 3: ("x", "j", "y")}
    if v.invariant in ("empty action set", "duplicate action id"):
        idx = {"player": v.index[0] + 1, "state": spec.states[v.index[1]]}
    elif v.index and isinstance(v.index[0], int):
        for key, val in zip(names[len(v.index)], v.index):
            idx[key] = spec.states[val] if key in ("x", "y") else val
    elif v.index:
        idx = {"field": v.index[0]}
        if len(v.index) > 1:
            idx["state"] = spec.states[v.index[1]]
    return {"invariant": v.invariant, "index": idx, "detail": v.detail}


@dataclass(frozen=True, eq=False)
class StationaryStrategy:
    """Per-state action distributions of one player."""

    probs: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "probs", tuple(_frozen(p) for p in self.probs))

    def __getitem__(self, x: int) -> np.ndarray:
        return self.probs[x]

    def __len__(self) -> int:
        return len(self.probs)

    def flat(self) -> np.ndarray:
        return np.concatenate(self.probs)

    @classmethod
    def uniform(cls, spec: GameSpec, i: int) -> StationaryStrategy:
        return cls(tuple(np.full(len(a), 1.0 / len(a)) for a in spec.actions[i]))

    @classmethod
    def pure(cls, spec: GameSpec, i: int, choice: dict[str, str] | Sequence[int]) -> StationaryStrategy:
        """Point masses; `choice` maps state id to action id, or lists action indices."""
        rows = []
        for x, acts in enumerate(spec.actions[i]):
            k = acts.index(choice[spec.states[x]]) if isinstance(choice, dict) else int(choice[x])
            row = np.zeros(len(acts))
            row[k] = 1.0
            rows.append(row)
        return cls(tuple(rows))

    @classmethod
    def dirichlet(cls, spec: GameSpec, i: int, rng: np.random.Generator) -> StationaryStrategy:
        return cls(tuple(rng.dirichlet(np.ones(len(a))) for a in spec.actions[i]))


def check_strategy(spec: GameSpec, i: int, s: StationaryStrategy, tol: float = INPUT_TOL) -> None:
    spec.check_player(i)
    if len(s) != spec.n_states:
        raise ValueError(f"strategy of player {i} covers {len(s)} states, game has {spec.n_states}")
    for x, row in enumerate(s.probs):
        if row.shape != (len(spec.actions[i][x]),):
            raise ValueError(f"player {i} state {spec.states[x]}: {row.shape[0]} probabilities "
                             f"for {len(spec.actions[i][x])} actions")
        if np.any(row < 0) or abs(row.sum() - 1.0) > tol:
            raise ValueError(f"player {i} state {spec.states[x]}: not a probability vector")


@dataclass(frozen=True, eq=False)
class MultiStrategy:
    players: tuple[StationaryStrategy, ...]

    def __post_init__(self):
        object.__setattr__(self, "players", tuple(self.players))

    def __getitem__(self, i: int) -> StationaryStrategy:
        return self.players[i]

    def __len__(self) -> int:
        return len(self.players)

    def __iter__(self):
        return iter(self.players)

    def opponents(self, i: int) -> tuple[StationaryStrategy, ...]:
        return self.players[:i] + self.players[i + 1:]

    def replace(self, i: int, s: StationaryStrategy) -> MultiStrategy:
        return MultiStrategy(self.players[:i] + (s,) + self.players[i + 1:])

    @classmethod
    def uniform(cls, spec: GameSpec) -> MultiStrategy:
        return cls(tuple(StationaryStrategy.uniform(spec, i) for i in range(spec.n_players)))

    @classmethod
    def dirichlet(cls, spec: GameSpec, rng: np.random.Generator) -> MultiStrategy:
        return cls(tuple(StationaryStrategy.dirichlet(spec, i, rng) for i in range(spec.n_players)))


def check_multistrategy(spec: GameSpec, phi: MultiStrategy) -> None:
    if len(phi) != spec.n_players:
        raise ValueError(f"multi-strategy has {len(phi)} entries, game has {spec.n_players} players")
    for i, s in enumerate(phi):
        check_strategy(spec, i, s)


def with_player(opp: Sequence[StationaryStrategy], i: int, s: StationaryStrategy) -> MultiStrategy:
    """Insert player i's strategy into an opponent tuple."""
    opp = tuple(opp)
    return MultiStrategy(opp[:i] + (s,) + opp[i:])


def joint_distribution(dists: Sequence[np.ndarray]) -> np.ndarray:
    """Product distribution over profiles, flattened in profile order."""
    return _fold(np.multiply.outer, dists).ravel()


@dataclass(frozen=True, eq=False)
class ReducedMdp:
    """Player i's MDP once the opponents' stationary strategies are fixed.

    Pairs (x, a_i) are flattened state-major: pair k lives at state
    pair_state[k]; costs has shape (L+1, K), trans has shape (K, S).
    """

    player: int
    sizes: tuple[int, ...]
    costs: np.ndarray
    trans: np.ndarray
    alpha: float
    eta: np.ndarray
    kappa: np.ndarray

    @property
    def n_states(self) -> int:
        return len(self.sizes)

    @property
    def n_pairs(self) -> int:
        return int(sum(self.sizes))

    @property
    def n_constraints(self) -> int:
        return self.costs.shape[0] - 1

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum(self.sizes)))

    @property
    def pair_state(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_states), self.sizes)

    def state_kernel(self, phi_i: StationaryStrategy) -> np.ndarray:
        """K[z, x] = sum_a phi_i(a|z) p(x | z, a)."""
        return np.add.reduceat(phi_i.flat()[:, None] * self.trans, self.offsets[:-1], axis=0)


def _marginalize(arr: np.ndarray, i: int, dists: Sequence[np.ndarray | None]) -> np.ndarray:
    # arr axes: one per player, then one payload axis; contract every player but i
    n = len(dists)
    others = [k for k in range(n) if k != i]
    if not others:
        return arr
    arr = np.moveaxis(arr, i, 0)
    arr = arr.reshape(arr.shape[0], -1, arr.shape[-1])
    w = joint_distribution([dists[k] for k in others])
    return np.einsum("ajp,j->ap", arr, w)


def reduce(spec: GameSpec, i: int, opp) -> ReducedMdp:
    """Average costs and transitions over the opponents' stationary strategies.

    `opp` is either a MultiStrategy (entry i is ignored) or the n-1 opponent
    strategies in player order.
    """
    spec.check_player(i)
    if isinstance(opp, MultiStrategy):
        opp = opp.opponents(i)
    opp = tuple(opp)
    if len(opp) != spec.n_players - 1:
        raise ValueError(f"expected {spec.n_players - 1} opponent strategies, got {len(opp)}")
    S, L = spec.n_states, spec.n_constraints
    sizes = tuple(len(spec.actions[i][x]) for x in range(S))
    cost_blocks, trans_blocks = [], []
    for x in range(S):
        shape = spec.profile_shape(x)
        dists = [None if k == i else opp[k if k < i else k - 1][x] for k in range(spec.n_players)]
        P = spec.transition[x].reshape(shape + (S,))
        C = spec.costs[x][i].T.reshape(shape + (L + 1,))
        trans_blocks.append(_marginalize(P, i, dists))
        cost_blocks.append(_marginalize(C, i, dists))
    trans = np.concatenate(trans_blocks, axis=0)
    costs = np.concatenate(cost_blocks, axis=0).T
    return ReducedMdp(
        player=i,
        sizes=sizes,
        costs=_frozen(costs),
        trans=_frozen(trans),
        alpha=spec.alpha,
        eta=spec.eta,
        kappa=_frozen(spec.kappa[i]),
    )
