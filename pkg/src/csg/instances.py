"""Canonical small games and seeded random instance generators.

G1, G2 and G3 are the fixed games used throughout the tests. The random
generators are the ones the test suite and scripts/ draw from:

* `random_spec`: transitions with Dirichlet(1) rows, costs uniform on [0, 1),
  alpha uniform on `alpha_range`, eta Dirichlet(1), kappa from
  `kappa_range`.
* `random_slater_game`: every player gets, at every state, one "safe" action
  whose constraint costs are 0 against any opponent profile. Playing it
  everywhere gives J^l = 0, so any kappa_l > 0 satisfies the Slater condition
  against every opponent strategy with margin kappa_l. kappa is drawn from
  `kappa_range` (default (0.1, 0.5)), constraint costs of the other actions
  are uniform on [0, 1).
"""
from __future__ import annotations

import numpy as np

from csg.model import GameSpec


def g1() -> GameSpec:
    return GameSpec(
        n_players=1, states=["s0", "s1"], actions=[[["a"], ["a"]]],
        transition=[[[0.0, 1.0]], [[0.0, 1.0]]],
        costs=[[[[1.0]]], [[[0.0]]]],
        kappa=np.zeros((1, 0)), alpha=0.5, eta=[1.0, 0.0],
    )


def g2(kappa: float = 0.5, alpha: float = 0.5) -> GameSpec:
    return GameSpec(
        n_players=1, states=["s0"], actions=[[["a", "b"]]],
        transition=[[[1.0], [1.0]]],
        costs=[[[[0.0, 1.0], [1.0, 0.0]]]],
        kappa=[[kappa]], alpha=alpha, eta=[1.0],
    )


def g3(cost1, cost2, actions=("a", "b"), constraint1=None, constraint2=None,
       kappa=None, alpha: float = 0.5) -> GameSpec:
    """Two players, one state. cost_i are |A1| x |A2| matrices (rows: player 1)."""
    c1, c2 = np.asarray(cost1, float), np.asarray(cost2, float)
    A1 = actions if c1.shape[0] == len(actions) else [f"a{k}" for k in range(c1.shape[0])]
    A2 = actions if c1.shape[1] == len(actions) else [f"a{k}" for k in range(c1.shape[1])]
    J = c1.size
    blocks = [[c1.ravel()], [c2.ravel()]]
    if constraint1 is not None:
        blocks[0].append(np.asarray(constraint1, float).ravel())
        blocks[1].append(np.asarray(constraint2, float).ravel())
        kappa = np.asarray(kappa, float).reshape(2, 1)
    else:
        kappa = np.zeros((2, 0))
    return GameSpec(
        n_players=2, states=["s0"], actions=[[list(A1)], [list(A2)]],
        transition=[np.ones((J, 1))], costs=[np.array(blocks)],
        kappa=kappa, alpha=alpha, eta=[1.0],
    )


def _names(prefix: str, k: int) -> list[str]:
    return [f"{prefix}{j}" for j in range(k)]


def random_spec(rng: np.random.Generator, n_players: int = 1, max_states: int = 5,
                max_actions: int = 3, n_constraints: int = 1, alpha_range=(0.2, 0.9),
                kappa_range=(0.2, 0.8), min_states: int = 1, min_actions: int = 1) -> GameSpec:
    S = int(rng.integers(min_states, max_states + 1))
    states = _names("s", S)
    actions = [[_names("a", int(rng.integers(min_actions, max_actions + 1))) for _ in range(S)]
               for _ in range(n_players)]
    transition, costs = [], []
    for x in range(S):
        J = int(np.prod([len(actions[i][x]) for i in range(n_players)]))
        transition.append(rng.dirichlet(np.ones(S), size=J))
        costs.append(rng.random((n_players, n_constraints + 1, J)))
    return GameSpec(
        n_players=n_players, states=states, actions=actions, transition=transition, costs=costs,
        kappa=rng.uniform(*kappa_range, size=(n_players, n_constraints)),
        alpha=float(rng.uniform(*alpha_range)), eta=rng.dirichlet(np.ones(S)),
    )


def random_slater_game(rng: np.random.Generator, n_players: int = 2, max_states: int = 4,
                       max_actions: int = 3, n_constraints: int = 1, alpha_range=(0.3, 0.8),
                       kappa_range=(0.1, 0.5), min_actions: int = 2) -> GameSpec:
    base = random_spec(rng, n_players, max_states, max_actions, n_constraints, alpha_range,
                       kappa_range, min_actions=min_actions)
    costs = []
    for x in range(base.n_states):
        shape = base.profile_shape(x)
        block = base.costs[x].copy()
        for i in range(n_players):
            safe = int(rng.integers(shape[i]))
            sel = [slice(None)] * n_players
            sel[i] = safe
            for ell in range(1, n_constraints + 1):
                grid = block[i, ell].reshape(shape)
                grid[tuple(sel)] = 0.0
                block[i, ell] = grid.ravel()
        costs.append(block)
    return GameSpec(n_players=n_players, states=base.states, actions=base.actions,
                    transition=base.transition, costs=costs, kappa=base.kappa,
                    alpha=base.alpha, eta=base.eta)
