"""Player i's constrained best-response problem as a linear program.

Variables are occupation weights mu(x, a_i) >= 0. Flow rows

    sum_a mu(x, a) - alpha * sum_{z, a} p(x | z, a) mu(z, a) = (1 - alpha) eta(x)

one per state, constraint rows sum cbar_l mu <= kappa_l, objective sum cbar_0 mu.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from csg.errors import SolverError
from csg.lp import LinearProgram, LpResult, solve_lp
from csg.model import GameSpec, ReducedMdp, StationaryStrategy, reduce
from csg.occupation import OccupationMeasure, disaggregate

SLATER_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class CopSolution:
    status: str                              # "optimal" | "infeasible"
    player: int
    value: float | None = None
    mu: OccupationMeasure | None = None
    strategy: StationaryStrategy | None = None
    duals: np.ndarray | None = None          # multipliers >= 0 of the l-constraints
    reduced: ReducedMdp | None = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def to_dict(self, spec: GameSpec) -> dict:
        from csg.io import strategy_to_dict
        out = {"status": self.status, "player": self.player + 1}
        if self.optimal:
            out.update(value=self.value, duals=self.duals.tolist(),
                       occupation=self.mu.to_dict(spec)["weights"],
                       strategy=strategy_to_dict(spec, self.player, self.strategy))
        return out


def flow_matrix(reduced: ReducedMdp) -> np.ndarray:
    S, K = reduced.n_states, reduced.n_pairs
    E = np.zeros((S, K))
    E[reduced.pair_state, np.arange(K)] = 1.0
    return E - reduced.alpha * reduced.trans.T


def build_cop(reduced: ReducedMdp) -> LinearProgram:
    return LinearProgram(
        c=reduced.costs[0],
        A_eq=flow_matrix(reduced),
        b_eq=(1 - reduced.alpha) * reduced.eta,
        A_ub=reduced.costs[1:],
        b_ub=reduced.kappa,
    )


def _measure(reduced: ReducedMdp, x: np.ndarray) -> OccupationMeasure:
    return OccupationMeasure(reduced.player, reduced.sizes, np.maximum(x[:reduced.n_pairs], 0.0))


def solve_reduced(reduced: ReducedMdp) -> CopSolution:
    res: LpResult = solve_lp(build_cop(reduced))
    if res.status == "infeasible":
        return CopSolution("infeasible", reduced.player, reduced=reduced)
    if res.status == "unbounded":
        raise SolverError("constrained best-response LP reported unbounded")
    mu = _measure(reduced, res.x)
    _, strat = disaggregate(mu)
    return CopSolution("optimal", reduced.player, value=float(reduced.costs[0] @ mu.weights), mu=mu,
                       strategy=strat, duals=-res.y_ub, reduced=reduced)


def solve_cop(spec: GameSpec, i: int, opp) -> CopSolution:
    """Best constrained stationary response of player i to `opp` (see `reduce`)."""
    return solve_reduced(reduce(spec, i, opp))


@dataclass(frozen=True, eq=False)
class SlaterResult:
    slack: float                               # +inf when there are no constraints
    witness: StationaryStrategy | None

    @property
    def unconstrained(self) -> bool:
        return math.isinf(self.slack)


def slater_reduced(reduced: ReducedMdp) -> SlaterResult:
    L = reduced.n_constraints
    if L == 0:
        return SlaterResult(math.inf, None)
    K = reduced.n_pairs
    # variables [mu, s+, s-]; maximise s = s+ - s-
    c = np.concatenate([np.zeros(K), [-1.0, 1.0]])
    A_eq = np.hstack([flow_matrix(reduced), np.zeros((reduced.n_states, 2))])
    A_ub = np.hstack([reduced.costs[1:], np.ones((L, 1)), -np.ones((L, 1))])
    res = solve_lp(LinearProgram(c, A_eq, (1 - reduced.alpha) * reduced.eta, A_ub, reduced.kappa))
    if res.status != "optimal":
        raise SolverError(f"Slater LP returned {res.status}")
    slack = float(res.x[K] - res.x[K + 1])
    if slack > SLATER_TOL:
        return SlaterResult(slack, disaggregate(_measure(reduced, res.x))[1])
    return SlaterResult(slack, None)


def slater_check(spec: GameSpec, i: int, opp) -> SlaterResult:
    """Largest uniform margin s with cbar_l . mu + s <= kappa_l for all l."""
    return slater_reduced(reduce(spec, i, opp))
