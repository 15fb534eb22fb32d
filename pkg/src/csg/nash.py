"""Stationary epsilon-Nash equilibria by damped best response in occupation space.

Each sweep, for every player i: solve the constrained best-response LP against
the current opponents, mix its optimal occupation measure with the occupation
measure the current strategy of i induces against the same opponents, and
disaggregate the mixture back into a stationary strategy. Mixing happens
between measures that satisfy the same flow identity, so the working measure
stays flow-feasible.

Every candidate is certified by `nash_gap`, which re-solves each player's LP:
g_i = J_i^0(phi) - min COP(phi_-i) and v_i = max_l (J_i^l(phi) - kappa_i^l)^+.
Besides the damped profile, each sweep also certifies the profile made of the
sweep's best responses, which is how a single-player game finishes in one
sweep. The search never claims convergence it has not certified.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from csg.cop import CopSolution, slater_reduced, solve_reduced
from csg.evaluation import evaluate_exact
from csg.kkt import guess_support, refine
from csg.model import GameSpec, MultiStrategy, check_multistrategy, reduce
from csg.occupation import flow_residual, mix, occupation_from_strategy, disaggregate

log = logging.getLogger(__name__)

GAP_FLOOR = -1e-8
REFINE_EVERY = 10
SUPPORT_SHARES = (0.25, 0.1, 0.02)


def fictitious_schedule(k: int) -> float:
    return 1.0 / (k + 2)


@dataclass(frozen=True)
class NashOptions:
    max_sweeps: int = 500
    damping: Callable[[int], float] = fictitious_schedule
    eps: float = 1e-6
    restarts: int = 5
    mode: str = "gauss-seidel"
    seed: int = 0
    threads: int = 1
    polish: bool = True
    polish_window: int = 5

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.mode not in ("gauss-seidel", "jacobi"):
            raise ValueError(f"unknown sweep mode {self.mode!r}")
        if self.max_sweeps < 0 or self.restarts < 0:
            raise ValueError("max_sweeps and restarts must be non-negative")


@dataclass(frozen=True, eq=False)
class NashReport:
    profile: MultiStrategy
    gaps: np.ndarray                     # nan where the best-response LP is infeasible
    violations: np.ndarray
    br_infeasible: tuple[bool, ...]
    sweeps: int = 0
    converged: bool = False
    trajectory: tuple[float, ...] = ()
    restarts_used: int = 0
    best_responses: tuple[CopSolution, ...] = field(default=(), repr=False)

    @property
    def max_gap(self) -> float:
        """max_i max(g_i, v_i); +inf if any best-response LP is infeasible."""
        if any(self.br_infeasible):
            return math.inf
        return float(max(np.max(self.gaps), np.max(self.violations)))

    def to_dict(self, spec: GameSpec) -> dict:
        from csg.io import multistrategy_to_dict
        return {
            "profile": multistrategy_to_dict(spec, self.profile)["strategies"],
            "gaps": [None if b else float(g) for g, b in zip(self.gaps, self.br_infeasible)],
            "violations": self.violations.tolist(),
            "infeasible_best_response": list(self.br_infeasible),
            "max_gap": self.max_gap,
            "sweeps": self.sweeps,
            "converged": self.converged,
            "trajectory": list(self.trajectory),
            "restarts_used": self.restarts_used,
        }


def _map(fn, items, threads: int):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def best_response(spec: GameSpec, i: int, phi: MultiStrategy):
    """Best-response LP of player i against phi_-i and its optimal occupation measure."""
    sol = solve_reduced(reduce(spec, i, phi))
    return sol, sol.mu


def nash_gap(spec: GameSpec, phi: MultiStrategy, eps: float = 1e-6, threads: int = 1) -> NashReport:
    """Certify phi: exact constrained best-response values and constraint violations."""
    check_multistrategy(spec, phi)
    J = evaluate_exact(spec, phi).J
    sols = _map(lambda i: solve_reduced(reduce(spec, i, phi)), list(range(spec.n_players)), threads)
    infeasible = tuple(not s.optimal for s in sols)
    gaps = np.array([np.nan if bad else J[i, 0] - s.value for i, (s, bad) in enumerate(zip(sols, infeasible))])
    viol = np.maximum(J[:, 1:] - spec.kappa, 0.0).max(axis=1) if spec.n_constraints else np.zeros(spec.n_players)
    rep = NashReport(profile=phi, gaps=gaps, violations=viol, br_infeasible=infeasible,
                     best_responses=tuple(sols))
    return _with(rep, converged=rep.max_gap <= eps)


def _with(rep: NashReport, **kw) -> NashReport:
    from dataclasses import replace
    return replace(rep, **kw)


def _sweep(spec: GameSpec, phi: MultiStrategy, lam: float, opts: NashOptions,
           cached: tuple[CopSolution, ...]):
    """One damped sweep. Returns (damped profile, best-response profile or None)."""
    n = spec.n_players
    br_strats = []
    if opts.mode == "jacobi":
        sols = cached
        new = []
        for i, sol in enumerate(sols):
            if not sol.optimal:
                return phi, None
            cur = occupation_from_strategy(sol.reduced, phi[i])
            new.append(disaggregate(mix(sol.mu, cur, lam))[1])
            br_strats.append(sol.strategy)
        return MultiStrategy(tuple(new)), MultiStrategy(tuple(br_strats))
    for i in range(n):
        sol = cached[0] if i == 0 else solve_reduced(reduce(spec, i, phi))
        if not sol.optimal:
            return phi, None
        cur = occupation_from_strategy(sol.reduced, phi[i])
        mixed = mix(sol.mu, cur, lam)
        resid = flow_residual(mixed, sol.reduced)
        if resid > 1e-8:
            log.warning("working occupation measure of player %d has flow residual %.2e", i, resid)
        phi = phi.replace(i, disaggregate(mixed)[1])
        br_strats.append(sol.strategy)
    return phi, MultiStrategy(tuple(br_strats))


def _guesses(spec: GameSpec, phi: MultiStrategy, history):
    yield guess_support(spec, phi, history[-1:], share=1.0)
    for share in SUPPORT_SHARES:
        yield guess_support(spec, phi, history, share=share)


def _signature(guess) -> tuple:
    supports, active = guess
    return tuple(m.tobytes() for m in supports) + tuple(a.tobytes() for a in active)


def _run(spec: GameSpec, phi: MultiStrategy, opts: NashOptions) -> NashReport:
    rep = nash_gap(spec, phi, opts.eps, opts.threads)
    best = rep
    traj = [rep.max_gap]
    sweeps = 0
    history = [rep.best_responses]
    tried: dict[tuple, int] = {}
    while not best.converged and sweeps < opts.max_sweeps and not any(rep.br_infeasible):
        lam = opts.damping(sweeps)
        if not 0.0 < lam <= 1.0:
            raise ValueError(f"damping weight {lam} outside (0, 1]")
        phi, br_profile = _sweep(spec, phi, lam, opts, rep.best_responses)
        sweeps += 1
        rep = nash_gap(spec, phi, opts.eps, opts.threads)
        cands = [rep]
        if br_profile is not None:
            cands.append(nash_gap(spec, br_profile, opts.eps, opts.threads))
        if not any(rep.br_infeasible):
            history = (history + [rep.best_responses])[-opts.polish_window:]
            if opts.polish:
                for guess in _guesses(spec, phi, history):
                    key = _signature(guess)
                    if sweeps - tried.get(key, -REFINE_EVERY) < REFINE_EVERY:
                        continue
                    tried[key] = sweeps
                    cand = refine(spec, phi, *guess)
                    if cand is not None:
                        cands.append(nash_gap(spec, cand, opts.eps, opts.threads))
                        if cands[-1].converged:
                            break
        sweep_best = min(cands, key=lambda r: r.max_gap)
        traj.append(sweep_best.max_gap)
        if sweep_best.max_gap < best.max_gap:
            best = sweep_best
        if br_profile is None:
            break
    return _with(best, sweeps=sweeps, trajectory=tuple(traj))


def solve_nash(spec: GameSpec, opts: NashOptions | None = None,
               init: MultiStrategy | None = None) -> NashReport:
    """Search for a certified epsilon-equilibrium; returns the best profile found."""
    opts = opts or NashOptions()
    phi0 = init if init is not None else MultiStrategy.uniform(spec)
    check_multistrategy(spec, phi0)
    if spec.n_constraints:
        slack = min(slater_reduced(reduce(spec, i, phi0)).slack for i in range(spec.n_players))
        if slack <= 0:
            log.warning("Slater condition fails at the initial profile (min slack %.3g)", slack)
    rng = np.random.default_rng(opts.seed)
    best = None
    total_sweeps = 0
    traj: list[float] = []
    for attempt in range(opts.restarts + 1):
        start = phi0 if attempt == 0 else MultiStrategy.dirichlet(spec, rng)
        rep = _run(spec, start, opts)
        total_sweeps += rep.sweeps
        traj.extend(rep.trajectory)
        if best is None or rep.max_gap < best.max_gap:
            best = rep
        if best.converged or all(rep.br_infeasible):
            break
    return _with(best, sweeps=total_sweeps, trajectory=tuple(traj), restarts_used=attempt)
