"""m-CSG approximations of countable-state games.

The m-th approximating game perturbs the initial law, clips costs to
[-sqrt(m), sqrt(m)] and relaxes the bounds:

    eta_m     = (1 - 1/m) eta + (1/m) eta_tilde        (eta_tilde lives where eta = 0)
    kappa_m   = (1 - 1/m) kappa + 1/sqrt(m)

Computation also needs a finite state set. `build_mcsg` keeps the first M
levels of the model's enumeration and sends every transition that leaves
them to one absorbing zero-cost boundary state; the escaping mass is reported
instead of being hidden.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from csg.errors import InvalidModelError
from csg.evaluation import evaluate_exact
from csg.model import GameSpec, MultiStrategy
from csg.nash import NashOptions, NashReport, solve_nash

log = logging.getLogger(__name__)

BOUNDARY = "__boundary__"
BOUNDARY_ACTION = "stay"
DEFAULT_TAIL = 1e-9
MAX_LEVELS = 10**6
FLOAT_SLACK = 1e-12


@dataclass(frozen=True)
class CountableModel:
    """Generator description of a game on a countable state space.

    States are grouped into finite levels 1, 2, ...; `level(k)` lists the
    state ids of level k. `transitions(x, profile)` returns the finite
    support [(y, p), ...] for a profile of action ids; `cost(x, profile)`
    returns an (n, L+1) array. `eta_tail(N)` is the eta-mass beyond level N.
    """

    n_players: int
    n_constraints: int
    alpha: float
    kappa: np.ndarray
    level: Callable[[int], Sequence[str]]
    actions: Callable[[str], Sequence[Sequence[str]]]
    transitions: Callable[[str, tuple], Sequence[tuple[str, float]]]
    cost: Callable[[str, tuple], np.ndarray]
    eta: Callable[[str], float]
    eta_tail: Callable[[int], float] | None = None
    n_levels: int | None = None
    w: Callable[[str], float] | None = None
    eta_tilde: Callable[[str], float] | None = None
    name: str = "model"

    def states_upto(self, N: int) -> list[str]:
        top = N if self.n_levels is None else min(N, self.n_levels)
        return [x for k in range(1, top + 1) for x in self.level(k)]

    def profiles(self, x: str) -> list[tuple]:
        return list(itertools.product(*self.actions(x)))


def model_from_spec(spec: GameSpec, w: np.ndarray | None = None) -> CountableModel:
    """View a finite game as a countable model with one state per level."""
    idx = {s: k for k, s in enumerate(spec.states)}

    def transitions(x, profile):
        k = idx[x]
        j = spec.profile_index(k, [spec.actions[i][k].index(a) for i, a in enumerate(profile)])
        row = spec.transition[k][j]
        return [(spec.states[y], float(row[y])) for y in np.nonzero(row)[0]]

    def cost(x, profile):
        k = idx[x]
        j = spec.profile_index(k, [spec.actions[i][k].index(a) for i, a in enumerate(profile)])
        return spec.costs[k][:, :, j]

    return CountableModel(
        n_players=spec.n_players, n_constraints=spec.n_constraints, alpha=spec.alpha,
        kappa=np.array(spec.kappa), level=lambda k: [spec.states[k - 1]],
        actions=lambda x: [spec.actions[i][idx[x]] for i in range(spec.n_players)],
        transitions=transitions, cost=cost, eta=lambda x: float(spec.eta[idx[x]]),
        eta_tail=lambda N: float(spec.eta[N:].sum()), n_levels=spec.n_states,
        w=None if w is None else (lambda x: float(w[idx[x]])), name="finite",
    )


@dataclass(frozen=True)
class McsgParams:
    m: int
    M: int | None = None                 # explicit number of retained levels
    tau_tail: float = DEFAULT_TAIL       # else: smallest M with eta tail <= tau_tail
    # optional separate indices for clipping, eta perturbation and kappa relaxation
    m_clip: int | None = None
    m_eta: int | None = None
    m_kappa: int | None = None

    def __post_init__(self):
        for v in (self.m, self.m_clip, self.m_eta, self.m_kappa):
            if v is not None and v < 1:
                raise ValueError("m must be a positive integer")
        if self.M is not None and self.M < 1:
            raise ValueError("M must be a positive integer")

    @property
    def clip(self) -> int:
        return self.m_clip or self.m

    @property
    def eta_index(self) -> int:
        return self.m_eta or self.m

    @property
    def kappa_index(self) -> int:
        return self.m_kappa or self.m


@dataclass(frozen=True)
class TruncationDiagnostics:
    m: int
    M: int
    n_retained: int
    sqrt_m: float
    eta_tail: float
    redirected_mass: float
    redirect_witness: tuple | None
    boundary: bool
    escape_flagged: bool
    eta_weight: float                          # 1/m used for the eta perturbation
    eta_base: np.ndarray = field(repr=False)   # eta on the finite game, tail mass at the boundary

    def to_dict(self) -> dict:
        return {"m": self.m, "M": self.M, "n_retained": self.n_retained, "sqrt_m": self.sqrt_m,
                "eta_tail": self.eta_tail, "redirected_mass": self.redirected_mass,
                "redirect_witness": list(self.redirect_witness) if self.redirect_witness else None,
                "boundary": self.boundary, "escape_flagged": self.escape_flagged}


def perturb_eta(eta: np.ndarray, eta_tilde: np.ndarray, m: int) -> np.ndarray:
    eta, eta_tilde = np.asarray(eta, float), np.asarray(eta_tilde, float)
    if m < 1:
        raise ValueError("m must be a positive integer")
    if np.any(eta_tilde[eta > 0] > 0):
        raise ValueError("eta_tilde must vanish wherever eta is positive")
    if not np.any(eta == 0) or eta_tilde.sum() == 0:
        return eta.copy()
    return (1 - 1 / m) * eta + eta_tilde / m


def clip_value(c, m: int):
    r = math.sqrt(m)
    return np.clip(c, -r, r)


def clip_costs(obj, m: int):
    """Clamp every cost to [-sqrt(m), sqrt(m)] for a GameSpec or CountableModel."""
    if m < 1:
        raise ValueError("m must be a positive integer")
    if isinstance(obj, GameSpec):
        return replace(obj, costs=tuple(clip_value(c, m) for c in obj.costs))
    base = obj.cost
    return replace(obj, cost=lambda x, profile: clip_value(np.asarray(base(x, profile), float), m))


def relax_kappa(kappa, m: int):
    if m < 1:
        raise ValueError("m must be a positive integer")
    return (1 - 1 / m) * np.asarray(kappa, float) + 1 / math.sqrt(m)


def resolve_levels(model: CountableModel, params: McsgParams) -> int:
    if params.M is not None:
        return params.M if model.n_levels is None else min(params.M, model.n_levels)
    if model.eta_tail is None:
        if model.n_levels is not None:
            return model.n_levels
        raise InvalidModelError("cannot choose a cutoff: eta tail mass is not computable")
    top = model.n_levels if model.n_levels is not None else MAX_LEVELS
    for N in range(1, top + 1):
        if model.eta_tail(N) <= params.tau_tail:
            return N
    if model.n_levels is not None:
        return model.n_levels
    raise InvalidModelError(f"eta tail stays above {params.tau_tail} for {MAX_LEVELS} levels")


def default_eta_tilde(etas: np.ndarray) -> np.ndarray:
    """Geometric weights 1/2, 1/4, ... over the zero-eta states in order, renormalised."""
    out = np.zeros_like(etas)
    zeros = np.nonzero(etas == 0)[0]
    if zeros.size:
        out[zeros] = 0.5 ** np.arange(1, zeros.size + 1)
        out /= out.sum()
    return out


def build_mcsg(model: CountableModel, params: McsgParams) -> tuple[GameSpec, TruncationDiagnostics]:
    m = params.m
    M = resolve_levels(model, params)
    states = model.states_upto(M)
    index = {x: k for k, x in enumerate(states)}
    n, L = model.n_players, model.n_constraints
    S0 = len(states)
    actions = [[list(a) for a in model.actions(x)] for x in states]
    trans_rows, cost_blocks = [], []
    worst, witness = 0.0, None
    for k, x in enumerate(states):
        rows, block = [], []
        for prof in itertools.product(*actions[k]):
            row = np.zeros(S0 + 1)
            for y, p in model.transitions(x, prof):
                row[index.get(y, S0)] += p
            if row[S0] > worst:
                worst, witness = float(row[S0]), (x, prof)
            rows.append(row)
            block.append(np.asarray(model.cost(x, prof), float).reshape(n, L + 1))
        trans_rows.append(np.array(rows))
        cost_blocks.append(clip_value(np.stack(block, axis=-1), params.clip))

    eta = np.array([model.eta(x) for x in states])
    if model.eta_tilde is not None:
        eta_tilde = np.array([model.eta_tilde(x) for x in states])
        if eta_tilde.sum() > 0:
            eta_tilde = eta_tilde / eta_tilde.sum()
    else:
        eta_tilde = default_eta_tilde(eta)
    eta_m = perturb_eta(eta, eta_tilde, params.eta_index)
    tail = max(0.0, 1.0 - float(eta.sum()))
    if model.eta_tail is not None:
        tail = float(model.eta_tail(M))
    need_boundary = worst > 0 or tail > FLOAT_SLACK or 1.0 - eta.sum() > FLOAT_SLACK
    S = S0 + 1 if need_boundary else S0
    eta_base = np.append(eta, max(0.0, 1.0 - eta.sum())) if need_boundary else eta / eta.sum()
    eta_pert = np.append(eta_m, max(0.0, 1.0 - eta_m.sum())) if need_boundary else eta_m / eta_m.sum()
    transition = [r[:, :S] for r in trans_rows]
    all_states = list(states)
    if need_boundary:
        all_states.append(BOUNDARY)
        actions.append([[BOUNDARY_ACTION] for _ in range(n)])
        boundary_row = np.zeros((1, S))
        boundary_row[0, S0] = 1.0
        transition.append(boundary_row)
        cost_blocks.append(np.zeros((n, L + 1, 1)))
    spec = GameSpec(
        n_players=n, states=all_states,
        actions=[[actions[k][i] for k in range(S)] for i in range(n)],
        transition=transition, costs=cost_blocks,
        kappa=relax_kappa(np.asarray(model.kappa, float).reshape(n, L), params.kappa_index),
        alpha=model.alpha, eta=eta_pert,
    )
    diag = TruncationDiagnostics(
        m=m, M=M, n_retained=S0, sqrt_m=math.sqrt(params.clip), eta_tail=tail,
        redirected_mass=worst, redirect_witness=witness, boundary=need_boundary,
        escape_flagged=worst > FLOAT_SLACK, eta_weight=1 / params.eta_index, eta_base=eta_base,
    )
    if diag.escape_flagged:
        log.info("m=%d: up to %.3g transition mass escapes the %d retained levels", m, worst, M)
    return spec, diag


def term_one_gap(spec: GameSpec, diag: TruncationDiagnostics, phi: MultiStrategy) -> float:
    """max_{i,l} |J under eta_m - J under the unperturbed eta|, clipped costs for both."""
    J_m = evaluate_exact(spec, phi).J
    J_0 = evaluate_exact(spec, phi, eta=diag.eta_base).J
    return float(np.max(np.abs(J_m - J_0)))


def term_one_bound(diag: TruncationDiagnostics) -> float:
    """sqrt(m) * 2/m = 2/sqrt(m) plus the redirect slack.

    The boundary state has cost 0, inside [-sqrt(m), sqrt(m)], so the usual
    argument goes through on the truncated game and the slack is only a
    floating-point allowance.
    """
    return 2 * diag.sqrt_m * diag.eta_weight + FLOAT_SLACK


@dataclass(frozen=True, eq=False)
class SweepRecord:
    m: int
    diagnostics: TruncationDiagnostics | None
    report: NashReport | None = None
    J_eta_m: np.ndarray | None = None
    J_eta: np.ndarray | None = None
    gap_one: float | None = None
    bound: float | None = None
    error: str | None = None
    spec: GameSpec | None = field(default=None, repr=False)

    @property
    def bound_ok(self) -> bool | None:
        return None if self.gap_one is None else self.gap_one <= self.bound

    def to_dict(self) -> dict:
        out = {"m": self.m, "error": self.error,
               "diagnostics": self.diagnostics.to_dict() if self.diagnostics else None}
        if self.report is not None:
            out.update(nash=self.report.to_dict(self.spec), J_eta_m=self.J_eta_m.tolist(),
                       J_eta=self.J_eta.tolist(), gap_one=self.gap_one, bound=self.bound,
                       bound_ok=self.bound_ok)
        return out


def truncation_sweep(model: CountableModel, ms: Sequence[int], nash_opts: NashOptions | None = None,
                     M: int | None = None, tau_tail: float = DEFAULT_TAIL) -> list[SweepRecord]:
    """Solve the m-CSG for each m and record both cost evaluations and term-I diagnostics."""
    ms = list(ms)
    if any(b <= a for a, b in zip(ms, ms[1:])):
        raise ValueError("ms must be strictly increasing")
    nash_opts = nash_opts or NashOptions()
    records = []
    for m in ms:
        diag = None
        try:
            spec, diag = build_mcsg(model, McsgParams(m=m, M=M, tau_tail=tau_tail))
            rep = solve_nash(spec, nash_opts)
            J_m = evaluate_exact(spec, rep.profile).J
            J_0 = evaluate_exact(spec, rep.profile, eta=diag.eta_base).J
            gap = term_one_gap(spec, diag, rep.profile)
            bound = term_one_bound(diag)
            if gap > bound:
                log.warning("m=%d: term-I gap %.3g exceeds bound %.3g", m, gap, bound)
            records.append(SweepRecord(m, diag, rep, J_m, J_0, gap, bound, spec=spec))
        except Exception as exc:  # a failed m must not abort the sweep
            log.exception("m=%d failed", m)
            records.append(SweepRecord(m, diag, error=f"{type(exc).__name__}: {exc}"))
    return records


def summary_rows(records: Sequence[SweepRecord]) -> list[dict]:
    rows = []
    for r in records:
        d = r.diagnostics
        row = {"m": r.m, "M": d.M if d else None, "sqrt_m": d.sqrt_m if d else None,
               "eta_tail": d.eta_tail if d else None,
               "redirected_mass": d.redirected_mass if d else None,
               "converged": r.report.converged if r.report else None,
               "max_gap": r.report.max_gap if r.report else None,
               "gap_one": r.gap_one, "bound": r.bound, "error": r.error}
        if r.J_eta_m is not None:
            for i in range(r.J_eta_m.shape[0]):
                for ell in range(r.J_eta_m.shape[1]):
                    row[f"J{i + 1}_{ell}_eta_m"] = r.J_eta_m[i, ell]
                    row[f"J{i + 1}_{ell}_eta"] = r.J_eta[i, ell]
        rows.append(row)
    return rows
