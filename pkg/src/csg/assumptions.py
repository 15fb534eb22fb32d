"""Checks of the verifiable regularity assumptions, and the stop-or-continue model `example1`.

Every check accepts a finite GameSpec or a CountableModel. On a countable
model only the first `n_levels` levels are inspected and the report says so
(`partial=True`); nothing here certifies a property of the infinite tail.

The `example1` model is a single-player process on N u N*: at n in N the player may
continue (jump to the absorbing 1* w.p. q, else move to n+1) or stop (move to
(n+1)*); every n* moves to 1*. The initial law is geometric on N.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from csg.cop import slater_reduced
from csg.evaluation import mc_horizon, simulate
from csg.model import GameSpec, MultiStrategy, reduce
from csg.truncation import BOUNDARY, CountableModel

DEFAULT_LEVELS = 10**4
W_TOL = 1e-12
SLATER_NOTE = "sampling evidence over finitely many opponent profiles, not a certificate"
TAIL_NOTE = "stationary strategies only; the supremum over history-dependent strategies is not sampled"

Weight = Callable[[str], float] | np.ndarray | Sequence[float]


# ---------------------------------------------------------------- iteration

@dataclass(frozen=True)
class _Row:
    state: str
    profile: tuple
    support: list[tuple[str, float]]
    cost: np.ndarray        # (n, L+1)


def _rows(obj, n_levels: int) -> Iterator[_Row]:
    if isinstance(obj, GameSpec):
        for x, sid in enumerate(obj.states):
            acts = [obj.actions[i][x] for i in range(obj.n_players)]
            for j, idx in enumerate(np.ndindex(*obj.profile_shape(x))):
                row = obj.transition[x][j]
                support = [(obj.states[y], float(row[y])) for y in np.nonzero(row)[0]]
                yield _Row(sid, tuple(acts[i][a] for i, a in enumerate(idx)), support,
                           obj.costs[x][:, :, j])
    else:
        for sid in obj.states_upto(n_levels):
            for prof in obj.profiles(sid):
                yield _Row(sid, prof, list(obj.transitions(sid, prof)),
                           np.asarray(obj.cost(sid, prof), float))


def _states(obj, n_levels: int) -> list[str]:
    return list(obj.states) if isinstance(obj, GameSpec) else obj.states_upto(n_levels)


def _partial(obj, n_levels: int) -> bool:
    if isinstance(obj, GameSpec):
        return False
    return obj.n_levels is None or obj.n_levels > n_levels


def _weight_fn(obj, w: Weight | None) -> Callable[[str], float]:
    if w is None:
        if isinstance(obj, GameSpec) or obj.w is None:
            raise ValueError("no weight function given")
        return obj.w
    if callable(w):
        return w
    if not isinstance(obj, GameSpec):
        raise ValueError("array weights need a finite spec")
    arr = np.asarray(w, float)
    if arr.shape != (obj.n_states,):
        raise ValueError(f"weight vector has shape {arr.shape}, expected ({obj.n_states},)")
    index = {s: k for k, s in enumerate(obj.states)}
    return lambda x: float(arr[index[x]])


def _match(profile: tuple, allowed) -> bool:
    return allowed is None or profile in allowed


# ---------------------------------------------------------------- B(i)

@dataclass(frozen=True)
class BoundReport:
    holds: bool
    worst_ratio: float
    witness: tuple | None
    checked: int
    partial: bool


def check_b_bound(obj, w: Weight | None = None, n_levels: int = DEFAULT_LEVELS) -> BoundReport:
    """Is every |c_i^l(x, profile)| <= w(x)? Raises if w < 1 somewhere."""
    wf = _weight_fn(obj, w)
    worst, witness, checked = 0.0, None, 0
    for r in _rows(obj, n_levels):
        wx = wf(r.state)
        if wx < 1 - W_TOL:
            raise ValueError(f"weight {wx} < 1 at state {r.state!r}")
        ratio = float(np.max(np.abs(r.cost))) / wx if r.cost.size else 0.0
        checked += 1
        if witness is None or ratio > worst:
            worst, witness = ratio, (r.state, r.profile)
    return BoundReport(worst <= 1 + W_TOL, worst, witness, checked, _partial(obj, n_levels))


# ---------------------------------------------------------------- W

@dataclass(frozen=True)
class DriftReport:
    delta_min: float
    alpha: float
    witness: tuple | None
    states_checked: int
    partial: bool
    w_eta_sum: float            # sum of w * eta over the checked states
    w_eta_partial: bool

    @property
    def holds_W(self) -> bool:
        return self.delta_min * self.alpha < 1

    def to_dict(self) -> dict:
        return {"delta_min": self.delta_min, "alpha": self.alpha, "holds_W": self.holds_W,
                "witness": list(self.witness) if self.witness else None,
                "states_checked": self.states_checked, "partial": self.partial,
                "w_eta_sum": self.w_eta_sum, "w_eta_partial": self.w_eta_partial}


def _eta_fn(obj) -> Callable[[str], float]:
    if isinstance(obj, GameSpec):
        index = {s: k for k, s in enumerate(obj.states)}
        return lambda x: float(obj.eta[index[x]])
    return obj.eta


def check_drift(obj, w: Weight | None = None, alpha: float | None = None,
                n_levels: int = DEFAULT_LEVELS, profiles=None) -> DriftReport:
    """delta_min = max over checked (x, profile) of sum_y w(y) p(y|x, profile) / w(x).

    `profiles` restricts the check to the given action profiles (tuples of
    action ids); states offering none of them are skipped.
    """
    wf = _weight_fn(obj, w)
    alpha = obj.alpha if alpha is None else alpha
    allowed = None if profiles is None else {tuple(p) for p in profiles}
    worst, witness = -math.inf, None
    seen = set()
    for r in _rows(obj, n_levels):
        if not _match(r.profile, allowed):
            continue
        wx = wf(r.state)
        if not wx > 0:
            raise ValueError(f"weight must be positive, got {wx} at {r.state!r}")
        ratio = sum(p * wf(y) for y, p in r.support) / wx
        seen.add(r.state)
        if ratio > worst:
            worst, witness = ratio, (r.state, r.profile)
    eta = _eta_fn(obj)
    states = _states(obj, n_levels)
    w_eta = math.fsum(wf(x) * eta(x) for x in states)
    partial = _partial(obj, n_levels)
    return DriftReport(worst if witness else 0.0, alpha, witness, len(seen), partial, w_eta, partial)


@dataclass(frozen=True)
class ZhangReport:
    beta_sq_min: float
    alpha: float
    drift_w2: DriftReport

    @property
    def holds(self) -> bool:
        return self.alpha * self.beta_sq_min < 1

    @property
    def implication_ok(self) -> bool:
        """holds => the w^2 drift condition holds."""
        return (not self.holds) or self.drift_w2.holds_W

    def to_dict(self) -> dict:
        return {"beta_sq_min": self.beta_sq_min, "alpha": self.alpha, "holds": self.holds,
                "implication_ok": self.implication_ok, "drift_w2": self.drift_w2.to_dict()}


def check_zhang(obj, w: Weight | None = None, alpha: float | None = None,
                n_levels: int = DEFAULT_LEVELS, profiles=None) -> ZhangReport:
    wf = _weight_fn(obj, w)
    alpha = obj.alpha if alpha is None else alpha
    allowed = None if profiles is None else {tuple(p) for p in profiles}
    beta = 0.0
    for r in _rows(obj, n_levels):
        if not _match(r.profile, allowed):
            continue
        wx = wf(r.state)
        beta = max(beta, sum(p * wf(y) ** 2 for y, p in r.support) / wx ** 2)
    w2 = lambda x: wf(x) ** 2
    return ZhangReport(beta, alpha, check_drift(obj, w2, alpha, n_levels, profiles))


# ---------------------------------------------------------------- D

def check_positivity(eta, states: Sequence[str] | None = None) -> tuple[bool, list[str]]:
    """(all eta > 0, states where eta vanishes). Accepts a GameSpec or a vector."""
    if isinstance(eta, GameSpec):
        states, eta = eta.states, eta.eta
    eta = np.asarray(eta, float)
    names = list(states) if states is not None else [f"s{k}" for k in range(eta.size)]
    zeros = [names[k] for k in np.nonzero(eta <= 0)[0]]
    return not zeros, zeros


# ---------------------------------------------------------------- C

@dataclass(frozen=True, eq=False)
class SlaterEvidence:
    slacks: np.ndarray          # (profiles, players); inf where a player has no constraints
    vacuous: bool
    samples: int
    seed: int
    note: str = SLATER_NOTE

    @property
    def min_slack(self) -> float:
        return float(np.min(self.slacks)) if self.slacks.size else math.inf

    @property
    def flagged(self) -> bool:
        return not self.vacuous and self.min_slack <= 0

    def to_dict(self) -> dict:
        return {"min_slack": self.min_slack, "flagged": self.flagged, "vacuous": self.vacuous,
                "samples": self.samples, "seed": self.seed, "note": self.note,
                "slacks": self.slacks.tolist()}


def check_slater(spec: GameSpec, samples: int = 50, seed: int = 0,
                 profiles: Sequence[MultiStrategy] | None = None) -> SlaterEvidence:
    """Slater slack of every player against uniform and `samples` random opponent profiles."""
    if spec.n_constraints == 0:
        return SlaterEvidence(np.full((0, spec.n_players), math.inf), True, 0, seed)
    if profiles is None:
        rng = np.random.default_rng(seed)
        profiles = [MultiStrategy.uniform(spec)] + [MultiStrategy.dirichlet(spec, rng) for _ in range(samples)]
    slacks = np.array([[slater_reduced(reduce(spec, i, phi)).slack for i in range(spec.n_players)]
                       for phi in profiles])
    return SlaterEvidence(slacks, False, len(profiles), seed)


# ---------------------------------------------------------------- example1 model

def _zero(n: int) -> float:
    return 0.0


def _one(n: int) -> float:
    return 1.0


def _stop_penalty(n: int) -> float:
    return 0.0 if n == 1 else float(n)


@dataclass(frozen=True)
class Example1Params:
    q: float = 0.5
    g: float = 0.5
    alpha: float = 0.4
    d: float = 0.0
    weight: str = "shifted"             # "shifted": w(n) = w(n*) = n + d, w(1*) = 1; "simple": w(n) = 1, w(n*) = n
    kappa: float = 0.75
    # cost at n (both actions) and at n*, for the objective and the single constraint
    objective_n: Callable[[int], float] = field(default=_zero, repr=False)
    objective_star: Callable[[int], float] = field(default=_stop_penalty, repr=False)
    constraint_n: Callable[[int], float] = field(default=_one, repr=False)
    constraint_star: Callable[[int], float] = field(default=_zero, repr=False)
    check_levels: int = 1000

    def __post_init__(self):
        if not 0 <= self.q <= 1:
            raise ValueError("q must lie in [0, 1]")
        if not 0 < self.g < 1:
            raise ValueError("g must lie in (0, 1)")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.d < 0:
            raise ValueError("d must be non-negative")
        if self.weight not in ("shifted", "simple"):
            raise ValueError(f"unknown weight {self.weight!r}")
        for n in range(1, self.check_levels + 1):
            for f in (self.objective_n, self.constraint_n):
                if not 0 <= f(n) <= 1:
                    raise ValueError(f"cost at state {n} must lie in [0, 1]")
            for f in (self.objective_star, self.constraint_star):
                c = f(n)
                if not 0 <= c <= n or (n == 1 and c != 0):
                    raise ValueError(f"cost at state {n}* must lie in [0, {n}] and vanish at 1*")


def _parse(x: str) -> tuple[int, bool]:
    return (int(x[:-1]), True) if x.endswith("*") else (int(x), False)


def example1_weight(params: Example1Params) -> Callable[[str], float]:
    def w(x: str) -> float:
        if x == BOUNDARY:
            return 1.0
        n, star = _parse(x)
        if params.weight == "simple":
            return float(n) if star else 1.0
        return 1.0 if (star and n == 1) else n + params.d
    return w


def build_example1(params: Example1Params | None = None) -> CountableModel:
    p = params or Example1Params()

    def actions(x):
        return [["s"]] if x.endswith("*") else [["c", "s"]]

    def transitions(x, profile):
        n, star = _parse(x)
        if star:
            return [("1*", 1.0)]
        if profile[0] == "s":
            return [(f"{n + 1}*", 1.0)]
        out = [("1*", p.q), (str(n + 1), 1.0 - p.q)]
        return [(y, pr) for y, pr in out if pr > 0]

    def cost(x, profile):
        n, star = _parse(x)
        if star:
            return np.array([[p.objective_star(n), p.constraint_star(n)]])
        return np.array([[p.objective_n(n), p.constraint_n(n)]])

    def eta(x):
        n, star = _parse(x)
        return 0.0 if star else (1 - p.g) * p.g ** (n - 1)

    return CountableModel(
        n_players=1, n_constraints=1, alpha=p.alpha, kappa=np.array([[p.kappa]]),
        level=lambda k: [str(k), f"{k}*"], actions=actions, transitions=transitions,
        cost=cost, eta=eta, eta_tail=lambda N: p.g ** N, w=example1_weight(p), name="example1",
    )


def example1_tail_bound(n: int, alpha: float, g: float) -> float:
    """Upper bound on E sum_{k>=n} alpha^(k-1) w(x^k) under any strategy, simple weight."""
    if n < 1:
        raise ValueError("n must be >= 1")
    a = alpha
    return ((a ** (n - 1) * (n - 1) * (1 - a) + a ** n) / (1 - a) ** 2
            + a ** (n - 1) / (g * (1 - a)))


@dataclass(frozen=True)
class TailCheck:
    n: int
    estimate: float          # (1 - alpha) E sum_{t>=n} alpha^(t-1) w(x^t)
    stderr: float
    bound: float             # (1 - alpha) * example1_tail_bound
    episodes: int
    note: str = TAIL_NOTE

    @property
    def dominated(self) -> bool:
        return self.estimate <= self.bound + 3 * self.stderr


def simulate_tail(spec: GameSpec, phi: MultiStrategy, w: Callable[[str], float], n: int,
                  g: float, episodes: int, seed: int, boundary_weight: float | None = None) -> TailCheck:
    """Monte Carlo tail of the weighted discounted sum on a truncated example1 game.

    The boundary state stands in for the discarded levels. Along any path
    w(x^k) <= k + m - 1, so it is given the weight horizon + M unless told
    otherwise, which can only inflate the estimate.
    """
    horizon = mc_horizon(spec.alpha, float(2 * len(spec.states)))
    if boundary_weight is None:
        boundary_weight = float(horizon + len(spec.states))
    ws = np.array([boundary_weight if x == BOUNDARY else w(x) for x in spec.states])
    row = np.concatenate([np.full(spec.transition[x].shape[0], ws[x]) for x in range(spec.n_states)])
    totals = simulate(spec, phi, episodes, seed, cost_rows=row[None, :],
                      horizon=max(horizon, n + 1), start=n)[:, 0]
    est = float(totals.mean())
    err = float(totals.std(ddof=1) / math.sqrt(episodes)) if episodes > 1 else math.inf
    return TailCheck(n, est, err, (1 - spec.alpha) * example1_tail_bound(n, spec.alpha, g), episodes)


def example1_report(params: Example1Params, n_levels: int = DEFAULT_LEVELS) -> dict:
    """Certificate bundle: drift per action and overall, w^2 condition, B(i) with the simple weight."""
    model = build_example1(params)
    w = example1_weight(params)
    simple = example1_weight(Example1Params(q=params.q, g=params.g, alpha=params.alpha, weight="simple"))
    stop = check_drift(model, w, params.alpha, n_levels, profiles=[("s",)])
    cont = check_drift(model, w, params.alpha, n_levels, profiles=[("c",)])
    both = check_drift(model, w, params.alpha, n_levels)
    zhang = check_zhang(model, w, params.alpha, n_levels)
    bound = check_b_bound(model, simple, n_levels)
    return {
        "params": {"q": params.q, "g": params.g, "alpha": params.alpha, "d": params.d,
                   "weight": params.weight, "kappa": params.kappa},
        "levels_checked": n_levels,
        "drift_stop": stop.to_dict(), "drift_continue": cont.to_dict(), "drift": both.to_dict(),
        "zhang": zhang.to_dict(),
        "b_bound_simple_weight": {"holds": bound.holds, "worst_ratio": bound.worst_ratio,
                                  "partial": bound.partial},
        "tail_bound": {str(n): example1_tail_bound(n, params.alpha, params.g) for n in (1, 2, 5, 10, 30)},
    }
