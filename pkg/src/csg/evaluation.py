"""Discounted cost functionals for stationary multi-strategies.

J[i, l] = (1 - alpha) * E[sum_t alpha^(t-1) c_i^l(x_t, a_t)], computed exactly
by a dense linear solve and estimated by simulation as an independent check.

Monte Carlo randomness is counter based: the u-th uniform of episode e at step
t is SplitMix64(SplitMix64(SplitMix64(seed) + e) ^ SplitMix64(t * (n+1) + d)),
with d = 0..n-1 for the players' actions and d = n for the transition, mapped
to [0, 1) through the top 53 bits. Every draw is a pure function of
(seed, episode, step, draw), so chunking and worker count never change results.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from csg.errors import NumericalError
from csg.model import COMPUTED_TOL, GameSpec, MultiStrategy, joint_distribution

MC_TAIL_TOL = 1e-10
_CHUNK = 16384

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def splitmix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 output function, elementwise on uint64 (wrapping)."""
    with np.errstate(over="ignore"):
        z = np.asarray(x, dtype=np.uint64) + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def episode_keys(seed: int, episodes: np.ndarray) -> np.ndarray:
    base = splitmix64(np.uint64(seed % 2**64))
    with np.errstate(over="ignore"):
        return splitmix64(base + episodes.astype(np.uint64))


def uniforms(keys: np.ndarray, counter: int) -> np.ndarray:
    bits = splitmix64(keys ^ splitmix64(np.uint64(counter)))
    return (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass(frozen=True)
class CostReport:
    J: np.ndarray       # (n, L+1)
    slack: np.ndarray   # (n, L): kappa - J[:, 1:]

    @property
    def feasible(self) -> list[bool]:
        return [bool(np.all(row >= -COMPUTED_TOL)) for row in self.slack]


@dataclass(frozen=True)
class McEstimate:
    estimate: np.ndarray   # (n, L+1) or (k,) for custom stage costs
    stderr: np.ndarray
    episodes: int
    horizon: int
    seed: int


def induced_chain(spec: GameSpec, phi: MultiStrategy) -> tuple[np.ndarray, np.ndarray]:
    """Strategy-averaged kernel P (S, S) and stage costs c (n, L+1, S)."""
    S = spec.n_states
    P = np.empty((S, S))
    c = np.empty((spec.n_players, spec.n_constraints + 1, S))
    for x in range(S):
        q = joint_distribution([phi[i][x] for i in range(spec.n_players)])
        P[x] = q @ spec.transition[x]
        c[:, :, x] = spec.costs[x] @ q
    return P, c


def state_values(spec: GameSpec, phi: MultiStrategy) -> np.ndarray:
    """Normalised discounted values V[i, l, x] started from each state."""
    P, c = induced_chain(spec, phi)
    S = spec.n_states
    rhs = c.reshape(-1, S).T
    A = np.eye(S) - spec.alpha * P
    v = np.linalg.solve(A, rhs)
    resid = float(np.max(np.abs(A @ v - rhs))) if v.size else 0.0
    scale = max(1.0, float(np.max(np.abs(rhs))) if rhs.size else 1.0)
    if not np.all(np.isfinite(v)) or resid > 1e-10 * S * scale:
        raise NumericalError(f"policy evaluation residual {resid:.3e} exceeds bound")
    return (1 - spec.alpha) * v.T.reshape(c.shape)


def evaluate_exact(spec: GameSpec, phi: MultiStrategy, eta: np.ndarray | None = None) -> CostReport:
    """Exact J via (I - alpha P_phi) v = c_phi. `eta` overrides the initial law."""
    eta = spec.eta if eta is None else np.asarray(eta, dtype=float)
    J = state_values(spec, phi) @ eta
    return CostReport(J=J, slack=spec.kappa - J[:, 1:])


def feasible(spec: GameSpec, phi: MultiStrategy) -> tuple[list[bool], np.ndarray]:
    rep = evaluate_exact(spec, phi)
    return rep.feasible, rep.slack


def mc_horizon(alpha: float, max_cost: float, tol: float = MC_TAIL_TOL) -> int:
    """Smallest T >= 1 with alpha**T * max_cost < tol."""
    if max_cost <= 0:
        return 1
    T = max(1, math.floor(math.log(tol / max_cost) / math.log(alpha)))
    while alpha**T * max_cost >= tol:
        T += 1
    while T > 1 and alpha ** (T - 1) * max_cost < tol:
        T -= 1
    return T


class _Tables:
    """Flattened sampling tables shared by all episodes."""

    def __init__(self, spec: GameSpec, phi: MultiStrategy):
        S, n = spec.n_states, spec.n_players
        self.n = n
        self.eta_cdf = _cdf(spec.eta[None, :])[0]
        self.action_cdf = []
        for i in range(n):
            width = max(len(a) for a in spec.actions[i])
            tab = np.ones((S, width))
            for x in range(S):
                tab[x, :len(phi[i][x])] = _cdf(phi[i][x][None, :])[0]
            self.action_cdf.append(tab)
        self.strides = np.array([[math.prod(spec.profile_shape(x)[k + 1:]) for k in range(n)]
                                 for x in range(S)], dtype=np.int64)
        self.offsets = np.cumsum([0] + [spec.n_profiles(x) for x in range(S)])[:-1].astype(np.int64)
        self.next_cdf = _cdf(np.concatenate(spec.transition, axis=0))


def _cdf(rows: np.ndarray) -> np.ndarray:
    cdf = np.minimum(np.cumsum(rows, axis=1), 1.0)
    # last positive entry of each row closes the distribution exactly
    for r in range(rows.shape[0]):
        nz = np.nonzero(rows[r] > 0)[0]
        if nz.size:
            cdf[r, nz[-1]:] = 1.0
    return cdf


def _draw(cdf_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.sum(u[:, None] >= cdf_rows, axis=1)


def _simulate_chunk(tab: _Tables, cost_rows: np.ndarray, alpha: float, seed: int,
                    first: int, count: int, horizon: int, start: int) -> np.ndarray:
    keys = episode_keys(seed, np.arange(first, first + count, dtype=np.uint64))
    n = tab.n
    x = _draw(tab.eta_cdf[None, :].repeat(count, 0), uniforms(keys, 0))
    total = np.zeros((count, cost_rows.shape[0]))
    disc = 1.0
    for t in range(1, horizon + 1):
        base = t * (n + 1)
        row = tab.offsets[x].copy()
        for i in range(n):
            a = _draw(tab.action_cdf[i][x], uniforms(keys, base + i))
            row += a * tab.strides[x, i]
        if t >= start:
            total += disc * cost_rows[:, row].T
        x = _draw(tab.next_cdf[row], uniforms(keys, base + n))
        disc *= alpha
    return (1 - alpha) * total


def simulate(spec: GameSpec, phi: MultiStrategy, episodes: int, seed: int,
             cost_rows: np.ndarray | None = None, horizon: int | None = None,
             start: int = 1, workers: int = 1) -> np.ndarray:
    """Per-episode discounted totals, shape (episodes, k).

    `cost_rows` has one row per cost functional and one column per flattened
    (state, profile); it defaults to all (i, l) costs of the spec. Steps
    before `start` are simulated but not accumulated.
    """
    if episodes <= 0:
        raise ValueError("episodes must be a positive integer")
    tab = _Tables(spec, phi)
    if cost_rows is None:
        cost_rows = np.concatenate(spec.costs, axis=2)
        cost_rows = cost_rows.reshape(-1, cost_rows.shape[2])
    if horizon is None:
        horizon = mc_horizon(spec.alpha, float(np.max(np.abs(cost_rows))) if cost_rows.size else 0.0)
    chunks = [(f, min(_CHUNK, episodes - f)) for f in range(0, episodes, _CHUNK)]
    run = lambda fc: _simulate_chunk(tab, cost_rows, spec.alpha, seed, fc[0], fc[1], horizon, start)
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(fc) for fc in chunks]
    return np.concatenate(parts, axis=0)


def evaluate_mc(spec: GameSpec, phi: MultiStrategy, episodes: int, seed: int,
                workers: int = 1) -> McEstimate:
    """Monte Carlo estimate of every J[i, l] with standard errors."""
    if episodes <= 0:
        raise ValueError("episodes must be a positive integer")
    horizon = mc_horizon(spec.alpha, spec.max_abs_cost())
    totals = simulate(spec, phi, episodes, seed, horizon=horizon, workers=workers)
    shape = (spec.n_players, spec.n_constraints + 1)
    est = np.mean(totals, axis=0).reshape(shape)
    if episodes > 1:
        se = (np.std(totals, axis=0, ddof=1) / math.sqrt(episodes)).reshape(shape)
    else:
        se = np.zeros(shape)
    return McEstimate(estimate=est, stderr=se, episodes=episodes, horizon=horizon, seed=seed)
