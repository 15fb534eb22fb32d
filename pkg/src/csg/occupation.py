"""Occupation measures on player i's state-action pairs.

A measure is stored as a flat weight vector over the pairs (x, a_i), laid out
state-major exactly like `ReducedMdp`. The flow identity tying a measure to a
reduced MDP is

    mu_hat(x) = (1 - alpha) eta(x) + alpha * sum_{z, a} p(x | z, a) mu(z, a).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from csg.model import GameSpec, ReducedMdp, StationaryStrategy, joint_distribution

MASS_TOL = 1e-9
CLAMP_TOL = 1e-12
ZERO_MARGINAL = 1e-12


def _offsets(sizes) -> np.ndarray:
    return np.concatenate(([0], np.cumsum(sizes))).astype(np.int64)


def _clean(w: np.ndarray) -> np.ndarray:
    w = np.array(w, dtype=float)
    if np.any(w < -MASS_TOL):
        raise ValueError(f"negative weight {w.min():.3e} in occupation measure")
    w[w < 0] = 0.0
    mass = w.sum()
    if abs(mass - 1.0) > MASS_TOL:
        raise ValueError(f"occupation measure has mass {mass!r}, expected 1")
    if abs(mass - 1.0) > CLAMP_TOL:
        w /= mass
    w.setflags(write=False)
    return w


@dataclass(frozen=True, eq=False)
class OccupationMeasure:
    player: int
    sizes: tuple[int, ...]
    weights: np.ndarray
    marginal: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        w = _clean(self.weights)
        if w.shape != (sum(self.sizes),):
            raise ValueError(f"{w.shape[0]} weights for {sum(self.sizes)} state-action pairs")
        object.__setattr__(self, "weights", w)
        marg = np.add.reduceat(w, _offsets(self.sizes)[:-1]) if w.size else w
        marg.setflags(write=False)
        object.__setattr__(self, "marginal", marg)

    def at(self, x: int) -> np.ndarray:
        off = _offsets(self.sizes)
        return self.weights[off[x]:off[x + 1]]

    def to_dict(self, spec: GameSpec) -> dict:
        i = self.player
        return {"player": i + 1,
                "weights": {s: {a: float(w) for a, w in zip(spec.actions[i][x], self.at(x))}
                            for x, s in enumerate(spec.states)}}


@dataclass(frozen=True, eq=False)
class CorrelatedOccupation:
    """Weights rho(x, j) over full action profiles; shapes[x] is the profile shape at x."""

    shapes: tuple[tuple[int, ...], ...]
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "shapes", tuple(tuple(s) for s in self.shapes))
        w = _clean(self.weights)
        if w.shape != (sum(int(np.prod(s)) for s in self.shapes),):
            raise ValueError("weight vector does not match the profile layout")
        object.__setattr__(self, "weights", w)

    @classmethod
    def product(cls, spec: GameSpec, marginal: np.ndarray, phi) -> CorrelatedOccupation:
        """rho(x, j) = marginal(x) * prod_i phi_i(a_i | x)."""
        blocks = [marginal[x] * joint_distribution([phi[i][x] for i in range(spec.n_players)])
                  for x in range(spec.n_states)]
        return cls(tuple(spec.profile_shape(x) for x in range(spec.n_states)), np.concatenate(blocks))


def occupation_from_strategy(reduced: ReducedMdp, phi_i: StationaryStrategy) -> OccupationMeasure:
    K = reduced.state_kernel(phi_i)
    S = reduced.n_states
    marg = np.linalg.solve(np.eye(S) - reduced.alpha * K.T, (1 - reduced.alpha) * reduced.eta)
    w = np.repeat(marg, reduced.sizes) * phi_i.flat()
    return OccupationMeasure(reduced.player, reduced.sizes, np.maximum(w, 0.0))


def flow_residual(mu: OccupationMeasure, reduced: ReducedMdp) -> float:
    if mu.sizes != reduced.sizes:
        raise ValueError("occupation measure and reduced MDP have different pair layouts")
    inflow = (1 - reduced.alpha) * reduced.eta + reduced.alpha * (mu.weights @ reduced.trans)
    return float(np.max(np.abs(mu.marginal - inflow)))


def pair_cost(mu: OccupationMeasure, cbar: np.ndarray) -> float:
    """sum_{x,a} cbar(x,a) mu(x,a); cbar is a flat per-pair table."""
    return float(np.dot(np.asarray(cbar, dtype=float), mu.weights))


def disaggregate(mu: OccupationMeasure) -> tuple[np.ndarray, StationaryStrategy]:
    """Marginal and the stationary strategy mu(x, .) / mu_hat(x); uniform where mu_hat ~ 0."""
    rows = []
    for x, size in enumerate(mu.sizes):
        m = mu.marginal[x]
        if m > ZERO_MARGINAL:
            row = mu.at(x) / m
            row = row / row.sum()
        else:
            row = np.full(size, 1.0 / size)
        rows.append(row)
    return mu.marginal.copy(), StationaryStrategy(tuple(rows))


def mix(mu1: OccupationMeasure, mu2: OccupationMeasure, lam: float) -> OccupationMeasure:
    """lam * mu1 + (1 - lam) * mu2."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"mixing weight {lam} outside [0, 1]")
    if mu1.player != mu2.player or mu1.sizes != mu2.sizes:
        raise ValueError("can only mix measures of the same player and layout")
    if lam == 1.0:
        return mu1
    if lam == 0.0:
        return mu2
    return OccupationMeasure(mu1.player, mu1.sizes, lam * mu1.weights + (1 - lam) * mu2.weights)


def project(rho: CorrelatedOccupation, i: int) -> OccupationMeasure:
    """Marginalise rho(x, .) onto player i's action coordinate."""
    out, pos = [], 0
    for shape in rho.shapes:
        size = int(np.prod(shape))
        block = rho.weights[pos:pos + size].reshape(shape)
        pos += size
        other = tuple(k for k in range(len(shape)) if k != i)
        out.append(block.sum(axis=other) if other else block)
    return OccupationMeasure(i, tuple(s[i] for s in rho.shapes), np.concatenate(out))
