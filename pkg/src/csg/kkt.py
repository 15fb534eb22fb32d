"""Newton refinement of an approximate equilibrium on a guessed support.

With the support of every player's occupation measure and the set of binding
constraints fixed, the optimality conditions of all best-response LPs form a
square nonlinear system in (mu_i, v_i, lambda_i):

    F_i(phi_-i) mu_i = (1 - alpha) eta              flow rows
    C_i,A(phi_-i) mu_i = kappa_i,A                  binding constraints
    [c0_i + C_i,A^T lambda_i - F_i^T v_i]_k = 0      k in support of mu_i

where phi_j = mu_j / mu_hat_j couples the players. The root is only a
candidate: callers must certify it with `nash_gap`.
"""
from __future__ import annotations

import warnings

import numpy as np
from scipy.optimize import root

from csg.cop import CopSolution, flow_matrix
from csg.model import GameSpec, MultiStrategy, StationaryStrategy, reduce
from csg.occupation import occupation_from_strategy

SUPPORT_TOL = 1e-9


def _strategies(spec: GameSpec, mus: list[np.ndarray]) -> MultiStrategy:
    out = []
    for i, mu in enumerate(mus):
        rows, pos = [], 0
        for x in range(spec.n_states):
            k = len(spec.actions[i][x])
            block = mu[pos:pos + k]
            pos += k
            m = block.sum()
            rows.append(block / m if abs(m) > 1e-14 else np.full(k, 1.0 / k))
        out.append(StationaryStrategy.__new__(StationaryStrategy))
        object.__setattr__(out[-1], "probs", tuple(rows))
    return MultiStrategy(tuple(out))


def guess_support(spec: GameSpec, phi: MultiStrategy, history: list[tuple[CopSolution, ...]],
                  share: float = 0.02):
    """Support and binding sets from recent best responses and the current profile."""
    supports, active = [], []
    for i in range(spec.n_players):
        K = sum(len(a) for a in spec.actions[i])
        mask = np.zeros(K, dtype=bool)
        act = np.zeros(spec.n_constraints, dtype=bool)
        for sols in history:
            sol = sols[i]
            mask |= sol.mu.weights > SUPPORT_TOL
            act |= sol.duals > SUPPORT_TOL
        mask |= phi[i].flat() > share
        # every state needs a pair so its value variable is pinned down
        pos = 0
        for x in range(spec.n_states):
            k = len(spec.actions[i][x])
            if not mask[pos:pos + k].any():
                mask[pos + int(np.argmax(phi[i][x]))] = True
            pos += k
        supports.append(mask)
        active.append(act)
    return supports, active


def refine(spec: GameSpec, phi: MultiStrategy, supports, active, max_fev: int = 400) -> MultiStrategy | None:
    n, S = spec.n_players, spec.n_states
    reds = [reduce(spec, i, phi) for i in range(n)]
    mu0 = [occupation_from_strategy(reds[i], phi[i]).weights for i in range(n)]
    # warm-start duals from the restricted least-squares fit
    layout, z0 = [], []
    for i in range(n):
        sup, act = np.nonzero(supports[i])[0], np.nonzero(active[i])[0]
        F = flow_matrix(reds[i])
        C = reds[i].costs[1:][act]
        A = np.hstack([-F.T[sup], C.T[sup]]) if act.size else -F.T[sup]
        dual, *_ = np.linalg.lstsq(A, -reds[i].costs[0][sup], rcond=None)
        layout.append((sup, act, mu0[i].size))
        z0.extend([mu0[i][sup], dual])
    z0 = np.concatenate(z0)

    def unpack(z):
        mus, duals, pos = [], [], 0
        for sup, act, K in layout:
            mu = np.zeros(K)
            mu[sup] = z[pos:pos + sup.size]
            pos += sup.size
            duals.append(z[pos:pos + S + act.size])
            pos += S + act.size
            mus.append(mu)
        return mus, duals

    def residual(z):
        mus, duals = unpack(z)
        prof = _strategies(spec, mus)
        out = []
        for i, (sup, act, _) in enumerate(layout):
            red = reduce(spec, i, prof)
            F = flow_matrix(red)
            v, lam = duals[i][:S], duals[i][S:]
            C = red.costs[1:][act]
            out.append(F @ mus[i] - (1 - red.alpha) * red.eta)
            out.append(C @ mus[i] - red.kappa[act])
            out.append((red.costs[0] + C.T @ lam - F.T @ v)[sup])
        return np.concatenate(out)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            sol = root(residual, z0, method="hybr", options={"xtol": 1e-14, "maxfev": max_fev})
        except (ValueError, np.linalg.LinAlgError):
            return None
    if not np.all(np.isfinite(sol.x)):
        return None
    mus, duals = unpack(sol.x)
    if any(np.any(mu < -1e-9) for mu in mus) or any(np.any(d[S:] < -1e-9) for d in duals):
        return None
    try:
        prof = _strategies(spec, [np.maximum(mu, 0.0) for mu in mus])
        return MultiStrategy(tuple(StationaryStrategy(p.probs) for p in prof))
    except ValueError:
        return None
