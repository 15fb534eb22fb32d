"""Dense two-phase primal simplex with Bland's anti-cycling rule.

Problems are taken in the form

    minimise c.x  subject to  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0

and every optimal answer comes with duals (y_eq free, y_ub <= 0) and a
primal/dual/complementarity certificate checked before returning.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from csg.errors import SolverError

PIVOT_TOL = 1e-10
PRIMAL_TOL = 1e-9
DUAL_TOL = 1e-9
GAP_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class LinearProgram:
    c: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        N = c.size
        A_eq = np.asarray(self.A_eq, dtype=float).reshape(-1, N)
        A_ub = np.asarray(self.A_ub, dtype=float).reshape(-1, N)
        b_eq = np.asarray(self.b_eq, dtype=float).ravel()
        b_ub = np.asarray(self.b_ub, dtype=float).ravel()
        if b_eq.size != A_eq.shape[0] or b_ub.size != A_ub.shape[0]:
            raise ValueError("constraint matrix and right-hand side sizes differ")
        for name, arr in (("c", c), ("A_eq", A_eq), ("b_eq", b_eq), ("A_ub", A_ub), ("b_ub", b_ub)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
        for name, arr in (("c", c), ("A_eq", A_eq), ("b_eq", b_eq), ("A_ub", A_ub), ("b_ub", b_ub)):
            object.__setattr__(self, name, arr)

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_rows(self) -> int:
        return self.A_eq.shape[0] + self.A_ub.shape[0]


@dataclass(frozen=True, eq=False)
class LpResult:
    status: str                     # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    value: float | None = None
    y_eq: np.ndarray | None = None
    y_ub: np.ndarray | None = None
    iterations: int = 0
    certificate: dict = field(default_factory=dict)


class _Tableau:
    def __init__(self, A: np.ndarray, b: np.ndarray, basis: list[int], max_iter: int):
        self.T = np.hstack([A, b[:, None]])
        self.basis = basis
        self.iterations = 0
        self.max_iter = max_iter

    def pivot(self, r: int, j: int) -> None:
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[:, j] = 0.0
        T[r, j] = 1.0
        self.basis[r] = j

    def run(self, cost: np.ndarray, allowed: np.ndarray) -> str:
        """Minimise cost over the current basis; columns outside `allowed` never enter."""
        T = self.T
        while True:
            cb = cost[self.basis]
            reduced = cost - cb @ T[:, :-1]
            candidates = np.nonzero((reduced < -PIVOT_TOL) & allowed)[0]
            if candidates.size == 0:
                return "optimal"
            if self.iterations >= self.max_iter:
                raise SolverError(f"simplex iteration limit {self.max_iter} reached")
            j = int(candidates[0])
            col = T[:, j]
            rows = np.nonzero(col > PIVOT_TOL)[0]
            if rows.size == 0:
                return "unbounded"
            ratios = T[rows, -1] / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
            r = int(min(ties, key=lambda k: self.basis[k]))
            self.pivot(r, j)
            self.iterations += 1


def solve_lp(lp: LinearProgram, max_iter: int | None = None) -> LpResult:
    m1, m2, N = lp.A_eq.shape[0], lp.A_ub.shape[0], lp.n_vars
    m = m1 + m2
    if max_iter is None:
        max_iter = 50 * (m + N + 1)
    # standard form over [x, slacks]
    A = np.zeros((m, N + m2))
    A[:m1, :N] = lp.A_eq
    A[m1:, :N] = lp.A_ub
    A[m1:, N:] = np.eye(m2)
    b = np.concatenate([lp.b_eq, lp.b_ub])
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b = b * sign
    n_std = N + m2

    # rows whose slack already gives a unit column skip the artificial
    basis, art_rows = [], []
    for r in range(m):
        if r >= m1 and sign[r] > 0:
            basis.append(N + (r - m1))
        else:
            basis.append(n_std + len(art_rows))
            art_rows.append(r)
    n_art = len(art_rows)
    A_full = np.zeros((m, n_std + n_art))
    A_full[:, :n_std] = A
    for k, r in enumerate(art_rows):
        A_full[r, n_std + k] = 1.0
    tab = _Tableau(A_full, b.copy(), basis, max_iter)
    scale = max(1.0, float(np.max(np.abs(b))) if b.size else 1.0)

    if n_art:
        cost1 = np.zeros(n_std + n_art)
        cost1[n_std:] = 1.0
        tab.run(cost1, np.ones(n_std + n_art, dtype=bool))
        infeas = float(sum(tab.T[r, -1] for r in range(m) if tab.basis[r] >= n_std))
        if infeas > PRIMAL_TOL * scale:
            return LpResult("infeasible", iterations=tab.iterations)
        # pivot zero-level artificials out; rows where that is impossible are redundant
        keep = []
        for r in range(m):
            if tab.basis[r] >= n_std:
                cols = np.nonzero(np.abs(tab.T[r, :n_std]) > PIVOT_TOL)[0]
                if cols.size:
                    tab.pivot(r, int(cols[0]))
                    keep.append(r)
            else:
                keep.append(r)
        tab.T = np.delete(tab.T[keep], np.s_[n_std:n_std + n_art], axis=1)
        tab.basis = [tab.basis[r] for r in keep]
        rows_kept = keep
    else:
        rows_kept = list(range(m))

    cost2 = np.concatenate([lp.c, np.zeros(m2)])
    status = tab.run(cost2, np.ones(n_std, dtype=bool))
    if status == "unbounded":
        return LpResult("unbounded", iterations=tab.iterations)

    B = tab.basis
    A_k, b_k = A[rows_kept], b[rows_kept]
    xs = np.zeros(n_std)
    if B:
        xs[B] = np.linalg.solve(A_k[:, B], b_k)
        y_k = np.linalg.solve(A_k[:, B].T, cost2[B])
    else:
        y_k = np.zeros(0)
    xs[np.abs(xs) < 1e-13] = 0.0
    y = np.zeros(m)
    y[rows_kept] = y_k
    y *= sign
    x = np.maximum(xs[:N], 0.0) if np.all(xs[:N] >= -PRIMAL_TOL * scale) else xs[:N]
    y_eq, y_ub = y[:m1], y[m1:]
    value = float(lp.c @ x)
    cert = certify(lp, x, y_eq, y_ub)
    cscale = max(scale, 1.0, float(np.max(np.abs(lp.c))) if N else 1.0)
    if (cert["primal"] > PRIMAL_TOL * scale or cert["dual"] > DUAL_TOL * cscale
            or cert["gap"] > GAP_TOL * cscale):
        raise SolverError(f"optimality certificate failed: {cert}")
    return LpResult("optimal", x=x, value=value, y_eq=y_eq, y_ub=y_ub,
                    iterations=tab.iterations, certificate=cert)


def certify(lp: LinearProgram, x: np.ndarray, y_eq: np.ndarray, y_ub: np.ndarray) -> dict:
    """Primal infeasibility, dual infeasibility and duality gap of a candidate pair."""
    primal = max(
        float(np.max(np.abs(lp.A_eq @ x - lp.b_eq), initial=0.0)),
        float(np.max(lp.A_ub @ x - lp.b_ub, initial=0.0)),
        float(np.max(-x, initial=0.0)),
    )
    reduced = lp.c - lp.A_eq.T @ y_eq - lp.A_ub.T @ y_ub
    dual = max(float(np.max(-reduced, initial=0.0)), float(np.max(y_ub, initial=0.0)))
    gap = abs(float(lp.c @ x - lp.b_eq @ y_eq - lp.b_ub @ y_ub))
    return {"primal": primal, "dual": dual, "gap": gap}
