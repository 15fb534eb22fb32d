import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from csg.errors import SolverError
from csg.lp import LinearProgram, certify, solve_lp

EMPTY = np.zeros((0, 1))


def test_equality_pinned():
    res = solve_lp(LinearProgram([1.0], [[1.0]], [1.0], EMPTY, []))
    assert res.status == "optimal" and res.value == pytest.approx(1.0)


def test_unbounded():
    assert solve_lp(LinearProgram([-1.0], EMPTY, [], EMPTY, [])).status == "unbounded"


def test_infeasible():
    assert solve_lp(LinearProgram([0.0], [[1.0]], [-1.0], EMPTY, [])).status == "infeasible"


def test_rejects_non_finite():
    with pytest.raises(ValueError):
        LinearProgram([np.nan], EMPTY, [], EMPTY, [])


def test_iteration_cap_raises():
    lp = LinearProgram([-1.0, -1.0], EMPTY.reshape(0, 2), [], [[1.0, 2.0], [3.0, 1.0]], [4.0, 6.0])
    with pytest.raises(SolverError):
        solve_lp(lp, max_iter=1)


def test_degenerate_redundant_rows():
    # the second equality is twice the first
    lp = LinearProgram([1.0, 2.0, 0.0], [[1, 1, 1], [2, 2, 2]], [1.0, 2.0], [[1, 0, 0]], [0.5])
    res = solve_lp(lp)
    assert res.status == "optimal" and res.value == pytest.approx(0.0, abs=1e-12)
    cert = certify(lp, res.x, res.y_eq, res.y_ub)
    assert cert["primal"] <= 1e-9 and cert["dual"] <= 1e-9 and cert["gap"] <= 1e-8


@given(st.integers(0, 2**32 - 1))
def test_agrees_with_highs(seed):
    rng = np.random.default_rng(seed)
    m_eq, m_ub, n = int(rng.integers(0, 4)), int(rng.integers(0, 4)), int(rng.integers(1, 7))
    A_eq = rng.normal(size=(m_eq, n))
    x0 = rng.random(n)
    b_eq = A_eq @ x0
    A_ub = rng.normal(size=(m_ub, n))
    b_ub = A_ub @ x0 + rng.random(m_ub)
    c = rng.normal(size=n)
    # box the problem so it is bounded
    A_ub = np.vstack([A_ub, np.ones((1, n))])
    b_ub = np.append(b_ub, x0.sum() + 1)
    res = solve_lp(LinearProgram(c, A_eq, b_eq, A_ub, b_ub))
    ref = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq if m_eq else None, b_eq=b_eq if m_eq else None,
                  bounds=(0, None), method="highs")
    assert res.status == "optimal" and ref.status == 0
    assert res.value == pytest.approx(ref.fun, abs=1e-7)
    cert = certify(LinearProgram(c, A_eq, b_eq, A_ub, b_ub), res.x, res.y_eq, res.y_ub)
    assert cert["primal"] <= 1e-9 and cert["dual"] <= 1e-9 and cert["gap"] <= 1e-8


def test_deterministic():
    rng = np.random.default_rng(3)
    A = rng.random((3, 6))
    lp = LinearProgram(rng.normal(size=6), A, A @ rng.random(6), np.ones((1, 6)), [10.0])
    a, b = solve_lp(lp), solve_lp(lp)
    np.testing.assert_array_equal(a.x, b.x)
    assert a.iterations == b.iterations
