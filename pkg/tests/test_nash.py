import logging

import numpy as np
import pytest

from csg.cop import solve_cop
from csg.evaluation import evaluate_exact
from csg.instances import g2, g3, random_slater_game, random_spec
from csg.model import MultiStrategy, StationaryStrategy
from csg.nash import NashOptions, best_response, nash_gap, solve_nash
from oracles import linprog_cop


def pure(spec, i, a):
    return StationaryStrategy.pure(spec, i, {"s0": a})


def test_options_validation():
    with pytest.raises(ValueError):
        NashOptions(eps=0)
    with pytest.raises(ValueError):
        NashOptions(mode="random")


def test_single_player_best_response_is_cop():
    spec = g2()
    sol, mu = best_response(spec, 0, MultiStrategy.uniform(spec))
    assert sol.value == pytest.approx(solve_cop(spec, 0, []).value)
    assert mu is sol.mu


def test_degenerate_single_action_game():
    spec = g3([[2.0]], [[3.0]], actions=("a",))
    rep = nash_gap(spec, MultiStrategy.uniform(spec))
    assert rep.converged and np.all(rep.gaps == 0) and np.all(rep.violations == 0)
    rep = solve_nash(spec)
    assert rep.converged and rep.sweeps <= 1 and rep.max_gap == 0


def test_pure_counter_action_in_matching_pennies():
    spec = g3([[0, 1], [1, 0]], [[1, 0], [0, 1]])
    # player 2 pays 1 when the actions agree, so it mismatches player 1
    sol, _ = best_response(spec, 1, MultiStrategy((pure(spec, 0, "a"), pure(spec, 1, "a"))))
    np.testing.assert_allclose(sol.strategy[0], [0.0, 1.0])
    J = [evaluate_exact(spec, MultiStrategy((pure(spec, 0, "a"), pure(spec, 1, b)))).J[1, 0] for b in "ab"]
    assert sol.value == pytest.approx(min(J))


def test_g2_gap_examples():
    spec = g2()
    half = MultiStrategy((StationaryStrategy((np.array([0.5, 0.5]),)),))
    rep = nash_gap(spec, half)
    assert abs(rep.gaps[0]) <= 1e-12 and rep.violations[0] == 0
    b = MultiStrategy((StationaryStrategy((np.array([0.0, 1.0]),)),))
    rep = nash_gap(spec, b)
    assert rep.gaps[0] == pytest.approx(0.5, abs=1e-12) and rep.violations[0] == 0


def test_single_player_converges_in_one_sweep():
    rng = np.random.default_rng(2)
    for _ in range(10):
        spec = random_spec(rng, max_states=4, n_constraints=1, kappa_range=(0.6, 0.9))
        rep = solve_nash(spec, NashOptions(restarts=0))
        if any(rep.br_infeasible):
            continue
        assert rep.converged and rep.sweeps <= 1 and rep.max_gap <= 1e-9


def test_matching_pennies_mixed_equilibrium():
    spec = g3([[0, 1], [1, 0]], [[1, 0], [0, 1]])
    rep = solve_nash(spec, NashOptions(eps=1e-8))
    assert rep.converged
    np.testing.assert_allclose(rep.profile[0][0], [0.5, 0.5], atol=1e-6)
    np.testing.assert_allclose(rep.profile[1][0], [0.5, 0.5], atol=1e-6)


def test_certificate_soundness_against_highs():
    rng = np.random.default_rng(21)
    for _ in range(5):
        spec = random_slater_game(rng)
        rep = solve_nash(spec, NashOptions(eps=1e-6, max_sweeps=200, restarts=0))
        J = evaluate_exact(spec, rep.profile).J
        for i in range(2):
            ref = linprog_cop(spec, i, rep.profile)
            assert abs((J[i, 0] - ref.fun) - rep.gaps[i]) <= 1e-8
        fresh = nash_gap(spec, rep.profile)
        np.testing.assert_allclose(fresh.gaps, rep.gaps, atol=1e-8)
        assert fresh.converged == rep.converged


def test_gap_nonnegative_when_feasible():
    rng = np.random.default_rng(4)
    for _ in range(30):
        spec = random_slater_game(rng)
        rep = nash_gap(spec, MultiStrategy.dirichlet(spec, rng))
        for g, v in zip(rep.gaps, rep.violations):
            if v == 0:
                assert g >= -1e-8


def test_equilibrium_is_a_fixed_point():
    rng = np.random.default_rng(5)
    spec = random_slater_game(rng)
    rep = solve_nash(spec, NashOptions(eps=1e-9, restarts=0))
    again = solve_nash(spec, NashOptions(eps=1e-6, max_sweeps=1, restarts=0), init=rep.profile)
    assert again.max_gap <= max(rep.max_gap, 1e-8)


def test_working_measures_stay_balanced(caplog):
    rng = np.random.default_rng(6)
    with caplog.at_level(logging.WARNING, logger="csg.nash"):
        for _ in range(5):
            solve_nash(random_slater_game(rng), NashOptions(max_sweeps=30, restarts=0, polish=False))
    assert "flow residual" not in caplog.text


def test_jacobi_mode_and_determinism():
    rng = np.random.default_rng(7)
    spec = random_slater_game(rng)
    opts = NashOptions(mode="jacobi", eps=1e-5, max_sweeps=100, restarts=1, seed=3)
    a, b = solve_nash(spec, opts), solve_nash(spec, opts)
    assert a.trajectory == b.trajectory
    for s, t in zip(a.profile, b.profile):
        for x in range(spec.n_states):
            np.testing.assert_array_equal(s[x], t[x])


def test_threads_do_not_change_result():
    rng = np.random.default_rng(8)
    spec = random_slater_game(rng)
    a = solve_nash(spec, NashOptions(max_sweeps=40, restarts=0))
    b = solve_nash(spec, NashOptions(max_sweeps=40, restarts=0, threads=2))
    assert a.trajectory == b.trajectory


def test_infeasible_best_responses_reported():
    spec = g2(kappa=-1.0)
    rep = solve_nash(spec)
    assert rep.br_infeasible == (True,) and not rep.converged
    assert rep.max_gap == float("inf")
    assert rep.to_dict(spec)["gaps"] == [None]


def test_trajectory_and_honest_flag():
    rng = np.random.default_rng(9)
    spec = random_slater_game(rng, max_states=4)
    rep = solve_nash(spec, NashOptions(eps=1e-14, max_sweeps=3, restarts=0, polish=False))
    assert len(rep.trajectory) == rep.sweeps + 1
    assert rep.converged == (rep.max_gap <= 1e-14)
