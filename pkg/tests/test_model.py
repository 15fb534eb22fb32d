import dataclasses

import numpy as np
import pytest
from hypothesis import given, strategies as st

from csg.errors import InvalidPlayerError
from csg.instances import g1, g2, g3, random_spec
from csg.model import (MultiStrategy, StationaryStrategy, describe_violation, joint_distribution,
                       reduce, validate_spec)
from csg.truncation import clip_costs

seeds = st.integers(0, 2**32 - 1)


def test_g1_is_valid():
    assert validate_spec(g1()) == []


def test_non_stochastic_row_reported_at_its_index():
    spec = g1()
    P = [t.copy() for t in spec.transition]
    P[0][0, 0] = 0.5
    bad = validate_spec(dataclasses.replace(spec, transition=P))
    assert [(v.invariant, v.index) for v in bad] == [("row not stochastic", (0, 0))]
    assert describe_violation(spec, bad[0])["index"] == {"x": "s0", "j": 0}


def test_alpha_on_boundary_rejected():
    bad = validate_spec(dataclasses.replace(g1(), alpha=1.0))
    assert [v.invariant for v in bad] == ["alpha out of range"]


def test_violations_sorted_and_deterministic():
    spec = g1()
    P = [t.copy() for t in spec.transition]
    P[1][0, 0] = -0.5
    broken = dataclasses.replace(spec, transition=P, alpha=0.0, eta=[0.7, 0.7])
    a, b = validate_spec(broken), validate_spec(broken)
    assert a == b
    assert [v.invariant for v in a] == sorted(v.invariant for v in a)
    assert {"alpha out of range", "negative transition", "row not stochastic",
            "eta not normalized"} <= {v.invariant for v in a}


def test_empty_action_set_and_profile_mismatch():
    spec = g2()
    broken = dataclasses.replace(spec, actions=[[[]]])
    kinds = {v.invariant for v in validate_spec(broken)}
    assert "empty action set" in kinds and "profile count mismatch" in kinds


def test_arrays_are_read_only():
    spec = g2()
    with pytest.raises(ValueError):
        spec.transition[0][0, 0] = 0.3


def test_reduce_single_player_is_identity():
    spec = g2()
    red = reduce(spec, 0, [])
    np.testing.assert_array_equal(red.costs, spec.costs[0][0])
    np.testing.assert_array_equal(red.trans, spec.transition[0])


def test_reduce_mixed_opponent_averages_rows():
    C1 = np.array([[1.0, 3.0], [5.0, 9.0]])
    spec = g3(C1, -C1)
    half = StationaryStrategy((np.array([0.5, 0.5]),))
    red = reduce(spec, 0, [half])
    np.testing.assert_allclose(red.costs[0], C1.mean(axis=1), atol=1e-15)


def test_reduce_pure_opponent_selects_column():
    C1 = np.array([[1.0, 3.0], [5.0, 9.0]])
    spec = g3(C1, -C1)
    pure_b = StationaryStrategy.pure(spec, 1, {"s0": "b"})
    red = reduce(spec, 0, [pure_b])
    np.testing.assert_array_equal(red.costs[0], C1[:, 1])
    red2 = reduce(spec, 1, MultiStrategy((pure_b, pure_b)))
    np.testing.assert_array_equal(red2.costs[0], (-C1)[1, :])


def test_reduce_bad_player_raises():
    with pytest.raises(InvalidPlayerError):
        reduce(g2(), 1, [])


def test_profile_index_is_row_major_last_player_fastest():
    spec = random_spec(np.random.default_rng(1), n_players=3, max_states=1, min_actions=2, max_actions=3)
    shape = spec.profile_shape(0)
    j = 0
    for a in np.ndindex(*shape):
        assert spec.profile_index(0, a) == j
        j += 1


def test_joint_distribution_outer_product():
    d = joint_distribution([np.array([0.2, 0.8]), np.array([0.5, 0.3, 0.2])])
    np.testing.assert_allclose(d, np.outer([0.2, 0.8], [0.5, 0.3, 0.2]).ravel())


@given(seeds, st.floats(0, 1))
def test_reduce_is_linear_in_opponent_mixture(seed, lam):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, n_players=2, max_states=3, max_actions=3, n_constraints=1)
    psi, psi2 = (StationaryStrategy.dirichlet(spec, 1, rng) for _ in range(2))
    blend = StationaryStrategy(tuple(lam * a + (1 - lam) * b for a, b in zip(psi.probs, psi2.probs)))
    r, r1, r2 = reduce(spec, 0, [blend]), reduce(spec, 0, [psi]), reduce(spec, 0, [psi2])
    np.testing.assert_allclose(r.costs, lam * r1.costs + (1 - lam) * r2.costs, atol=1e-12)
    np.testing.assert_allclose(r.trans, lam * r1.trans + (1 - lam) * r2.trans, atol=1e-12)


@given(seeds)
def test_reduce_preserves_stochasticity_and_cost_range(seed):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, n_players=int(rng.integers(1, 4)), max_states=3, max_actions=3)
    phi = MultiStrategy.dirichlet(spec, rng)
    for i in range(spec.n_players):
        red = reduce(spec, i, phi)
        np.testing.assert_allclose(red.trans.sum(axis=1), 1.0, atol=1e-12)
        lo = np.concatenate([spec.costs[x][i].min(axis=1, keepdims=True).repeat(len(spec.actions[i][x]), 1)
                             for x in range(spec.n_states)], axis=1)
        hi = np.concatenate([spec.costs[x][i].max(axis=1, keepdims=True).repeat(len(spec.actions[i][x]), 1)
                             for x in range(spec.n_states)], axis=1)
        assert np.all(red.costs >= lo - 1e-12) and np.all(red.costs <= hi + 1e-12)


@given(seeds, st.integers(1, 30))
def test_reduce_of_clipped_game_stays_in_clip_range(seed, m):
    rng = np.random.default_rng(seed)
    base = random_spec(rng, n_players=2, max_states=3, max_actions=3)
    spec = dataclasses.replace(base, costs=[10 * (c - 0.5) for c in base.costs])
    clipped = clip_costs(spec, m)
    phi = MultiStrategy.dirichlet(spec, rng)
    for i in range(2):
        assert np.max(np.abs(reduce(clipped, i, phi).costs)) <= np.sqrt(m) + 1e-12
