import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from csg.assumptions import Example1Params, build_example1
from csg.errors import InvalidModelError
from csg.evaluation import evaluate_exact
from csg.instances import g2, random_spec
from csg.model import MultiStrategy, validate_spec
from csg.nash import NashOptions
from csg.truncation import (BOUNDARY, CountableModel, McsgParams, build_mcsg, clip_costs,
                            clip_value, model_from_spec, perturb_eta, relax_kappa, term_one_bound,
                            term_one_gap, truncation_sweep)


def test_perturb_eta_examples():
    np.testing.assert_allclose(perturb_eta([1.0, 0.0], [0.0, 1.0], 2), [0.5, 0.5])
    eta = np.array([0.2, 0.8])
    np.testing.assert_array_equal(perturb_eta(eta, [0.0, 0.0], 7), eta)
    with pytest.raises(ValueError):
        perturb_eta([1.0, 0.0], [0.5, 0.5], 3)


@given(st.integers(1, 10**6), st.integers(0, 2**32 - 1))
def test_perturb_eta_total_variation(m, seed):
    rng = np.random.default_rng(seed)
    eta = np.append(rng.dirichlet(np.ones(3)), [0.0, 0.0])
    tilde = np.append(np.zeros(3), rng.dirichlet(np.ones(2)))
    out = perturb_eta(eta, tilde, m)
    assert out.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(out > 0) or m == 1
    assert np.abs(out - eta).sum() <= 2 / m + 1e-15
    if m == 1000:
        assert 0.5 * np.abs(out - eta).sum() <= 1e-3


@pytest.mark.parametrize("c, m, want", [(5.0, 9, 3.0), (-4.0, 9, -3.0), (2.0, 9, 2.0)])
def test_clip_examples(c, m, want):
    assert clip_value(c, m) == want


@given(st.integers(1, 400), st.integers(1, 400), st.floats(-50, 50))
def test_clipping_is_monotone_in_m(m1, m2, c):
    lo, hi = sorted((m1, m2))
    assert abs(clip_value(c, lo)) <= abs(clip_value(c, hi))
    if math.sqrt(lo) >= abs(c):
        assert clip_value(c, lo) == c


@pytest.mark.parametrize("kappa, m, want", [(1.0, 4, 1.25), (1.0, 100, 1.09), (3.0, 4, 2.75)])
def test_relax_kappa_examples(kappa, m, want):
    assert relax_kappa(kappa, m) == pytest.approx(want, abs=1e-15)


@given(st.floats(-5, 5), st.integers(1, 10**6))
def test_relax_kappa_distance(kappa, m):
    assert abs(relax_kappa(kappa, m) - kappa) == pytest.approx(abs(1 / math.sqrt(m) - kappa / m), abs=1e-12)
    if m >= kappa ** 2:
        assert relax_kappa(kappa, m) >= kappa - 1e-15


def test_clip_costs_on_spec_and_model():
    spec = g2()
    import dataclasses
    big = dataclasses.replace(spec, costs=[5 * c for c in spec.costs])
    assert np.max(clip_costs(big, 4).costs[0]) == 2.0
    model = clip_costs(build_example1(Example1Params()), 4)
    assert model.cost("7*", ("s",))[0, 0] == 2.0


def test_finite_model_without_truncation():
    rng = np.random.default_rng(0)
    spec = random_spec(rng, n_players=2, max_states=3, n_constraints=1)
    mspec, diag = build_mcsg(model_from_spec(spec), McsgParams(m=4))
    assert diag.redirected_mass == 0 and not diag.boundary and mspec.n_states == spec.n_states
    for x in range(spec.n_states):
        np.testing.assert_array_equal(mspec.transition[x], spec.transition[x])
        np.testing.assert_array_equal(mspec.costs[x], clip_value(spec.costs[x], 4))
    np.testing.assert_allclose(mspec.eta, spec.eta)
    np.testing.assert_allclose(mspec.kappa, relax_kappa(spec.kappa, 4))


def test_example1_cutoff_by_tail_mass():
    spec, diag = build_mcsg(build_example1(Example1Params(g=0.5)), McsgParams(m=4, M=30))
    assert diag.eta_tail == pytest.approx(0.5 ** 30, rel=1e-12) and diag.eta_tail <= 1e-9
    assert spec.states[-1] == BOUNDARY and spec.n_states == 61
    assert validate_spec(spec) == []
    _, auto = build_mcsg(build_example1(Example1Params(g=0.5)), McsgParams(m=4))
    assert auto.M == 30


def drift_chain():
    return CountableModel(
        n_players=1, n_constraints=0, alpha=0.5, kappa=np.zeros((1, 0)),
        level=lambda k: [str(k)], actions=lambda x: [["go"]],
        transitions=lambda x, p: [(str(int(x) + 2), 1.0)],
        cost=lambda x, p: np.array([[1.0]]), eta=lambda x: 1.0 if x == "1" else 0.0,
        eta_tail=lambda N: 0.0 if N >= 1 else 1.0, name="drift",
    )


def test_escaping_chain_is_flagged():
    spec, diag = build_mcsg(drift_chain(), McsgParams(m=4, M=10))
    assert diag.redirected_mass == 1.0 and diag.escape_flagged
    assert diag.redirect_witness[0] in ("9", "10")
    assert validate_spec(spec) == []


def test_uncomputable_cutoff_rejected():
    model = CountableModel(
        n_players=1, n_constraints=0, alpha=0.5, kappa=np.zeros((1, 0)),
        level=lambda k: [str(k)], actions=lambda x: [["go"]],
        transitions=lambda x, p: [(x, 1.0)], cost=lambda x, p: np.zeros((1, 1)),
        eta=lambda x: 0.5 ** int(x))
    with pytest.raises(InvalidModelError):
        build_mcsg(model, McsgParams(m=4))


def test_mcsg_params_validation():
    with pytest.raises(ValueError):
        McsgParams(m=0)


def test_decoupled_indices():
    model = build_example1(Example1Params())
    spec, diag = build_mcsg(model, McsgParams(m=4, M=5, m_clip=100, m_kappa=16))
    np.testing.assert_allclose(spec.kappa, relax_kappa(0.75, 16))
    assert diag.sqrt_m == 10.0 and diag.eta_weight == 0.25


def test_term_one_bound_for_random_profiles():
    model = build_example1(Example1Params())
    rng = np.random.default_rng(1)
    for m in (1, 4, 16, 64, 256):
        spec, diag = build_mcsg(model, McsgParams(m=m))
        for _ in range(10):
            phi = MultiStrategy.dirichlet(spec, rng)
            assert term_one_gap(spec, diag, phi) <= term_one_bound(diag)
            # the general inequality sqrt(m) * ||eta_m - eta||_1
            J = evaluate_exact(spec, phi).J - evaluate_exact(spec, phi, eta=diag.eta_base).J
            assert np.max(np.abs(J)) <= diag.sqrt_m * np.abs(spec.eta - diag.eta_base).sum() + 1e-12


def test_finite_sweep_converges():
    # constant costs in [0, 1]: clipping is the identity
    spec = g2()
    recs = truncation_sweep(model_from_spec(spec), [4, 100], NashOptions(restarts=0))
    assert all(r.error is None and r.report.converged for r in recs)
    for r in recs:
        assert np.max(np.abs(r.spec.costs[0])) <= 1.0
        np.testing.assert_allclose(r.spec.kappa, relax_kappa(0.5, r.m))
    # kappa relaxes from 0.875 to 0.595; the optimal phi(b) = 1 - kappa_m
    b = [r.report.profile[0][0][1] for r in recs]
    np.testing.assert_allclose(b, [0.125, 0.405], atol=1e-9)


def test_sweep_requires_increasing_ms():
    with pytest.raises(ValueError):
        truncation_sweep(model_from_spec(g2()), [16, 4])


def test_failed_m_does_not_abort_sweep():
    base = model_from_spec(g2(kappa=-5.0))
    recs = truncation_sweep(base, [1, 4, 400], NashOptions(restarts=0))
    # kappa_1 = 1 is feasible; kappa_4 = -3.25 and kappa_400 = -4.9375 are not
    assert len(recs) == 3 and all(r.report is not None for r in recs)
    assert recs[0].report.converged
    assert [any(r.report.br_infeasible) for r in recs] == [False, True, True]


def test_exception_in_one_m_is_recorded():
    recs = truncation_sweep(model_from_spec(g2()), [1, 4], NashOptions(damping=lambda k: 2.0, restarts=0))
    assert [r.m for r in recs] == [1, 4]
    assert all(r.error and r.error.startswith("ValueError") for r in recs)
    assert all(r.to_dict()["error"] == r.error for r in recs)
