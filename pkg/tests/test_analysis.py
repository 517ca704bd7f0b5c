import copy
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _builders import random_metric, tilted_logsumexp
from cubicreg import analysis
from cubicreg.analysis import (PairSampler, adaptive_factor, condition_number, estimate_constants,
                               fixed_nu_factor, gamma_upper_bound_check, interpolate_bounds, kappa,
                               increase_bounds, oracle_calls_bound, quadratic_iterations,
                               theoretical_budgets, verify_trace)
from cubicreg.normed_space import ContractViolation, MetricOperator
from cubicreg.oracles import make_logsumexp, make_powered_norm, make_quadratic, with_ball
from cubicreg.solvers import SolverConfig, adaptive_cubic_newton

seeds = st.integers(0, 2**32 - 1)


# -- closed forms ---------------------------------------------------------------

@given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6))
def test_kappa_at_one_is_holder_constant(sigma, H):
    assert kappa(1.0, sigma, H) == pytest.approx(H, rel=1e-14)


def test_kappa_general_degree():
    nu, s, H = 0.5, 0.7, 3.0
    a, b = 1.5, 2.5
    expected = (H ** (2 / a) / s ** ((1 - nu) / (a * b)) * 6 * 8.5 ** ((1 - nu) / a)
                / (a * b) ** (2 / a) * (a / b) ** ((1 - nu) / b))
    assert kappa(nu, s, H) == pytest.approx(expected, rel=1e-14)
    assert kappa(0.5, 0.0, 1.0) == math.inf


def test_condition_number_limits():
    assert condition_number(1.0, math.inf) == 0.0
    assert condition_number(1.0, 0.0) == math.inf
    assert condition_number(0.5, 2.0) == 0.25


def test_powered_norm_condition_number():
    for p, nu in ((3.0, 1.0), (2.5, 0.5)):
        P = make_powered_norm(p, np.zeros(2), MetricOperator.identity(2))
        gamma = condition_number(P.known.sigma_at(p), P.known.holder_at(nu))
        assert gamma >= 1.0 / (2.0 * (1.0 + nu)) - 1e-15
        assert gamma <= 1.0 / (1.0 + nu)


def test_rate_factors():
    assert adaptive_factor(0.25, 1.0) == pytest.approx(1.0 - 1.0 / (8.0 * math.sqrt(2.0)),
                                                       rel=1e-15)
    assert fixed_nu_factor(0.25, 1.0) == pytest.approx(1.0 - 2.0 / 3.0 / math.sqrt(12.0),
                                                       rel=1e-15)
    assert adaptive_factor(1e6, 1.0) == 0.5
    assert adaptive_factor(math.inf, 0.5) == 0.5
    assert fixed_nu_factor(math.inf, 1.0) == pytest.approx(1.0 / 3.0)


@given(st.floats(0.0, 1.0), st.floats(1e-3, 1e3))
def test_factors_decrease_with_gamma(nu, gamma):
    assert adaptive_factor(2 * gamma, nu) <= adaptive_factor(gamma, nu)
    assert fixed_nu_factor(2 * gamma, nu) <= fixed_nu_factor(gamma, nu)
    assert 0.0 < adaptive_factor(gamma, nu) < 1.0


def test_increase_bounds_at_one():
    assert increase_bounds(1.0, 3.0) == pytest.approx((3.0, 3.0))


def test_quadratic_iterations():
    assert quadratic_iterations(1.0, 1.0, 1e-6) == 19
    assert quadratic_iterations(1.0, 1.0, 1e-8) == 25


def test_budgets():
    b = theoretical_budgets(0.5, 2.0, 10.0, 1e-8, 1.0, 2.0)
    assert b.kappa == 2.0 and b.gamma == 0.25
    assert b.N_bound == pytest.approx(2 * b.K_adaptive + math.log2(b.kappa / 2.0))
    assert b.K_adaptive == pytest.approx(8 * math.sqrt(2) * math.log(1e9))
    assert b.H0_max == 2.0
    big = theoretical_budgets(100.0, 1.0, 10.0, 1e-3, 1.0, 1.0)
    assert big.K_adaptive == pytest.approx(math.log(1e4))
    q = theoretical_budgets(1.0, 0.0, 1.0, 1e-6, 1.0, 1.0, distance=1.0)
    assert q.K_quadratic == 19 and q.flags
    with pytest.raises(ContractViolation):
        theoretical_budgets(1.0, 1.0, 1e-9, 1e-6, 1.0, 1.0)


def test_oracle_calls_bound_degree_zero():
    assert oracle_calls_bound(10, 4.0, 1e-4, 0.0, 1.0) == pytest.approx(
        20 + math.log2(4.0 / 1e-2))


def test_interpolation():
    assert interpolate_bounds([0.0, 1.0], [3.0, 3.0], 0.3, "holder") == pytest.approx(3.0)
    assert interpolate_bounds([2.0, 4.0], [1.0, 0.25], 3.0, "sigma") == pytest.approx(0.5)
    for nu in (0.2, 0.5, 0.9):
        assert interpolate_bounds([1.0, 0.0], [2.0, 1.0], nu, "holder") == pytest.approx(2 ** nu)
    with pytest.raises(ContractViolation):
        interpolate_bounds([0.0, 1.0], [0.0, 1.0], 0.5, "holder")
    with pytest.raises(ContractViolation):
        interpolate_bounds([0.0, 1.0], [1.0, 1.0], 0.5, "other")


# -- sampling estimates -------------------------------------------------------------

def test_quadratic_estimates():
    P = make_quadratic(np.diag([3.0, 1.0]), None, MetricOperator.identity(2))
    est = estimate_constants(P, sampler=PairSampler(n_pairs=200))
    assert all(v == 0.0 for v in est.holder_hat.values())
    assert not est.gamma_free_defined and est.to_dict()["gamma_free_hat"] == "inf"
    assert est.sigma_hat[2.0] >= 1.0 - 1e-9
    assert gamma_upper_bound_check(P, PairSampler(n_pairs=50), 0.0)["status"] == "skipped"


def test_powered_norm_in_ball_estimate():
    m = MetricOperator.identity(3)
    P = with_ball(make_powered_norm(3.0, np.zeros(3), m), np.zeros(3), 2.0)
    est = estimate_constants(P, degrees=(3.0,), nus=(1.0,), sampler=PairSampler(n_pairs=500))
    assert est.sigma_hat[3.0] >= 0.5
    assert est.holder_hat[1.0] <= 2.0 + 1e-9
    assert est.sampler["domain"]["type"] == "ball"


def test_holder_half_grows_with_box():
    P = make_powered_norm(3.0, np.zeros(3), MetricOperator.identity(3))
    small, large = (estimate_constants(P, degrees=(3.0,), nus=(0.5,),
                                       sampler=PairSampler(n_pairs=300, box=b)).holder_hat[0.5]
                    for b in (1.0, 100.0))
    assert large > 5 * small


def test_logsumexp_estimates_and_gamma_check():
    P = make_logsumexp(np.random.default_rng(0).standard_normal((12, 4)))
    sampler = PairSampler(n_pairs=400, box=1.0)
    est = estimate_constants(P, degrees=(2.0, 3.0), nus=(0.0, 1.0), sampler=sampler)
    assert est.holder_hat[0.0] <= 1.0 + 1e-9 and est.holder_hat[1.0] <= 2.0 + 1e-9
    gamma = est.sigma_hat[3.0] / est.holder_hat[1.0]
    res = gamma_upper_bound_check(P, sampler, 1.0, gamma=gamma)
    assert res["status"] == "ok" and res["sampled_bound"] >= gamma


def test_gamma_upper_bound_for_cubes():
    P = make_powered_norm(3.0, np.zeros(3), MetricOperator.identity(3))
    res = gamma_upper_bound_check(P, PairSampler(n_pairs=200), 1.0)
    assert res["status"] == "ok" and res["gamma"] == 0.25 and res["unbounded_domain_bound"] == 0.5


@settings(max_examples=15)
@given(seeds, st.sampled_from([2.5, 3.0]))
def test_estimates_are_one_sided(seed, p):
    rng = np.random.default_rng(seed)
    P = make_powered_norm(p, rng.standard_normal(3), random_metric(rng, 3))
    nu = p - 2.0
    est = estimate_constants(P, degrees=(p,), nus=(nu,),
                             sampler=PairSampler(seed=seed, n_pairs=100, box=3.0))
    assert est.sigma_hat[p] >= P.known.sigma_at(p) - 1e-9
    assert est.holder_hat[nu] <= P.known.holder_at(nu) + 1e-9


def test_sampler_is_deterministic():
    P = make_powered_norm(3.0, np.zeros(2), MetricOperator.identity(2))
    a = PairSampler(seed=4, n_pairs=20).pairs(P)
    b = PairSampler(seed=4, n_pairs=20).pairs(P)
    assert all(np.array_equal(x1, x2) and np.array_equal(y1, y2)
               for (x1, y1), (x2, y2) in zip(a, b))


# -- trace verification ---------------------------------------------------------------

@pytest.fixture(scope="module")
def cube_trace():
    rng = np.random.default_rng(11)
    P = make_powered_norm(3.0, rng.standard_normal(6), MetricOperator.identity(6))
    u = rng.standard_normal(6)
    x0 = P.known.minimizer + 5 * u / np.linalg.norm(u)
    return adaptive_cubic_newton(P, SolverConfig(H0=2.0, epsilon=1e-8), x0=x0)


@pytest.fixture(scope="module")
def rejecting_trace():
    P = tilted_logsumexp(seed=0)
    rng = np.random.default_rng(1)
    x0 = P.known.minimizer + rng.standard_normal(P.dimension)
    tr = adaptive_cubic_newton(P, SolverConfig(H0=1e-3, epsilon=1e-9), x0=x0)
    assert any(r.i_k > 0 for r in tr.records[:-1])
    return tr


def test_cube_trace_verifies(cube_trace):
    rep = verify_trace(cube_trace, 0.5, 2.0, 1.0)
    assert rep.n_violations == 0
    assert rep.check("step_progress").min_slack >= 0.0
    assert rep.check("linear_rate").status == "ok"


def test_doubled_constant_still_verifies(cube_trace):
    assert verify_trace(cube_trace, 0.5, 4.0, 1.0).n_violations == 0


def test_increase_checks_with_increases(rejecting_trace):
    rep = verify_trace(rejecting_trace, 0.1, 1.0, 0.0)
    for name in ("increase_radius", "increase_subgradient", "increase_gap"):
        assert rep.check(name).status == "ok" and rep.check(name).steps_checked > 0
    assert rep.n_violations == 0


def test_quadratic_trace_increase_checks_vacuous():
    P = make_quadratic(np.diag([5.0, 1.0]), np.ones(2), MetricOperator.identity(2))
    tr = adaptive_cubic_newton(P, SolverConfig(epsilon=1e-10))
    rep = verify_trace(tr, P.known.sigma_at(2.0), 0.0, 0.0)
    assert rep.n_violations == 0
    assert rep.check("increase_radius").status == "vacuous"


def test_corrupted_trace_is_caught(cube_trace):
    bad = copy.deepcopy(cube_trace)
    j = 3
    bad.records[j].F_k += 1.0
    bad.records[j].gap += 1.0
    rep = verify_trace(bad, 0.5, 2.0, 1.0)
    steps = {v["step"] for c in rep.checks for v in c.violations}
    assert j in steps


def test_verify_requires_known_optimum():
    P = make_powered_norm(3.0, np.zeros(2), MetricOperator.identity(2))
    cfg = SolverConfig(stop_mode="subgradient_bound", sigma=0.5, p=3.0)
    tr = adaptive_cubic_newton(P, cfg)
    with pytest.raises(ContractViolation):
        verify_trace(tr, 0.5, 2.0, 1.0)


def test_report_round_trip(cube_trace):
    rep = verify_trace(cube_trace, 0.5, 2.0, 1.0)
    back = analysis.BoundReport.from_json(rep.to_json())
    assert back.to_json() == rep.to_json()
