import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from ccportfolio.approximation import ConvexProgram, QuadConstraint, build_nominal, build_program
from ccportfolio.errors import NonConvexRejected
from ccportfolio.solver import (
    INFEASIBLE,
    OPTIMAL,
    Solution,
    SolveOptions,
    estimate_multipliers,
    feasibility_phase,
    kkt_residual,
    solve,
)
from oracles import constraint, grid_oracle


def test_nominal_oracle(moments):
    sol = solve(build_nominal(moments, 3.3))
    best, bx = grid_oracle(constraint("nominal", 3.3))
    assert sol.status == OPTIMAL
    assert abs(sol.objective - best) <= 1e-3
    assert moments.mu0 @ sol.x == pytest.approx(3.3, abs=1e-9)
    np.testing.assert_allclose(sol.x, bx, atol=2e-3)


def test_piecewise_linear_first_row(model, moments):
    sol = solve(build_program("piecewise_linear", model, moments))
    assert sol.objective == pytest.approx(3.3142, abs=5e-3)
    np.testing.assert_allclose(sol.x, [0.0979, 0.4493, 0.4528], atol=2e-3)
    assert sol.active_constraints == ("piecewise-linear surrogate (zero branch dropped)",)


def test_bernstein_unreachable_target(model, moments):
    sol = solve(build_program("bernstein", model.with_target(tau=3.5), moments))
    assert sol.status == INFEASIBLE
    assert sol.violation == pytest.approx(3.5 - math.log(0.05) - 6.299, abs=1e-6)


def test_feasibility_phase_examples(model, moments):
    res = feasibility_phase(build_nominal(moments, moments.mu0.min()))
    assert res.feasible and np.all(res.x > 0) and res.violation < 0
    res = feasibility_phase(build_program("bernstein", model.with_target(tau=3.5), moments))
    assert not res.feasible
    assert res.violation == pytest.approx(0.19673, abs=1e-4)
    res = feasibility_phase(build_program("piecewise_quadratic", model, moments))
    assert res.feasible


def test_unconstrained_interior_optimum():
    # minimum of 0.5 x'Qx on the simplex with equal variances is the centroid
    p = ConvexProgram(np.eye(3), np.zeros((0, 3)), np.zeros(0))
    sol = solve(p)
    np.testing.assert_allclose(sol.x, np.full(3, 1 / 3), atol=1e-9)
    assert kkt_residual(p, sol.x, np.zeros(3)) <= 1e-10


def test_kkt_residual_detects_suboptimal_point(model, moments):
    p = build_program("piecewise_linear", model, moments)
    sol = solve(p)
    assert kkt_residual(p, sol.x, sol.multipliers) <= 1e-6
    lam = estimate_multipliers(p, sol.x)
    assert kkt_residual(p, sol.x, lam) <= 1e-6
    x = np.array([0.05, 0.05, 0.9])
    assert p.max_violation(x) == 0.0
    assert kkt_residual(p, x, estimate_multipliers(p, x)) > 1e-3


def test_single_asset():
    p = ConvexProgram(np.array([[4.0]]), np.array([[-1.0]]), np.array([-0.5]))
    sol = solve(p)
    assert sol.status == OPTIMAL and sol.objective == 2.0
    p = ConvexProgram(np.array([[4.0]]), np.array([[-1.0]]), np.array([-2.0]))
    assert solve(p).status == INFEASIBLE


def test_nonconvex_rejected():
    with pytest.raises(NonConvexRejected):
        solve(ConvexProgram(np.diag([1.0, -1.0]), np.zeros((0, 2)), np.zeros(0)))
    q = QuadConstraint(-np.eye(2), np.zeros(2), 0.0)
    with pytest.raises(NonConvexRejected):
        solve(ConvexProgram(np.eye(2), np.zeros((0, 2)), np.zeros(0), quad=(q,)))


def test_empty_interior_is_still_solved(moments):
    # the only feasible point is the best vertex
    sol = solve(build_nominal(moments, moments.mu0.max()))
    assert sol.status == OPTIMAL
    np.testing.assert_allclose(sol.x, [0, 0, 1], atol=1e-7)


def test_determinism(model, moments):
    p = build_program("piecewise_quadratic", model.with_target(tau=2.7), moments)
    a, b = solve(p), solve(p)
    assert a.status == b.status
    np.testing.assert_array_equal(a.x, b.x)


def test_iteration_cap_reports_max_iter(model, moments):
    sol = solve(build_program("piecewise_quadratic", model, moments), SolveOptions(max_iterations=3))
    assert sol.status == "max_iter"


def test_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(tol_kkt=0)
    with pytest.raises(ValueError):
        SolveOptions(barrier_mu_reduction=1.0)


def test_solution_json(model, moments):
    sol = solve(build_program("bernstein", model.with_target(tau=3.5), moments))
    doc = json.loads(sol.to_json())
    assert doc["status"] == "infeasible" and doc["objective"] is not None and doc["kkt_residual"] is None
    back = Solution.from_dict(doc)
    np.testing.assert_array_equal(back.x, sol.x)


@settings(max_examples=80, deadline=None)
@given(
    st.lists(st.floats(-3, 8), min_size=3, max_size=3),
    st.integers(0, 2**31 - 1),
    st.floats(0.0, 1.0),
)
def test_random_programs_match_oracle(mu, seed, frac):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(3, 3))
    Q = B @ B.T + 0.1 * np.eye(3)
    mu = np.array(mu)
    # rows whose spread sits below the absolute feasibility tolerance are vacuous
    assume(np.ptp(mu) == 0 or np.ptp(mu) > 1e-6)
    tau = mu.min() + frac * (mu.max() - mu.min())
    p = ConvexProgram(Q, -mu[None, :], np.array([-tau]))
    sol = solve(p)
    assert sol.status == OPTIMAL
    assert p.max_violation(sol.x) <= 1e-9
    assert kkt_residual(p, sol.x, sol.multipliers) <= 1e-6
    # scale so the oracle's absolute feasibility tolerance means the same thing
    spread = np.ptp(mu) or 1.0
    best, _ = grid_oracle(lambda X: (tau - X @ mu) / spread, sigma=Q)
    assert best - 1e-2 * max(1.0, best) <= sol.objective <= best + 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.05, 1.0))
def test_random_qcqp_match_oracle(seed, radius):
    # ball constraint ||x - centre||^2 <= r^2 around a random simplex point
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(3, 3))
    Q = B @ B.T + 0.1 * np.eye(3)
    centre = rng.dirichlet(np.ones(3))
    q = QuadConstraint(2 * np.eye(3), -2 * centre, centre @ centre - radius**2)
    p = ConvexProgram(Q, np.zeros((0, 3)), np.zeros(0), quad=(q,))
    sol = solve(p)
    assert sol.status == OPTIMAL
    assert p.max_violation(sol.x) <= 1e-9
    assert kkt_residual(p, sol.x, sol.multipliers) <= 1e-6
    best, _ = grid_oracle(lambda X: np.sum((X - centre) ** 2, axis=-1) - radius**2, sigma=Q)
    assert best - 1e-2 * max(1.0, best) <= sol.objective <= best + 1e-9
