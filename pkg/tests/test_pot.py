import warnings

import numpy as np
import pytest
from scipy.optimize import linprog

from fpgw.errors import ConstraintError, ShapeError, SolverError
from fpgw.pot import (MassConstrained, Penalty, PotProblem, linear_objective,
                      sinkhorn_mass_constrained, sinkhorn_penalty, solve_exact)


def _lp_reference(cost, p, q, rho=None):
    """Optimal value of the linear partial-OT problem with scipy's HiGHS."""
    n, m = cost.shape
    A_ub = np.zeros((n + m, n * m))
    for i in range(n):
        A_ub[i, i * m:(i + 1) * m] = 1.0
    for j in range(m):
        A_ub[n + j, j::m] = 1.0
    b_ub = np.concatenate([p, q])
    kwargs = {}
    if rho is not None:
        kwargs = {'A_eq': np.ones((1, n * m)), 'b_eq': [rho]}
    res = linprog(cost.ravel(), A_ub=A_ub, b_ub=b_ub, bounds=(0, None), method='highs', **kwargs)
    assert res.success
    return res.fun


def _random_problem(rng, n, m):
    cost = rng.uniform(0.0, 1.0, size=(n, m))
    p = rng.uniform(0.1, 1.0, size=n)
    q = rng.uniform(0.1, 1.0, size=m)
    return cost, p / p.sum(), q / q.sum() * rng.uniform(0.5, 1.5)


@pytest.mark.parametrize('seed', range(10))
def test_penalty_exact_solution_is_optimal(seed):
    rng = np.random.default_rng(seed)
    cost, p, q = _random_problem(rng, 4, 5)
    coeff = 0.4
    prob = PotProblem(cost, p, q, Penalty(coeff))
    plan = solve_exact(prob)
    assert plan.feasible_for(p, q)
    expected = _lp_reference(cost - 2.0 * coeff, p, q)
    assert linear_objective(prob, plan) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize('seed', range(10))
def test_mass_constrained_exact_solution_is_optimal(seed):
    rng = np.random.default_rng(seed)
    cost, p, q = _random_problem(rng, 5, 3)
    rho = 0.6 * min(p.sum(), q.sum())
    prob = PotProblem(cost, p, q, MassConstrained(rho))
    plan = solve_exact(prob)
    assert plan.feasible_for(p, q)
    assert plan.total_mass == pytest.approx(rho, abs=1e-9)
    assert linear_objective(prob, plan) == pytest.approx(_lp_reference(cost, p, q, rho), abs=1e-9)


def test_positive_costs_without_penalty_transport_nothing():
    prob = PotProblem(np.ones((2, 2)), [0.5, 0.5], [0.5, 0.5], Penalty(0.0))
    assert solve_exact(prob).total_mass == pytest.approx(0.0)


def test_degenerate_problems():
    assert solve_exact(PotProblem(np.ones((2, 3)), [0.5, 0.5], np.zeros(3))).total_mass == 0.0
    zero_rho = PotProblem(np.ones((2, 2)), [0.5, 0.5], [0.5, 0.5], MassConstrained(0.0))
    assert solve_exact(zero_rho).total_mass == 0.0
    with pytest.raises(ConstraintError):
        PotProblem(np.ones((2, 2)), [0.5, 0.5], [0.2, 0.2], MassConstrained(0.5))
    with pytest.raises(ShapeError):
        PotProblem(np.ones((2, 3)), [0.5, 0.5], [0.5, 0.5])
    with pytest.raises(SolverError):
        solve_exact(PotProblem(np.array([[np.inf]]), [1.0], [1.0]))


@pytest.mark.parametrize('seed', range(50))
def test_sinkhorn_penalty_feasible_and_close_to_exact(seed):
    rng = np.random.default_rng(seed)
    n, m = 4, 4
    cost, p, q = _random_problem(rng, n, m)
    lam, eps = 0.5, 0.02
    prob = PotProblem(cost, p, q, Penalty(lam))
    with warnings.catch_warnings():
        warnings.simplefilter('ignore')
        plan = sinkhorn_penalty(prob, lam=lam, epsilon=eps, max_iter=5000)
    assert np.all(plan.row_sums <= p + 1e-6)
    assert np.all(plan.col_sums <= q + 1e-6)
    exact = linear_objective(prob, solve_exact(prob))
    assert linear_objective(prob, plan) <= exact + 5 * eps * n * m


@pytest.mark.parametrize('seed', range(50))
def test_sinkhorn_mass_constrained_feasible_and_close_to_exact(seed):
    rng = np.random.default_rng(seed)
    n, m = 3, 4
    cost, p, q = _random_problem(rng, n, m)
    rho = 0.5 * min(p.sum(), q.sum())
    eps = 0.02
    prob = PotProblem(cost, p, q, MassConstrained(rho))
    with warnings.catch_warnings():
        warnings.simplefilter('ignore')
        plan = sinkhorn_mass_constrained(prob, epsilon=eps, max_iter=5000)
    assert plan.total_mass == pytest.approx(rho, abs=1e-6)
    assert np.all(plan.row_sums <= p + 1e-6)
    assert np.all(plan.col_sums <= q + 1e-6)
    exact = linear_objective(prob, solve_exact(prob))
    assert linear_objective(prob, plan) <= exact + 5 * eps * n * m


def test_sinkhorn_rejects_bad_epsilon():
    prob = PotProblem(np.ones((1, 1)), [1.0], [1.0], MassConstrained(0.5))
    with pytest.raises(ConstraintError):
        sinkhorn_penalty(prob, epsilon=0.0)
    with pytest.raises(ConstraintError):
        sinkhorn_mass_constrained(prob, epsilon=-1.0)
    with pytest.raises(ConstraintError):
        sinkhorn_mass_constrained(PotProblem(np.ones((1, 1)), [1.0], [1.0]))


def _penalized_value(prob):
    """min over Γ≤ of ⟨cost, γ⟩ + c(|p| - |γ| + |q| - |γ|)."""
    c = prob.mode.linear_mass_coeff
    return linear_objective(prob, solve_exact(prob)) + c * (prob.p.sum() + prob.q.sum())


@pytest.mark.parametrize('seed', range(10))
def test_penalized_value_is_monotone_in_the_penalty(seed):
    rng = np.random.default_rng(100 + seed)
    cost, p, q = _random_problem(rng, 4, 3)
    values = [_penalized_value(PotProblem(cost, p, q, Penalty(c)))
              for c in np.linspace(0.0, 1.0, 11)]
    assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))


@pytest.mark.parametrize('seed', range(10))
def test_penalty_above_half_the_largest_cost_moves_full_mass(seed):
    rng = np.random.default_rng(200 + seed)
    cost, p, q = _random_problem(rng, 3, 5)
    prob = PotProblem(cost, p, q, Penalty(0.5 * cost.max() + 0.05))
    plan = solve_exact(prob)
    assert plan.total_mass == pytest.approx(min(p.sum(), q.sum()), abs=1e-8)


def test_sinkhorn_mass_constrained_never_returns_undominated_plan():
    # one projection cycle ends on the mass rescale, which overfills row 0
    prob = PotProblem(np.array([[0.0, 5.0], [5.0, 0.0]]), [0.2, 0.8], [0.8, 0.2],
                      MassConstrained(1.0))
    with pytest.warns(UserWarning), pytest.raises(SolverError):
        sinkhorn_mass_constrained(prob, epsilon=1.0, max_iter=1)
