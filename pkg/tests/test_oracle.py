import numpy as np
import pytest

from conftest import line_cost, line_space
from fpgw.errors import ConstraintError, OracleBudgetError
from fpgw.graphs import Graph
from fpgw.model import FusedConfig, MmSpace, fpgw_objective
from fpgw.oracle import (GridSpec, certified_gap, count_grid_plans, enumerate_grid_plans,
                         equivalence_suite, finite_diff_gradient, grid_global_min,
                         metric_distance, metric_property_suite, saturating_lambda,
                         wl_hamming_reference)


@pytest.mark.parametrize('p, q, rho', [
    ([2], [3], None),
    ([2, 1], [1, 2], None),
    ([2, 1], [1, 2], 2),
    ([1, 1, 2], [2, 1], 3),
])
def test_enumeration_matches_count(p, q, rho):
    plans = enumerate_grid_plans(p, q, rho)
    assert len(plans) == count_grid_plans(p, q, rho)
    assert np.all(plans.sum(axis=2) <= np.array(p))
    assert np.all(plans.sum(axis=1) <= np.array(q))
    if rho is not None:
        assert np.all(plans.sum(axis=(1, 2)) == rho)


def test_enumeration_budget():
    with pytest.raises(OracleBudgetError):
        enumerate_grid_plans([1] * 4, [1, 1])
    with pytest.raises(OracleBudgetError):
        enumerate_grid_plans([16, 16], [16, 16], max_cells=10)


def test_grid_minimum_on_identical_single_points():
    space = MmSpace(np.zeros((1, 1)), np.ones(1), features=[[0.0]])
    C = np.zeros((1, 1))
    cfg = FusedConfig(lam=1.0, rho=1.0)
    result = grid_global_min(space, space, C, cfg, GridSpec(0.25))
    assert result.count == 5
    assert result.plan.total_mass == pytest.approx(1.0)
    assert result.objective == pytest.approx(2.0 * cfg.lam * cfg.omega1)
    fixed = grid_global_min(space, space, C, cfg, GridSpec(0.25), mode='fmpgw')
    assert fixed.objective == pytest.approx(0.0) and fixed.count == 1


def test_grid_minimum_is_the_smallest_enumerated_value():
    rng = np.random.default_rng(3)
    source = line_space(rng, 2, masses=[0.5, 0.25])
    target = line_space(rng, 2, masses=[0.25, 0.75])
    C = line_cost(source, target)
    cfg = FusedConfig.from_omega2(0.4, lam=0.7)
    grid = GridSpec(0.125)
    result = grid_global_min(source, target, C, cfg, grid)
    values = [fpgw_objective(source, target, C, plan * grid.step, cfg)
              for plan in enumerate_grid_plans([4, 2], [2, 6])]
    assert result.objective == pytest.approx(min(values), abs=1e-12)
    assert result.certified_gap == pytest.approx(certified_gap(source, target, C, cfg, 0.125))
    assert result.certified_gap > 0


def test_grid_rejects_off_grid_masses_and_bad_modes():
    space = MmSpace(np.zeros((1, 1)), np.array([0.3]))
    with pytest.raises(ConstraintError):
        grid_global_min(space, space, np.zeros((1, 1)), FusedConfig(), GridSpec(0.25))
    with pytest.raises(ValueError):
        grid_global_min(space, space, np.zeros((1, 1)), FusedConfig(), GridSpec(0.1), mode='gw')
    with pytest.raises(ConstraintError):
        GridSpec(0.0)


def test_grid_spec_for_masses():
    grid = GridSpec.for_masses([0.5, 0.0], [0.25])
    assert grid.step == pytest.approx(0.25 / 16.0)


def test_grid_spec_reads_the_oracle_defaults(monkeypatch):
    monkeypatch.setattr('fpgw.oracle.load_defaults',
                        lambda: {'oracle': {'step_fraction': 0.5, 'max_cells': 7}})
    grid = GridSpec.for_masses([0.5], [0.25])
    assert grid.step == pytest.approx(0.125)
    assert grid.max_cells == 7
    assert GridSpec.for_masses([0.5], [0.25], fraction=0.25).step == pytest.approx(0.0625)


def test_finite_difference_gradient_of_a_quadratic():
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    grad = finite_diff_gradient(lambda x: float(np.sum(A * x * x)), np.ones((2, 2)))
    np.testing.assert_allclose(grad, 2.0 * A, atol=1e-6)
    for h in (1e-9, 1e-2):
        with pytest.raises(ConstraintError):
            finite_diff_gradient(lambda x: 0.0, np.ones((1, 1)), h=h)


def test_wl_hamming_reference_on_identical_graphs():
    g = Graph(3, [(0, 1), (1, 2)], ['a', 'b', 'a'])
    cost = wl_hamming_reference(g, g, 2)
    np.testing.assert_array_equal(np.diag(cost), np.zeros(3))
    # both end nodes share every refined label
    assert cost[0, 2] == 0.0 and cost[0, 1] == 2.0


def test_metric_distance_of_a_space_with_itself():
    rng = np.random.default_rng(8)
    space = line_space(rng, 2, masses=[0.5, 0.25])
    C = line_cost(space, space) ** 2
    value, gap = metric_distance(space, space, C, FusedConfig.from_omega2(0.5, lam=0.5),
                                 GridSpec(0.125))
    assert -gap <= value <= gap
    with pytest.raises(ConstraintError):
        metric_distance(space, space, C, FusedConfig.from_omega2(0.0), GridSpec(0.125))


def test_saturating_lambda_fills_the_plan():
    rng = np.random.default_rng(2)
    source = line_space(rng, 2, masses=[0.5, 0.5])
    target = line_space(rng, 2, masses=[0.25, 0.25])
    C = line_cost(source, target)
    cfg = FusedConfig.from_omega2(0.5)
    lam = saturating_lambda(source, target, C, cfg, 0.125) + 1.0
    result = grid_global_min(source, target, C, cfg.replace(lam=lam), GridSpec(0.125))
    assert result.plan.total_mass == pytest.approx(0.5)


def test_metric_suite_smoke():
    report = metric_property_suite(seed=0, trials=5, q=2, step=0.125)
    assert report.ok, report.violations
    assert report.checks == 20
    with pytest.raises(ConstraintError):
        metric_property_suite(q=3)


@pytest.mark.slow
@pytest.mark.parametrize('q', [1, 2])
def test_metric_properties(q):
    report = metric_property_suite(seed=0, trials=100, q=q)
    assert report.ok, report.violations[:5]


@pytest.mark.slow
def test_fixed_mass_equivalence_and_saturation():
    report = equivalence_suite(seed=0, trials=20)
    assert report.ok, report.violations[:5]
