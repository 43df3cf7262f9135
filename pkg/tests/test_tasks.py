import numpy as np
import pytest

from conftest import line_cost, line_space
from fpgw.config import REL_OBJ_TOL
from fpgw.errors import ConstraintError
from fpgw.graphs import (UniformAll, UniformMin, UniformRegular, extract_bfs_subgraph, feature_cost,
                         inject_outliers, to_mm_space)
from fpgw.model import FusedConfig, TransportPlan
from fpgw.synthetic import make_cluster_corpus, make_sbm_graph
from fpgw.tasks import (SolverKind, adjusted_rand_index, assignment_from_plan, kmeans_fpgw,
                        match_accuracy, match_graphs, pairwise_distance_matrix,
                        reseed_empty_clusters, solve_pair)


def test_assignment_and_accuracy():
    plan = TransportPlan(np.array([[0.1, 0.3], [0.2, 0.2], [0.0, 0.0]]))
    assignment = assignment_from_plan(plan)
    assert assignment == [1, 0, None]
    assert match_accuracy(assignment, [1, 1, None]) == pytest.approx(0.5)
    assert match_accuracy(assignment, None) is None
    assert match_accuracy(assignment, [None, None, None]) is None


def test_solve_pair_dispatch(instance):
    source, target, C = instance
    cfg = FusedConfig(rho=0.5, epsilon=0.05)
    for kind in SolverKind:
        report = solve_pair(kind, source, target, C, cfg, max_iter=20)
        if kind.mass_constrained:
            assert report.plan.total_mass == pytest.approx(0.5, abs=1e-6)
    best = solve_pair('fw-fpgw', source, target, C, cfg, init='best')
    plain = solve_pair('fw-fpgw', source, target, C, cfg)
    slack = REL_OBJ_TOL * max(1.0, abs(best.objective), abs(plain.objective))
    assert best.objective <= plain.objective + slack
    with pytest.raises(ValueError):
        solve_pair('fw-fpgw', source, target, C, cfg, init='random')


def test_self_match_is_perfect():
    g = make_sbm_graph([6, 6], feature_centers=[[-1.0], [1.0]], feature_noise=0.2, seed=4)
    space = to_mm_space(g)
    C = feature_cost(g, g)
    result = match_graphs(space, space, C, FusedConfig(rho=1.0), solver=SolverKind.FW_FMPGW,
                          ground_truth=list(range(12)), init='features')
    assert result.accuracy == 1.0


def test_distance_matrix_symmetric_and_kernel():
    rng = np.random.default_rng(2)
    spaces = [line_space(rng, n) for n in (2, 3, 3)]
    cfg = FusedConfig(lam=0.5)
    D = pairwise_distance_matrix(spaces, cfg, max_workers=2)
    np.testing.assert_allclose(D, D.T)
    assert np.all(D >= 0)
    ones = pairwise_distance_matrix(spaces, cfg, sigma=0.0, max_workers=1)
    np.testing.assert_allclose(ones, np.ones((3, 3)))
    np.testing.assert_allclose(pairwise_distance_matrix(spaces, cfg, max_workers=3), D)
    with pytest.raises(ConstraintError):
        pairwise_distance_matrix(spaces, cfg, sigma=-1.0)


def test_distance_matrix_applies_the_feature_exponent():
    rng = np.random.default_rng(4)
    spaces = [line_space(rng, n) for n in (3, 4)]
    cfg = FusedConfig(lam=0.5, q_exponent=2.0)

    def squared(a, b):
        return line_cost(spaces[a], spaces[b]) ** 2

    np.testing.assert_allclose(pairwise_distance_matrix(spaces, cfg),
                               pairwise_distance_matrix(spaces, cfg, feature_costs=squared))


def test_adjusted_rand_index():
    assert adjusted_rand_index([0, 0, 1, 1], [1, 1, 0, 0]) == pytest.approx(1.0)


def test_kmeans_with_one_cluster_per_graph():
    rng = np.random.default_rng(5)
    spaces = [line_space(rng, 4) for _ in range(3)]
    cfg = FusedConfig.from_omega2(0.5)
    result = kmeans_fpgw(spaces, 3, cfg, iters=3, seed=0)
    assert sorted(result.labels) == [0, 1, 2]
    assert result.objective_trace[-1] <= 1e-6
    with pytest.raises(ConstraintError):
        kmeans_fpgw(spaces, 4, cfg)


def test_kmeans_is_deterministic_under_seed():
    graphs, _ = make_cluster_corpus(per_type=2, corrupt_fraction=0.0, seed=1, sizes=(8,))
    spaces = [to_mm_space(g) for g in graphs]
    cfg = FusedConfig.from_omega2(0.9)
    first = kmeans_fpgw(spaces, 3, cfg, iters=2, seed=7, fw_max_iter=50)
    second = kmeans_fpgw(spaces, 3, cfg, iters=2, seed=7, fw_max_iter=50)
    assert first.labels == second.labels
    assert first.objective_trace == second.objective_trace


def test_kmeans_default_centroid_is_the_fpgw_barycenter():
    rng = np.random.default_rng(8)
    spaces = [line_space(rng, int(n)) for n in rng.integers(3, 5, size=4)]
    cfg = FusedConfig.from_omega2(0.5, lam=5.0)
    default = kmeans_fpgw(spaces, 2, cfg, iters=2, seed=1, fw_max_iter=50)
    explicit = kmeans_fpgw(spaces, 2, cfg, iters=2, seed=1, fw_max_iter=50,
                           centroid_solver='fpgw')
    assert default.labels == explicit.labels
    assert default.objective_trace == explicit.objective_trace
    with pytest.raises(ValueError):
        kmeans_fpgw(spaces, 2, cfg, centroid_solver='fgw')


def test_kmeans_rejects_bad_rounds_and_exponent():
    rng = np.random.default_rng(2)
    spaces = [line_space(rng, 3) for _ in range(2)]
    cfg = FusedConfig.from_omega2(0.5)
    with pytest.raises(ConstraintError):
        kmeans_fpgw(spaces, 1, cfg, iters=0)
    with pytest.raises(ConstraintError):
        kmeans_fpgw(spaces, 1, cfg.replace(q_exponent=2.0))


def test_reseed_takes_the_farthest_graph_of_a_shared_cluster():
    labels = np.array([0, 1, 0])
    moves = reseed_empty_clusters(labels, [0.0, 5.0, 0.1], 3)
    assert moves == [(2, 2)]
    assert labels.tolist() == [0, 1, 2]


def test_reseed_never_empties_a_singleton_cluster():
    labels = np.array([0, 0, 1, 2])
    moves = reseed_empty_clusters(labels, [0.1, 0.2, 9.0, 8.0], 4)
    assert moves == [(3, 1)]
    assert labels.tolist() == [0, 3, 1, 2]


def test_reseed_fills_several_empty_clusters():
    labels = np.array([0, 0, 0, 0])
    moves = reseed_empty_clusters(labels, [1.0, 4.0, 2.0, 3.0], 3)
    assert moves == [(1, 1), (2, 3)]
    assert labels.tolist() == [0, 1, 0, 2]


def test_kmeans_with_duplicate_graphs_keeps_every_cluster():
    rng = np.random.default_rng(11)
    a, b = line_space(rng, 4), line_space(rng, 3)
    cfg = FusedConfig.from_omega2(0.5, lam=5.0)
    result = kmeans_fpgw([a, b, a], 3, cfg, iters=3, seed=0, fw_max_iter=50)
    assert sorted(result.labels) == [0, 1, 2]


@pytest.mark.parametrize('centroid_solver, slack', [('fpgw', 1e-4), ('fmpgw', 1e-6)])
def test_kmeans_objective_trace_does_not_increase(centroid_solver, slack):
    rng = np.random.default_rng(3)
    spaces = [line_space(rng, int(n)) for n in rng.integers(3, 6, size=6)]
    # λ large enough that FPGW centroid plans keep the full unit mass
    cfg = FusedConfig.from_omega2(0.5, lam=5.0)
    result = kmeans_fpgw(spaces, 2, cfg, iters=4, seed=0, centroid_solver=centroid_solver,
                         fw_max_iter=100)
    trace = result.objective_trace
    assert all(later <= earlier + slack for earlier, later in zip(trace, trace[1:]))


def test_partial_distance_ignores_outliers_that_balanced_transport_must_move():
    g = make_sbm_graph([5, 5], feature_centers=[[-1.0], [1.0]], feature_noise=0.1, seed=6)
    noisy = inject_outliers(g, 0.4, seed=6, upper=10.0)
    C = feature_cost(g, noisy)
    cfg = FusedConfig.from_omega2(0.2, lam=0.05)
    source = to_mm_space(g)
    partial = solve_pair(SolverKind.FW_FPGW, source, to_mm_space(noisy, mass_mode=UniformRegular()),
                         C, cfg, init='features')
    # ρ equal to both total masses is the balanced fused GW problem
    balanced = solve_pair(SolverKind.FW_FMPGW, source, to_mm_space(noisy), C,
                          cfg.replace(rho=1.0), init='features')
    assert partial.plan.total_mass <= 1.0 + 1e-9
    assert partial.objective < balanced.objective


@pytest.mark.slow
def test_subgraph_matching_accuracy():
    successes = 0
    for seed in range(10):
        g = make_sbm_graph([10, 10, 10], seed=seed)
        sub, mapping = extract_bfs_subgraph(g, 0.5, seed=seed)
        source = to_mm_space(sub)
        target = to_mm_space(g, mass_mode=UniformMin(sub.node_count))
        C = feature_cost(sub, g)
        cfg = FusedConfig.from_omega2(0.5, lam=1.0, epsilon=0.02)
        result = match_graphs(source, target, C, cfg, solver=SolverKind.SINK_FPGW,
                              ground_truth=mapping.tolist())
        successes += result.accuracy >= 0.95
    assert successes >= 9


def _corpus_ari(seed, mass_mode, rho):
    graphs, labels = make_cluster_corpus(per_type=5, corrupt_fraction=0.5, eta=0.3, seed=seed)
    spaces = [to_mm_space(g, mass_mode=mass_mode) for g in graphs]
    cfg = FusedConfig.from_omega2(0.999)
    result = kmeans_fpgw(spaces, 3, cfg, seed=seed, rho=rho)
    return adjusted_rand_index(labels, result.labels)


@pytest.mark.slow
def test_partial_clustering_beats_balanced_on_corrupted_corpus():
    partial = [_corpus_ari(seed, UniformRegular(), 1.0) for seed in range(5)]
    assert sum(ari >= 0.9 for ari in partial) >= 4
    balanced = [_corpus_ari(seed, UniformAll(), 1.0) for seed in range(5)]
    assert np.mean(partial) > np.mean(balanced)
