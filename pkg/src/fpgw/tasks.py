"""End-user workflows: graph matching, FPGW k-means and distance matrices."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np
import ot
from sklearn.metrics import adjusted_rand_score

from .barycenter import BarycenterProblem, solve_barycenter_fmpgw, solve_barycenter_fpgw
from .config import MASS_TOL, REL_OBJ_TOL, thread_cap
from .errors import ConstraintError
from .frank_wolfe import feature_init, solve_fw_fmpgw, solve_fw_fpgw
from .graphs import Euclidean, pairwise_feature_cost
from .model import MmSpace, SolverReport, TransportPlan
from .sinkhorn import solve_sink_fmpgw, solve_sink_fpgw

logger = logging.getLogger(__name__)

ROW_MASS_MIN = 1e-9


class SolverKind(Enum):
    FW_FPGW = 'fw-fpgw'
    FW_FMPGW = 'fw-fmpgw'
    SINK_FPGW = 'sink-fpgw'
    SINK_FMPGW = 'sink-fmpgw'

    @property
    def mass_constrained(self):
        return self in (SolverKind.FW_FMPGW, SolverKind.SINK_FMPGW)


_SOLVERS = {
    SolverKind.FW_FPGW: solve_fw_fpgw,
    SolverKind.FW_FMPGW: solve_fw_fmpgw,
    SolverKind.SINK_FPGW: solve_sink_fpgw,
    SolverKind.SINK_FMPGW: solve_sink_fmpgw,
}

INIT_STRATEGIES = ('product', 'features', 'best')


def _feature_start(kind, source, target, C, cfg):
    if kind.mass_constrained:
        rho = cfg.checked_rho(source.total_mass, target.total_mass)
    else:
        rho = min(source.total_mass, target.total_mass)
    return feature_init(C, source.mass, target.mass, rho)


def solve_pair(kind, source, target, C, cfg, init='product', **options):
    """Run one solver on one pair of spaces.

    ``init`` is a TransportPlan, 'product' (the solver default), 'features'
    (the optimal partial plan of the feature cost alone) or 'best' (both,
    keeping the lower objective).
    """
    kind = SolverKind(kind)
    solver = _SOLVERS[kind]
    if isinstance(init, str):
        if init not in INIT_STRATEGIES:
            raise ValueError(f"unknown init strategy '{init}'")
        if init == 'product':
            return solver(source, target, C, cfg, **options)
        featured = solver(source, target, C, cfg,
                          init=_feature_start(kind, source, target, C, cfg), **options)
        if init == 'features':
            return featured
        plain = solver(source, target, C, cfg, **options)
        # the plain start wins only by a relative margin, so ties keep the feature start
        margin = REL_OBJ_TOL * max(1.0, abs(featured.objective))
        return plain if plain.objective < featured.objective - margin else featured
    return solver(source, target, C, cfg, init=init, **options)


@dataclass
class MatchResult:
    assignment: List[Optional[int]]
    accuracy: Optional[float]
    plan: TransportPlan
    report: SolverReport

    @property
    def objective(self):
        return self.report.objective


def assignment_from_plan(plan, min_mass=ROW_MASS_MIN):
    """Argmax target per source row (lowest index on ties); None for empty rows."""
    gamma = TransportPlan.from_array(plan).entries
    rows = gamma.sum(axis=1)
    best = np.argmax(gamma, axis=1) if gamma.shape[1] else np.zeros(len(rows), dtype=int)
    return [int(j) if rows[i] > min_mass else None for i, j in enumerate(best)]


def match_accuracy(assignment, ground_truth):
    """|S_gt ∩ S_pred| / |S_gt|; None when the ground truth is empty."""
    if ground_truth is None:
        return None
    pairs = [(i, j) for i, j in enumerate(ground_truth) if j is not None and j >= 0]
    if not pairs:
        return None
    hits = sum(1 for i, j in pairs if i < len(assignment) and assignment[i] == j)
    return hits / len(pairs)


def match_graphs(source, target, C, cfg, solver=SolverKind.SINK_FPGW, ground_truth=None,
                 init='product', **options):
    """Solve a matching problem and read off the node assignment.

    Args:
        source (MmSpace): Source graph as an mm-space.
        target (MmSpace): Target graph as an mm-space.
        C (np.ndarray): Node feature cost, shape (n, m).
        cfg (FusedConfig): Problem parameters (rho is required for the FMPGW solvers).
        solver (SolverKind): Which of the four solvers to run.
        ground_truth (list): Optional target index (or None) per source node.
        init: Initialization strategy or plan, see solve_pair.

    Returns:
        MatchResult: Assignment, accuracy (None without ground truth), plan and report.
    """
    report = solve_pair(solver, source, target, C, cfg, init=init, **options)
    assignment = assignment_from_plan(report.plan)
    accuracy = match_accuracy(assignment, ground_truth)
    if accuracy is not None:
        logger.info("matching accuracy %.4f", accuracy)
    return MatchResult(assignment, accuracy, report.plan, report)


def _default_costs(spaces, q):
    def cost(a, b):
        return pairwise_feature_cost(spaces[a].feature_matrix(), spaces[b].feature_matrix(),
                                     Euclidean(), q)
    return cost


def pairwise_distance_matrix(spaces, cfg, solver=SolverKind.FW_FPGW, sigma=None,
                             feature_costs=None, init='product', max_workers=None, **options):
    """Symmetrized matrix of solver objectives, or the kernel exp(-σD).

    Every ordered pair is solved; D is then averaged with its transpose.
    ``feature_costs(a, b)`` returns the feature cost between spaces a and b
    (Euclidean distance of real features by default).
    """
    spaces = list(spaces)
    n = len(spaces)
    costs = feature_costs or _default_costs(spaces, cfg.q_exponent)
    pairs = [(a, b) for a in range(n) for b in range(n)]

    def run(pair):
        a, b = pair
        return solve_pair(solver, spaces[a], spaces[b], costs(a, b), cfg, init=init,
                          **options).objective

    workers = max_workers or thread_cap()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        values = list(pool.map(run, pairs))
    D = np.array(values, dtype=float).reshape(n, n)
    D = 0.5 * (D + D.T)
    logger.info("distance matrix of %d spaces computed with %d workers", n, workers)
    if sigma is not None:
        if sigma < 0:
            raise ConstraintError(f"sigma must be nonnegative, got {sigma}")
        return np.exp(-sigma * D)
    return D


def adjusted_rand_index(labels_true, labels_pred):
    return float(adjusted_rand_score(labels_true, labels_pred))


@dataclass
class ClusterResult:
    labels: List[int]
    centroids: List[tuple]
    objective_trace: List[float] = field(default_factory=list)


def _centroid_space(C, X, mass):
    return MmSpace(C, mass, features=X, metric=False)


def _graph_centroid(space, rho):
    return _centroid_space(space.structure, space.feature_matrix(),
                           np.full(space.size, rho / space.size))


def _fmpgw_distance(centroid, space, cfg, rho, fw_max_iter, warm=None):
    """FMPGW at ρ from the feature start, and from ``warm`` when it is a feasible mass-ρ plan."""
    cost = ot.dist(centroid.feature_matrix(), space.feature_matrix(), metric='sqeuclidean')
    pcfg = cfg.replace(rho=rho)
    report = solve_pair(SolverKind.FW_FMPGW, centroid, space, cost, pcfg, init='features',
                        max_iter=fw_max_iter)
    if (warm is not None and abs(warm.total_mass - rho) <= MASS_TOL
            and warm.feasible_for(centroid.mass, space.mass, tol=MASS_TOL)):
        warmed = solve_pair(SolverKind.FW_FMPGW, centroid, space, cost, pcfg, init=warm,
                            max_iter=fw_max_iter)
        if warmed.objective < report.objective:
            report = warmed
    return report


def _assignment_reports(centroids, spaces, cfg, rho, fw_max_iter, warm):
    jobs = [(i, k) for i in range(len(spaces)) for k in range(len(centroids))]

    def run(job):
        i, k = job
        return _fmpgw_distance(centroids[k], spaces[i], cfg, rho, fw_max_iter, warm.get(job))

    with ThreadPoolExecutor(max_workers=thread_cap()) as pool:
        reports = list(pool.map(run, jobs))
    K = len(centroids)
    return [reports[i * K:(i + 1) * K] for i in range(len(spaces))]


def _seed_centroids(spaces, K, rng, cfg, rho, fw_max_iter):
    chosen = [int(rng.integers(len(spaces)))]
    closest = np.full(len(spaces), np.inf)
    while len(chosen) < K:
        seed_space = _graph_centroid(spaces[chosen[-1]], rho)
        for i, space in enumerate(spaces):
            report = _fmpgw_distance(seed_space, space, cfg, rho, fw_max_iter)
            closest[i] = min(closest[i], report.objective)
        closest[chosen] = -np.inf
        chosen.append(int(np.argmax(closest)))
    return chosen


def reseed_empty_clusters(labels, own, K):
    """Move graphs into empty clusters, in place.

    Each empty cluster takes the graph farthest from its own centroid among
    clusters with at least two members, so no cluster is emptied in turn.

    Returns:
        list: (cluster, graph) pairs in the order they were re-seeded.
    """
    own = np.array(own, dtype=float)
    moves = []
    for k in range(K):
        sizes = np.bincount(labels, minlength=K)
        if sizes[k]:
            continue
        donors = np.flatnonzero(sizes[labels] >= 2)
        far = int(donors[np.argmax(own[donors])])
        labels[far] = k
        own[far] = -np.inf
        moves.append((k, far))
    return moves


def kmeans_fpgw(spaces, K, cfg, iters=10, seed=None, centroid_solver='fpgw', rho=1.0,
                bary_iters=3, bary_tol=1e-7, fw_max_iter=200):
    """K-means over graphs with FMPGW distances and barycenter centroids.

    Centroids start as copies of K graphs picked by farthest-point seeding
    and carry mass ρ spread uniformly over their nodes. Each round assigns
    every graph to the centroid at the smallest FMPGW distance (mass ρ),
    re-seeds empty clusters and recomputes each centroid as the barycenter
    of its members, warm-started from the assignment plans. The loop stops
    once the labels repeat.

    Args:
        spaces (list): MmSpaces with real node features.
        K (int): Number of clusters, at most len(spaces).
        cfg (FusedConfig): ω weights, λ of the FPGW barycenter and the loss.
        iters (int): Maximum number of assignment rounds, at least 1.
        seed (int): Seed of the centroid selection.
        centroid_solver (str): 'fpgw' (FPGW barycenter with cfg.lam) or 'fmpgw' (at ρ).
        rho (float): Centroid mass and FMPGW transported mass.

    Returns:
        ClusterResult: Labels, (structure, features) per centroid and the objective trace.
    """
    if centroid_solver not in ('fmpgw', 'fpgw'):
        raise ValueError(f"centroid_solver must be 'fmpgw' or 'fpgw', got '{centroid_solver}'")
    if iters < 1:
        raise ConstraintError(f"iters must be at least 1, got {iters}")
    if cfg.q_exponent != 1:
        raise ConstraintError("k-means feature costs are squared Euclidean; q_exponent must be 1")
    spaces = list(spaces)
    if not 1 <= K <= len(spaces):
        raise ConstraintError(f"K must lie in [1, {len(spaces)}], got {K}")
    rng = np.random.default_rng(seed)
    chosen = _seed_centroids(spaces, K, rng, cfg, rho, fw_max_iter)
    centroids = [_graph_centroid(spaces[i], rho) for i in chosen]

    labels = None
    warm = {}
    trace = []
    for it in range(1, iters + 1):
        reports = _assignment_reports(centroids, spaces, cfg, rho, fw_max_iter, warm)
        D = np.array([[r.objective for r in row] for row in reports])
        new_labels = np.argmin(D, axis=1)
        own = D[np.arange(len(spaces)), new_labels]
        for k, far in reseed_empty_clusters(new_labels, own, K):
            logger.debug("k-means round %d: re-seeding empty cluster %d from graph %d",
                         it, k, far)
            centroids[k] = _graph_centroid(spaces[far], rho)
            reports[far][k] = _fmpgw_distance(centroids[k], spaces[far], cfg, rho, fw_max_iter)
        objective = float(sum(reports[i][k].objective for i, k in enumerate(new_labels)))
        trace.append(objective)
        logger.info("k-means round %d: objective=%.6g", it, objective)
        if labels is not None and np.array_equal(labels, new_labels):
            break
        labels = new_labels

        warm = {}
        for k in range(K):
            members = np.flatnonzero(labels == k)
            centroid = centroids[k]
            weights = np.full(len(members), 1.0 / len(members))
            if centroid_solver == 'fmpgw':
                prob = BarycenterProblem([spaces[i] for i in members], weights, centroid.size,
                                         centroid.mass, rhos=[rho] * len(members), cfgs=cfg)
                solve = solve_barycenter_fmpgw
            else:
                prob = BarycenterProblem([spaces[i] for i in members], weights, centroid.size,
                                         centroid.mass, lams=[cfg.lam] * len(members), cfgs=cfg)
                solve = solve_barycenter_fpgw
            result = solve(prob, init=(centroid.structure, centroid.feature_matrix()),
                           outer_iters=bary_iters, tol=bary_tol,
                           plan_inits=[reports[i][k].plan for i in members],
                           fw_max_iter=fw_max_iter)
            centroids[k] = _centroid_space(result.structure, result.features, centroid.mass)
            warm.update(((int(i), k), plan) for i, plan in zip(members, result.plans))
    return ClusterResult([int(x) for x in labels],
                         [(c.structure, np.array(c.feature_matrix())) for c in centroids], trace)
