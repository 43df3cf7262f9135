"""Command-line frontend: ``fpgw {match,cluster,distmat,synth}``.

Exit codes: 0 success, 2 input error, 3 solver failure, 64 usage error.
"""

import argparse
import logging
import math
import os
import sys

import numpy as np

from .config import load_defaults
from .errors import (ConfigError, ConstraintError, GraphFormatError, InvalidPlanError,
                     OracleBudgetError, SolverError, UnsupportedLossError)
from .graphs import (StructureKind, UniformAll, UniformMin, UniformRegular, SquaredEuclidean,
                     extract_bfs_subgraph, feature_cost, inject_outliers, load_graph,
                     load_graph_dir, parse_feature_metric, save_graph, to_mm_space)
from .model import FusedConfig
from .run_logger import RunLogger
from .storage import read_json, read_mapping, write_json, write_mapping, write_matrix_csv
from .synthetic import make_cluster_corpus, make_sbm_graph, save_corpus
from .tasks import (INIT_STRATEGIES, SolverKind, adjusted_rand_index, kmeans_fpgw, match_graphs,
                    pairwise_distance_matrix)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3
EXIT_USAGE = 64

MASS_MODES = ('uniform-all', 'uniform-regular', 'uniform-min')
SOLVER_NAMES = tuple(kind.value for kind in SolverKind)


class UsageParser(argparse.ArgumentParser):
    """ArgumentParser that exits with EXIT_USAGE on bad command lines."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        return [float(x) for x in text.split(',') if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _int_list(text):
    try:
        return [int(x) for x in text.split(',') if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


# --- Flag validation ---

def _require(condition, flag, message, value):
    if not condition:
        raise ValueError(f"{flag} {message}, got {value}")


def _check_unit(value, flag):
    _require(value is not None and 0.0 <= value <= 1.0 and math.isfinite(value), flag,
             "must lie in [0, 1]", value)


def _check_nonneg(value, flag):
    if value is not None:
        _require(math.isfinite(value) and value >= 0.0, flag, "must be a nonnegative number",
                 value)


def _check_positive(value, flag):
    _require(value is not None and value > 0, flag, "must be positive", value)


def _stem(path):
    return os.path.splitext(path)[0]


# --- Shared problem setup ---

def _problem_args(p, defaults, with_solver=True):
    problem = defaults['problem']
    if with_solver:
        p.add_argument('--solver', choices=SOLVER_NAMES, default='sink-fpgw')
        p.add_argument('--epsilon', type=float, default=problem['epsilon'],
                       help="Entropic weight of the Sinkhorn solvers.")
        p.add_argument('--init', choices=INIT_STRATEGIES, default='product')
    p.add_argument('--omega2', type=float, default=problem['omega2'],
                   help="Structure weight; omega1 = 1 - omega2.")
    p.add_argument('--lambda', dest='lam', type=float, default=problem['lambda'],
                   help="Mass penalty of FPGW.")
    p.add_argument('--rho', type=float, default=None,
                   help="Transported mass (FMPGW solvers).")
    p.add_argument('--structure', choices=[k.value for k in StructureKind],
                   default=StructureKind.SHORTEST_PATH.value)
    p.add_argument('--feature-metric', default='euclidean',
                   help="euclidean, sqeuclidean or wl:H for label graphs.")
    p.add_argument('--q', dest='q_exponent', type=float, default=problem['q_exponent'],
                   help="Feature cost exponent: C = d(x, y) ** q, q >= 1.")
    p.add_argument('--mass', choices=MASS_MODES, default='uniform-all')


def _fused_config(args):
    _check_unit(args.omega2, '--omega2')
    _check_nonneg(args.lam, '--lambda')
    _check_nonneg(args.rho, '--rho')
    epsilon = getattr(args, 'epsilon', 0.0)
    _check_nonneg(epsilon, '--epsilon')
    _require(math.isfinite(args.q_exponent) and args.q_exponent >= 1.0, '--q',
             "must be at least 1", args.q_exponent)
    return FusedConfig.from_omega2(args.omega2, lam=args.lam, rho=args.rho, epsilon=epsilon,
                                   q_exponent=args.q_exponent)


def _solver_options(kind, defaults):
    kind = SolverKind(kind)
    if kind in (SolverKind.FW_FPGW, SolverKind.FW_FMPGW):
        fw = defaults['frank_wolfe']
        return {'max_iter': int(fw['max_iter']), 'tol': float(fw['tol'])}
    outer, inner = defaults['alternating'], defaults['sinkhorn']
    return {'max_iter': int(outer['max_iter']), 'tol': float(outer['tol']),
            'inner_max_iter': int(inner['max_iter']), 'inner_tol': float(inner['tol'])}


def _check_solver(args, cfg):
    kind = SolverKind(args.solver)
    if kind.mass_constrained and cfg.rho is None:
        raise ValueError(f"--rho is required for --solver {kind.value}")
    if kind in (SolverKind.SINK_FPGW, SolverKind.SINK_FMPGW):
        _require(cfg.epsilon > 0, '--epsilon', "must be positive for Sinkhorn solvers",
                 cfg.epsilon)
    return kind


def _mass_mode(name, other_size):
    if name == 'uniform-regular':
        return UniformRegular()
    if name == 'uniform-min':
        return UniformMin(other_size)
    return UniformAll()


def _spaces(graphs, args):
    kind = StructureKind(args.structure)
    size = min(g.node_count for g in graphs)
    return [to_mm_space(g, kind, _mass_mode(args.mass, size)) for g in graphs]


# --- Commands ---

def cmd_match(args, defaults):
    cfg = _fused_config(args)
    kind = _check_solver(args, cfg)
    metric = parse_feature_metric(args.feature_metric)
    ga, gb = load_graph(args.source), load_graph(args.target)
    kind_s = StructureKind(args.structure)
    source = to_mm_space(ga, kind_s, _mass_mode(args.mass, gb.node_count))
    target = to_mm_space(gb, kind_s, _mass_mode(args.mass, ga.node_count))
    C = feature_cost(ga, gb, metric, cfg.q_exponent)
    ground_truth = read_mapping(args.ground_truth) if args.ground_truth else None
    if ground_truth is not None and len(ground_truth) != ga.node_count:
        raise GraphFormatError(
            f"ground truth has {len(ground_truth)} entries, source has {ga.node_count} nodes")

    result = match_graphs(source, target, C, cfg, solver=kind, ground_truth=ground_truth,
                          init=args.init, **_solver_options(kind, defaults))
    plan_path = _stem(args.out) + '_plan.csv'
    write_matrix_csv(result.plan.entries, plan_path)
    write_json({
        'command': 'match',
        'solver': kind.value,
        'plan': os.path.basename(plan_path),
        'assignment': result.assignment,
        'accuracy': result.accuracy,
        'objective': float(result.objective),
        'mass': result.plan.total_mass,
        'iterations': result.report.iterations,
        'converged': result.report.converged,
    }, args.out)
    accuracy = 'n/a' if result.accuracy is None else f"{result.accuracy:.4f}"
    print(f"Objective {result.objective:.6g}, accuracy {accuracy}. Results saved to {args.out}")
    return f"solver={kind.value} objective={result.objective:.6g} accuracy={accuracy}"


def _read_labels(path, names):
    data = read_json(path)
    labels = data.get('labels') if isinstance(data, dict) else None
    if not isinstance(labels, dict):
        raise GraphFormatError(f"'{path}' must hold {{\"labels\": {{file name: label}}}}")
    missing = [name for name in names if name not in labels]
    if missing:
        raise GraphFormatError(f"no label for {', '.join(missing)}")
    return [labels[name] for name in names]


def cmd_cluster(args, defaults):
    cfg = _fused_config(args)
    metric = parse_feature_metric(args.feature_metric)
    if not isinstance(metric, SquaredEuclidean):
        raise ValueError("--feature-metric must be 'sqeuclidean' for cluster "
                         "(centroid features are updated in closed form)")
    _require(cfg.q_exponent == 1.0, '--q', "must be 1 for cluster", cfg.q_exponent)
    _require(args.k >= 1, '--k', "must be a positive integer", args.k)
    _require(args.iters >= 1, '--iters', "must be a positive integer", args.iters)
    rho = args.rho if args.rho is not None else float(defaults['kmeans']['rho'])
    _check_positive(rho, '--rho')
    named = load_graph_dir(args.graphs)
    names = [name for name, _ in named]
    spaces = _spaces([g for _, g in named], args)
    _require(args.k <= len(spaces), '--k', f"must not exceed the {len(spaces)} graphs", args.k)
    labels_true = _read_labels(args.labels, names) if args.labels else None

    bary = defaults['barycenter']
    result = kmeans_fpgw(spaces, args.k, cfg, iters=args.iters, seed=args.seed,
                         centroid_solver=args.centroid_solver, rho=rho,
                         bary_iters=int(bary['outer_iters']), bary_tol=float(bary['tol']),
                         fw_max_iter=int(defaults['frank_wolfe']['max_iter']))
    stem = _stem(args.out)
    centroids = []
    for k, (C, X) in enumerate(result.centroids):
        c_path, x_path = f"{stem}_centroid{k}_C.csv", f"{stem}_centroid{k}_X.csv"
        write_matrix_csv(C, c_path)
        write_matrix_csv(X, x_path)
        centroids.append({'structure': os.path.basename(c_path),
                          'features': os.path.basename(x_path)})
    ari = None if labels_true is None else adjusted_rand_index(labels_true, result.labels)
    write_json({
        'command': 'cluster',
        'graphs': names,
        'labels': result.labels,
        'centroids': centroids,
        'objective_trace': [float(v) for v in result.objective_trace],
        'ari': ari,
    }, args.out)
    summary = 'n/a' if ari is None else f"{ari:.4f}"
    print(f"Clustered {len(names)} graphs into {args.k} clusters, ARI {summary}. "
          f"Results saved to {args.out}")
    return f"k={args.k} graphs={len(names)} ari={summary}"


def cmd_distmat(args, defaults):
    cfg = _fused_config(args)
    kind = _check_solver(args, cfg)
    _check_nonneg(args.sigma, '--sigma')
    metric = parse_feature_metric(args.feature_metric)
    graphs = [g for _, g in load_graph_dir(args.graphs)]
    spaces = _spaces(graphs, args)

    def costs(a, b):
        return feature_cost(graphs[a], graphs[b], metric, cfg.q_exponent)

    D = pairwise_distance_matrix(spaces, cfg, solver=kind, sigma=args.sigma, feature_costs=costs,
                                 init=args.init, **_solver_options(kind, defaults))
    write_matrix_csv(D, args.out)
    print(f"{len(graphs)}x{len(graphs)} matrix saved to {args.out}")
    return f"solver={kind.value} graphs={len(graphs)} sigma={args.sigma}"


def cmd_synth(args, defaults):
    if args.kind == 'sbm':
        _require(bool(args.sizes) and all(s > 0 for s in args.sizes), '--sizes',
                 "must list positive community sizes", args.sizes)
        _check_unit(args.p_in, '--p-in')
        _check_unit(args.p_out, '--p-out')
        _check_nonneg(args.feature_noise, '--feature-noise')
        centers = None
        if args.feature_centers is not None:
            _require(len(args.feature_centers) == len(args.sizes), '--feature-centers',
                     "needs one value per community", args.feature_centers)
            centers = np.array(args.feature_centers)[:, None]
        labels = args.labels.split(',') if args.labels else None
        g = make_sbm_graph(args.sizes, args.p_in, args.p_out, feature_centers=centers,
                           feature_noise=args.feature_noise, labels=labels, seed=args.seed)
        save_graph(g, args.out)
        detail = f"nodes={g.node_count} edges={len(g.edges)}"
    elif args.kind == 'subgraph':
        _require(0.0 < args.fraction <= 1.0, '--fraction', "must lie in (0, 1]", args.fraction)
        sub, mapping = extract_bfs_subgraph(load_graph(args.graph), args.fraction, seed=args.seed)
        save_graph(sub, args.out)
        if args.mapping:
            write_mapping(mapping.tolist(), args.mapping)
        detail = f"nodes={sub.node_count}"
    elif args.kind == 'outliers':
        _check_nonneg(args.eta, '--eta')
        g = inject_outliers(load_graph(args.graph), args.eta, seed=args.seed, upper=args.upper)
        save_graph(g, args.out)
        detail = f"nodes={g.node_count} regular={g.regular_count}"
    else:
        _require(args.per_type >= 1, '--per-type', "must be a positive integer", args.per_type)
        _check_unit(args.corrupt_fraction, '--corrupt-fraction')
        _check_nonneg(args.eta, '--eta')
        graphs, labels = make_cluster_corpus(args.per_type, args.corrupt_fraction, args.eta,
                                             seed=args.seed)
        save_corpus(graphs, labels, args.out)
        detail = f"graphs={len(graphs)}"
    print(f"Synthetic {args.kind} written to {args.out}")
    return f"kind={args.kind} seed={args.seed} {detail}"


# --- Parser ---

def build_parser(defaults):
    parser = UsageParser(prog='fpgw', description="Fused partial Gromov-Wasserstein solvers.")
    parser.add_argument('--log-dir', default=None, help="Directory of the daily CSV run log.")
    parser.add_argument('--verbose', action='store_true', help="Debug-level logging.")
    parser.add_argument('--config', default=None, help="YAML file overriding solver defaults.")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('match', help="Match two graphs.")
    p.add_argument('--source', required=True)
    p.add_argument('--target', required=True)
    _problem_args(p, defaults)
    p.add_argument('--ground-truth', default=None, help="Mapping JSON for the accuracy.")
    p.add_argument('--out', required=True)
    p.set_defaults(handler=cmd_match)

    p = sub.add_parser('cluster', help="FPGW k-means over a directory of graphs.")
    p.add_argument('--graphs', required=True)
    p.add_argument('--k', type=int, required=True)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--iters', type=int, default=int(defaults['kmeans']['iters']))
    _problem_args(p, defaults, with_solver=False)
    p.set_defaults(omega2=float(defaults['kmeans']['omega2']), feature_metric='sqeuclidean')
    p.add_argument('--centroid-solver', choices=('fpgw', 'fmpgw'), default='fpgw',
                   help="Barycenter used for the centroid update.")
    p.add_argument('--labels', default=None, help="labels.json with generative labels.")
    p.add_argument('--out', required=True)
    p.set_defaults(handler=cmd_cluster)

    p = sub.add_parser('distmat', help="Pairwise distance (or kernel) matrix.")
    p.add_argument('--graphs', required=True)
    _problem_args(p, defaults)
    p.set_defaults(solver='fw-fpgw')
    p.add_argument('--sigma', type=float, default=None, help="Emit exp(-sigma * D).")
    p.add_argument('--out', required=True)
    p.set_defaults(handler=cmd_distmat)

    p = sub.add_parser('synth', help="Generate fixture graphs.")
    kinds = p.add_subparsers(dest='kind', required=True)
    synth = defaults['synth']

    s = kinds.add_parser('sbm')
    s.add_argument('--sizes', type=_int_list, required=True, help="e.g. 10,10,10")
    s.add_argument('--p-in', type=float, default=float(synth['sbm_p_in']))
    s.add_argument('--p-out', type=float, default=float(synth['sbm_p_out']))
    s.add_argument('--feature-centers', type=_float_list, default=None,
                   help="One feature center per community, e.g. --feature-centers=-1.5,0,1.5")
    s.add_argument('--feature-noise', type=float, default=0.1)
    s.add_argument('--labels', default=None, help="One label per community, e.g. a,b,c")

    s = kinds.add_parser('subgraph')
    s.add_argument('--graph', required=True)
    s.add_argument('--fraction', type=float, default=float(synth['bfs_fraction']))
    s.add_argument('--mapping', default=None, help="Ground-truth mapping JSON to write.")

    s = kinds.add_parser('outliers')
    s.add_argument('--graph', required=True)
    s.add_argument('--eta', type=float, required=True)
    s.add_argument('--upper', type=float, default=None)

    s = kinds.add_parser('corpus')
    s.add_argument('--per-type', type=int, default=5)
    s.add_argument('--corrupt-fraction', type=float, default=0.5)
    s.add_argument('--eta', type=float, default=0.3)

    for s in kinds.choices.values():
        s.add_argument('--seed', type=int, default=0)
        s.add_argument('--out', required=True)
    p.set_defaults(handler=cmd_synth)
    return parser


def _config_path(argv):
    """Peek at --config before the parser is built, since defaults depend on it."""
    for i, arg in enumerate(argv):
        if arg == '--config' and i + 1 < len(argv):
            return argv[i + 1]
        if arg.startswith('--config='):
            return arg.split('=', 1)[1]
    return None


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        defaults = load_defaults(_config_path(argv))
    except (ConfigError, OSError) as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    args = build_parser(defaults).parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.DEBUG,
                            format='%(asctime)s %(name)s %(levelname)s: %(message)s')

    run_log = RunLogger(args.log_dir) if args.log_dir else None
    command = args.command if args.command != 'synth' else f"synth {args.kind}"
    if run_log:
        run_log.log_event('RUN_START', command, ' '.join(argv))
    try:
        details = args.handler(args, defaults)
    except (SolverError, InvalidPlanError) as exc:
        code, message = EXIT_SOLVER, f"solver failed: {exc}"
    except (OSError, GraphFormatError, ConstraintError, ConfigError, UnsupportedLossError,
            OracleBudgetError, ValueError) as exc:
        code, message = EXIT_INPUT, str(exc)
    else:
        if run_log:
            run_log.log_event('RUN_DONE', command, details)
        return EXIT_OK
    print(f"Error: {message}", file=sys.stderr)
    if run_log:
        run_log.log_event('RUN_FAILED', command, message)
    return code
