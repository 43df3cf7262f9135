"""Graphs as mm-spaces: structure matrices, masses and node feature costs.

A Graph stores an undirected edge list over nodes 0..n-1 plus optional
node features (real vectors or string labels) and, for corrupted graphs,
the number of regular (non-outlier) nodes. Outliers are always the last
nodes of a graph.
"""

import logging
import math
import os
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import networkx as nx
import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConstraintError, GraphFormatError, ShapeError
from .model import MmSpace, normalize_features
from .storage import read_json, write_json

logger = logging.getLogger(__name__)


@dataclass
class Graph:
    node_count: int
    edges: List[Tuple[int, int]] = field(default_factory=list)
    features: Optional[object] = None
    regular_count: Optional[int] = None

    def __post_init__(self):
        n = int(self.node_count)
        if n < 0:
            raise GraphFormatError(f"node_count must be nonnegative, got {n}")
        self.node_count = n
        edges = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if not (0 <= a < n and 0 <= b < n):
                raise GraphFormatError(f"edge ({a}, {b}) outside 0..{n - 1}")
            if a != b:
                edges.add((min(a, b), max(a, b)))
        self.edges = sorted(edges)
        try:
            self.features = normalize_features(self.features, n)
        except ShapeError as exc:
            raise GraphFormatError(str(exc)) from exc
        if self.regular_count is not None:
            self.regular_count = int(self.regular_count)
            if not 0 <= self.regular_count <= n:
                raise GraphFormatError(f"regular_count must lie in [0, {n}]")

    @property
    def has_labels(self):
        return isinstance(self.features, tuple)

    def to_networkx(self):
        g = nx.Graph()
        g.add_nodes_from(range(self.node_count))
        g.add_edges_from(self.edges)
        if self.has_labels:
            nx.set_node_attributes(g, dict(enumerate(self.features)), 'label')
        return g

    @classmethod
    def from_networkx(cls, g, features=None, regular_count=None):
        """Relabel the nodes of ``g`` to 0..n-1 in sorted order."""
        order = {node: i for i, node in enumerate(sorted(g.nodes()))}
        edges = [(order[a], order[b]) for a, b in g.edges()]
        return cls(len(order), edges, features, regular_count)


class StructureKind(Enum):
    ADJACENCY = 'adjacency'
    SHORTEST_PATH = 'shortest-path'


@dataclass(frozen=True)
class UniformAll:
    pass


@dataclass(frozen=True)
class UniformRegular:
    pass


@dataclass(frozen=True)
class Explicit:
    values: tuple


@dataclass(frozen=True)
class UniformMin:
    other_size: int


@dataclass(frozen=True)
class Euclidean:
    pass


@dataclass(frozen=True)
class SquaredEuclidean:
    pass


@dataclass(frozen=True)
class WlHamming:
    iterations: int


def parse_feature_metric(text):
    """'euclidean', 'sqeuclidean' or 'wl:H'."""
    text = text.strip().lower()
    if text == 'euclidean':
        return Euclidean()
    if text == 'sqeuclidean':
        return SquaredEuclidean()
    if text.startswith('wl:'):
        try:
            h = int(text[3:])
        except ValueError:
            h = -1
        if h < 1:
            raise ValueError(f"WL iterations must be a positive integer, got '{text[3:]}'")
        return WlHamming(h)
    raise ValueError(f"unknown feature metric '{text}'")


def default_disconnect_value(g):
    """2 x the diameter of the largest connected component (at least 1)."""
    if g.node_count == 0:
        return 1.0
    nxg = g.to_networkx()
    largest = max(nx.connected_components(nxg), key=len)
    diameter = nx.diameter(nxg.subgraph(largest)) if len(largest) > 1 else 0
    return float(max(2 * diameter, 1))


def structure_matrix(g, kind=StructureKind.SHORTEST_PATH, disconnect_value=None):
    """Adjacency indicator or BFS hop-distance matrix of a graph."""
    kind = StructureKind(kind)
    n = g.node_count
    nxg = g.to_networkx()
    if kind is StructureKind.ADJACENCY:
        return nx.to_numpy_array(nxg, nodelist=range(n), weight=None)
    if disconnect_value is None:
        disconnect_value = default_disconnect_value(g)
    out = np.full((n, n), float(disconnect_value))
    for source, lengths in nx.all_pairs_shortest_path_length(nxg):
        for target, hops in lengths.items():
            out[source, target] = hops
    np.fill_diagonal(out, 0.0)
    return out


def node_masses(g, mass_mode=UniformAll()):
    n = g.node_count
    if isinstance(mass_mode, UniformAll):
        return np.full(n, 1.0 / n) if n else np.zeros(0)
    if isinstance(mass_mode, UniformRegular):
        if not g.regular_count:
            raise GraphFormatError("uniform-regular masses need a positive regular_count")
        return np.full(n, 1.0 / g.regular_count)
    if isinstance(mass_mode, UniformMin):
        return np.full(n, 1.0 / min(n, mass_mode.other_size))
    if isinstance(mass_mode, Explicit):
        values = np.asarray(mass_mode.values, dtype=float)
        if values.shape != (n,):
            raise GraphFormatError(f"explicit masses must have {n} entries, got {values.shape}")
        return values
    raise GraphFormatError(f"unknown mass mode {mass_mode!r}")


def to_mm_space(g, kind=StructureKind.SHORTEST_PATH, mass_mode=UniformAll(),
                disconnect_value=None):
    """MmSpace of a graph: structure matrix, node masses and the node features."""
    return MmSpace(structure_matrix(g, kind, disconnect_value), node_masses(g, mass_mode),
                   features=g.features)


def _check_exponent(q):
    if not q >= 1:
        raise ConstraintError(f"feature cost exponent q must be >= 1, got {q}")


def pairwise_feature_cost(Xa, Xb, metric=Euclidean(), q=1.0):
    """C[i, j] = d(Xa[i], Xb[j]) ** q."""
    _check_exponent(q)
    Xa = np.atleast_2d(np.asarray(Xa, dtype=float))
    Xb = np.atleast_2d(np.asarray(Xb, dtype=float))
    if Xa.shape[1] != Xb.shape[1]:
        raise GraphFormatError(f"feature dimensions differ: {Xa.shape[1]} vs {Xb.shape[1]}")
    if isinstance(metric, Euclidean):
        base = cdist(Xa, Xb, metric='euclidean')
    elif isinstance(metric, SquaredEuclidean):
        base = cdist(Xa, Xb, metric='sqeuclidean')
    else:
        raise GraphFormatError(f"{metric!r} does not apply to real features")
    return base if q == 1 else base ** q


def wl_label_rounds(g, iterations):
    """Per-node WL subtree hashes for rounds 1..H, shape (n, H).

    Hashes only depend on labels and neighborhoods, so two graphs hashed
    separately share one label dictionary.
    """
    if not g.has_labels:
        raise GraphFormatError("WL refinement needs label features")
    hashes = nx.weisfeiler_lehman_subgraph_hashes(g.to_networkx(), node_attr='label',
                                                  iterations=iterations)
    return np.array([hashes[i] for i in range(g.node_count)], dtype=object).reshape(
        g.node_count, iterations)


def feature_cost(ga, gb, metric=Euclidean(), q=1.0):
    """(n, m) node feature cost between two graphs, raised to the power q."""
    if ga.features is None or gb.features is None:
        raise GraphFormatError("both graphs need node features")
    if ga.has_labels != gb.has_labels:
        raise GraphFormatError("cannot compare label features with real features")
    if isinstance(metric, WlHamming):
        _check_exponent(q)
        la = wl_label_rounds(ga, metric.iterations)
        lb = wl_label_rounds(gb, metric.iterations)
        base = (la[:, None, :] != lb[None, :, :]).sum(axis=2).astype(float)
        return base if q == 1 else base ** q
    if ga.has_labels:
        raise GraphFormatError(f"{metric!r} needs real features; use wl:H for labels")
    return pairwise_feature_cost(ga.features, gb.features, metric, q)


def anchor_distance_features(coords, anchor):
    """Distance of every point to the point ``anchor``, as (n, 1) features."""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    return cdist(coords, coords[[anchor]])


def _induced(g, nodes):
    position = {node: i for i, node in enumerate(nodes)}
    edges = [(position[a], position[b]) for a, b in g.edges if a in position and b in position]
    if g.features is None:
        features = None
    elif g.has_labels:
        features = [g.features[i] for i in nodes]
    else:
        features = g.features[list(nodes)]
    regular = None
    if g.regular_count is not None:
        regular = sum(1 for i in nodes if i < g.regular_count)
    return Graph(len(nodes), edges, features, regular)


def extract_bfs_subgraph(g, fraction, seed=None, start=None):
    """Induced subgraph on ⌈fraction·n⌉ nodes collected by randomized BFS.

    Neighbors are visited in a seeded random order. When the component of
    the start node runs out, BFS restarts from a random unvisited node.

    Returns:
        tuple: (subgraph, mapping) where subgraph node i is original node mapping[i].
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    rng = np.random.default_rng(seed)
    n = g.node_count
    target = min(n, math.ceil(fraction * n - 1e-12))
    adjacency = g.to_networkx()
    order = []
    visited = set()
    queue = deque()
    if start is None and n:
        start = int(rng.integers(n))
    while len(order) < target:
        if not queue:
            if start is None:
                remaining = [i for i in range(n) if i not in visited]
                start = int(remaining[rng.integers(len(remaining))])
            queue.append(start)
            visited.add(start)
            start = None
        node = queue.popleft()
        order.append(node)
        neighbors = sorted(nb for nb in adjacency[node] if nb not in visited)
        for nb in (rng.permutation(neighbors) if neighbors else []):
            visited.add(int(nb))
            queue.append(int(nb))
    mapping = np.array(order, dtype=int)
    return _induced(g, order), mapping


def _unused_label(labels):
    used = set(labels)
    k = 0
    while f"outlier{k}" in used:
        k += 1
    return f"outlier{k}"


def inject_outliers(g, eta, seed=None, upper=None):
    """Append ⌊eta·n⌋ outlier nodes with 1-3 random neighbors each.

    Real features of outliers are drawn per dimension from (y_d, y_d + 2·sd_d],
    y_d being ``upper`` (or the largest regular value) and sd_d the feature
    standard deviation; label graphs give every outlier one unused label.
    """
    if eta < 0:
        raise ValueError(f"eta must be nonnegative, got {eta}")
    rng = np.random.default_rng(seed)
    n = g.node_count
    count = int(math.floor(eta * n + 1e-12))
    regular = g.regular_count if g.regular_count is not None else n
    edges = list(g.edges)
    for k in range(count):
        current = n + k
        degree = min(int(rng.integers(1, 4)), current)
        for nb in rng.choice(current, size=degree, replace=False):
            edges.append((int(nb), current))

    features = g.features
    if g.features is not None and count:
        if g.has_labels:
            features = list(g.features) + [_unused_label(g.features)] * count
        else:
            X = np.asarray(g.features)
            low = X.max(axis=0) if upper is None else np.broadcast_to(
                np.asarray(upper, dtype=float), (X.shape[1],))
            sd = X.std(axis=0)
            sd = np.where(sd > 0, sd, 1.0)
            extra = low + 2.0 * sd * (1.0 - rng.random((count, X.shape[1])))
            features = np.vstack([X, extra])
    return Graph(n + count, edges, features, regular)


def graph_to_dict(g):
    nodes = []
    for i in range(g.node_count):
        node = {'id': i}
        if g.has_labels:
            node['label'] = g.features[i]
        elif g.features is not None:
            node['feature'] = [float(x) for x in g.features[i]]
        nodes.append(node)
    data = {'nodes': nodes, 'edges': [[a, b] for a, b in g.edges]}
    if g.regular_count is not None:
        data['regular_count'] = g.regular_count
    return data


def graph_from_dict(data):
    if not isinstance(data, dict) or not isinstance(data.get('nodes'), list):
        raise GraphFormatError("graph JSON needs a 'nodes' list")
    try:
        nodes = sorted(data['nodes'], key=lambda node: int(node['id']))
        ids = [int(node['id']) for node in nodes]
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphFormatError(f"every node needs an integer 'id': {exc}") from exc
    if ids != list(range(len(ids))):
        raise GraphFormatError("node ids must be exactly 0..n-1")
    kinds = {('label' in node, 'feature' in node) for node in nodes}
    if len(kinds) > 1:
        raise GraphFormatError("nodes mix label, feature and featureless entries")
    features = None
    if kinds == {(True, False)}:
        features = [str(node['label']) for node in nodes]
    elif kinds == {(False, True)}:
        rows = [node['feature'] for node in nodes]
        if len({len(r) if isinstance(r, list) else -1 for r in rows}) != 1:
            raise GraphFormatError("node feature vectors must share one length")
        features = np.array(rows, dtype=float)
    elif kinds == {(True, True)}:
        raise GraphFormatError("a node cannot carry both 'label' and 'feature'")
    edges = data.get('edges', [])
    if not isinstance(edges, list) or any(not isinstance(e, list) or len(e) != 2 for e in edges):
        raise GraphFormatError("'edges' must be a list of [i, j] pairs")
    return Graph(len(nodes), [tuple(e) for e in edges], features, data.get('regular_count'))


def load_graph(path):
    return graph_from_dict(read_json(path))


def save_graph(g, path):
    write_json(graph_to_dict(g), path)


def load_graph_dir(directory):
    """All *.json graphs of a directory, sorted by file name.

    Returns:
        list: (file name, Graph) pairs.
    """
    names = sorted(f for f in os.listdir(directory) if f.endswith('.json'))
    graphs = []
    for name in names:
        data = read_json(os.path.join(directory, name))
        if isinstance(data, dict) and 'nodes' in data:
            graphs.append((name, graph_from_dict(data)))
    if not graphs:
        raise GraphFormatError(f"no graph JSON files in '{directory}'")
    logger.info("loaded %d graphs from %s", len(graphs), directory)
    return graphs
