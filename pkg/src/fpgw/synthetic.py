"""Seeded synthetic graphs: stochastic block models and a clustering corpus."""

import logging
import os

import networkx as nx
import numpy as np

from .graphs import Graph, inject_outliers, save_graph
from .storage import write_json

logger = logging.getLogger(__name__)

FEATURE_RANGE = (-2.0, 2.0)

# community feature centers of the three corpus graph types
CORPUS_TYPES = (
    (-1.5,),
    (-1.5, 1.5),
    (-1.5, 0.0, 1.5),
)


def connect_components(g, rng):
    """Join consecutive connected components of ``g`` with one random edge each."""
    components = sorted((sorted(c) for c in nx.connected_components(g)), key=lambda c: c[0])
    for a, b in zip(components, components[1:]):
        u = a[int(rng.integers(len(a)))]
        v = b[int(rng.integers(len(b)))]
        g.add_edge(u, v)
    return g


def block_probabilities(blocks, p_in, p_out):
    probs = np.full((blocks, blocks), p_out)
    np.fill_diagonal(probs, p_in)
    return probs


def make_sbm_graph(sizes, p_in=0.5, p_out=0.05, feature_centers=None, feature_noise=0.1,
                   labels=None, seed=None):
    """Connected SBM graph with per-community node features.

    Args:
        sizes (list): Community sizes.
        p_in (float): Edge probability inside a community.
        p_out (float): Edge probability between communities.
        feature_centers (array): (communities, d) centers; features are
            center + feature_noise·N(0, 1), clipped to [-2, 2]. When omitted
            (and no labels are given) every node gets a uniform value in [-2, 2].
        labels (list): One label string per community, for discrete features.
        seed (int): Random seed.

    Returns:
        Graph: Nodes ordered community by community.
    """
    rng = np.random.default_rng(seed)
    sizes = [int(s) for s in sizes]
    probs = block_probabilities(len(sizes), p_in, p_out)
    g = nx.stochastic_block_model(sizes, probs.tolist(), seed=int(rng.integers(2 ** 31)))
    g = nx.Graph(g)
    connect_components(g, rng)
    blocks = np.repeat(np.arange(len(sizes)), sizes)
    n = len(blocks)

    if labels is not None:
        if len(labels) != len(sizes):
            raise ValueError(f"need one label per community, got {len(labels)}")
        features = [str(labels[b]) for b in blocks]
    elif feature_centers is not None:
        centers = np.atleast_2d(np.asarray(feature_centers, dtype=float))
        if centers.shape[0] != len(sizes):
            centers = centers.T
        noise = feature_noise * rng.standard_normal((n, centers.shape[1]))
        features = np.clip(centers[blocks] + noise, *FEATURE_RANGE)
    else:
        features = rng.uniform(*FEATURE_RANGE, size=(n, 1))
    return Graph.from_networkx(g, features=features)


def make_cluster_corpus(per_type=5, corrupt_fraction=0.5, eta=0.3, seed=None,
                        p_in=0.5, p_out=0.05, sizes=(30, 40)):
    """Three graph types (1, 2 or 3 communities) with a corrupted share.

    ``corrupt_fraction`` of the graphs, chosen at random, receive ⌊eta·n⌋
    outliers whose features lie above the regular range.

    Returns:
        tuple: (graphs, labels) with labels[i] the type of graph i.
    """
    rng = np.random.default_rng(seed)
    graphs, labels = [], []
    for kind, centers in enumerate(CORPUS_TYPES):
        for _ in range(per_type):
            n = int(rng.choice(sizes))
            k = len(centers)
            community = [n // k + (1 if i < n % k else 0) for i in range(k)]
            g = make_sbm_graph(community, p_in, p_out, feature_centers=np.array(centers)[:, None],
                               seed=int(rng.integers(2 ** 31)))
            graphs.append(Graph(g.node_count, g.edges, g.features, g.node_count))
            labels.append(kind)

    corrupted = rng.choice(len(graphs), size=int(round(corrupt_fraction * len(graphs))),
                           replace=False)
    for idx in sorted(int(i) for i in corrupted):
        graphs[idx] = inject_outliers(graphs[idx], eta, seed=int(rng.integers(2 ** 31)),
                                      upper=FEATURE_RANGE[1])
    logger.info("built corpus of %d graphs (%d corrupted)", len(graphs), len(corrupted))
    return graphs, labels


def save_corpus(graphs, labels, directory):
    """Write graph_XX.json files plus labels.json ({"labels": {file name: type}})."""
    width = max(2, len(str(len(graphs) - 1)))
    names = [f"graph_{i:0{width}d}.json" for i in range(len(graphs))]
    for name, g in zip(names, graphs):
        save_graph(g, os.path.join(directory, name))
    write_json({'labels': {name: int(label) for name, label in zip(names, labels)}},
               os.path.join(directory, 'labels.json'))
    return names
