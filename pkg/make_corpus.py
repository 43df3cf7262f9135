import argparse  # Import argparse to handle command-line arguments.
import os  # Import os to create the output directory.

from fpgw.config import load_defaults  # Solver and generator defaults from config/solver_defaults.yml.
from fpgw.graphs import extract_bfs_subgraph, save_graph  # BFS subgraph sampler and graph JSON writer.
from fpgw.storage import write_mapping  # Ground-truth mapping writer.
from fpgw.synthetic import make_cluster_corpus, make_sbm_graph, save_corpus  # Graph generators.


def make_fixtures(output_dir='data', seed=0, per_type=5, corrupt_fraction=0.5, eta=0.3, pairs=10):
    """Generate the matching pairs and the clustering corpus used by the experiments."""
    # --- Argument Explanations ---
    # output_dir (str): Root directory; 'matching/' and 'clustering/' are created inside it.
    # seed (int): Base seed; every generated file is a pure function of it.
    # per_type (int): Graphs per corpus type in the clustering corpus.
    # corrupt_fraction (float): Share of corpus graphs that receive outlier nodes.
    # eta (float): Outlier ratio for corrupted graphs.
    # pairs (int): Number of (subgraph, graph) matching pairs.
    defaults = load_defaults()['synth']  # Read the generator defaults.

    # --- Matching pairs ---
    matching_dir = os.path.join(output_dir, 'matching')  # Folder for the matching pairs.
    os.makedirs(matching_dir, exist_ok=True)  # Create it if needed.
    for k in range(pairs):  # One SBM graph and one BFS subgraph per pair.
        g = make_sbm_graph([10, 10, 10], defaults['sbm_p_in'], defaults['sbm_p_out'], seed=seed + k)
        sub, mapping = extract_bfs_subgraph(g, defaults['bfs_fraction'], seed=seed + k)
        save_graph(g, os.path.join(matching_dir, f"pair{k:02d}_target.json"))  # Full graph.
        save_graph(sub, os.path.join(matching_dir, f"pair{k:02d}_source.json"))  # Subgraph.
        write_mapping(mapping.tolist(), os.path.join(matching_dir, f"pair{k:02d}_mapping.json"))

    # --- Clustering corpus ---
    clustering_dir = os.path.join(output_dir, 'clustering')  # Folder for the corpus.
    os.makedirs(clustering_dir, exist_ok=True)
    graphs, labels = make_cluster_corpus(per_type, corrupt_fraction, eta, seed=seed)
    names = save_corpus(graphs, labels, clustering_dir)  # graph_XX.json plus labels.json.

    print(f"Wrote {pairs} matching pairs to {matching_dir}")  # Summary for the user.
    print(f"Wrote {len(names)} corpus graphs to {clustering_dir}")


if __name__ == '__main__':  # This block runs only when this script is executed directly.
    parser = argparse.ArgumentParser(description="Generate synthetic matching and clustering fixtures.")
    parser.add_argument('--out', default='data', help="Output root directory.")
    parser.add_argument('--seed', type=int, default=0, help="Base random seed.")
    parser.add_argument('--per-type', type=int, default=5, help="Corpus graphs per type.")
    parser.add_argument('--corrupt-fraction', type=float, default=0.5, help="Share of corrupted corpus graphs.")
    parser.add_argument('--eta', type=float, default=0.3, help="Outlier ratio of corrupted graphs.")
    parser.add_argument('--pairs', type=int, default=10, help="Number of matching pairs.")

    args = parser.parse_args()  # Parse the arguments provided by the user.
    make_fixtures(args.out, args.seed, args.per_type, args.corrupt_fraction, args.eta, args.pairs)
