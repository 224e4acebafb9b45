"""Graph containers, JSON-lines persistence, synthetic generators, and
brute-force combinatorial oracles used as ground truth.

Graphs are undirected, stored without self-loops; neighborhoods always
include the node itself. Node indices are dense in [0, num_nodes).
"""

import itertools
import json

import numpy as np

__all__ = [
    "Graph", "Dataset", "GraphFileError", "neighborhood", "count_triangles",
    "relabel", "are_isomorphic", "gen_er_triangle_dataset", "gen_regular_pair",
    "load_graphs", "save_graphs", "split_path",
]


class GraphFileError(ValueError):
    """Malformed dataset file; message carries the offending line number."""


class Graph:
    """Undirected graph with per-node feature vectors and an optional target.

    Edges are normalized to sorted (u, v) pairs with u < v, deduplicated,
    and kept in sorted order, so two equal graphs compare equal
    structurally. Instances are immutable by convention.
    """

    def __init__(self, num_nodes, edges, node_features, target=None):
        self.num_nodes = int(num_nodes)
        seen = set()
        norm = []
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop ({u},{v}) not allowed")
            if not (0 <= u < self.num_nodes and 0 <= v < self.num_nodes):
                raise ValueError(f"edge ({u},{v}) out of range for {self.num_nodes} nodes")
            key = (min(u, v), max(u, v))
            if key not in seen:
                seen.add(key)
                norm.append(key)
        self.edges = sorted(norm)
        feats = np.asarray(node_features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != self.num_nodes:
            raise ValueError(
                f"node_features must be ({self.num_nodes}, d), got {feats.shape}")
        self.node_features = feats
        self.target = target
        self._adj = None
        self._msg = None

    @property
    def adjacency(self):
        """Sorted adjacency lists, built lazily."""
        if self._adj is None:
            adj = [[] for _ in range(self.num_nodes)]
            for u, v in self.edges:
                adj[u].append(v)
                adj[v].append(u)
            self._adj = [sorted(a) for a in adj]
        return self._adj

    def message_index(self):
        """(src, dst) index arrays with one entry per (v, u in N(v)) pair.

        dst runs over nodes in ascending order; within a node, sources
        follow the canonical sorted neighborhood (self included).
        """
        if self._msg is None:
            src, dst = [], []
            for v in range(self.num_nodes):
                for u in neighborhood(self, v):
                    src.append(u)
                    dst.append(v)
            self._msg = (np.array(src, dtype=np.intp), np.array(dst, dtype=np.intp))
        return self._msg

    def degrees(self):
        return np.array([len(a) for a in self.adjacency])

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.num_nodes == other.num_nodes and self.edges == other.edges
                and np.array_equal(self.node_features, other.node_features)
                and self.target == other.target)

    def __repr__(self):
        return f"Graph(n={self.num_nodes}, m={len(self.edges)}, target={self.target})"


class Dataset:
    """A list of graphs plus disjoint train/valid/test index splits."""

    def __init__(self, graphs, split=None, metadata=None):
        self.graphs = list(graphs)
        if split is None:
            split = {"train": list(range(len(self.graphs))), "valid": [], "test": []}
        self.split = split
        self.metadata = metadata or {}
        covered = sorted(split["train"] + split["valid"] + split["test"])
        if covered != list(range(len(self.graphs))):
            raise ValueError("splits must be disjoint and cover all graph indices")

    def subset(self, name):
        return [self.graphs[i] for i in self.split[name]]

    def __len__(self):
        return len(self.graphs)


def neighborhood(graph, v):
    """Sorted list of v's neighbors including v itself."""
    if not 0 <= v < graph.num_nodes:
        raise ValueError(f"node {v} out of range for {graph.num_nodes} nodes")
    return sorted(graph.adjacency[v] + [v])


def count_triangles(graph):
    """Exact triangle count by enumerating node triples. O(n^3), fine at n <= 30."""
    adj = [set(a) for a in graph.adjacency]
    count = 0
    for i, j, k in itertools.combinations(range(graph.num_nodes), 3):
        if j in adj[i] and k in adj[i] and k in adj[j]:
            count += 1
    return count


def relabel(graph, permutation):
    """Relabel nodes: node v becomes permutation[v], features move along."""
    perm = list(permutation)
    if sorted(perm) != list(range(graph.num_nodes)):
        raise ValueError("permutation must be a bijection on node indices")
    edges = [(perm[u], perm[v]) for u, v in graph.edges]
    feats = np.empty_like(graph.node_features)
    for v in range(graph.num_nodes):
        feats[perm[v]] = graph.node_features[v]
    return Graph(graph.num_nodes, edges, feats, target=graph.target)


def are_isomorphic(g1, g2):
    """Brute-force isomorphism test over all n! relabelings. Guarded to n <= 8."""
    if g1.num_nodes != g2.num_nodes:
        return False
    if g1.num_nodes > 8:
        raise ValueError("brute-force isomorphism only supported for n <= 8")
    if len(g1.edges) != len(g2.edges):
        return False
    target = set(g2.edges)
    for perm in itertools.permutations(range(g1.num_nodes)):
        if all((min(perm[u], perm[v]), max(perm[u], perm[v])) in target
               for u, v in g1.edges):
            return True
    return False


def gen_er_triangle_dataset(count, n_nodes=10, p=0.3, seed=0,
                            split_fracs=(0.8, 0.1, 0.1)):
    """Erdos-Renyi graphs with constant feature [1.0]; target = triangle count.

    Deterministic given the seed. Splits are contiguous index ranges of
    the (already random) generation order.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    graphs = []
    for _ in range(count):
        edges = [(u, v) for u, v in itertools.combinations(range(n_nodes), 2)
                 if rng.random() < p]
        g = Graph(n_nodes, edges, np.ones((n_nodes, 1)))
        g.target = float(count_triangles(g))
        graphs.append(g)
    n_train = int(round(split_fracs[0] * count))
    n_valid = int(round(split_fracs[1] * count))
    split = {
        "train": list(range(0, n_train)),
        "valid": list(range(n_train, n_train + n_valid)),
        "test": list(range(n_train + n_valid, count)),
    }
    meta = {"generator": "er-triangles", "seed": seed, "n_nodes": n_nodes,
            "p": p, "count": count}
    return Dataset(graphs, split, meta)


def gen_regular_pair():
    """(K33, triangular prism): 3-regular on 6 nodes, non-isomorphic,
    indistinguishable by color refinement from uniform initial colors.

    Targets carry the triangle counts (0 and 2) that tell them apart.
    """
    k33_edges = [(u, v) for u in range(3) for v in range(3, 6)]
    prism_edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5),
                   (0, 3), (1, 4), (2, 5)]
    feats = np.ones((6, 1))
    k33 = Graph(6, k33_edges, feats, target=0.0)
    prism = Graph(6, prism_edges, feats, target=2.0)
    return k33, prism


def split_path(path):
    """Sidecar location for a dataset's split file."""
    return str(path) + ".split.json"


def save_graphs(dataset, path):
    """Write one JSON object per graph, plus a split sidecar file."""
    with open(path, "w") as fh:
        for g in dataset.graphs:
            rec = {
                "num_nodes": g.num_nodes,
                "edges": [[u, v] for u, v in g.edges],
                "node_features": g.node_features.tolist(),
                "target": g.target,
            }
            fh.write(json.dumps(rec) + "\n")
    with open(split_path(path), "w") as fh:
        json.dump(dataset.split, fh)


def load_graphs(path):
    """Read a JSON-lines dataset; errors carry the 1-based line number."""
    graphs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise GraphFileError(f"line {lineno}: malformed JSON ({exc})") from exc
            try:
                g = Graph(rec["num_nodes"], rec["edges"], rec["node_features"],
                          target=rec.get("target"))
            except (KeyError, ValueError, TypeError) as exc:
                raise GraphFileError(f"line {lineno}: {exc}") from exc
            graphs.append(g)
    try:
        with open(split_path(path)) as fh:
            split = json.load(fh)
    except FileNotFoundError:
        split = None
    return Dataset(graphs, split)
