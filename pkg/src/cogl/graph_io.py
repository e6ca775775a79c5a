"""Loading, saving, normalizing and subsampling node-classification graphs.

On-disk layout (all paths are independent files):

* ``edges.tsv``      one ``src<TAB>dst[<TAB>weight]`` per line, 0-based ids,
                     ``#`` comments; an edge listed once implies both
                     directions; weight defaults to 1.0.
* ``features.csv``   one row of comma-separated reals per node, row index
                     equals node id.
* ``labels.csv``     ``node_id,class_index`` per line; nodes absent from the
                     file are unlabeled (all-zero label row).
* ``splits.json``    object with integer arrays ``train``, ``val``, ``test``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ConfigError, GraphLoadError


@dataclass
class Graph:
    """An undirected feature graph with one-hot labels and disjoint splits."""

    adjacency: np.ndarray       # |V| x |V|, symmetric, zero diagonal, >= 0
    features: np.ndarray        # |V| x m
    labels: np.ndarray          # |V| x c, one-hot rows (all-zero = unlabeled)
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return self.labels.shape[1]

    def validate(self) -> None:
        n = self.n_nodes
        if self.adjacency.shape != (n, n):
            raise GraphLoadError(f"adjacency must be square, got {self.adjacency.shape}")
        if not np.allclose(self.adjacency, self.adjacency.T, atol=1e-12, rtol=0.0):
            raise GraphLoadError("adjacency is not symmetric")
        if np.any(np.diag(self.adjacency) != 0.0):
            raise GraphLoadError("adjacency diagonal must be exactly zero")
        if np.any(self.adjacency < 0.0):
            raise GraphLoadError("adjacency entries must be non-negative")
        for name, arr in (("features", self.features), ("labels", self.labels)):
            if arr.shape[0] != n:
                raise GraphLoadError(f"{name} has {arr.shape[0]} rows for {n} nodes")
            if not np.isfinite(arr).all():
                raise GraphLoadError(f"{name} contains non-finite values")
        sums = self.labels.sum(axis=1)
        labeled = sums != 0.0
        if not np.array_equal(self.labels[labeled].max(axis=1), np.ones(labeled.sum())) \
                or not np.array_equal(sums[labeled], np.ones(labeled.sum())):
            raise GraphLoadError("labeled rows of Y must be exactly one-hot")
        for name, mask in (("train", self.train_mask), ("val", self.val_mask),
                           ("test", self.test_mask)):
            if mask.shape != (n,) or mask.dtype != bool:
                raise GraphLoadError(f"{name} mask must be a boolean vector of length {n}")
        overlap = (self.train_mask.astype(int) + self.val_mask.astype(int)
                   + self.test_mask.astype(int))
        if np.any(overlap > 1):
            raise GraphLoadError("train/val/test masks overlap")


@dataclass
class NormalizedAdjacency:
    """Self-looped, symmetrically degree-scaled adjacency."""

    a_tilde: np.ndarray


def _parse_edges(edge_path, n_nodes: int) -> np.ndarray:
    adj = np.zeros((n_nodes, n_nodes))
    with open(edge_path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise GraphLoadError(
                    f"{edge_path}:{lineno}: expected 'src dst [weight]', got {raw.rstrip()!r}")
            try:
                src, dst = int(parts[0]), int(parts[1])
                weight = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError:
                raise GraphLoadError(
                    f"{edge_path}:{lineno}: malformed edge line {raw.rstrip()!r}") from None
            if not 0 <= src < n_nodes or not 0 <= dst < n_nodes:
                raise GraphLoadError(
                    f"{edge_path}:{lineno}: node id out of range 0..{n_nodes - 1}")
            if src == dst:
                raise GraphLoadError(f"{edge_path}:{lineno}: self-loop on node {src}")
            if weight <= 0.0 or not np.isfinite(weight):
                raise GraphLoadError(f"{edge_path}:{lineno}: edge weight must be positive")
            adj[src, dst] = weight
            adj[dst, src] = weight
    return adj


def _parse_labels(label_path, n_nodes: int) -> np.ndarray:
    pairs = {}
    n_classes = 0
    with open(label_path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            try:
                node, cls = int(parts[0]), int(parts[1])
            except (ValueError, IndexError):
                raise GraphLoadError(
                    f"{label_path}:{lineno}: expected 'node_id,class_index'") from None
            if not 0 <= node < n_nodes:
                raise GraphLoadError(f"{label_path}:{lineno}: node id {node} out of range")
            if cls < 0:
                raise GraphLoadError(f"{label_path}:{lineno}: negative class index")
            if node in pairs:
                raise GraphLoadError(
                    f"{label_path}:{lineno}: node {node} labeled twice (row not one-hot)")
            pairs[node] = cls
            n_classes = max(n_classes, cls + 1)
    if not pairs:
        raise GraphLoadError(f"{label_path}: no labels found")
    labels = np.zeros((n_nodes, n_classes))
    for node, cls in pairs.items():
        labels[node, cls] = 1.0
    return labels


def _parse_splits(split_path, n_nodes: int):
    try:
        with open(split_path, encoding="utf-8") as fh:
            blob = json.load(fh)
    except json.JSONDecodeError as exc:
        raise GraphLoadError(f"{split_path}: invalid JSON ({exc})") from None
    masks = {}
    for key in ("train", "val", "test"):
        if key not in blob:
            raise GraphLoadError(f"{split_path}: missing key {key!r}")
        mask = np.zeros(n_nodes, dtype=bool)
        for idx in blob[key]:
            if not isinstance(idx, int) or not 0 <= idx < n_nodes:
                raise GraphLoadError(f"{split_path}: bad node id {idx!r} in {key!r}")
            if mask[idx]:
                raise GraphLoadError(f"{split_path}: node {idx} repeated in {key!r}")
            mask[idx] = True
        masks[key] = mask
    return masks["train"], masks["val"], masks["test"]


def load_graph(edge_path, feature_path, label_path, split_path) -> Graph:
    """Load the four dataset files into a validated Graph."""
    try:
        frame = pd.read_csv(feature_path, header=None, dtype=np.float64,
                            float_precision="round_trip")
    except (OSError, ValueError, pd.errors.ParserError) as exc:
        raise GraphLoadError(f"{feature_path}: {exc}") from None
    features = np.ascontiguousarray(frame.to_numpy())
    n_nodes = features.shape[0]
    adjacency = _parse_edges(edge_path, n_nodes)
    labels = _parse_labels(label_path, n_nodes)
    train_mask, val_mask, test_mask = _parse_splits(split_path, n_nodes)
    graph = Graph(adjacency, features, labels, train_mask, val_mask, test_mask)
    graph.validate()
    return graph


def save_graph(graph: Graph, out_dir) -> None:
    """Write the four dataset files; load_graph(save_graph(g)) == g."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "edges.tsv", "w", encoding="utf-8") as fh:
        src_idx, dst_idx = np.nonzero(np.triu(graph.adjacency, k=1))
        for i, j in zip(src_idx, dst_idx):
            fh.write(f"{i}\t{j}\t{graph.adjacency[i, j]:.17g}\n")
    with open(out / "features.csv", "w", encoding="utf-8") as fh:
        for row in graph.features:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    with open(out / "labels.csv", "w", encoding="utf-8") as fh:
        for node in range(graph.n_nodes):
            if graph.labels[node].sum() != 0.0:
                fh.write(f"{node},{int(np.argmax(graph.labels[node]))}\n")
    splits = {
        "train": np.nonzero(graph.train_mask)[0].tolist(),
        "val": np.nonzero(graph.val_mask)[0].tolist(),
        "test": np.nonzero(graph.test_mask)[0].tolist(),
    }
    with open(out / "splits.json", "w", encoding="utf-8") as fh:
        json.dump(splits, fh)
        fh.write("\n")


def load_graph_dir(data_dir) -> Graph:
    """Load a dataset laid out as a directory of the four standard files."""
    d = Path(data_dir)
    return load_graph(d / "edges.tsv", d / "features.csv", d / "labels.csv",
                      d / "splits.json")


def normalize_adjacency(graph: Graph) -> NormalizedAdjacency:
    """Self-loop the adjacency and scale it by inverse square-root degrees.

    With I + A the self-looped adjacency and D its degree matrix, this is
    D^{-1/2} (I + A) D^{-1/2}; isolated nodes get degree 1 from the loop.
    """
    with_loops = graph.adjacency + np.eye(graph.n_nodes)
    inv_sqrt_deg = 1.0 / np.sqrt(with_loops.sum(axis=1))
    a_tilde = with_loops * inv_sqrt_deg[:, None] * inv_sqrt_deg[None, :]
    return NormalizedAdjacency(a_tilde)


def subsample_nodes(graph: Graph, k: int, seed: int) -> Graph:
    """Induced subgraph on k uniformly sampled nodes (ids kept sorted)."""
    if k <= 0:
        raise ConfigError(f"subsample_nodes: k must be positive, got {k}")
    if k > graph.n_nodes:
        raise ConfigError(f"subsample_nodes: k={k} exceeds |V|={graph.n_nodes}")
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(graph.n_nodes, size=k, replace=False))
    return Graph(
        adjacency=np.ascontiguousarray(graph.adjacency[np.ix_(keep, keep)]),
        features=graph.features[keep].copy(),
        labels=graph.labels[keep].copy(),
        train_mask=graph.train_mask[keep].copy(),
        val_mask=graph.val_mask[keep].copy(),
        test_mask=graph.test_mask[keep].copy(),
    )
