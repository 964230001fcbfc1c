"""Undirected graphs, adjacency normalization and one-hop propagation."""
from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components as _cc

logger = logging.getLogger(__name__)

SYMMETRIC = "symmetric"
COLUMN = "column"


class EdgeListError(ValueError):
    """Raised when an edge list cannot be parsed or yields no edges."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Graph:
    """Unweighted undirected graph.

    ``edges`` is an ``(m, 2)`` integer array with ``u < v`` on every row and
    no repeated rows. ``labels`` maps the original node tokens to indices.
    """

    node_count: int
    edges: np.ndarray
    labels: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            if np.any(edges[:, 0] >= edges[:, 1]):
                raise ValueError("edges must be stored canonically with u < v")
            if edges.min() < 0 or edges.max() >= self.node_count:
                raise ValueError("edge endpoint out of range")
        object.__setattr__(self, "edges", edges)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @classmethod
    def from_edges(cls, node_count: int, pairs: Iterable[tuple[int, int]], labels=None) -> "Graph":
        """Build a graph from arbitrary index pairs, canonicalizing and dropping loops/duplicates."""
        arr = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
        arr = arr[arr[:, 0] != arr[:, 1]]
        arr = np.sort(arr, axis=1)
        arr = np.unique(arr, axis=0)
        if labels is None:
            labels = {str(i): i for i in range(node_count)}
        return cls(node_count, arr, dict(labels))

    def adjacency(self) -> sp.csr_matrix:
        n = self.node_count
        u, v = self.edges[:, 0], self.edges[:, 1]
        rows = np.concatenate([u, v])
        cols = np.concatenate([v, u])
        data = np.ones(len(rows))
        return sp.csr_matrix((data, (rows, cols)), shape=(n, n))

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.node_count, dtype=np.int64)
        np.add.at(deg, self.edges[:, 0], 1)
        np.add.at(deg, self.edges[:, 1], 1)
        return deg


def load_edge_list(stream: TextIO | str, directed: bool = False) -> Graph:
    """Parse a whitespace-separated edge list.

    Tokens are interned to contiguous indices in first-appearance order.
    Lines starting with ``#`` and blank lines are skipped. Duplicate edges and
    self-loops are dropped. With ``directed=True`` each line is read as an arc;
    reciprocal arcs collapse into one undirected edge all the same, and the
    number merged this way is reported in ``Graph.stats``.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    labels: dict[str, int] = {}
    seen: set[tuple[int, int]] = set()
    arcs: set[tuple[int, int]] = set()
    pairs = []
    duplicates = self_loops = reciprocal = 0
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise EdgeListError(f"expected two node tokens, found {len(tokens)}", lineno)
        a, b = (labels.setdefault(t, len(labels)) for t in tokens)
        if a == b:
            self_loops += 1
            continue
        if directed:
            if (a, b) in arcs:
                duplicates += 1
                continue
            arcs.add((a, b))
            if (b, a) in arcs:
                reciprocal += 1
                continue
        key = (min(a, b), max(a, b))
        if key in seen:
            duplicates += 1
            continue
        seen.add(key)
        pairs.append(key)
    if not pairs:
        raise EdgeListError("graph has no edges after dropping self-loops")
    stats = {"edges": len(pairs), "duplicates": duplicates, "self_loops": self_loops}
    if directed:
        stats["reciprocal_merged"] = reciprocal
    logger.info("loaded %d nodes, %s", len(labels), stats)
    edges = np.asarray(pairs, dtype=np.int64)
    edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
    return Graph(len(labels), edges, labels, stats)


@dataclass(frozen=True, eq=False)
class NormalizedGraph:
    """Normalized adjacency matrix in CSR form.

    ``mode`` is ``"symmetric"`` for D^-1/2 A D^-1/2 or ``"column"`` for A D^-1.
    Zero-degree nodes keep all-zero rows and columns.
    """

    mode: str
    matrix: sp.csr_matrix
    degrees: np.ndarray
    transposed: sp.csr_matrix

    @property
    def node_count(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def normalize(graph: Graph, mode: str = SYMMETRIC) -> NormalizedGraph:
    mode = {"sym": SYMMETRIC, "col": COLUMN}.get(mode, mode)
    if mode not in (SYMMETRIC, COLUMN):
        raise ValueError(f"unknown normalization {mode!r}")
    n = graph.node_count
    deg = graph.degrees()
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    rows = np.concatenate([u, v])
    cols = np.concatenate([v, u])
    with np.errstate(divide="ignore"):
        inv = np.where(deg > 0, 1.0 / deg, 0.0)
    if mode == SYMMETRIC:
        inv_sqrt = np.sqrt(inv)
        data = inv_sqrt[rows] * inv_sqrt[cols]
    else:
        data = inv[cols]
    matrix = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    matrix.sort_indices()
    transposed = matrix.T.tocsr()
    transposed.sort_indices()
    return NormalizedGraph(mode, matrix, deg, transposed)


def _check_length(graph: NormalizedGraph, signal) -> np.ndarray:
    signal = np.asarray(signal, dtype=float)
    if signal.shape[0] != graph.node_count:
        raise ValueError(f"signal length {signal.shape[0]} != node count {graph.node_count}")
    return signal


def spmv(graph: NormalizedGraph, signal) -> np.ndarray:
    """One-hop propagation ``A_hat @ q``."""
    return graph.matrix @ _check_length(graph, signal)


def spmv_transpose(graph: NormalizedGraph, signal) -> np.ndarray:
    """Adjoint propagation ``A_hat.T @ g``."""
    return graph.transposed @ _check_length(graph, signal)


def connected_components(graph: Graph) -> np.ndarray:
    """Component label per node, numbered from 0."""
    _, labels = _cc(graph.adjacency(), directed=False)
    return labels


def smallest_component_size(graph: Graph) -> int:
    labels = connected_components(graph)
    return int(np.bincount(labels).min())
