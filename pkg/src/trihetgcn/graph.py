"""Immutable undirected simple graphs in CSR form, plus the structural
queries the rest of the package leans on (components, common neighbours,
degree differences, transitivity, ego sampling)."""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from . import rng

log = logging.getLogger(__name__)

_SPLIT = re.compile(r"[,\s]+")


class GraphFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Graph:
    num_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    degrees: np.ndarray
    # original id of each compact node, ascending
    node_ids: np.ndarray = field(repr=False)

    @classmethod
    def from_edges(cls, num_nodes: int, edges, node_ids=None) -> "Graph":
        """Build a graph from an (E, 2) integer array; self-loops and
        duplicate/reversed edges are dropped silently."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
            raise ValueError("edge endpoint out of range")
        edges = _canonical(edges)
        src = np.concatenate([edges[:, 0], edges[:, 1]])
        dst = np.concatenate([edges[:, 1], edges[:, 0]])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        degrees = np.bincount(src, minlength=num_nodes).astype(np.int64)
        offsets = np.zeros(num_nodes + 1, dtype=np.int64)
        np.cumsum(degrees, out=offsets[1:])
        if node_ids is None:
            node_ids = np.arange(num_nodes, dtype=np.int64)
        node_ids = np.asarray(node_ids, dtype=np.int64)
        if node_ids.shape != (num_nodes,):
            raise ValueError("node_ids must have one entry per node")
        return cls(int(num_nodes), offsets, dst, degrees, node_ids)

    @property
    def num_edges(self) -> int:
        return int(self.col_indices.size // 2)

    def neighbors(self, i: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[i]:self.row_offsets[i + 1]]

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(self.col_indices.size, dtype=np.float64)
        return sp.csr_matrix((data, self.col_indices, self.row_offsets),
                             shape=(self.num_nodes, self.num_nodes))

    @cached_property
    def edges(self) -> np.ndarray:
        """Undirected edges as an (E, 2) array with ``u < v``, lexicographic."""
        src = np.repeat(np.arange(self.num_nodes, dtype=np.int64), self.degrees)
        keep = src < self.col_indices
        return np.stack([src[keep], self.col_indices[keep]], axis=1)

    @cached_property
    def edge_keys(self) -> np.ndarray:
        """Sorted ``u * N + v`` keys of the canonical edges."""
        e = self.edges
        return np.sort(e[:, 0] * self.num_nodes + e[:, 1])

    def has_edges(self, pairs) -> np.ndarray:
        pairs = _canonical_pairs(pairs)
        keys = pairs[:, 0] * self.num_nodes + pairs[:, 1]
        if self.edge_keys.size == 0:
            return np.zeros(keys.size, dtype=bool)
        pos = np.minimum(np.searchsorted(self.edge_keys, keys), self.edge_keys.size - 1)
        return self.edge_keys[pos] == keys

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.int64(self.num_nodes).tobytes())
        h.update(self.row_offsets.astype("<i8").tobytes())
        h.update(self.col_indices.astype("<i8").tobytes())
        return h.hexdigest()[:16]

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.num_nodes == other.num_nodes
                and np.array_equal(self.row_offsets, other.row_offsets)
                and np.array_equal(self.col_indices, other.col_indices)
                and np.array_equal(self.node_ids, other.node_ids))

    __hash__ = None

    def _check(self, *nodes):
        for n in nodes:
            if not 0 <= n < self.num_nodes:
                raise IndexError(f"node {n} out of range [0, {self.num_nodes})")


def _canonical(edges: np.ndarray) -> np.ndarray:
    edges = edges[edges[:, 0] != edges[:, 1]]
    edges = np.sort(edges, axis=1)
    if edges.size == 0:
        return edges.reshape(0, 2)
    return np.unique(edges, axis=0)


def _canonical_pairs(pairs) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return np.sort(pairs, axis=1)


@dataclass(frozen=True)
class EdgeListReport:
    graph: Graph
    self_loops: int
    duplicates: int


def parse_edge_list(path, fmt: str | None = None) -> EdgeListReport:
    """Read ``u<sep>v`` lines (whitespace or comma separated, ``#`` comments)."""
    path = Path(path)
    if fmt not in (None, "tsv", "csv"):
        raise ValueError(f"unknown edge-list format {fmt!r}")
    pairs = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p for p in _SPLIT.split(line) if p]
            if len(parts) < 2:
                raise GraphFormatError(f"{path}:{lineno}: expected two node ids, got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphFormatError(f"{path}:{lineno}: non-integer node id in {line!r}") from None
            if u < 0 or v < 0:
                raise GraphFormatError(f"{path}:{lineno}: negative node id in {line!r}")
            pairs.append((u, v))
    if not pairs:
        raise GraphFormatError(f"{path}: no edges")
    raw = np.asarray(pairs, dtype=np.int64)
    ids, compact = np.unique(raw, return_inverse=True)
    compact = compact.reshape(-1, 2)
    loops = int(np.count_nonzero(compact[:, 0] == compact[:, 1]))
    g = Graph.from_edges(ids.size, compact, node_ids=ids)
    dups = len(pairs) - loops - g.num_edges
    return EdgeListReport(g, loops, dups)


def load_edge_list(path, fmt: str | None = None) -> Graph:
    rep = parse_edge_list(path, fmt)
    if rep.self_loops:
        log.warning("%s: dropped %d self-loop(s)", path, rep.self_loops)
    if rep.duplicates:
        log.warning("%s: merged %d duplicate edge(s)", path, rep.duplicates)
    return rep.graph


def save_edge_list(g: Graph, path, sep: str = "\t") -> None:
    """Write edges with their original ids (isolated nodes are not representable)."""
    e = g.node_ids[g.edges]
    with Path(path).open("w") as fh:
        fh.write(f"# nodes={g.num_nodes} edges={g.num_edges} hash={g.fingerprint()}\n")
        for u, v in e:
            fh.write(f"{u}{sep}{v}\n")


@dataclass(frozen=True, eq=False)
class ComponentLabeling:
    label: np.ndarray
    sizes: np.ndarray

    @property
    def count(self) -> int:
        return int(self.sizes.size)

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.label == c)


def connected_components(g: Graph) -> ComponentLabeling:
    """Components relabelled so that 0 is the largest; equal sizes are
    ordered by their smallest node id."""
    n, raw = csgraph.connected_components(g.adjacency, directed=False)
    sizes = np.bincount(raw, minlength=n)
    first = np.full(n, g.num_nodes, dtype=np.int64)
    np.minimum.at(first, raw, np.arange(g.num_nodes))
    order = np.lexsort((first, -sizes))
    relabel = np.empty(n, dtype=np.int64)
    relabel[order] = np.arange(n)
    return ComponentLabeling(relabel[raw], sizes[order].astype(np.int64))


def common_neighbor_count(g: Graph, i: int, j: int) -> int:
    g._check(i, j)
    return int(np.intersect1d(g.neighbors(i), g.neighbors(j), assume_unique=True).size)


def degree_difference(g: Graph, i: int, j: int) -> int:
    g._check(i, j)
    return int(abs(g.degrees[i] - g.degrees[j]))


def triangle_count(g: Graph) -> int:
    a = g.adjacency
    return int(round((a @ a).multiply(a).sum() / 6))


def global_clustering_coefficient(g: Graph) -> float:
    """Transitivity: 3 x triangles over connected triples (0 with no triples)."""
    d = g.degrees.astype(np.float64)
    triples = float(np.sum(d * (d - 1) / 2))
    if triples == 0:
        return 0.0
    return 3.0 * triangle_count(g) / triples


def degree_cv(g: Graph) -> float:
    if g.num_nodes == 0:
        raise ValueError("degree CV undefined for an empty graph")
    d = g.degrees.astype(np.float64)
    mean = d.mean()
    if mean == 0:
        raise ValueError("degree CV undefined for a graph without edges")
    return float(d.std() / mean)


def bfs_levels(g: Graph, root: int, max_hops: int | None = None) -> np.ndarray:
    """Hop distance from ``root`` to every node (-1 when unreachable or
    beyond ``max_hops``)."""
    g._check(root)
    dist = np.full(g.num_nodes, -1, dtype=np.int64)
    dist[root] = 0
    frontier = np.array([root], dtype=np.int64)
    level = 0
    while frontier.size and (max_hops is None or level < max_hops):
        starts, stops = g.row_offsets[frontier], g.row_offsets[frontier + 1]
        nbrs = np.concatenate([g.col_indices[a:b] for a, b in zip(starts, stops)])
        nbrs = np.unique(nbrs)
        nbrs = nbrs[dist[nbrs] < 0]
        level += 1
        dist[nbrs] = level
        frontier = nbrs
    return dist


def induced_subgraph(g: Graph, nodes) -> Graph:
    nodes = np.unique(np.asarray(nodes, dtype=np.int64))
    sub = g.adjacency[nodes][:, nodes].tocoo()
    edges = np.stack([sub.row, sub.col], axis=1)
    return Graph.from_edges(nodes.size, edges, node_ids=g.node_ids[nodes])


def khop_ego_subgraph(g: Graph, seed: int, hops: int, root: int | None = None) -> Graph:
    """Induced subgraph on everything within ``hops`` of a root drawn
    uniformly with ``rng.stream(seed, EGO)`` (or the given ``root``)."""
    if hops < 1:
        raise ValueError("hops must be >= 1")
    if root is None:
        root = int(rng.stream(seed, rng.EGO).integers(g.num_nodes))
    dist = bfs_levels(g, root, hops)
    return induced_subgraph(g, np.flatnonzero(dist >= 0))
