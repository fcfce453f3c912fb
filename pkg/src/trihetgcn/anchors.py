"""Node feature matrices: anchor-distance pseudo-features for attribute-free
graphs, and the on-disk feature format shared with intrinsic attributes."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import csgraph

from .graph import Graph, connected_components

MAGIC = b"THGFEAT1"
_HEADER = struct.Struct("<8sQQB")
KINDS = ("intrinsic", "anchor_distance")


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    values: np.ndarray
    kind: str = "intrinsic"
    anchor_ids: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if self.values.ndim != 2:
            raise ValueError("feature values must be a 2-d matrix")
        if (self.kind == "anchor_distance") != (self.anchor_ids is not None):
            raise ValueError("anchor_ids must be given exactly for anchor_distance features")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def select_anchors(g: Graph, rate: float = 0.15, cap: int = 150, coverage: float = 0.80,
                   s_min: int = 2, rule: str = "coverage") -> np.ndarray:
    """Top-degree nodes of the important components.

    ``rule="coverage"``: the largest components whose cumulative size first
    reaches ``coverage * N``. ``rule="percentile"``: every component at least
    as large as the 80th percentile of component sizes. Either way,
    components smaller than ``s_min`` never contribute. Each contributes
    ``max(1, floor(rate * |C|))`` anchors capped at ``cap``; degree ties go
    to the smaller node id.
    """
    if g.num_nodes == 0:
        raise ValueError("cannot select anchors in an empty graph")
    if not 0 < rate < 1:
        raise ValueError(f"rate must be in (0, 1), got {rate}")
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    if not 0 < coverage <= 1:
        raise ValueError(f"coverage must be in (0, 1], got {coverage}")

    comps = connected_components(g)
    if rule == "coverage":
        cum = np.cumsum(comps.sizes)
        n_important = int(np.searchsorted(cum, coverage * g.num_nodes - 1e-9)) + 1
        important = np.arange(min(n_important, comps.count))
    elif rule == "percentile":
        threshold = max(s_min, np.percentile(comps.sizes, 80))
        important = np.flatnonzero(comps.sizes >= threshold)
    else:
        raise ValueError(f"unknown anchor rule {rule!r}")
    important = [c for c in important if comps.sizes[c] >= s_min]

    anchors = []
    for c in important:
        members = comps.members(c)
        k = min(max(1, int(np.floor(rate * members.size))), cap)
        order = np.lexsort((members, -g.degrees[members]))
        anchors.append(members[order[:k]])
    if not anchors:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(anchors).astype(np.int64)


def build_anchor_features(g: Graph, anchors, eps: float = 0.01) -> FeatureMatrix:
    """Hop distances to each anchor, divided by the column's largest finite
    distance; unreachable cells become ``1 + eps``."""
    anchors = np.asarray(anchors, dtype=np.int64)
    if anchors.size == 0:
        raise ValueError("no anchors given")
    if anchors.min() < 0 or anchors.max() >= g.num_nodes:
        raise IndexError("anchor id out of range")
    dist = csgraph.shortest_path(g.adjacency, directed=False, unweighted=True,
                                 indices=anchors).T
    dist = np.ascontiguousarray(dist)
    reachable = np.isfinite(dist)
    colmax = np.where(reachable, dist, 0.0).max(axis=0)
    scale = np.where(colmax > 0, colmax, 1.0)
    values = np.where(reachable, dist / scale, 1.0 + eps)
    return FeatureMatrix(values, "anchor_distance", anchors.copy())


def anchor_features(g: Graph, rate: float = 0.15, cap: int = 150, coverage: float = 0.80,
                    s_min: int = 2, rule: str = "coverage", eps: float = 0.01) -> FeatureMatrix:
    return build_anchor_features(g, select_anchors(g, rate, cap, coverage, s_min, rule), eps)


def save_features(fm: FeatureMatrix, path) -> None:
    """Header (magic, N, k, kind), then k int64 anchor ids for
    anchor_distance features, then N*k little-endian float64 row-major."""
    n, k = fm.shape
    with Path(path).open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, n, k, KINDS.index(fm.kind)))
        if fm.anchor_ids is not None:
            fh.write(np.asarray(fm.anchor_ids, dtype="<i8").tobytes())
        fh.write(np.ascontiguousarray(fm.values, dtype="<f8").tobytes())


def load_features(path) -> FeatureMatrix:
    raw = Path(path).read_bytes()
    magic, n, k, kind = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a feature file")
    off = _HEADER.size
    anchors = None
    if KINDS[kind] == "anchor_distance":
        anchors = np.frombuffer(raw, dtype="<i8", count=k, offset=off).astype(np.int64)
        off += 8 * k
    if len(raw) - off != 8 * n * k:
        raise ValueError(f"{path}: truncated feature payload")
    values = np.frombuffer(raw, dtype="<f8", count=n * k, offset=off).reshape(n, k)
    return FeatureMatrix(values.astype(np.float64), KINDS[kind], anchors)


def export_features_csv(fm: FeatureMatrix, path, node_ids=None) -> None:
    n, k = fm.shape
    ids = np.arange(n) if node_ids is None else np.asarray(node_ids)
    with Path(path).open("w") as fh:
        fh.write("node_id," + ",".join(f"f{j}" for j in range(k)) + "\n")
        for i in range(n):
            fh.write(f"{ids[i]}," + ",".join(repr(float(x)) for x in fm.values[i]) + "\n")


def features_from_csv(path, g: Graph) -> FeatureMatrix:
    """Intrinsic attributes from ``node_id,v1,...,vk`` rows (optional header),
    reordered to the graph's compact ids. Rows for unknown ids are ignored."""
    with Path(path).open() as fh:
        first = fh.readline()
    skip = 0 if first.split(",")[0].strip().lstrip("-").isdigit() else 1
    data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    ids = data[:, 0].astype(np.int64)
    pos = np.searchsorted(g.node_ids, ids)
    pos = np.minimum(pos, g.num_nodes - 1)
    known = g.node_ids[pos] == ids
    values = np.full((g.num_nodes, data.shape[1] - 1), np.nan)
    values[pos[known]] = data[known, 1:]
    missing = np.flatnonzero(np.isnan(values).any(axis=1))
    if missing.size:
        raise ValueError(f"{path}: no feature row for {missing.size} node(s), "
                         f"e.g. id {g.node_ids[missing[0]]}")
    return FeatureMatrix(values, "intrinsic")
