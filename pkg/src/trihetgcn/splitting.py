"""Seeded train/validation/test edge splits with matched negative samples."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng
from .graph import Graph

SECTIONS = ("train_pos", "val_pos", "val_neg", "test_pos", "test_neg")
DEFAULT_RATIOS = (0.85, 0.05, 0.10)


class NegativeSamplingError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class LinkSplit:
    graph: Graph
    train_pos: np.ndarray
    val_pos: np.ndarray
    val_neg: np.ndarray
    test_pos: np.ndarray
    test_neg: np.ndarray
    train_graph: Graph
    seed: int
    ratios: tuple[float, float, float]

    def pairs_and_labels(self, part: str) -> tuple[np.ndarray, np.ndarray]:
        """Concatenated positives then negatives for ``val`` or ``test``."""
        if part not in ("val", "test"):
            raise ValueError(f"part must be 'val' or 'test', not {part!r}")
        pos, neg = getattr(self, f"{part}_pos"), getattr(self, f"{part}_neg")
        labels = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
        return np.concatenate([pos, neg]), labels

    def eval_hash(self) -> str:
        """Identity of the test pairs, for cross-method comparisons."""
        h = hashlib.sha256()
        h.update(self.test_pos.astype("<i8").tobytes())
        h.update(self.test_neg.astype("<i8").tobytes())
        return h.hexdigest()[:16]

    def __eq__(self, other):
        if not isinstance(other, LinkSplit):
            return NotImplemented
        return (self.seed == other.seed and self.ratios == other.ratios
                and self.graph == other.graph
                and all(np.array_equal(getattr(self, s), getattr(other, s)) for s in SECTIONS))

    __hash__ = None


def _round(x: float) -> int:
    return int(np.floor(x + 0.5))


def _keys(pairs: np.ndarray, n: int) -> np.ndarray:
    return pairs[:, 0] * n + pairs[:, 1]


def _sample_non_edges(g: Graph, count: int, gen: np.random.Generator,
                      exclude: np.ndarray, budget: int) -> np.ndarray:
    """Rejection-sample ``count`` distinct canonical non-edges of ``g``
    avoiding the sorted key array ``exclude``."""
    n = g.num_nodes
    out = np.empty((0, 2), dtype=np.int64)
    taken = np.asarray(exclude, dtype=np.int64)
    draws = 0
    while len(out) < count:
        if draws >= budget:
            raise NegativeSamplingError(
                f"needed {count} negatives, found {len(out)} within {budget} draws; "
                "graph is too dense for rejection sampling")
        batch = min(2 * (count - len(out)) + 16, budget - draws)
        draws += batch
        cand = gen.integers(0, n, size=(batch, 2), dtype=np.int64)
        cand = cand[cand[:, 0] != cand[:, 1]]
        cand = np.sort(cand, axis=1)
        cand = cand[~g.has_edges(cand)]
        keys = _keys(cand, n)
        fresh = ~np.isin(keys, taken)
        cand, keys = cand[fresh], keys[fresh]
        _, first = np.unique(keys, return_index=True)
        first.sort()
        cand = cand[first][: count - len(out)]
        out = np.concatenate([out, cand])
        taken = np.concatenate([taken, _keys(cand, n)])
    return out


def random_link_split(g: Graph, ratios=DEFAULT_RATIOS, seed: int = 42) -> LinkSplit:
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be three positive fractions, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    m = g.num_edges
    n_val, n_test = _round(ratios[1] * m), _round(ratios[2] * m)
    n_train = m - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(f"graph with {m} edges is too small for ratios {ratios}")

    gen = rng.stream(seed, rng.SPLIT)
    perm = gen.permutation(m)
    edges = g.edges
    val_pos = edges[perm[:n_val]]
    test_pos = edges[perm[n_val:n_val + n_test]]
    train_pos = edges[np.sort(perm[n_val + n_test:])]

    neg = _sample_non_edges(g, n_val + n_test, gen, np.empty(0, np.int64), 100 * m)
    train_graph = Graph.from_edges(g.num_nodes, train_pos, node_ids=g.node_ids)
    return LinkSplit(g, train_pos, val_pos, neg[:n_val], test_pos, neg[n_val:],
                     train_graph, int(seed), ratios)


def sample_training_negatives(split: LinkSplit, epoch: int, stream: int = 0) -> np.ndarray:
    """``len(train_pos)`` fresh non-edges of the full graph for one epoch,
    disjoint from the held-out negatives. ``stream`` separates repeats."""
    g = split.graph
    gen = rng.stream(split.seed, rng.NEGATIVES, stream, epoch)
    held = np.sort(np.concatenate([_keys(split.val_neg, g.num_nodes),
                                   _keys(split.test_neg, g.num_nodes)]))
    return _sample_non_edges(g, len(split.train_pos), gen, held, 100 * g.num_edges)


def save_split(split: LinkSplit, path) -> None:
    with Path(path).open("w") as fh:
        fh.write(f"# graph_hash: {split.graph.fingerprint()}\n")
        fh.write(f"# num_nodes: {split.graph.num_nodes}\n")
        fh.write(f"# ratios: {' '.join(repr(r) for r in split.ratios)}\n")
        fh.write(f"# seed: {split.seed}\n")
        fh.write(f"# rng: {rng.RNG_ID}\n")
        for name in SECTIONS:
            pairs = getattr(split, name)
            fh.write(f"[{name}] {len(pairs)}\n")
            for u, v in pairs:
                fh.write(f"{u} {v}\n")


def load_split(path, g: Graph) -> LinkSplit:
    header: dict[str, str] = {}
    sections: dict[str, list] = {}
    current = None
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                header[key.strip()] = val.strip()
            elif line.startswith("["):
                current = line[1:line.index("]")]
                sections[current] = []
            else:
                u, v = line.split()
                sections[current].append((int(u), int(v)))
    if header.get("graph_hash") != g.fingerprint():
        raise ValueError(f"{path}: split was made for graph {header.get('graph_hash')}, "
                         f"not {g.fingerprint()}")
    arrs = {s: np.asarray(sections.get(s, []), dtype=np.int64).reshape(-1, 2) for s in SECTIONS}
    ratios = tuple(float(r) for r in header["ratios"].split())
    train_graph = Graph.from_edges(g.num_nodes, arrs["train_pos"], node_ids=g.node_ids)
    return LinkSplit(g, arrs["train_pos"], arrs["val_pos"], arrs["val_neg"],
                     arrs["test_pos"], arrs["test_neg"], train_graph,
                     int(header["seed"]), ratios)
