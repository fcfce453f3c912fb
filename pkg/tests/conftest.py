import numpy as np
import pytest
from hypothesis import strategies as st

from trihetgcn.graph import Graph


def path(n):
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def cycle(n):
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def star(leaves):
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def complete(n):
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def erdos_renyi(n, p, seed):
    gen = np.random.default_rng(seed)
    upper = np.triu(gen.random((n, n)) < p, 1)
    return Graph.from_edges(n, np.argwhere(upper))


def planted(n=200, blocks=4, p_in=0.15, p_out=0.01, seed=0):
    gen = np.random.default_rng(seed)
    lab = np.arange(n) * blocks // n
    p = np.where(lab[:, None] == lab[None, :], p_in, p_out)
    return Graph.from_edges(n, np.argwhere(np.triu(gen.random((n, n)) < p, 1)))


@st.composite
def graphs(draw, min_nodes=2, max_nodes=30, min_edges=0):
    """Random simple graphs as (N, edge array)."""
    n = draw(st.integers(min_nodes, max_nodes))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), min_size=min_edges, unique=True,
                           max_size=len(pairs)))
    return Graph.from_edges(n, np.array(chosen, dtype=np.int64).reshape(-1, 2))


@pytest.fixture
def triangle():
    return complete(3)


def split_violations(g, split):
    """Every broken split invariant, as readable strings."""
    bad = []
    n, m = g.num_nodes, g.num_edges
    keys = {name: set(map(tuple, np.sort(getattr(split, name), axis=1).tolist()))
            for name in ("train_pos", "val_pos", "test_pos", "val_neg", "test_neg")}
    pos = keys["train_pos"] | keys["val_pos"] | keys["test_pos"]
    if sum(len(keys[k]) for k in ("train_pos", "val_pos", "test_pos")) != m or pos != set(map(tuple, g.edges.tolist())):
        bad.append("positives do not partition the edge set")
    for name, ratio in zip(("train_pos", "val_pos", "test_pos"), split.ratios):
        if abs(len(getattr(split, name)) - ratio * m) > 1:
            bad.append(f"{name} size {len(getattr(split, name))} off target {ratio * m:.1f}")
    if len(split.val_neg) != len(split.val_pos) or len(split.test_neg) != len(split.test_pos):
        bad.append("negative counts differ from positive counts")
    for name in ("val_neg", "test_neg"):
        arr = getattr(split, name)
        if len(keys[name]) != len(arr):
            bad.append(f"{name} has repeats")
        if len(arr) and (np.any(arr[:, 0] == arr[:, 1]) or g.has_edges(arr).any()):
            bad.append(f"{name} contains self-pairs or edges")
    if keys["val_neg"] & keys["test_neg"]:
        bad.append("val and test negatives overlap")
    held = keys["val_pos"] | keys["test_pos"]
    if split.train_graph.num_edges != len(split.train_pos) or (
            held and split.train_graph.has_edges(np.array(sorted(held))).any()):
        bad.append("training graph leaks held-out edges")
    return bad


def anchor_violations(g, fm, eps=0.01):
    """Broken anchor-feature invariants: value range, zero self-distance,
    and per-column agreement with the order of raw hop distances."""
    from trihetgcn.graph import bfs_levels

    bad = []
    v = fm.values
    ok = ((v >= 0) & (v <= 1)) | (v == 1 + eps)
    if not ok.all():
        bad.append("entries outside [0, 1] and not 1+eps")
    for col, a in enumerate(fm.anchor_ids):
        if v[a, col] != 0:
            bad.append(f"anchor {a} has self-distance {v[a, col]}")
        raw = bfs_levels(g, int(a)).astype(np.float64)
        raw[raw < 0] = np.inf
        order = np.argsort(raw, kind="stable")
        if np.any(np.diff(v[order, col]) < 0):
            bad.append(f"column {col} is not monotone in hop distance")
        reach = np.isfinite(raw)
        if np.any(v[~reach, col] != 1 + eps):
            bad.append(f"column {col} has unreachable rows not set to 1+eps")
    return bad


def dense_katz(g, beta):
    a = g.adjacency.toarray()
    eye = np.eye(g.num_nodes)
    return np.linalg.inv(eye - beta * a) - eye


def brute_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return total / (len(pos) * len(neg))


def brute_ap(scores, labels):
    n_pos = sum(labels)
    total, prev_recall = 0.0, 0.0
    for t in sorted(set(scores), reverse=True):
        sel = [y for s, y in zip(scores, labels) if s >= t]
        recall = sum(sel) / n_pos
        total += (recall - prev_recall) * sum(sel) / len(sel)
        prev_recall = recall
    return total
