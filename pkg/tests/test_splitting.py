import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trihetgcn.graph import Graph
from trihetgcn.splitting import (LinkSplit, NegativeSamplingError, load_split, random_link_split,
                                 sample_training_negatives, save_split)

from conftest import complete, erdos_renyi, graphs, split_violations


def graph_with_edges(n, m, seed=0):
    gen = np.random.default_rng(seed)
    keys = gen.choice(n * (n - 1) // 2, size=m, replace=False)
    iu = np.triu_indices(n, 1)
    return Graph.from_edges(n, np.stack([iu[0][keys], iu[1][keys]], axis=1))


def test_test_count_for_cora_sized_edge_set():
    g = graph_with_edges(2708, 5278)
    s = random_link_split(g, seed=42)
    assert len(s.test_pos) == 528
    assert len(s.val_pos) == 264
    assert len(s.train_pos) == 5278 - 528 - 264
    assert split_violations(g, s) == []


def test_same_seed_is_bit_identical():
    g = erdos_renyi(80, 0.08, 1)
    a, b = random_link_split(g, seed=5), random_link_split(g, seed=5)
    assert a == b
    assert a.eval_hash() == b.eval_hash()
    assert random_link_split(g, seed=6).eval_hash() != a.eval_hash()


@pytest.mark.parametrize("ratios", [(1.0, 0.0, 0.0), (0.5, 0.5, 0.5), (0.9, 0.1), (0.9, -0.1, 0.2)])
def test_bad_ratios_rejected(ratios):
    with pytest.raises(ValueError):
        random_link_split(erdos_renyi(30, 0.2, 0), ratios)


def test_too_small_graph_rejected():
    with pytest.raises(ValueError, match="too small"):
        random_link_split(Graph.from_edges(3, [(0, 1), (1, 2)]))


def test_dense_graph_exhausts_negatives():
    g = Graph.from_edges(30, [(i, j) for i in range(30) for j in range(i + 1, 30) if (i, j) != (0, 1)])
    with pytest.raises(NegativeSamplingError):
        random_link_split(g)


@settings(max_examples=100, deadline=None)
@given(graphs(min_nodes=12, max_nodes=40, min_edges=20), st.integers(0, 2**32))
def test_split_invariants(g, seed):
    n_pairs = g.num_nodes * (g.num_nodes - 1) // 2
    if n_pairs - g.num_edges < 0.2 * g.num_edges:
        return
    s = random_link_split(g, seed=seed)
    assert split_violations(g, s) == []


def test_ratios_on_er_graph_within_two_percent():
    g = erdos_renyi(200, 0.05, 11)
    s = random_link_split(g, seed=42)
    m = g.num_edges
    for part, r in zip((s.train_pos, s.val_pos, s.test_pos), s.ratios):
        assert abs(len(part) / m - r) <= 0.02


def test_training_negatives():
    g = erdos_renyi(120, 0.05, 4)
    s = random_link_split(g, seed=42)
    n0 = sample_training_negatives(s, 0)
    assert len(n0) == len(s.train_pos)
    assert np.all(n0[:, 0] != n0[:, 1])
    assert not g.has_edges(n0).any()
    held = {tuple(p) for p in np.concatenate([s.val_neg, s.test_neg]).tolist()}
    assert not held & {tuple(p) for p in n0.tolist()}
    assert np.array_equal(n0, sample_training_negatives(s, 0))
    assert not np.array_equal(n0, sample_training_negatives(s, 1))
    assert not np.array_equal(n0, sample_training_negatives(s, 0, stream=1))


def test_pairs_and_labels():
    s = random_link_split(erdos_renyi(60, 0.1, 2), seed=1)
    pairs, labels = s.pairs_and_labels("test")
    assert len(pairs) == 2 * len(s.test_pos)
    assert labels.sum() == len(s.test_pos)
    with pytest.raises(ValueError):
        s.pairs_and_labels("train")


def test_save_load_roundtrip(tmp_path):
    g = erdos_renyi(60, 0.1, 3)
    s = random_link_split(g, seed=9)
    save_split(s, tmp_path / "split.txt")
    t = load_split(tmp_path / "split.txt", g)
    assert isinstance(t, LinkSplit) and t == s
    with pytest.raises(ValueError, match="graph"):
        load_split(tmp_path / "split.txt", complete(5))
