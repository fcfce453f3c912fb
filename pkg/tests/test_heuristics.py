import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trihetgcn.graph import Graph
from trihetgcn.heuristics import (METHODS, PairScores, rwr_vectors, score, score_aa, score_cn,
                                  score_katz, score_lp, score_lrw, score_ra, score_rwr,
                                  spectral_radius_estimate)

from conftest import complete, cycle, dense_katz, erdos_renyi, graphs, path, star

K2 = Graph.from_edges(2, [(0, 1)])


def all_pairs(n):
    return np.array(list(itertools.combinations(range(n), 2)))


def test_cn():
    assert score_cn(path(3), [(0, 2)]).scores.tolist() == [1]
    assert score_cn(Graph.from_edges(3, []), [(0, 1)]).scores.tolist() == [0]


def test_aa():
    s = star(4)
    assert score_aa(s, [(1, 2)]).scores[0] == pytest.approx(1 / np.log(4))
    assert score_aa(s, [(1, 2)]).scores[0] == pytest.approx(0.7213, abs=1e-4)
    assert score_aa(s, [(0, 1)]).scores[0] == 0


def test_aa_degree_e_contributes_one():
    # ln(d) == 1 would need d == e; check the weight formula on d = 3 instead
    g = Graph.from_edges(4, [(0, 1), (1, 2), (1, 3)])
    assert score_aa(g, [(0, 2)]).scores[0] == pytest.approx(1 / np.log(3))


def test_ra():
    assert score_ra(path(3), [(0, 2)]).scores[0] == 0.5
    # 0 and 1 share neighbour 2 (degree 2) and neighbour 3 (degree 4)
    g = Graph.from_edges(6, [(0, 2), (1, 2), (0, 3), (1, 3), (3, 4), (3, 5)])
    assert score_ra(g, [(0, 1)]).scores[0] == pytest.approx(0.75)
    assert score_ra(g, [(4, 2)]).scores[0] == 0


def test_katz_k2_closed_form():
    s = score_katz(K2, [(0, 1)], beta=0.1).scores[0]
    assert s == pytest.approx(0.1 / (1 - 0.01), abs=1e-12)
    assert s == pytest.approx(0.10101, abs=1e-5)


def test_katz_beta_zero():
    assert np.all(score_katz(complete(4), all_pairs(4), beta=0).scores == 0)


def test_katz_path_matches_dense_inverse():
    g = path(4)
    s = score_katz(g, [(0, 3)], beta=0.05).scores[0]
    assert s == pytest.approx(dense_katz(g, 0.05)[0, 3], abs=1e-12)


def test_katz_rejects_divergent_beta():
    with pytest.raises(ValueError, match="beta must be <"):
        score_katz(complete(3), [(0, 1)], beta=1.0)
    with pytest.raises(ValueError):
        score_katz(complete(3), [(0, 1)], beta=-0.1)


@settings(max_examples=40, deadline=None)
@given(graphs(min_nodes=2, max_nodes=30), st.floats(0.05, 0.9))
def test_katz_matches_dense(g, frac):
    lam = max(np.linalg.eigvalsh(g.adjacency.toarray()).max(), 1.0)
    beta = frac / lam
    pairs = all_pairs(g.num_nodes)
    got = score_katz(g, pairs, beta=beta).scores
    want = dense_katz(g, beta)[pairs[:, 0], pairs[:, 1]]
    assert np.abs(got - want).max() < 1e-8


def test_spectral_radius_estimate():
    assert spectral_radius_estimate(complete(5)) == pytest.approx(4.0, abs=1e-6)
    assert spectral_radius_estimate(cycle(6)) == pytest.approx(2.0, abs=1e-6)
    assert spectral_radius_estimate(Graph.from_edges(3, [])) == 0.0


def test_rwr_k2():
    pi = rwr_vectors(K2, [0], 0.5)[:, 0]
    assert pi == pytest.approx([2 / 3, 1 / 3], abs=1e-9)
    assert score_rwr(K2, [(0, 1)], c=0.5).scores[0] == pytest.approx(2 / 3, abs=1e-9)


def test_rwr_small_c_vanishes():
    g = erdos_renyi(20, 0.3, 1)
    s = score_rwr(g, all_pairs(20), c=1e-6).scores
    assert s.max() < 1e-5
    with pytest.raises(ValueError):
        score_rwr(g, [(0, 1)], c=1.0)


def test_lp():
    assert score_lp(path(4), [(0, 3)], alpha=0.001).scores[0] == pytest.approx(0.001)
    # triangle: (A^2)_ab = 1 and there are three length-3 walks a..b
    a = complete(3).adjacency.toarray()
    assert np.linalg.matrix_power(a, 3)[0, 1] == 3
    assert score_lp(complete(3), [(0, 1)], alpha=0.001).scores[0] == pytest.approx(1.003)


@settings(max_examples=30, deadline=None)
@given(graphs(min_nodes=2, max_nodes=20))
def test_lp_alpha_zero_is_cn(g):
    p = all_pairs(g.num_nodes)
    assert np.array_equal(score_lp(g, p, alpha=0).scores, score_cn(g, p).scores)


def test_lrw():
    assert score_lrw(K2, [(0, 1)], t=1).scores[0] == pytest.approx(1.0)
    g = erdos_renyi(15, 0.3, 2)
    p = all_pairs(15)
    s = score_lrw(g, p, t=1).scores
    assert np.all(s[~g.has_edges(p)] == 0)
    assert np.all(s[g.has_edges(p)] > 0)


@settings(max_examples=30, deadline=None)
@given(graphs(min_nodes=3, max_nodes=20))
def test_scores_symmetric(g):
    lam = spectral_radius_estimate(g)
    params = {"katz": {"beta": 0.5 / max(lam, 1.0)}}
    p = all_pairs(g.num_nodes)
    for m in METHODS:
        a = score(m, g, p, **params.get(m, {})).scores
        b = score(m, g, p[:, ::-1], **params.get(m, {})).scores
        assert np.allclose(a, b, rtol=1e-9, atol=1e-12), m


@settings(max_examples=30, deadline=None)
@given(graphs(min_nodes=3, max_nodes=20))
def test_local_indices_vanish_beyond_two_hops(g):
    p = all_pairs(g.num_nodes)
    d2 = (g.adjacency @ g.adjacency).toarray()[p[:, 0], p[:, 1]] == 0
    for m in ("cn", "aa", "ra"):
        assert np.all(score(m, g, p).scores[d2] == 0)


def test_pair_scores_validation():
    with pytest.raises(ValueError):
        PairScores(np.zeros((1, 2)), np.array([np.nan]), "cn")
    with pytest.raises(ValueError):
        score("nope", K2, [(0, 1)])
    with pytest.raises(IndexError):
        score_cn(K2, [(0, 5)])
