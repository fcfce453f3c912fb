"""Classical similarity scores for node pairs, computed on the training graph."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph import Graph

DEFAULTS = {
    "katz": {"beta": 0.005},
    "rwr": {"c": 0.85},
    "lp": {"alpha": 0.001},
    "lrw": {"t": 3},
}


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class PairScores:
    pairs: np.ndarray
    scores: np.ndarray
    method: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.pairs) != len(self.scores):
            raise ValueError("pairs and scores must align")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError(f"{self.method}: non-finite scores")


def _pairs(g: Graph, pairs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.size and (pairs.min() < 0 or pairs.max() >= g.num_nodes):
        raise IndexError("pair endpoint out of range")
    return pairs, pairs[:, 0], pairs[:, 1]


def _weighted_cn(g: Graph, src, trg, node_weight: np.ndarray) -> np.ndarray:
    a = g.adjacency
    return np.asarray((a[src] @ sp.diags(node_weight)).multiply(a[trg]).sum(axis=1)).ravel()


def score_cn(g: Graph, pairs) -> PairScores:
    pairs, src, trg = _pairs(g, pairs)
    a = g.adjacency
    s = np.asarray(a[src].multiply(a[trg]).sum(axis=1)).ravel()
    return PairScores(pairs, s, "cn")


def score_aa(g: Graph, pairs) -> PairScores:
    pairs, src, trg = _pairs(g, pairs)
    d = g.degrees.astype(np.float64)
    # a common neighbour has degree >= 2, so degree-1 nodes never contribute
    w = np.zeros_like(d)
    w[d > 1] = 1.0 / np.log(d[d > 1])
    s = _weighted_cn(g, src, trg, w)
    return PairScores(pairs, s, "aa")


def score_ra(g: Graph, pairs) -> PairScores:
    pairs, src, trg = _pairs(g, pairs)
    d = g.degrees.astype(np.float64)
    w = np.zeros_like(d)
    w[d > 0] = 1.0 / d[d > 0]
    return PairScores(pairs, _weighted_cn(g, src, trg, w), "ra")


def spectral_radius_estimate(g: Graph, iters: int = 50) -> float:
    """Power iteration on A + I (the shift keeps bipartite graphs from
    oscillating); Rayleigh quotient minus the shift."""
    if g.num_edges == 0:
        return 0.0
    a = g.adjacency
    x = np.ones(g.num_nodes) / np.sqrt(g.num_nodes)
    for _ in range(iters):
        y = a @ x + x
        x = y / np.linalg.norm(y)
    return float(x @ (a @ x))


def _block_cg(matvec, b: np.ndarray, rtol: float, maxiter: int) -> np.ndarray:
    """Conjugate gradients on every column of ``b`` at once (independent
    step sizes per column)."""
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs = np.einsum("ij,ij->j", r, r)
    bnorm = np.sqrt(np.einsum("ij,ij->j", b, b))
    bnorm[bnorm == 0] = 1.0
    for _ in range(maxiter):
        if np.all(np.sqrt(rs) <= rtol * bnorm):
            return x
        ap = matvec(p)
        pap = np.einsum("ij,ij->j", p, ap)
        alpha = np.divide(rs, pap, out=np.zeros_like(rs), where=pap != 0)
        x += alpha * p
        r -= alpha * ap
        rs_new = np.einsum("ij,ij->j", r, r)
        beta = np.divide(rs_new, rs, out=np.zeros_like(rs), where=rs != 0)
        p = r + beta * p
        rs = rs_new
    if np.all(np.sqrt(rs) <= rtol * bnorm):
        return x
    raise ConvergenceError(f"CG did not reach relative residual {rtol} in {maxiter} iterations")


def score_katz(g: Graph, pairs, beta: float = DEFAULTS["katz"]["beta"],
               rtol: float = 1e-10, block: int = 256) -> PairScores:
    """S = (I - beta A)^-1 - I, one CG solve per distinct target column."""
    pairs, src, trg = _pairs(g, pairs)
    if beta < 0:
        raise ValueError("beta must be non-negative")
    lam = spectral_radius_estimate(g)
    if beta * lam >= 1:
        raise ValueError(f"Katz beta={beta} diverges: largest eigenvalue ~{lam:.4g}, "
                         f"beta must be < {1 / lam:.6g}")
    scores = np.zeros(len(pairs))
    if beta == 0 or len(pairs) == 0:
        return PairScores(pairs, scores, "katz", {"beta": beta})
    a = g.adjacency
    n = g.num_nodes
    cols, inv = np.unique(trg, return_inverse=True)
    for start in range(0, cols.size, block):
        chunk = cols[start:start + block]
        rhs = np.zeros((n, chunk.size))
        rhs[chunk, np.arange(chunk.size)] = 1.0
        x = _block_cg(lambda v: v - beta * (a @ v), rhs, rtol, maxiter=10 * n + 100)
        sel = np.flatnonzero((inv >= start) & (inv < start + chunk.size))
        scores[sel] = x[src[sel], inv[sel] - start]
    scores -= (src == trg)
    return PairScores(pairs, scores, "katz", {"beta": beta})


def transition_matrix(g: Graph) -> sp.csr_matrix:
    """Row-normalised adjacency; isolated nodes keep an all-zero row."""
    d = g.degrees.astype(np.float64)
    inv = np.zeros_like(d)
    inv[d > 0] = 1.0 / d[d > 0]
    return (sp.diags(inv) @ g.adjacency).tocsr()


def rwr_vectors(g: Graph, sources, c: float, tol: float = 1e-10,
                maxiter: int = 10_000) -> np.ndarray:
    """Columns pi_s solving pi = c P^T pi + (1 - c) e_s, by fixed-point iteration."""
    sources = np.asarray(sources, dtype=np.int64)
    pt = transition_matrix(g).T.tocsr()
    e = np.zeros((g.num_nodes, sources.size))
    e[sources, np.arange(sources.size)] = 1.0 - c
    pi = e.copy()
    for _ in range(maxiter):
        nxt = c * (pt @ pi) + e
        delta = np.abs(nxt - pi).sum(axis=0).max()
        pi = nxt
        if delta < tol:
            return pi
    raise ConvergenceError(f"RWR did not converge within {maxiter} iterations")


def score_rwr(g: Graph, pairs, c: float = DEFAULTS["rwr"]["c"]) -> PairScores:
    """score(i, j) = pi_i[j] + pi_j[i], ``c`` the walk-continuation probability."""
    pairs, src, trg = _pairs(g, pairs)
    if not 0 < c < 1:
        raise ValueError(f"c must be in (0, 1), got {c}")
    nodes, inv = np.unique(np.concatenate([src, trg]), return_inverse=True)
    isrc, itrg = inv[:len(src)], inv[len(src):]
    pi = rwr_vectors(g, nodes, c)
    s = pi[trg, isrc] + pi[src, itrg]
    return PairScores(pairs, s, "rwr", {"c": c})


def score_lp(g: Graph, pairs, alpha: float = DEFAULTS["lp"]["alpha"]) -> PairScores:
    """A^2 + alpha A^3 restricted to the queried pairs."""
    pairs, src, trg = _pairs(g, pairs)
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    a = g.adjacency
    a2_rows = a[src] @ a
    # (A^2)_ij = <A_i, A_j>; (A^3)_ij = <(A^2)_i, A_j>
    two = np.asarray(a[src].multiply(a[trg]).sum(axis=1)).ravel()
    three = np.asarray(a2_rows.multiply(a[trg]).sum(axis=1)).ravel()
    return PairScores(pairs, two + alpha * three, "lp", {"alpha": alpha})


def score_lrw(g: Graph, pairs, t: int = DEFAULTS["lrw"]["t"]) -> PairScores:
    """score(i, j) = d_i/2|E| pi_i(t)[j] + d_j/2|E| pi_j(t)[i], pi_i(t) = (P^T)^t e_i."""
    pairs, src, trg = _pairs(g, pairs)
    if t < 1:
        raise ValueError("t must be >= 1")
    if g.num_edges == 0:
        return PairScores(pairs, np.zeros(len(pairs)), "lrw", {"t": t})
    nodes, inv = np.unique(np.concatenate([src, trg]), return_inverse=True)
    isrc, itrg = inv[:len(src)], inv[len(src):]
    pt = transition_matrix(g).T.tocsr()
    pi = np.zeros((g.num_nodes, nodes.size))
    pi[nodes, np.arange(nodes.size)] = 1.0
    for _ in range(t):
        pi = pt @ pi
    w = g.degrees / (2.0 * g.num_edges)
    s = w[src] * pi[trg, isrc] + w[trg] * pi[src, itrg]
    return PairScores(pairs, s, "lrw", {"t": t})


METHODS = {
    "cn": score_cn,
    "aa": score_aa,
    "ra": score_ra,
    "katz": score_katz,
    "rwr": score_rwr,
    "lp": score_lp,
    "lrw": score_lrw,
}


def score(method: str, g: Graph, pairs, **params) -> PairScores:
    if method not in METHODS:
        raise ValueError(f"unknown heuristic {method!r}")
    return METHODS[method](g, pairs, **params)
