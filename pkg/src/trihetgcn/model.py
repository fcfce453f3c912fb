"""TriHetGCN forward computation.

Message passing uses the propagation operator

    phi_ij = (d_i d_j)^(-1/2) * exp(s_cn * cn_ij + s_hi * hi_ij)

over the training adjacency plus self-loops, where ``cn`` and ``hi`` are the
common-neighbour count and absolute degree difference of each edge,
max-normalised to [0, 1]. Node states come from stacked convolutions; a pair
is scored by a Mish MLP on the Hadamard product of its two node states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .autodiff import Tape, Var, softplus
from .graph import Graph

CLAMP = 10.0
MODES = ("gcn", "gcn_cn", "gcn_hi", "trihet")
ACTIVATIONS = ("relu", "mish")


@dataclass(frozen=True, eq=False)
class PhiOperator:
    """Static part of the propagation operator, nonzeros in CSR order."""
    num_nodes: int
    indptr: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    norm: np.ndarray
    cn: np.ndarray
    hi: np.ndarray
    cn_max: float
    hi_max: float

    @property
    def nnz(self) -> int:
        return int(self.cols.size)

    def matrix(self, weights=None) -> sp.csr_matrix:
        w = self.norm if weights is None else weights
        return sp.csr_matrix((w, self.cols, self.indptr), shape=(self.num_nodes, self.num_nodes))


def build_phi_static(train_graph: Graph) -> PhiOperator:
    n = train_graph.num_nodes
    a = train_graph.adjacency
    a_hat = (a + sp.identity(n, format="csr")).tocsr()
    a_hat.sort_indices()
    indptr = a_hat.indptr.astype(np.int64)
    cols = a_hat.indices.astype(np.int64)
    rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))

    d_hat = train_graph.degrees + 1.0
    norm = 1.0 / np.sqrt(d_hat[rows] * d_hat[cols])

    off = rows != cols
    cn = np.zeros(cols.size)
    if off.any():
        two_step = (a @ a).tocsr()
        cn[off] = np.asarray(two_step[rows[off], cols[off]]).ravel()
    deg = train_graph.degrees.astype(np.float64)
    hi = np.where(off, np.abs(deg[rows] - deg[cols]), 0.0)

    cn_max, hi_max = float(cn.max(initial=0.0)), float(hi.max(initial=0.0))
    if cn_max > 0:
        cn = cn / cn_max
    if hi_max > 0:
        hi = hi / hi_max
    return PhiOperator(n, indptr, rows, cols, norm, cn, hi, cn_max, hi_max)


def phi_weights(op: PhiOperator, s_cn: float, s_hi: float, clamp: float = CLAMP) -> np.ndarray:
    return Tape(record=False).edge_weights(op.norm, op.cn, op.hi, s_cn, s_hi, clamp).value


def mish(x):
    x = np.asarray(x, dtype=np.float64)
    return x * np.tanh(softplus(x))


def sigmoid(x):
    return expit(np.asarray(x, dtype=np.float64))


class ModelParams:
    """Named float64 arrays in declared order:
    ``gcn{l}.W, gcn{l}.b`` per layer, ``dec1.W, dec1.b, dec2.W, dec2.b``,
    ``s_cn, s_hi`` (0-d). ``frozen`` names never receive updates."""

    def __init__(self, tensors: dict, frozen=()):
        self.tensors = {k: np.asarray(v, dtype=np.float64) for k, v in tensors.items()}
        self.frozen = frozenset(frozen)

    @property
    def num_layers(self) -> int:
        return sum(1 for k in self.tensors if k.startswith("gcn") and k.endswith(".W"))

    @property
    def s_cn(self) -> float:
        return float(self.tensors["s_cn"])

    @property
    def s_hi(self) -> float:
        return float(self.tensors["s_hi"])

    def names(self):
        return list(self.tensors)

    def trainable(self, name: str) -> bool:
        return name not in self.frozen

    def copy(self) -> "ModelParams":
        return ModelParams({k: v.copy() for k, v in self.tensors.items()}, self.frozen)

    def __getitem__(self, name):
        return self.tensors[name]

    def check(self):
        for k, v in self.tensors.items():
            if not np.all(np.isfinite(v)):
                raise ValueError(f"parameter {k} is not finite")


def frozen_scalars(mode: str) -> tuple[str, ...]:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    return {"gcn": ("s_cn", "s_hi"), "gcn_cn": ("s_hi",),
            "gcn_hi": ("s_cn",), "trihet": ()}[mode]


def init_params(d_in: int, hidden: int, gen: np.random.Generator, layers: int = 2,
                mode: str = "trihet", scalar_init=None) -> ModelParams:
    """Glorot-uniform weights, zero biases, structure scalars ~ U[0, 0.5].

    Every mode draws the same random numbers; frozen scalars are then set
    to 0, so modes differ only in the structure scalars.
    """
    frozen = frozen_scalars(mode)

    def glorot(fan_in, fan_out):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        return gen.uniform(-a, a, size=(fan_in, fan_out))

    t = {}
    dims = [d_in] + [hidden] * layers
    for l in range(layers):
        t[f"gcn{l}.W"] = glorot(dims[l], dims[l + 1])
        t[f"gcn{l}.b"] = np.zeros(dims[l + 1])
    t["dec1.W"] = glorot(hidden, hidden)
    t["dec1.b"] = np.zeros(hidden)
    t["dec2.W"] = glorot(hidden, 1)
    t["dec2.b"] = np.zeros(1)
    s = gen.uniform(0.0, 0.5, size=2)
    if scalar_init is not None:
        s = np.asarray(scalar_init, dtype=np.float64)
    t["s_cn"] = np.asarray(0.0 if "s_cn" in frozen else s[0])
    t["s_hi"] = np.asarray(0.0 if "s_hi" in frozen else s[1])
    return ModelParams(t, frozen)


def embed(tape: Tape, op: PhiOperator, x, params: ModelParams, leaves: dict,
          dropout: float = 0.0, gen: np.random.Generator | None = None,
          act: str = "relu", clamp: float = CLAMP) -> Var:
    """Node states after all convolution layers; dropout follows every
    layer except the last."""
    if x.shape[0] != op.num_nodes:
        raise ValueError(f"feature matrix has {x.shape[0]} rows, graph has {op.num_nodes} nodes")
    if x.shape[1] != params["gcn0.W"].shape[0]:
        raise ValueError(f"feature width {x.shape[1]} != input dim {params['gcn0.W'].shape[0]}")
    if not 0 <= dropout < 1:
        raise ValueError("dropout must be in [0, 1)")
    if act not in ACTIVATIONS:
        raise ValueError(f"unknown activation {act!r}")
    w = tape.edge_weights(op.norm, op.cn, op.hi, leaves["s_cn"], leaves["s_hi"], clamp)
    h = tape.const(x)
    layers = params.num_layers
    for l in range(layers):
        z = tape.spmm(op.indptr, op.rows, op.cols, w, tape.matmul(h, leaves[f"gcn{l}.W"]))
        z = tape.add_bias(z, leaves[f"gcn{l}.b"])
        h = tape.relu(z) if act == "relu" else tape.mish(z)
        if l < layers - 1 and dropout > 0 and gen is not None:
            h = tape.dropout(h, dropout, gen)
    return h


def decode(tape: Tape, h: Var, pairs, leaves: dict) -> Var:
    """Link probabilities: sigmoid(W2 . Mish(W1 (h_i * h_j) + b1) + b2)."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    sim = tape.hadamard(tape.gather(h, pairs[:, 0]), tape.gather(h, pairs[:, 1]))
    hidden = tape.mish(tape.add_bias(tape.matmul(sim, leaves["dec1.W"]), leaves["dec1.b"]))
    logit = tape.add_bias(tape.matmul(hidden, leaves["dec2.W"]), leaves["dec2.b"])
    return tape.sigmoid(tape.reshape(logit, (-1,)))


def leaves_for(tape: Tape, params: ModelParams) -> dict:
    return {k: tape.param(v, k, params.trainable(k)) for k, v in params.tensors.items()}


def gcn_forward(op: PhiOperator, x, params: ModelParams, dropout: float = 0.0,
                training: bool = False, gen: np.random.Generator | None = None,
                act: str = "relu", clamp: float = CLAMP) -> np.ndarray:
    tape = Tape(record=False)
    h = embed(tape, op, x, params, leaves_for(tape, params),
              dropout if training else 0.0, gen, act, clamp)
    return h.value


def pair_logits(h: np.ndarray, pairs, params: ModelParams) -> np.ndarray:
    """Link probabilities for ``pairs`` given final node states ``h``."""
    tape = Tape(record=False)
    return decode(tape, tape.const(h), pairs, leaves_for(tape, params)).value


def bce_loss(probs, labels) -> float:
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if probs.shape != labels.shape:
        raise ValueError("probs and labels differ in length")
    return float(Tape(record=False).bce(probs, labels).value)


def predict(op: PhiOperator, x, params: ModelParams, pairs, act: str = "relu",
            clamp: float = CLAMP) -> np.ndarray:
    """Inference-mode probabilities (no dropout)."""
    return pair_logits(gcn_forward(op, x, params, act=act, clamp=clamp), pairs, params)
