"""A small reverse-mode tape over numpy arrays.

Only the primitives the link-prediction model needs are provided. Each op
computes its forward value eagerly and, when recording, appends a closure
mapping the output adjoint to parent adjoints. ``Tape.backward`` replays
those closures once, newest first.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.special import expit


class StaleTapeError(RuntimeError):
    pass


class Var:
    __slots__ = ("value", "grad", "requires_grad", "name")

    def __init__(self, value, requires_grad=False, name=None):
        self.value = value
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var({self.name or ''}{tuple(self.shape)})"


def _accumulate(v: Var, g):
    if v.grad is None:
        v.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        v.grad += g


class Tape:
    def __init__(self, record: bool = True):
        self.record = record
        self.ops: list[tuple[Var, tuple, object]] = []
        self.consumed = False

    # -- leaves -------------------------------------------------------------

    def param(self, value, name=None, requires_grad=True) -> Var:
        return Var(np.asarray(value, dtype=np.float64), requires_grad and self.record, name)

    def const(self, value) -> Var:
        if not sp.issparse(value):
            value = np.asarray(value, dtype=np.float64)
        return Var(value, False)

    def _wrap(self, x) -> Var:
        return x if isinstance(x, Var) else self.const(x)

    def _emit(self, value, parents, vjp) -> Var:
        needs = any(p.requires_grad for p in parents)
        out = Var(value, needs)
        if needs and self.record:
            self.ops.append((out, parents, vjp))
        return out

    # -- primitives ---------------------------------------------------------

    def matmul(self, a, b) -> Var:
        a, b = self._wrap(a), self._wrap(b)
        av, bv = a.value, b.value
        out = av @ bv
        if sp.issparse(out):
            out = out.toarray()

        def vjp(g):
            ga = (g @ bv.T) if a.requires_grad else None
            gb = np.asarray(av.T @ g) if b.requires_grad else None
            return ga, gb
        return self._emit(np.asarray(out), (a, b), vjp)

    def add_bias(self, a, b) -> Var:
        a, b = self._wrap(a), self._wrap(b)

        def vjp(g):
            return g, g.reshape(-1, *b.value.shape).sum(axis=0)
        return self._emit(a.value + b.value, (a, b), vjp)

    def relu(self, a) -> Var:
        a = self._wrap(a)
        mask = a.value > 0
        return self._emit(np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,))

    def dropout(self, a, p: float, gen: np.random.Generator) -> Var:
        """Inverted dropout: kept units are scaled by 1 / (1 - p)."""
        a = self._wrap(a)
        if p <= 0:
            return a
        scale = (gen.random(a.value.shape) >= p) / (1.0 - p)
        return self._emit(a.value * scale, (a,), lambda g: (g * scale,))

    def edge_weights(self, norm, cn, hi, s_cn, s_hi, clamp: float) -> Var:
        """w = norm * exp(clip(s_cn * cn + s_hi * hi, -clamp, clamp))."""
        s_cn, s_hi = self._wrap(s_cn), self._wrap(s_hi)
        z = s_cn.value * cn + s_hi.value * hi
        interior = np.abs(z) < clamp
        w = norm * np.exp(np.clip(z, -clamp, clamp))

        def vjp(g):
            gz = g * w * interior
            return np.dot(gz, cn), np.dot(gz, hi)
        return self._emit(w, (s_cn, s_hi), vjp)

    def spmm(self, indptr, rows, cols, w, h) -> Var:
        """Sparse-times-dense with differentiable nonzeros ``w`` laid out in
        CSR order (``rows`` is the expanded row index of each nonzero)."""
        w, h = self._wrap(w), self._wrap(h)
        n = indptr.size - 1
        mat = sp.csr_matrix((w.value, cols, indptr), shape=(n, h.value.shape[0]))
        hv = h.value

        def vjp(g):
            gw = np.einsum("ek,ek->e", g[rows], hv[cols]) if w.requires_grad else None
            gh = (mat.T @ g) if h.requires_grad else None
            return gw, gh
        return self._emit(mat @ hv, (w, h), vjp)

    def gather(self, a, idx) -> Var:
        a = self._wrap(a)
        idx = np.asarray(idx, dtype=np.int64)
        n = a.value.shape[0]

        def vjp(g):
            scatter = sp.csr_matrix((np.ones(idx.size), (idx, np.arange(idx.size))),
                                    shape=(n, idx.size))
            return (scatter @ g,)
        return self._emit(a.value[idx], (a,), vjp)

    def hadamard(self, a, b) -> Var:
        a, b = self._wrap(a), self._wrap(b)
        av, bv = a.value, b.value
        return self._emit(av * bv, (a, b), lambda g: (g * bv, g * av))

    def mish(self, a) -> Var:
        a = self._wrap(a)
        x = a.value
        t = np.tanh(softplus(x))

        def vjp(g):
            return (g * (t + x * (1.0 - t * t) * expit(x)),)
        return self._emit(x * t, (a,), vjp)

    def sigmoid(self, a) -> Var:
        a = self._wrap(a)
        y = expit(a.value)
        return self._emit(y, (a,), lambda g: (g * y * (1.0 - y),))

    def reshape(self, a, shape) -> Var:
        a = self._wrap(a)
        old = a.value.shape
        return self._emit(a.value.reshape(shape), (a,), lambda g: (g.reshape(old),))

    def bce(self, p, labels, eps: float = 1e-12) -> Var:
        """Summed binary cross-entropy; probabilities are clamped to
        [eps, 1 - eps] (zero gradient where the clamp is active)."""
        p = self._wrap(p)
        y = np.asarray(labels, dtype=np.float64)
        if y.shape != p.value.shape:
            raise ValueError(f"{p.value.shape[0]} probabilities vs {y.shape[0]} labels")
        pc = np.clip(p.value, eps, 1.0 - eps)
        inside = (p.value > eps) & (p.value < 1.0 - eps)
        loss = -np.sum(y * np.log(pc) + (1.0 - y) * np.log1p(-pc))

        def vjp(g):
            return (g * inside * ((1.0 - y) / (1.0 - pc) - y / pc),)
        return self._emit(np.asarray(loss), (p,), vjp)

    # -- reverse pass -------------------------------------------------------

    def backward(self, loss: Var) -> None:
        if not self.record:
            raise StaleTapeError("tape was not recording")
        if self.consumed:
            raise StaleTapeError("tape has already been replayed; run a fresh forward pass")
        if loss.value.size != 1:
            raise ValueError("backward needs a scalar loss")
        self.consumed = True
        loss.grad = np.ones_like(loss.value)
        for out, parents, vjp in reversed(self.ops):
            if out.grad is None:
                continue
            for p, g in zip(parents, vjp(out.grad)):
                if p.requires_grad and g is not None:
                    _accumulate(p, g)
            out.grad = None if out is not loss else out.grad


def softplus(x):
    """ln(1 + e^x), stable at both tails."""
    return np.logaddexp(0.0, np.asarray(x, dtype=np.float64))
