"""Reverse-mode differentiation over a recorded operation sequence.

Every op computes its forward value with numpy and, when recording, appends a
node holding a closure that maps output gradients to input gradients.
``Tape.backward`` walks the nodes in reverse and accumulates into parameters.

The larger kernels (LSTM cell, additive attention) are single fused nodes with
hand-derived backward rules; they are checked against finite differences in
the test suite like every other op.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class NumericError(FloatingPointError):
    """Raised when a kernel op produces a non-finite value."""


class Param:
    """A named trainable array with a gradient accumulator."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value):
        self.name = name
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    def zero_grad(self):
        self.grad = np.zeros_like(self.value)

    def __repr__(self):
        return f"Param({self.name!r}, shape={self.value.shape})"


class Var:
    __slots__ = ("value", "grad", "requires_grad", "param")

    def __init__(self, value, requires_grad=False, param=None):
        self.value = value
        self.grad = None
        self.requires_grad = requires_grad
        self.param = param

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(shape={self.value.shape}, requires_grad={self.requires_grad})"


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _sigmoid(x):
    # tanh form is overflow-free and avoids masked indexing
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _softmax(x, axis=-1):
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def _log_softmax(x, axis=-1):
    z = x - x.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


class Tape:
    """Records ops for a single forward pass; call ``backward`` once."""

    recording = True

    def __init__(self):
        self._nodes: list[tuple[Sequence[Var], Sequence[Var], Callable]] = []
        self._leaves: dict[int, Var] = {}

    # -- bookkeeping -------------------------------------------------------
    def param(self, p: Param) -> Var:
        """Leaf for ``p``; repeated calls on one tape share a single leaf."""
        v = self._leaves.get(id(p))
        if v is None or v.value is not p.value:
            v = Var(p.value, requires_grad=self.recording, param=p)
            if self.recording:
                self._leaves[id(p)] = v
        return v

    def constant(self, x) -> Var:
        x = np.asarray(x, dtype=np.float64)
        if not np.isfinite(x).all():
            raise NumericError("non-finite constant")
        return Var(x)

    def _out(self, name, value, inputs) -> Var:
        if not np.isfinite(value).all():
            raise NumericError(f"non-finite output in {name}")
        return Var(value, requires_grad=self.recording and any(v.requires_grad for v in inputs))

    def _record(self, inputs, outputs, backward):
        if self.recording and any(v.requires_grad for v in inputs):
            self._nodes.append((inputs, outputs, backward))

    def __len__(self):
        return len(self._nodes)

    def backward(self, output: Var, grad=None):
        """Propagate ``grad`` (default ones) from ``output`` into every Param.grad."""
        if not self.recording:
            raise RuntimeError("backward() on a non-recording tape")
        output.grad = np.ones_like(output.value) if grad is None else np.asarray(grad, dtype=np.float64)
        for inputs, outputs, fn in reversed(self._nodes):
            gouts = [o.grad for o in outputs]
            if all(g is None for g in gouts):
                continue
            gouts = [np.zeros_like(o.value) if g is None else g for o, g in zip(outputs, gouts)]
            gins = fn(*gouts)
            for v, g in zip(inputs, gins):
                if g is None or not v.requires_grad:
                    continue
                v.grad = g if v.grad is None else v.grad + g
        for leaf in self._leaves.values():
            if leaf.grad is not None:
                leaf.param.grad = leaf.param.grad + leaf.grad
        self._nodes.clear()
        self._leaves.clear()

    # -- elementwise -------------------------------------------------------
    def add(self, a: Var, b: Var) -> Var:
        y = self._out("add", a.value + b.value, (a, b))
        sa, sb = a.shape, b.shape
        self._record((a, b), (y,), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))
        return y

    def sub(self, a: Var, b: Var) -> Var:
        y = self._out("sub", a.value - b.value, (a, b))
        sa, sb = a.shape, b.shape
        self._record((a, b), (y,), lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))
        return y

    def mul(self, a: Var, b: Var) -> Var:
        av, bv = a.value, b.value
        y = self._out("mul", av * bv, (a, b))
        self._record((a, b), (y,),
                     lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))
        return y

    def scale(self, a: Var, c: float) -> Var:
        y = self._out("scale", a.value * c, (a,))
        self._record((a,), (y,), lambda g: (g * c,))
        return y

    def square(self, a: Var) -> Var:
        av = a.value
        y = self._out("square", av * av, (a,))
        self._record((a,), (y,), lambda g: (2.0 * av * g,))
        return y

    def tanh(self, a: Var) -> Var:
        t = np.tanh(a.value)
        y = self._out("tanh", t, (a,))
        self._record((a,), (y,), lambda g: (g * (1.0 - t * t),))
        return y

    def sigmoid(self, a: Var) -> Var:
        s = _sigmoid(a.value)
        y = self._out("sigmoid", s, (a,))
        self._record((a,), (y,), lambda g: (g * s * (1.0 - s),))
        return y

    # -- reductions & reshaping -------------------------------------------
    def sum(self, a: Var, axis=None) -> Var:
        shape = a.shape
        y = self._out("sum", np.asarray(a.value.sum(axis=axis)), (a,))

        def back(g):
            if axis is not None:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        self._record((a,), (y,), back)
        return y

    def mean(self, a: Var, axis=None) -> Var:
        n = a.value.size if axis is None else a.shape[axis]
        return self.scale(self.sum(a, axis=axis), 1.0 / n)

    def concat(self, vs: Sequence[Var], axis=-1) -> Var:
        y = self._out("concat", np.concatenate([v.value for v in vs], axis=axis), vs)
        splits = np.cumsum([v.shape[axis] for v in vs])[:-1]
        self._record(tuple(vs), (y,), lambda g: tuple(np.split(g, splits, axis=axis)))
        return y

    def stack(self, vs: Sequence[Var], axis=1) -> Var:
        y = self._out("stack", np.stack([v.value for v in vs], axis=axis), vs)
        n = len(vs)

        def back(g):
            return tuple(np.take(g, k, axis=axis) for k in range(n))

        self._record(tuple(vs), (y,), back)
        return y

    def index(self, a: Var, key) -> Var:
        """Basic (non-fancy) indexing, e.g. ``a[:, t]``."""
        shape = a.shape
        y = self._out("index", a.value[key], (a,))

        def back(g):
            out = np.zeros(shape)
            out[key] = g
            return (out,)

        self._record((a,), (y,), back)
        return y

    # -- linear algebra ----------------------------------------------------
    def linear(self, x: Var, w: Var, b: Var | None = None) -> Var:
        """``x @ w (+ b)`` with arbitrary leading batch dims on ``x``."""
        xv, wv = x.value, w.value
        out = xv @ wv
        if b is not None:
            out = out + b.value
        inputs = (x, w) if b is None else (x, w, b)
        y = self._out("linear", out, inputs)

        def back(g):
            g2 = g.reshape(-1, g.shape[-1])
            gx = g @ wv.T
            gw = xv.reshape(-1, xv.shape[-1]).T @ g2
            if b is None:
                return gx, gw
            return gx, gw, g2.sum(axis=0)

        self._record(inputs, (y,), back)
        return y

    def embedding(self, table: Var, idx) -> Var:
        idx = np.asarray(idx, dtype=np.intp)
        tv = table.value
        y = self._out("embedding", tv[idx], (table,))

        def back(g):
            gt = np.zeros_like(tv)
            np.add.at(gt, idx, g)
            return (gt,)

        self._record((table,), (y,), back)
        return y

    # -- probability -------------------------------------------------------
    def log_softmax(self, x: Var, axis=-1) -> Var:
        ls = _log_softmax(x.value, axis=axis)
        y = self._out("log_softmax", ls, (x,))

        def back(g):
            p = np.exp(ls)
            return (g - p * g.sum(axis=axis, keepdims=True),)

        self._record((x,), (y,), back)
        return y

    def softmax(self, x: Var, axis=-1) -> Var:
        p = _softmax(x.value, axis=axis)
        y = self._out("softmax", p, (x,))
        self._record((x,), (y,),
                     lambda g: (p * (g - (g * p).sum(axis=axis, keepdims=True)),))
        return y

    def pick(self, x: Var, idx) -> Var:
        """Select ``x[b, idx[b]]`` from a (B, K) array."""
        idx = np.asarray(idx, dtype=np.intp)
        rows = np.arange(x.shape[0])
        shape = x.shape
        y = self._out("pick", x.value[rows, idx], (x,))

        def back(g):
            gx = np.zeros(shape)
            gx[rows, idx] = g
            return (gx,)

        self._record((x,), (y,), back)
        return y

    # -- fused recurrent / attention kernels -------------------------------
    def lstm_cell(self, x: Var, h: Var, c: Var, wx: Var, wh: Var, b: Var) -> tuple[Var, Var]:
        """One LSTM step; gate order in the packed weights is (i, f, g, o)."""
        xv, hv, cv = x.value, h.value, c.value
        wxv, whv = wx.value, wh.value
        n = hv.shape[-1]
        z = xv @ wxv + hv @ whv + b.value
        i = _sigmoid(z[:, :n])
        f = _sigmoid(z[:, n:2 * n])
        gg = np.tanh(z[:, 2 * n:3 * n])
        o = _sigmoid(z[:, 3 * n:])
        c_new = f * cv + i * gg
        tc = np.tanh(c_new)
        inputs = (x, h, c, wx, wh, b)
        h_out = self._out("lstm_cell", o * tc, inputs)
        c_out = self._out("lstm_cell", c_new, inputs)

        def back(gh, gc):
            do = gh * tc
            dc = gc + gh * o * (1.0 - tc * tc)
            dz = np.concatenate([
                dc * gg * i * (1.0 - i),
                dc * cv * f * (1.0 - f),
                dc * i * (1.0 - gg * gg),
                do * o * (1.0 - o),
            ], axis=1)
            return (dz @ wxv.T, dz @ whv.T, dc * f, xv.T @ dz, hv.T @ dz, dz.sum(axis=0))

        self._record(inputs, (h_out, c_out), back)
        return h_out, c_out

    def additive_attention(self, query: Var, keys: Var, keys_proj: Var,
                           w_query: Var, v: Var) -> tuple[Var, Var]:
        """Additive attention over a (B, N, H) sequence.

        ``keys_proj`` is the key-side projection, computed once per sequence.
        score_k = v . tanh(query @ w_query + keys_proj_k); returns the context
        (B, H) and the alignment (B, N).
        """
        qv, kv, kpv = query.value, keys.value, keys_proj.value
        wqv, vv = w_query.value, v.value
        u = np.tanh(kpv + (qv @ wqv)[:, None, :])
        a = _softmax(u @ vv, axis=1)
        ctx = (a[:, None, :] @ kv)[:, 0]
        inputs = (query, keys, keys_proj, w_query, v)
        ctx_out = self._out("attention", ctx, inputs)
        a_out = self._out("attention", a, inputs)

        def back(gctx, ga):
            gkeys = a[:, :, None] * gctx[:, None, :]
            ga = ga + (kv @ gctx[:, :, None])[:, :, 0]
            gs = a * (ga - (ga * a).sum(axis=1, keepdims=True))
            gv = gs.ravel() @ u.reshape(-1, u.shape[-1])
            gpre = gs[:, :, None] * vv * (1.0 - u * u)
            gq = gpre.sum(axis=1)
            return (gq @ wqv.T, gkeys, gpre, qv.T @ gq, gv)

        self._record(inputs, (ctx_out, a_out), back)
        return ctx_out, a_out


class NoTape(Tape):
    """Forward-only evaluation: same ops, nothing recorded."""

    recording = False
