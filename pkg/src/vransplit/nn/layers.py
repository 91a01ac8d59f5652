"""Parameterized building blocks: LSTM cells, additive attention, MLP."""
from __future__ import annotations

import numpy as np

from .params import ParamSet
from .tape import NoTape, Tape, Var


class LSTMCell:
    """Single LSTM layer; weights live in ``params`` under ``prefix``."""

    def __init__(self, params: ParamSet, prefix: str, input_size: int, hidden_size: int,
                 rng: np.random.Generator):
        self.prefix = prefix
        self.input_size = input_size
        self.hidden_size = hidden_size
        h = hidden_size
        self.wx = params.uniform(f"{prefix}.wx", (input_size, 4 * h), input_size, rng)
        self.wh = params.uniform(f"{prefix}.wh", (h, 4 * h), h, rng)
        b = np.zeros(4 * h)
        b[h:2 * h] = 1.0  # forget gate
        self.b = params.add(f"{prefix}.b", b)

    def zero_state(self, tape: Tape, batch: int) -> tuple[Var, Var]:
        z = np.zeros((batch, self.hidden_size))
        return tape.constant(z), tape.constant(z)

    def step(self, tape: Tape, x: Var, state: tuple[Var, Var]) -> tuple[Var, Var]:
        if x.shape[-1] != self.input_size:
            raise ValueError(f"{self.prefix}: input width {x.shape[-1]} != {self.input_size}")
        h, c = state
        return tape.lstm_cell(x, h, c, tape.param(self.wx), tape.param(self.wh), tape.param(self.b))


class StackedLSTM:
    """``n_layers`` LSTM cells fed bottom to top at every time step."""

    def __init__(self, params: ParamSet, prefix: str, input_size: int, hidden_size: int,
                 n_layers: int, rng: np.random.Generator):
        self.cells = [
            LSTMCell(params, f"{prefix}.l{k}", input_size if k == 0 else hidden_size, hidden_size, rng)
            for k in range(n_layers)
        ]
        self.hidden_size = hidden_size

    def zero_state(self, tape, batch):
        return [cell.zero_state(tape, batch) for cell in self.cells]

    def step(self, tape, x, states):
        new = []
        for cell, st in zip(self.cells, states):
            h, c = cell.step(tape, x, st)
            new.append((h, c))
            x = h
        return x, new


class AdditiveAttention:
    """score(h_t, hbar_k) = v . tanh(w1 h_t + w2 hbar_k), all sized by hidden width."""

    def __init__(self, params: ParamSet, prefix: str, hidden_size: int, rng: np.random.Generator):
        h = hidden_size
        self.w1 = params.uniform(f"{prefix}.w1", (h, h), h, rng)
        self.w2 = params.uniform(f"{prefix}.w2", (h, h), h, rng)
        self.v = params.uniform(f"{prefix}.v", (h,), h, rng)

    def project_keys(self, tape: Tape, keys: Var) -> Var:
        return tape.linear(keys, tape.param(self.w2))

    def __call__(self, tape: Tape, query: Var, keys: Var, keys_proj: Var) -> tuple[Var, Var]:
        if keys.shape[1] == 0:
            raise ValueError("attention over an empty sequence")
        return tape.additive_attention(query, keys, keys_proj, tape.param(self.w1), tape.param(self.v))


class MLP:
    """Affine + tanh hidden layers, affine output."""

    def __init__(self, params: ParamSet, prefix: str, sizes: list[int], rng: np.random.Generator):
        self.layers = []
        for k, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            w = params.uniform(f"{prefix}.w{k}", (a, b), a, rng)
            bias = params.add(f"{prefix}.b{k}", np.zeros(b))
            self.layers.append((w, bias))

    def __call__(self, tape: Tape, x: Var) -> Var:
        last = len(self.layers) - 1
        for k, (w, b) in enumerate(self.layers):
            x = tape.linear(x, tape.param(w), tape.param(b))
            if k < last:
                x = tape.tanh(x)
        return x


def lstm_step(cell: LSTMCell, x, state, tape: Tape | None = None):
    """Convenience wrapper on raw arrays: returns (hidden, cell) arrays."""
    tape = NoTape() if tape is None else tape
    h, c = state
    hv, cv = cell.step(tape, tape.constant(x), (tape.constant(h), tape.constant(c)))
    return hv.value, cv.value


def attention_context(attn: AdditiveAttention, query, keys, tape: Tape | None = None):
    """Raw-array wrapper: returns (context, alignment)."""
    tape = NoTape() if tape is None else tape
    k = tape.constant(keys)
    ctx, a = attn(tape, tape.constant(query), k, attn.project_keys(tape, k))
    return ctx.value, a.value


def mlp_forward(mlp: MLP, x, tape: Tape | None = None):
    tape = NoTape() if tape is None else tape
    return mlp(tape, tape.constant(x)).value
