"""Finite-difference gradient checks over every differentiable graph in the package."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .nn import MLP, AdditiveAttention, NoTape, ParamSet, StackedLSTM, Tape, check_param_gradients
from .policy import Critic, Policy


@dataclass
class SuiteEntry:
    name: str
    n_coords: int
    max_rel_error: float
    worst_param: str
    seconds: float

    def passed(self, tol: float) -> bool:
        return self.max_rel_error < tol


def _weighted_sum(tape, out, w):
    return tape.sum(tape.mul(out, tape.constant(w)))


def _lstm(rng):
    ps = ParamSet()
    lstm = StackedLSTM(ps, "lstm", 4, 6, 2, rng)
    xs, w = rng.normal(size=(5, 3, 4)), rng.normal(size=(3, 6))

    def build(tape):
        st = lstm.zero_state(tape, 3)
        h = None
        for x in xs:
            h, st = lstm.step(tape, tape.constant(x), st)
        return _weighted_sum(tape, h, w)
    return ps, build


def _attention(rng):
    ps = ParamSet()
    att = AdditiveAttention(ps, "attn", 10, rng)
    keys = ps.add("keys", rng.normal(size=(3, 5, 10)))
    q, wc, wa = rng.normal(size=(3, 10)), rng.normal(size=(3, 10)), rng.normal(size=(3, 5))

    def build(tape):
        k = tape.param(keys)
        ctx, a = att(tape, tape.constant(q), k, att.project_keys(tape, k))
        return tape.add(_weighted_sum(tape, ctx, wc), _weighted_sum(tape, a, wa))
    return ps, build


def _mlp(rng):
    ps = ParamSet()
    mlp = MLP(ps, "mlp", [6, 12, 12, 3], rng)
    x, w = rng.normal(size=(4, 6)), rng.normal(size=(4, 3))
    return ps, lambda tape: _weighted_sum(tape, mlp(tape, tape.constant(x)), w)


def _embedding(rng):
    ps = ParamSet()
    table = ps.uniform("emb", (12, 16), 16, rng)
    proj = ps.uniform("proj", (16, 3), 16, rng)
    idx, w = np.array([4, 0, 2, 2, 11, 7, 9, 5, 3, 1, 6, 8, 10]), rng.normal(size=(13, 3))

    def build(tape):
        e = tape.embedding(tape.param(table), idx)
        return _weighted_sum(tape, tape.tanh(tape.linear(e, tape.param(proj))), w)
    return ps, build


def _policy(rng):
    pol = Policy(embed_size=8, hidden_size=8, seed=int(rng.integers(1 << 30)))
    feats = rng.random((3, 4, 4))
    acts = rng.integers(0, 4, (3, 4))
    w = rng.normal(size=3)

    def build(tape):
        _, total = pol.rollout(feats, tape=tape, actions=acts)
        return _weighted_sum(tape, total, w)
    return pol.params, build


def _critic(rng):
    crit = Critic(embed_size=8, hidden_size=8, mlp_hidden=8, output_scale=3.0, seed=int(rng.integers(1 << 30)))
    feats, w = rng.random((3, 4, 4)), rng.normal(size=3)
    return crit.params, lambda tape: _weighted_sum(tape, crit(tape, feats), w)


GRAPHS = {"lstm": _lstm, "attention": _attention, "mlp": _mlp, "embedding": _embedding,
          "policy": _policy, "critic": _critic}


def gradient_suite(coords_per_graph: int = 200, seed: int = 0, graphs=None, step: float = 1e-4) -> list[SuiteEntry]:
    """Central differences against reverse mode on randomly sampled coordinates.

    The default step keeps round-off in the difference quotient well below
    the smallest gradients of interest; truncation error at this step is
    far smaller still in double precision.
    """
    out = []
    for name in graphs or GRAPHS:
        rng = np.random.default_rng([seed, sorted(GRAPHS).index(name)])
        params, build = GRAPHS[name](rng)

        def with_backward():
            tape = Tape()
            loss = build(tape)
            tape.backward(loss)
            return float(loss.value)

        t0 = time.perf_counter()
        res = check_param_gradients(with_backward, lambda: float(build(NoTape()).value), params,
                                    coords_per_graph, rng, step)
        out.append(SuiteEntry(name, res.n_coords, res.max_rel_error, res.worst_param, time.perf_counter() - t0))
    return out
