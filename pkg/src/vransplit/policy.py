"""Encoder-decoder split policy with additive attention, and the critic baseline."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import N_SPLITS, RHO_DU, CostReport, Instance
from .nn import MLP, AdditiveAttention, NoTape, ParamSet, StackedLSTM, Tape, Var
from .nn.tape import _log_softmax

N_FEATURES = 4
START_TOKEN = N_SPLITS


@dataclass(frozen=True)
class FeatureScale:
    """Reference maxima that map raw per-BS quantities into [0, 1]."""

    lam: float
    delay: float
    zeta: float

    @classmethod
    def from_instance(cls, inst: Instance) -> "FeatureScale":
        return cls(float(inst.lam.max(initial=0.0)), float(inst.path_delay.max(initial=0.0)),
                   float(inst.zeta.max(initial=0.0)))


def _safe_div(x, d):
    return np.zeros_like(x) if d <= 0 else x / d


def featurize(inst: Instance, scale: FeatureScale | None = None, lam=None, zeta=None, delay=None) -> np.ndarray:
    """(N, 4) features in DU order: load, path delay, path routing cost, DU headroom.

    Headroom is the share of DU capacity left if the DU ran everything
    locally. ``lam``/``zeta``/``delay`` override the instance values; a
    leading batch dimension on them yields a (B, N, 4) array.
    """
    scale = scale or FeatureScale.from_instance(inst)
    lam = inst.lam if lam is None else np.asarray(lam, dtype=float)
    zeta = inst.zeta if zeta is None else np.asarray(zeta, dtype=float)
    delay = inst.path_delay if delay is None else np.asarray(delay, dtype=float)
    lam, zeta, delay = np.broadcast_arrays(lam, zeta, delay)
    headroom = np.clip(1.0 - lam * RHO_DU[0] / inst.du_capacity, 0.0, 1.0)
    f = np.stack([_safe_div(lam, scale.lam), _safe_div(delay, scale.delay),
                  _safe_div(zeta, scale.zeta), headroom], axis=-1)
    return np.clip(f, 0.0, 1.0)


@dataclass
class Rollout:
    """Decoded batch. Arrays are in decoding (sequence) order."""

    actions: np.ndarray  # (B, N) split ids
    step_logp: np.ndarray  # (B, N)
    total_logp: np.ndarray  # (B,)
    probs: np.ndarray  # (B, N, 4) per-step distributions (temperature 1)
    report: CostReport | None = None

    def assignments(self, perms: np.ndarray | None = None) -> np.ndarray:
        """Map decisions back to DU order given the (B, N) input permutations."""
        if perms is None:
            return self.actions
        out = np.empty_like(self.actions)
        np.put_along_axis(out, perms, self.actions, axis=1)
        return out


class Policy:
    """Feature embedding -> LSTM encoder -> attentive LSTM decoder -> 4 logits.

    The decoder input at step t is the embedding of the previous decision
    (a start token at t = 1) concatenated with the encoder state of BS t.
    """

    def __init__(self, n_features=N_FEATURES, embed_size=32, hidden_size=32, n_layers=1, seed=0):
        rng = np.random.default_rng(seed)
        self.params = P = ParamSet()
        self.hidden_size = hidden_size
        self.embed_features = P.uniform("embed.features", (n_features, embed_size), n_features, rng)
        self.embed_decision = P.uniform("embed.decision", (N_SPLITS + 1, embed_size), embed_size, rng)
        self.encoder = StackedLSTM(P, "enc", embed_size, hidden_size, n_layers, rng)
        self.decoder = StackedLSTM(P, "dec", embed_size + hidden_size, hidden_size, n_layers, rng)
        self.attention = AdditiveAttention(P, "attn", hidden_size, rng)
        self.head_w = P.uniform("head.w", (2 * hidden_size, N_SPLITS), 2 * hidden_size, rng)
        self.head_b = P.add("head.b", np.zeros(N_SPLITS))
        self.config = dict(n_features=n_features, embed_size=embed_size, hidden_size=hidden_size,
                           n_layers=n_layers, seed=seed)

    def encode(self, tape: Tape, features) -> tuple[list[Var], list]:
        """Returns the per-BS encoder hidden states and the final (h, c) per layer."""
        feats = np.asarray(features, dtype=np.float64)
        if feats.ndim == 2:
            feats = feats[None]
        b, n, _ = feats.shape
        if n < 1:
            raise ValueError("empty BS sequence")
        w = tape.param(self.embed_features)
        states = self.encoder.zero_state(tape, b)
        hs = []
        for t in range(n):
            x = tape.linear(tape.constant(feats[:, t]), w)
            h, states = self.encoder.step(tape, x, states)
            hs.append(h)
        return hs, states

    def decode(self, tape: Tape, enc_hs: list[Var], enc_state, temperature=1.0, greedy=False,
               uniforms=None, rng=None, actions=None, logprob_at_temperature=False):
        """Decode one split per BS.

        Exactly one of ``greedy``, ``actions`` (score given decisions) or
        sampling (``uniforms`` of shape (B, N), or ``rng``) drives the choice.
        Returns (actions, per-step log-prob Vars, per-step probability arrays).
        """
        b = enc_hs[0].shape[0]
        n = len(enc_hs)
        keys = tape.stack(enc_hs, axis=1)
        keys_proj = self.attention.project_keys(tape, keys)
        if actions is None and not greedy and uniforms is None:
            uniforms = rng.random((b, n))
        chosen = np.empty((b, n), dtype=np.intp)
        prev = np.full(b, START_TOKEN, dtype=np.intp)
        states = enc_state
        logps, probs = [], []
        table = tape.param(self.embed_decision)
        head_w, head_b = tape.param(self.head_w), tape.param(self.head_b)
        for t in range(n):
            inp = tape.concat([tape.embedding(table, prev), enc_hs[t]])
            h, states = self.decoder.step(tape, inp, states)
            ctx, _ = self.attention(tape, h, keys, keys_proj)
            logits = tape.linear(tape.concat([h, ctx]), head_w, head_b)
            if logprob_at_temperature and temperature != 1.0:
                logits = tape.scale(logits, 1.0 / temperature)
            logp_all = tape.log_softmax(logits)
            p = np.exp(logp_all.value)
            if actions is not None:
                a = np.asarray(actions[:, t], dtype=np.intp)
            elif greedy:
                a = np.argmax(logits.value, axis=1)
            else:
                pt = p if temperature == 1.0 or logprob_at_temperature else np.exp(
                    _log_softmax(logits.value / temperature))
                cdf = np.cumsum(pt, axis=1)
                a = np.minimum((cdf < uniforms[:, t:t + 1] * cdf[:, -1:]).sum(axis=1), N_SPLITS - 1)
            chosen[:, t] = a
            logps.append(tape.pick(logp_all, a))
            probs.append(p)
            prev = a
        return chosen, logps, np.stack(probs, axis=1)

    def rollout(self, features, tape: Tape | None = None, **kw):
        """Encode + decode; returns (Rollout, total log-prob Var)."""
        tape = NoTape() if tape is None else tape
        hs, st = self.encode(tape, features)
        acts, logps, probs = self.decode(tape, hs, st, **kw)
        total = logps[0]
        for lp in logps[1:]:
            total = tape.add(total, lp)
        step = np.stack([lp.value for lp in logps], axis=1)
        return Rollout(acts, step, total.value, probs), total


class Critic:
    """LSTM encoder over the BS sequence, MLP on the final hidden state.

    The scalar output is multiplied by a fixed ``output_scale`` so the network
    works in units of the instance cost rather than raw monetary units.
    """

    def __init__(self, n_features=N_FEATURES, embed_size=32, hidden_size=32, n_layers=1,
                 mlp_hidden=32, output_scale=1.0, seed=1):
        rng = np.random.default_rng(seed)
        self.params = P = ParamSet()
        self.embed = P.uniform("critic.enc.embed", (n_features, embed_size), n_features, rng)
        self.encoder = StackedLSTM(P, "critic.enc", embed_size, hidden_size, n_layers, rng)
        self.mlp = MLP(P, "critic.mlp", [hidden_size, mlp_hidden, 1], rng)
        self.output_scale = float(output_scale)
        self.config = dict(n_features=n_features, embed_size=embed_size, hidden_size=hidden_size,
                           n_layers=n_layers, mlp_hidden=mlp_hidden, seed=seed)

    def __call__(self, tape: Tape, features) -> Var:
        feats = np.asarray(features, dtype=np.float64)
        if feats.ndim == 2:
            feats = feats[None]
        b, n, _ = feats.shape
        if n < 1:
            raise ValueError("empty BS sequence")
        w = tape.param(self.embed)
        states = self.encoder.zero_state(tape, b)
        h = None
        for t in range(n):
            h, states = self.encoder.step(tape, tape.linear(tape.constant(feats[:, t]), w), states)
        out = self.mlp(tape, h)
        return tape.scale(tape.index(out, (slice(None), 0)), self.output_scale)


def critic_value(critic: Critic, features) -> np.ndarray:
    return critic(NoTape(), features).value
