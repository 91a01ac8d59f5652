"""REINFORCE with a Lagrangian-penalized cost and a learned critic baseline."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .model import Instance, dran_assignment, evaluate, evaluate_batch
from .nn import NumericError, ParamSet, Tape, load_checkpoint, save_checkpoint
from .nn.adam import AdamState, adam_update
from .policy import Critic, FeatureScale, Policy, critic_value, featurize

log = logging.getLogger(__name__)

CURVE_COLUMNS = ("epoch", "mean_J", "mean_xi", "mean_L", "critic_loss", "grad_norm")


@dataclass
class TrainConfig:
    epochs: int = 15000
    batch_size: int = 128
    lr_agent: float = 1e-4
    lr_critic: float = 5e-3
    temperature: float = 1.0
    clip_norm: float = 2.0
    seed: int = 0
    randomize_scale: bool = True
    load_scale_range: tuple[float, float] = (0.0, 1.0)
    cost_scale_range: tuple[float, float] = (0.0, 1.0)
    embed_size: int = 32
    hidden_size: int = 32
    n_layers: int = 1
    checkpoint_every: int = 0  # 0 disables periodic checkpoints

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if min(self.lr_agent, self.lr_critic, self.temperature) <= 0:
            raise ValueError("learning rates and temperature must be positive")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for k in ("load_scale_range", "cost_scale_range"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


@dataclass
class EpochRecord:
    epoch: int
    mean_J: float
    mean_xi: float
    mean_L: float
    critic_loss: float
    grad_norm: float

    def row(self):
        return [self.epoch] + [repr(float(getattr(self, c))) for c in CURVE_COLUMNS[1:]]


@dataclass
class Agent:
    """Policy and critic together with their optimizer states."""

    policy: Policy
    critic: Critic
    policy_opt: AdamState = field(default_factory=AdamState)
    critic_opt: AdamState = field(default_factory=AdamState)
    epoch: int = 0
    scale: FeatureScale | None = None  # feature normalization of the training instance

    @classmethod
    def create(cls, inst: Instance, config: TrainConfig) -> "Agent":
        pol = Policy(embed_size=config.embed_size, hidden_size=config.hidden_size,
                     n_layers=config.n_layers, seed=config.seed)
        j_dran = evaluate(dran_assignment(inst.n), inst).total
        crit = Critic(embed_size=config.embed_size, hidden_size=config.hidden_size, n_layers=config.n_layers,
                      mlp_hidden=config.hidden_size, output_scale=j_dran, seed=config.seed + 1)
        return cls(pol, crit, scale=FeatureScale.from_instance(inst))

    def save(self, path, meta=None):
        params = ParamSet({**self.policy.params, **self.critic.params})
        meta = dict(meta or {})
        meta.update(epoch=self.epoch, policy=self.policy.config, critic=self.critic.config,
                    critic_output_scale=self.critic.output_scale,
                    feature_scale=None if self.scale is None else asdict(self.scale))
        save_checkpoint(path, params, {"policy": self.policy_opt, "critic": self.critic_opt}, meta)

    @classmethod
    def load(cls, path) -> "Agent":
        state, opts, meta = load_checkpoint(path)
        pol = Policy(**meta["policy"])
        crit = Critic(**meta["critic"], output_scale=meta["critic_output_scale"])
        pol.params.load_state(state)
        crit.params.load_state(state)
        fs = meta.get("feature_scale")
        return cls(pol, crit, opts.get("policy", AdamState()), opts.get("critic", AdamState()), meta["epoch"],
                   None if fs is None else FeatureScale(**fs))


def sample_batch(n: int, batch_size: int, rng: np.random.Generator) -> np.ndarray:
    """(B, N) independent uniform permutations of the BS order."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    return np.argsort(rng.random((batch_size, n)), axis=1, kind="stable")


def _half_open_above(rng, bounds, size):
    # (lo, hi]: a zero multiplier would erase the instance
    lo, hi = bounds
    return hi - (hi - lo) * rng.random(size)


def epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    return np.random.default_rng([seed, epoch])


def policy_gradient_step(agent: Agent, features, perms, inst: Instance, config: TrainConfig,
                         rng: np.random.Generator, lam=None, zeta=None, baseline=None):
    """Sample, evaluate, and accumulate the REINFORCE gradient into the policy params.

    Returns (assignments in DU order, evaluation dict, baselines, grad norm
    before clipping). ``baseline`` overrides the critic (used by tests).
    """
    pol, crit = agent.policy, agent.critic
    b = features.shape[0]
    pol.params.zero_grad()
    tape = Tape()
    ro, total = pol.rollout(features, tape=tape, rng=rng, temperature=config.temperature)
    assign = ro.assignments(perms)
    ev = evaluate_batch(inst, assign, lam=lam, zeta=zeta)
    if baseline is None:
        baseline = critic_value(crit, features)
    adv = ev["L"] - baseline
    tape.backward(total, adv / b)
    norm = pol.params.clip_grad_norm(config.clip_norm)
    return assign, ev, baseline, norm


def critic_step(agent: Agent, features, targets, config: TrainConfig) -> float:
    """One MSE regression step of the critic toward the observed penalized costs."""
    crit = agent.critic
    crit.params.zero_grad()
    tape = Tape()
    pred = crit(tape, features)
    b = len(targets)
    resid = pred.value - targets
    loss = float(np.mean(resid * resid))
    tape.backward(pred, 2.0 * resid / b)
    crit.params.clip_grad_norm(config.clip_norm)
    adam_update(crit.params, agent.critic_opt, config.lr_critic)
    return loss


class Trainer:
    """Runs the training loop on one base instance.

    With ``randomize_scale`` every batch element gets its own instance-wide
    load and routing-cost multipliers; features are normalized against the
    unscaled base instance so the multipliers stay visible to the networks.
    """

    def __init__(self, inst: Instance, config: TrainConfig, agent: Agent | None = None):
        self.inst = inst
        self.config = config
        self.agent = agent or Agent.create(inst, config)
        if self.agent.scale is None:
            self.agent.scale = FeatureScale.from_instance(inst)
        self.scale = self.agent.scale

    def _batch_inputs(self, rng):
        cfg, inst = self.config, self.inst
        b, n = cfg.batch_size, inst.n
        perms = sample_batch(n, b, rng)
        lam = np.broadcast_to(inst.lam, (b, n))
        zeta = np.broadcast_to(inst.zeta, (b, n))
        if cfg.randomize_scale:
            lam = lam * _half_open_above(rng, cfg.load_scale_range, b)[:, None]
            zeta = zeta * _half_open_above(rng, cfg.cost_scale_range, b)[:, None]
        feats = featurize(inst, self.scale, lam=lam, zeta=zeta)
        feats = np.take_along_axis(feats, perms[:, :, None], axis=1)
        return perms, feats, lam, zeta

    def train_epoch(self) -> EpochRecord:
        cfg, agent = self.config, self.agent
        rng = epoch_rng(cfg.seed, agent.epoch)
        perms, feats, lam, zeta = self._batch_inputs(rng)
        _, ev, _, norm = policy_gradient_step(agent, feats, perms, self.inst, cfg, rng, lam=lam, zeta=zeta)
        closs = critic_step(agent, feats, ev["L"], cfg)
        adam_update(agent.policy.params, agent.policy_opt, cfg.lr_agent)
        rec = EpochRecord(agent.epoch, float(ev["J"].mean()), float(ev["xi"].mean()), float(ev["L"].mean()),
                          closs, norm)
        agent.epoch += 1
        return rec

    def train(self, epochs: int | None = None, curve_path=None, checkpoint_dir=None, progress_every=0):
        """Run until ``agent.epoch`` reaches ``epochs`` (default config.epochs).

        Curve rows are appended to ``curve_path`` if given, so a resumed run
        continues the same file. Returns the list of records produced.
        """
        cfg = self.config
        target = cfg.epochs if epochs is None else epochs
        records = []
        fh = writer = None
        if curve_path is not None:
            curve_path = Path(curve_path)
            new = not curve_path.exists() or self.agent.epoch == 0
            fh = open(curve_path, "w" if new else "a", newline="")
            writer = csv.writer(fh, lineterminator="\n")
            if new:
                writer.writerow(CURVE_COLUMNS)
        try:
            while self.agent.epoch < target:
                try:
                    rec = self.train_epoch()
                except NumericError:
                    if checkpoint_dir is not None:
                        self.agent.save(Path(checkpoint_dir) / f"diagnostic_epoch{self.agent.epoch}.npz",
                                        {"train_config": cfg.to_dict(), "diagnostic": True})
                    raise
                records.append(rec)
                if writer is not None:
                    writer.writerow(rec.row())
                if progress_every and rec.epoch % progress_every == 0:
                    log.info("epoch %d J=%.4f xi=%.4f L=%.4f critic=%.4g", rec.epoch, rec.mean_J, rec.mean_xi,
                             rec.mean_L, rec.critic_loss)
                if checkpoint_dir is not None and cfg.checkpoint_every and self.agent.epoch % cfg.checkpoint_every == 0:
                    self.agent.save(Path(checkpoint_dir) / f"epoch{self.agent.epoch:06d}.npz",
                                    {"train_config": cfg.to_dict()})
        finally:
            if fh is not None:
                fh.close()
        return records


def train(inst: Instance, config: TrainConfig, curve_path=None, checkpoint_dir=None, agent: Agent | None = None):
    """Convenience wrapper: returns (agent, records)."""
    t = Trainer(inst, config, agent)
    recs = t.train(curve_path=curve_path, checkpoint_dir=checkpoint_dir)
    if checkpoint_dir is not None:
        t.agent.save(Path(checkpoint_dir) / "final.npz", {"train_config": config.to_dict()})
    return t.agent, recs


def write_manifest(path, **sections):
    Path(path).write_text(json.dumps(sections, indent=1, sort_keys=True, default=str) + "\n")
