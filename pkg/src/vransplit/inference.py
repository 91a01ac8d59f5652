"""Sampling search with a trained policy and the optimality-gap harness."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .model import CostReport, Instance, cran_assignment, dran_assignment, evaluate, evaluate_batch
from .oracle import Status, solve_bnb
from .policy import FeatureScale, Policy, featurize

DEFAULT_SWEEP = (0.5, 1.0, 1.5, 2.0, 2.5)


@dataclass(frozen=True)
class SearchConfig:
    """``sample_count`` rollouts are drawn per temperature.

    ``temperatures`` lists every temperature tried; an empty tuple means
    only ``temperature``. With ``permute`` every candidate also sees its own
    random BS order, since decoding order changes what the policy proposes.
    """

    sample_count: int = 1280
    temperature: float = 1.5
    temperatures: tuple[float, ...] = DEFAULT_SWEEP
    include_greedy: bool = True
    permute: bool = True
    seed: int = 0
    chunk: int = 256

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        if min((self.temperature,) + tuple(self.temperatures)) <= 0:
            raise ValueError("temperatures must be positive")
        if self.chunk < 1:
            raise ValueError("chunk must be >= 1")

    @property
    def sweep(self) -> tuple[float, ...]:
        return tuple(self.temperatures) or (self.temperature,)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "temperatures" in d:
            d["temperatures"] = tuple(d["temperatures"])
        return cls(**d)


@dataclass
class SearchResult:
    best: tuple[int, ...]
    report: CostReport
    feasible_fraction: float
    samples_evaluated: int
    temperature: float | None  # None when the greedy rollout won
    metadata: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.report.feasible


def _select(assign: np.ndarray, j: np.ndarray, l: np.ndarray, feas: np.ndarray) -> int:
    """Index of the best candidate: feasible by J, else all by L; ties by sequence."""
    if feas.any():
        key = np.where(feas, j, np.inf)
    else:
        key = l
    tol = 1e-9 * max(1.0, float(np.abs(key[np.isfinite(key)]).min(initial=0.0)))
    tied = np.flatnonzero(key <= key.min() + tol)
    # lexsort keys: last one is primary
    order = np.lexsort(assign[tied].T[::-1])
    return int(tied[order[0]])


def _candidates(policy: Policy, feats: np.ndarray, cfg: SearchConfig, temperature: float,
                rng: np.random.Generator) -> np.ndarray:
    """(sample_count, N) assignments in DU order.

    Uniforms are drawn as one (count, 2, N) block so a smaller budget sees a
    prefix of a larger one's candidates.
    """
    n = feats.shape[0]
    u = rng.random((cfg.sample_count, 2, n))
    out = np.empty((cfg.sample_count, n), dtype=np.intp)
    for s in range(0, cfg.sample_count, cfg.chunk):
        blk = u[s:s + cfg.chunk]
        if cfg.permute:
            perms = np.argsort(blk[:, 0], axis=1, kind="stable")
        else:
            perms = np.broadcast_to(np.arange(n), (len(blk), n))
        ro, _ = policy.rollout(feats[perms], uniforms=blk[:, 1], temperature=temperature)
        out[s:s + len(blk)] = ro.assignments(np.ascontiguousarray(perms))
    return out


def search(policy: Policy, inst: Instance, config: SearchConfig | None = None,
           scale: FeatureScale | None = None) -> SearchResult:
    """Best of many sampled assignments (plus the greedy one) for ``inst``.

    ``scale`` should be the training instance's feature normalization so
    rescaled instances are presented on the scale the policy learned.
    """
    cfg = config or SearchConfig()
    feats = featurize(inst, scale)
    streams = np.random.default_rng(cfg.seed).spawn(len(cfg.sweep))
    blocks, temps = [], []
    for t, rng in zip(cfg.sweep, streams):
        blocks.append(_candidates(policy, feats, cfg, t, rng))
        temps.extend([t] * cfg.sample_count)
    if cfg.include_greedy:
        ro, _ = policy.rollout(feats, greedy=True)
        blocks.append(ro.actions)
        temps.append(None)
    assign = np.concatenate(blocks)
    ev = evaluate_batch(inst, assign)
    feas = ~(ev["C"] > 0).any(axis=1)
    k = _select(assign, ev["J"], ev["L"], feas)
    best = tuple(int(x) for x in assign[k])
    meta = {"temperatures": list(cfg.sweep), "sample_count": cfg.sample_count,
            "include_greedy": cfg.include_greedy, "permute": cfg.permute, "seed": cfg.seed,
            "distinct_candidates": int(len(np.unique(assign, axis=0)))}
    return SearchResult(best, evaluate(best, inst), float(feas.mean()), len(assign), temps[k], meta)


def dump_assignment(result: SearchResult, inst: Instance) -> str:
    """Structured-text map DU id -> split id, with the cost summary."""
    d = {
        "assignment": {str(du): int(o) for du, o in zip(inst.du_ids, result.best)},
        "J": result.report.total,
        "penalty": result.report.penalty,
        "feasible": result.report.feasible,
        "feasible_fraction": result.feasible_fraction,
        "samples_evaluated": result.samples_evaluated,
        "temperature": result.temperature,
        "search": result.metadata,
    }
    return json.dumps(d, indent=1, sort_keys=True) + "\n"


GAP_COLUMNS = ("instance_id", "J_search", "J_opt", "gap_pct", "J_dran", "J_cran_reference",
               "search_feasible", "oracle_status", "flags")


@dataclass
class GapRow:
    instance_id: str
    J_search: float
    J_opt: float
    gap_pct: float
    J_dran: float
    J_cran_reference: float
    search_feasible: bool
    oracle_status: str
    flags: str = ""
    best: tuple[int, ...] = ()

    @property
    def counted(self) -> bool:
        """Rows that enter gap statistics."""
        return self.oracle_status == Status.OPTIMAL.value and self.search_feasible

    def cells(self):
        return [self.instance_id, repr(self.J_search), repr(self.J_opt), repr(self.gap_pct), repr(self.J_dran),
                repr(self.J_cran_reference), int(self.search_feasible), self.oracle_status, self.flags]


def evaluate_suite(policy: Policy, instances: Iterable[tuple[str, Instance]], config: SearchConfig | None = None,
                   scale: FeatureScale | None = None, oracle=solve_bnb) -> list[GapRow]:
    """Search and solve every instance exactly; one gap row per instance.

    Oracle-infeasible instances and infeasible search results are flagged and
    left out of the gap statistics (gap is NaN there).
    """
    rows = []
    for iid, inst in instances:
        res = search(policy, inst, config, scale)
        opt = oracle(inst)
        j_dran = evaluate(dran_assignment(inst.n), inst).total
        j_cran = evaluate(cran_assignment(inst.n), inst, reference_only=True).total
        flags = []
        if opt.status != Status.OPTIMAL:
            flags.append("oracle_infeasible")
        if not res.feasible:
            flags.append("search_infeasible")
        ok = not flags
        gap = 100.0 * (res.report.total - opt.best_cost) / opt.best_cost if ok else float("nan")
        rows.append(GapRow(str(iid), res.report.total, opt.best_cost, gap, j_dran, j_cran, res.feasible,
                           opt.status.value, ";".join(flags), res.best))
    return rows


def gap_stats(rows: Sequence[GapRow]) -> dict:
    g = np.array([r.gap_pct for r in rows if r.counted])
    return {"count": int(g.size), "flagged": int(sum(not r.counted for r in rows)),
            "mean_gap_pct": float(g.mean()) if g.size else float("nan"),
            "max_gap_pct": float(g.max()) if g.size else float("nan")}


def gap_table_csv(rows: Sequence[GapRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GAP_COLUMNS)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def write_gap_table(rows: Sequence[GapRow], path) -> None:
    Path(path).write_text(gap_table_csv(rows))
