"""Exact solvers for the split assignment problem.

``solve_exhaustive`` enumerates every assignment and is the reference for
small instances; ``solve_bnb`` is a depth-first branch and bound that scales to
a hundred DUs when the coupling constraints are loose.
"""
from __future__ import annotations

import enum
import json
import time
from dataclasses import dataclass

import numpy as np

from .model import (DELAY_BOUND_US, FLOW_OFFSET, FLOW_SLOPE, N_SPLITS, RHO_CU, RHO_DU, Instance,
                    evaluate, evaluate_batch)


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"


class SizeError(ValueError):
    pass


@dataclass
class OracleResult:
    best_assignment: tuple[int, ...] | None
    best_cost: float
    status: Status
    nodes_explored: int
    wall_time: float = 0.0

    def to_dict(self):
        return {"best_assignment": None if self.best_assignment is None else list(self.best_assignment),
                "best_cost": self.best_cost, "status": self.status.value,
                "nodes_explored": self.nodes_explored, "wall_time_s": self.wall_time}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1)

    def csv_record(self, instance_id) -> str:
        return f"{instance_id},{self.best_cost!r},{self.status.value},{self.nodes_explored},{self.wall_time:.6f}"


def _tol(x):
    return 1e-9 * max(1.0, abs(x))


def solve_exhaustive(inst: Instance, max_n: int = 12, chunk: int = 1 << 16) -> OracleResult:
    """Enumerate all 4^N assignments; ties go to the lexicographically smallest."""
    n = inst.n
    if n > max_n:
        raise SizeError(f"exhaustive search limited to {max_n} DUs, got {n}")
    t0 = time.perf_counter()
    total = N_SPLITS ** n
    powers = N_SPLITS ** np.arange(n - 1, -1, -1)
    best_code, best_j = None, np.inf
    for start in range(0, total, chunk):
        codes = np.arange(start, min(total, start + chunk))
        a = (codes[:, None] // powers) % N_SPLITS
        r = evaluate_batch(inst, a)
        feas = ~(r["C"] > 0).any(axis=1)
        if not feas.any():
            continue
        j = np.where(feas, r["J"], np.inf)
        jmin = j.min()
        if best_code is None or jmin < best_j - _tol(best_j):
            k = int(np.flatnonzero(j <= jmin + _tol(jmin))[0])
            best_code, best_j = int(codes[k]), float(j[k])
    wall = time.perf_counter() - t0
    if best_code is None:
        return OracleResult(None, float("inf"), Status.INFEASIBLE, total, wall)
    best = tuple(int(x) for x in (best_code // powers) % N_SPLITS)
    return OracleResult(best, evaluate(best, inst).total, Status.OPTIMAL, total, wall)


def option_costs(inst: Instance) -> np.ndarray:
    """(N, 4) separable per-DU cost: V_n + U_n0 + the DU's share of V_0."""
    p = inst.params
    lam = inst.lam[:, None]
    flow = FLOW_SLOPE * lam + FLOW_OFFSET
    return (inst.alpha[:, None] + inst.beta[:, None] * lam * RHO_DU + inst.zeta[:, None] * flow
            + p.vm_cost_cu + lam * p.compute_cost_cu * RHO_CU)


def individually_feasible(inst: Instance) -> np.ndarray:
    """(N, 4) mask of options that respect every constraint on their own.

    DU capacity and delay are exact per-DU constraints; the CU-capacity and
    link-capacity checks are necessary conditions since loads only add up.
    """
    lam = inst.lam[:, None]
    flow = FLOW_SLOPE * lam + FLOW_OFFSET
    ok = lam * RHO_DU <= inst.du_capacity[:, None]
    ok &= inst.path_delay[:, None] <= DELAY_BOUND_US
    ok &= lam * RHO_CU <= inst.params.cu_capacity
    for r in range(inst.n):
        used = inst.membership[r] > 0
        if used.any():
            ok[r] &= flow[r] <= inst.link_capacity[used].min()
    return ok


def _hull_segments(weights, costs):
    """Cost-vs-weight-reduction segments of an option set, cheapest option first.

    Returns (slopes, reductions): moving from the cheapest option toward
    lighter options along the lower convex hull, each segment reduces the
    resource use by ``reductions[s]`` at ``slopes[s]`` extra cost per unit.
    """
    w, c = weights[0], costs[0]
    slopes, red = [], []
    while True:
        best = None
        for w2, c2 in zip(weights, costs):
            if w2 < w:
                s = (c2 - c) / (w - w2)
                if best is None or s < best[0] or (s == best[0] and w2 < best[1]):
                    best = (s, w2, c2)
        if best is None:
            break
        slopes.append(max(best[0], 0.0))
        red.append(w - best[1])
        w, c = best[1], best[2]
    return np.array(slopes), np.array(red)


def _fractional_extra(segs, need):
    """Cheapest fractional reduction of ``need`` units from pooled hull segments."""
    slopes = np.concatenate([s for s, _ in segs])
    red = np.concatenate([r for _, r in segs])
    if red.sum() < need:
        return np.inf
    idx = np.argsort(slopes, kind="stable")
    slopes, red = slopes[idx], red[idx]
    cum = np.cumsum(red)
    k = int(np.searchsorted(cum, need))
    prev = cum[k - 1] if k else 0.0
    return float((slopes[:k] * red[:k]).sum() + slopes[k] * (need - prev))


def solve_bnb(inst: Instance, max_n: int = 200) -> OracleResult:
    """Depth-first branch and bound.

    DUs are branched in order of decreasing load, options in order of
    increasing separable cost; options violating a DU's own capacity or delay
    bound are dropped up front. The lower bound at a node is the accumulated
    cost plus every undecided DU's cheapest option, raised by the largest
    fractional knapsack repair cost over the shared resources (each link and
    the CU) whose residual capacity the cheapest options would overflow.
    Among equal-cost optima the lexicographically smallest assignment (in DU
    order) is returned.
    """
    n = inst.n
    if n > max_n:
        raise SizeError(f"branch and bound limited to {max_n} DUs, got {n}")
    t0 = time.perf_counter()
    cost = option_costs(inst)
    ok = individually_feasible(inst)
    if not ok.any(axis=1).all():
        return OracleResult(None, float("inf"), Status.INFEASIBLE, 0, time.perf_counter() - t0)

    order = sorted(range(n), key=lambda k: (-inst.lam[k], k))
    lam = inst.lam
    flows = FLOW_SLOPE * lam[:, None] + FLOW_OFFSET
    cu_w = lam[:, None] * RHO_CU
    cu_cap = inst.params.cu_capacity
    link_cap = inst.link_capacity
    n_links = len(link_cap)

    cand, flow_segs, cu_segs = [], [], []
    cheap_cost = np.empty(n)
    cheap_flow = np.zeros((n, n_links))
    min_flow = np.zeros((n, n_links))
    cheap_cu = np.empty(n)
    min_cu = np.empty(n)
    rows = []
    for i, k in enumerate(order):
        opts = sorted((o for o in range(N_SPLITS) if ok[k, o]), key=lambda o: (cost[k, o], o))
        cand.append(opts)
        cheap_cost[i] = cost[k, opts[0]]
        mem = inst.membership[k]
        rows.append(np.flatnonzero(mem))
        cheap_flow[i] = flows[k, opts[0]] * mem
        min_flow[i] = flows[k, opts].min() * mem
        cheap_cu[i] = cu_w[k, opts[0]]
        min_cu[i] = cu_w[k, opts].min()
        flow_segs.append(_hull_segments(flows[k, opts], cost[k, opts]))
        cu_segs.append(_hull_segments(cu_w[k, opts], cost[k, opts]))

    def suffix(x):
        return np.concatenate([np.cumsum(x[::-1], axis=0)[::-1], np.zeros((1,) + x.shape[1:])])

    sfx_cost = suffix(cheap_cost)
    sfx_cheap_flow, sfx_min_flow = suffix(cheap_flow), suffix(min_flow)
    sfx_cheap_cu, sfx_min_cu = suffix(cheap_cu), suffix(min_cu)
    users = [np.flatnonzero(min_flow[:, e] > 0) for e in range(n_links)]
    link_eps = 1e-9 * np.maximum(link_cap, 1.0)
    cu_eps = 1e-9 * max(cu_cap, 1.0)

    def repair_bound(i, cu_load, link_load):
        """Extra cost forced by shared capacities; inf if provably infeasible."""
        resid = link_cap - link_load
        if (sfx_min_flow[i] > resid + link_eps).any() or sfx_min_cu[i] > cu_cap - cu_load + cu_eps:
            return np.inf
        extra = 0.0
        need_cu = sfx_cheap_cu[i] - (cu_cap - cu_load)
        if need_cu > cu_eps:
            extra = _fractional_extra(cu_segs[i:], need_cu)
        need = sfx_cheap_flow[i] - resid
        for e in np.flatnonzero(need > link_eps):
            u = users[e]
            u = u[u >= i]
            extra = max(extra, _fractional_extra([flow_segs[j] for j in u], need[e]))
        return extra

    best = {"cost": np.inf, "seq": None}
    explored = 0
    chosen = [0] * n

    def dfs(i, acc, cu_load, link_load):
        nonlocal explored
        if i == n:
            seq = tuple(chosen)
            b = best["cost"]
            if best["seq"] is None or acc < b - _tol(b) or (acc <= b + _tol(b) and seq < best["seq"]):
                best["cost"], best["seq"] = acc, seq
            return
        lb = acc + sfx_cost[i] + repair_bound(i, cu_load, link_load)
        if lb == np.inf or lb > best["cost"] + _tol(best["cost"]):
            return
        k = order[i]
        r = rows[i]
        for o in cand[i]:
            c = acc + cost[k, o]
            if c + sfx_cost[i + 1] > best["cost"] + _tol(best["cost"]):
                break
            cl = cu_load + cu_w[k, o]
            if cl > cu_cap:
                continue
            ll = link_load
            if r.size:
                ll = link_load.copy()
                ll[r] += flows[k, o]
                if (ll[r] > link_cap[r]).any():
                    continue
            explored += 1
            chosen[k] = o
            dfs(i + 1, c, cl, ll)

    dfs(0, 0.0, 0.0, np.zeros(n_links))
    wall = time.perf_counter() - t0
    if best["seq"] is None:
        return OracleResult(None, float("inf"), Status.INFEASIBLE, explored, wall)
    seq = best["seq"]
    return OracleResult(seq, evaluate(seq, inst).total, Status.OPTIMAL, explored, wall)
