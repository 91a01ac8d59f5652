"""Split options, per-BS cost terms, constraint violations and penalized cost."""
from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .topology import RoutePath, Topology, scaled_topology


class Split(enum.IntEnum):
    S0 = 0
    S1 = 1
    S2 = 2
    S3 = 3


N_SPLITS = 4
DELAY_BOUND_MS = np.array([30.0, 30.0, 2.0, 0.25])
DELAY_BOUND_US = DELAY_BOUND_MS * 1000.0
RHO_DU = np.array([0.05, 0.04, 0.00325, 0.0])
RHO_CU = np.array([0.0, 0.001, 0.00175, 0.05])
# flow = FLOW_SLOPE[o] * lambda + FLOW_OFFSET[o]
FLOW_SLOPE = np.array([1.0, 1.0, 1.02, 0.0])
FLOW_OFFSET = np.array([0.0, 0.0, 1.5, 2500.0])

FAMILIES = ("cu_capacity", "du_capacity", "link_capacity", "delay")


@dataclass(frozen=True)
class SplitOption:
    id: Split
    delay_bound: float  # ms
    rho_du: float
    rho_cu: float


SPLIT_OPTIONS = tuple(
    SplitOption(Split(o), float(DELAY_BOUND_MS[o]), float(RHO_DU[o]), float(RHO_CU[o])) for o in range(N_SPLITS)
)


class InputError(ValueError):
    pass


@dataclass(frozen=True)
class BsProfile:
    du_id: int
    lam: float = 150.0  # Mbps
    vm_cost: float = 1.0  # alpha_n
    compute_cost: float = 1.0  # beta_n
    capacity: float = 7.5  # H_n, reference cores
    route: RoutePath | None = None

    def __post_init__(self):
        if min(self.lam, self.vm_cost, self.compute_cost) < 0 or not self.capacity > 0:
            raise InputError(f"DU {self.du_id}: costs and load must be >= 0 and capacity > 0")


@dataclass(frozen=True)
class SystemParams:
    cu_capacity: float = 75.0  # H_0
    vm_cost_cu: float = 0.5  # alpha_0
    compute_cost_cu: float = 0.017  # beta_0
    penalty_weights: tuple[float, float, float, float] | None = None  # mu, FAMILIES order

    def __post_init__(self):
        if self.penalty_weights is not None and min(self.penalty_weights) < 0:
            raise InputError("penalty weights must be >= 0")


def flow_of(split, lam):
    """Mbps carried on the DU->CU path for the given split and load."""
    return FLOW_SLOPE[split] * lam + FLOW_OFFSET[split]


def du_cost(profile: BsProfile, split) -> float:
    return profile.vm_cost + profile.compute_cost * profile.lam * RHO_DU[split]


def cu_share(profile: BsProfile, params: SystemParams, split) -> float:
    """One DU's contribution to the CU computing cost."""
    return params.vm_cost_cu + profile.lam * params.compute_cost_cu * RHO_CU[split]


def cu_cost(assignment: Sequence[int], profiles: Sequence[BsProfile], params: SystemParams) -> float:
    if len(assignment) != len(profiles):
        raise InputError("assignment does not cover every DU")
    return float(sum(cu_share(p, params, o) for p, o in zip(profiles, assignment)))


def routing_cost(profile: BsProfile, split) -> float:
    return profile.route.total_routing_cost * flow_of(split, profile.lam)


def dran_assignment(n: int) -> tuple[int, ...]:
    return (int(Split.S0),) * n


def cran_assignment(n: int) -> tuple[int, ...]:
    return (int(Split.S3),) * n


@dataclass(frozen=True)
class CostReport:
    assignment: tuple[int, ...]
    du_costs: np.ndarray  # V_n
    cu_cost: float  # V_0
    routing_costs: np.ndarray  # U_n0
    total: float  # J
    violations: np.ndarray  # C, normalized, FAMILIES order
    raw_violations: np.ndarray  # unnormalized overshoot (cores, cores, Mbps, microseconds)
    penalty: float  # xi
    penalized: float  # L
    reference_only: bool = False

    @property
    def feasible(self) -> bool:
        return not np.any(self.violations > 0)


class Instance:
    """One problem instance: topology, per-DU profiles (DU order) and system params.

    Holds the flat arrays the vectorized evaluator needs. ``penalty_weights``
    default to the D-RAN cost of this instance for every family, so a 100 %
    normalized overshoot costs as much as running everything distributed.
    """

    def __init__(self, topology: Topology, profiles: Sequence[BsProfile], params: SystemParams | None = None):
        params = params or SystemParams()
        self.topology = topology
        self.profiles = tuple(
            p if p.route is not None else replace(p, route=topology.paths[p.du_id]) for p in profiles
        )
        self.du_ids = [p.du_id for p in self.profiles]
        self.lam = np.array([p.lam for p in self.profiles])
        self.alpha = np.array([p.vm_cost for p in self.profiles])
        self.beta = np.array([p.compute_cost for p in self.profiles])
        self.du_capacity = np.array([p.capacity for p in self.profiles])
        self.zeta = np.array([p.route.total_routing_cost for p in self.profiles])
        self.path_delay = np.array([p.route.total_delay for p in self.profiles])
        self.membership = np.zeros((len(self.profiles), topology.n_links))
        for r, p in enumerate(self.profiles):
            self.membership[r, list(p.route.links)] = 1.0
        self.link_capacity = np.array([l.capacity for l in topology.links])
        if params.penalty_weights is None:
            self.params = params
            self.mu = np.zeros(len(FAMILIES))
            j = float(evaluate_batch(self, np.zeros((1, self.n), dtype=int))["J"][0])
            params = replace(params, penalty_weights=(j, j, j, j))
        self.params = params
        self.mu = np.array(params.penalty_weights, dtype=float)

    @property
    def n(self) -> int:
        return len(self.profiles)

    @classmethod
    def uniform(cls, topology: Topology, lam=150.0, vm_cost=1.0, compute_cost=1.0, du_capacity=7.5,
                params: SystemParams | None = None) -> "Instance":
        profiles = [BsProfile(du, lam, vm_cost, compute_cost, du_capacity) for du in topology.du_ids]
        return cls(topology, profiles, params)

    def scaled(self, load_scale=1.0, cost_scale=1.0) -> "Instance":
        """Same instance with every lambda and every path routing cost rescaled; mu kept."""
        profiles = [
            replace(p, lam=p.lam * load_scale,
                    route=replace(p.route, total_routing_cost=p.route.total_routing_cost * cost_scale))
            for p in self.profiles
        ]
        return Instance(self.topology, profiles, self.params)

    def with_load(self, lam: float) -> "Instance":
        return Instance(self.topology, [replace(p, lam=lam) for p in self.profiles], self.params)


def evaluate_batch(inst: Instance, assignments, lam=None, zeta=None, penalize=True, delay=None) -> dict:
    """Vectorized cost/violation evaluation of a (B, N) integer array.

    ``lam``, ``zeta`` and ``delay`` optionally override the per-DU load, path
    routing cost and path delay, either (N,) or per row (B, N). Returns arrays keyed
    V_n, V_0, U, J, raw (B, 4), C (B, 4), xi, L.
    """
    a = np.asarray(assignments, dtype=np.intp)
    if a.ndim == 1:
        a = a[None, :]
    if a.shape[1] != inst.n:
        raise InputError(f"assignment covers {a.shape[1]} DUs, instance has {inst.n}")
    if a.size and (a.min() < 0 or a.max() >= N_SPLITS):
        raise InputError("split ids must lie in 0..3")
    lam = inst.lam if lam is None else np.asarray(lam, dtype=float)
    zeta = inst.zeta if zeta is None else np.asarray(zeta, dtype=float)
    path_delay = inst.path_delay if delay is None else np.asarray(delay, dtype=float)
    p = inst.params

    rho_d = RHO_DU[a]
    rho_c = RHO_CU[a]
    flow = FLOW_SLOPE[a] * lam + FLOW_OFFSET[a]
    du_load = lam * rho_d
    v_n = inst.alpha + inst.beta * du_load
    v_0 = (p.vm_cost_cu + lam * p.compute_cost_cu * rho_c).sum(axis=1)
    u = zeta * flow
    j = (v_n + u).sum(axis=1) + v_0

    cu_over = np.maximum(0.0, (lam * rho_c).sum(axis=1) - p.cu_capacity)
    du_over = np.maximum(0.0, du_load - inst.du_capacity)
    link_over = np.maximum(0.0, flow @ inst.membership - inst.link_capacity)
    bound = DELAY_BOUND_US[a]
    delay_over = np.maximum(0.0, path_delay - bound)
    raw = np.stack([cu_over, du_over.sum(axis=1), link_over.sum(axis=1), delay_over.sum(axis=1)], axis=1)
    c = np.stack([
        cu_over / p.cu_capacity,
        (du_over / inst.du_capacity).sum(axis=1),
        (link_over / inst.link_capacity).sum(axis=1) if inst.link_capacity.size else np.zeros(len(a)),
        (delay_over / bound).sum(axis=1),
    ], axis=1)
    xi = c @ inst.mu if penalize else np.zeros(len(a))
    return {"V_n": v_n, "V_0": v_0, "U": u, "J": j, "raw": raw, "C": c, "xi": xi, "L": j + xi}


def evaluate(assignment: Sequence[int], inst: Instance, reference_only: bool = False) -> CostReport:
    """Full cost report for one assignment (DU order).

    ``reference_only`` reports J without the penalty (C-RAN benchmarking);
    violations are still filled in for inspection.
    """
    a = tuple(int(o) for o in assignment)
    r = evaluate_batch(inst, np.array([a], dtype=np.intp), penalize=not reference_only)
    return CostReport(
        assignment=a, du_costs=r["V_n"][0], cu_cost=float(r["V_0"][0]), routing_costs=r["U"][0],
        total=float(r["J"][0]), violations=r["C"][0], raw_violations=r["raw"][0],
        penalty=float(r["xi"][0]), penalized=float(r["L"][0]), reference_only=reference_only,
    )


def cost_report_csv(report: CostReport, inst: Instance) -> str:
    """One row per DU plus a totals row."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["du_id", "split", "lambda_mbps", "flow_mbps", "path_delay_us", "V_n", "U_n0", "cu_share"])
    for k, o in enumerate(report.assignment):
        prof = inst.profiles[k]
        w.writerow([prof.du_id, o, repr(prof.lam), repr(float(flow_of(o, prof.lam))),
                    repr(prof.route.total_delay), repr(float(report.du_costs[k])),
                    repr(float(report.routing_costs[k])), repr(float(cu_share(prof, inst.params, o)))])
    w.writerow(["total", "", "", "", "", "", "", ""])
    w.writerow(["V_0", repr(report.cu_cost)])
    w.writerow(["J", repr(report.total)])
    for name, c in zip(FAMILIES, report.violations):
        w.writerow([f"C_{name}", repr(float(c))])
    w.writerow(["xi", repr(report.penalty)])
    w.writerow(["L", repr(report.penalized)])
    w.writerow(["reference_only", int(report.reference_only)])
    return buf.getvalue()


# -- scenario files ---------------------------------------------------------

SCENARIO_SCHEMA = "vransplit.scenario"


@dataclass
class Scenario:
    """Per-DU overrides on top of uniform defaults, plus system parameters."""

    lam: float = 150.0
    vm_cost: float = 1.0
    compute_cost: float = 1.0
    du_capacity: float = 7.5
    overrides: dict = field(default_factory=dict)  # du_id -> {field: value}
    system: SystemParams = field(default_factory=SystemParams)

    def build(self, topology: Topology) -> Instance:
        profiles = []
        for du in topology.du_ids:
            kw = dict(lam=self.lam, vm_cost=self.vm_cost, compute_cost=self.compute_cost, capacity=self.du_capacity)
            for key, value in self.overrides.get(du, {}).items():
                key = {"du_capacity": "capacity", "lambda": "lam"}.get(key, key)
                if key not in kw:
                    raise InputError(f"scenario override for DU {du}: unknown field {key!r}")
                kw[key] = float(value)
            profiles.append(BsProfile(du, **kw))
        return Instance(topology, profiles, self.system)

    def to_dict(self) -> dict:
        s = self.system
        return {
            "schema": SCENARIO_SCHEMA, "version": 1,
            "defaults": {"lambda": self.lam, "vm_cost": self.vm_cost, "compute_cost": self.compute_cost,
                         "du_capacity": self.du_capacity},
            "overrides": {str(k): v for k, v in sorted(self.overrides.items())},
            "system": {"cu_capacity": s.cu_capacity, "vm_cost_cu": s.vm_cost_cu,
                       "compute_cost_cu": s.compute_cost_cu},
            "penalty_weights": None if s.penalty_weights is None else dict(zip(FAMILIES, s.penalty_weights)),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        if d.get("schema", SCENARIO_SCHEMA) != SCENARIO_SCHEMA:
            raise InputError(f"not a scenario document (schema={d.get('schema')!r})")
        defaults = d.get("defaults", {})
        sysd = d.get("system", {})
        mu = d.get("penalty_weights")
        if isinstance(mu, dict):
            unknown = set(mu) - set(FAMILIES)
            if unknown:
                raise InputError(f"unknown penalty families {sorted(unknown)}")
            mu = tuple(float(mu[f]) for f in FAMILIES)
        elif mu is not None:
            mu = tuple(float(x) for x in mu)
        try:
            system = SystemParams(cu_capacity=float(sysd.get("cu_capacity", 75.0)),
                                  vm_cost_cu=float(sysd.get("vm_cost_cu", 0.5)),
                                  compute_cost_cu=float(sysd.get("compute_cost_cu", 0.017)),
                                  penalty_weights=mu)
            return cls(lam=float(defaults.get("lambda", 150.0)), vm_cost=float(defaults.get("vm_cost", 1.0)),
                       compute_cost=float(defaults.get("compute_cost", 1.0)),
                       du_capacity=float(defaults.get("du_capacity", 7.5)),
                       overrides={int(k): v for k, v in d.get("overrides", {}).items()}, system=system)
        except (TypeError, ValueError) as e:
            raise InputError(f"scenario: {e}") from None


def save_scenario(scenario: Scenario, destination):
    Path(destination).write_text(json.dumps(scenario.to_dict(), indent=1) + "\n")


def load_scenario(source) -> Scenario:
    try:
        return Scenario.from_dict(json.loads(Path(source).read_text()))
    except json.JSONDecodeError as e:
        raise InputError(f"{source}: line {e.lineno}: {e.msg}") from None


def scaled_instance(n_du: int, seed: int = 0, lam: float = 150.0, reference_nodes: int = 100,
                    **waxman_kw) -> Instance:
    """A small instance shaped like the full-size Waxman reference.

    Uses ``scaled_topology``; the CU capacity shrinks by the same factor as
    the link capacities so the per-DU share of shared resources is preserved.
    """
    topo, factor = scaled_topology(n_du, seed, reference_nodes, **waxman_kw)
    params = SystemParams(cu_capacity=SystemParams().cu_capacity * factor)
    return Instance.uniform(topo, lam=lam, params=params)
