"""Synthetic crosshaul networks: Waxman generation, DU->CU routing, JSON files."""
from __future__ import annotations

import enum
import heapq
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

SCHEMA = "vransplit.topology"
SCHEMA_VERSION = 1


class TopologyError(ValueError):
    """Invalid or disconnected topology, or a malformed topology file."""


class NodeKind(str, enum.Enum):
    CU = "CU"
    DU = "DU"
    ROUTER = "Router"


@dataclass(frozen=True)
class Node:
    id: int
    kind: NodeKind
    position: tuple[float, float]


@dataclass(frozen=True)
class Link:
    u: int
    v: int
    capacity: float  # Mbps
    delay: float  # microseconds
    unit_cost: float  # monetary units per Mbps

    @property
    def endpoints(self):
        return (self.u, self.v)


@dataclass(frozen=True)
class RoutePath:
    du_id: int
    nodes: tuple[int, ...]  # du_id ... cu
    links: tuple[int, ...]  # link indices along the path
    total_delay: float
    total_routing_cost: float

    def link_membership(self, n_links: int) -> np.ndarray:
        ind = np.zeros(n_links)
        ind[list(self.links)] = 1.0
        return ind

    @property
    def hops(self):
        return len(self.links)


@dataclass(frozen=True)
class Topology:
    nodes: tuple[Node, ...]
    links: tuple[Link, ...]
    paths: dict = field(default_factory=dict)  # du_id -> RoutePath
    seed: int | None = None

    def __post_init__(self):
        cus = [n.id for n in self.nodes if n.kind == NodeKind.CU]
        if len(cus) != 1:
            raise TopologyError(f"expected exactly one CU node, found {len(cus)}")
        for k, n in enumerate(self.nodes):
            if n.id != k:
                raise TopologyError(f"nodes[{k}]: id {n.id} does not match its index")
        for k, l in enumerate(self.links):
            for end in (l.u, l.v):
                if not 0 <= end < len(self.nodes):
                    raise TopologyError(f"links[{k}]: unknown endpoint {end}")
            if l.u == l.v:
                raise TopologyError(f"links[{k}]: self loop on node {l.u}")
            if not l.capacity > 0:
                raise TopologyError(f"links[{k}]: capacity must be > 0, got {l.capacity}")
            if l.delay < 0 or l.unit_cost < 0:
                raise TopologyError(f"links[{k}]: delay and unit cost must be >= 0")

    @property
    def cu(self) -> int:
        return next(n.id for n in self.nodes if n.kind == NodeKind.CU)

    @property
    def du_ids(self) -> list[int]:
        return [n.id for n in self.nodes if n.kind == NodeKind.DU]

    @property
    def n_links(self):
        return len(self.links)

    def adjacency(self) -> list[list[tuple[int, int]]]:
        adj: list[list[tuple[int, int]]] = [[] for _ in self.nodes]
        for k, l in enumerate(self.links):
            adj[l.u].append((l.v, k))
            adj[l.v].append((l.u, k))
        return adj

    def is_connected(self) -> bool:
        adj = self.adjacency()
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v, _ in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == len(self.nodes)

    def membership_matrix(self, du_ids=None) -> np.ndarray:
        """(N, E) 0/1 matrix: row n marks the links used by DU n's path."""
        du_ids = self.du_ids if du_ids is None else du_ids
        m = np.zeros((len(du_ids), self.n_links))
        for r, du in enumerate(du_ids):
            m[r, list(self.paths[du].links)] = 1.0
        return m


def _shortest_inter_component_links(pos: np.ndarray, comp: np.ndarray) -> list[tuple[int, int]]:
    """Kruskal over all node pairs restricted to joining distinct components."""
    n = len(pos)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a in range(n):
        parent[find(a)] = find(int(comp[a]))
    iu, ju = np.triu_indices(n, 1)
    d = np.linalg.norm(pos[iu] - pos[ju], axis=1)
    added = []
    for k in np.argsort(d, kind="stable"):
        a, b = int(iu[k]), int(ju[k])
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            added.append((a, b))
    return added


def _components(n, edges):
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in edges:
        parent[find(a)] = find(b)
    return np.array([find(a) for a in range(n)])


def generate_waxman(n_nodes: int = 100, alpha: float = 0.5, beta: float = 0.1,
                    capacity_range=(1_000.0, 100_000.0), delay_scale: float = 3000.0,
                    routing_cost_range=(1e-4, 1e-3), seed: int = 0) -> Topology:
    """Random Waxman crosshaul with one CU (the node nearest the centre).

    Edge (u, v) appears with probability alpha * exp(-d(u, v) / (beta * L)),
    L the largest pairwise distance. Capacities (Mbps) and per-link routing
    costs (per Mbps) are uniform on their ranges; link delay is
    ``delay_scale`` microseconds per unit of Euclidean length. Disconnected
    samples are joined with the shortest edges between components. All
    non-CU nodes are DUs. Paths are computed before returning.
    """
    if n_nodes < 2:
        raise ValueError("n_nodes must be >= 2")
    if not (0 < alpha <= 1 and 0 < beta <= 1):
        raise ValueError("alpha and beta must lie in (0, 1]")
    for name, (lo, hi) in (("capacity_range", capacity_range), ("routing_cost_range", routing_cost_range)):
        if not (0 <= lo <= hi):
            raise ValueError(f"{name} must satisfy 0 <= lo <= hi, got {(lo, hi)}")
    if capacity_range[0] <= 0:
        raise ValueError("capacity_range must be strictly positive")
    if delay_scale < 0:
        raise ValueError("delay_scale must be >= 0")

    rng = np.random.default_rng(seed)
    pos = rng.random((n_nodes, 2))
    iu, ju = np.triu_indices(n_nodes, 1)
    dist = np.linalg.norm(pos[iu] - pos[ju], axis=1)
    lmax = dist.max()
    prob = alpha * np.exp(-dist / (beta * lmax)) if lmax > 0 else np.full_like(dist, alpha)
    keep = rng.random(len(dist)) < prob
    edges = [(int(a), int(b)) for a, b in zip(iu[keep], ju[keep])]
    comp = _components(n_nodes, edges)
    if len(set(comp.tolist())) > 1:
        edges += _shortest_inter_component_links(pos, comp)
    edges.sort()

    cu = int(np.argmin(np.linalg.norm(pos - 0.5, axis=1)))
    nodes = tuple(
        Node(k, NodeKind.CU if k == cu else NodeKind.DU, (float(pos[k, 0]), float(pos[k, 1])))
        for k in range(n_nodes)
    )
    caps = rng.uniform(*capacity_range, size=len(edges))
    costs = rng.uniform(*routing_cost_range, size=len(edges))
    links = tuple(
        Link(a, b, float(caps[k]), float(delay_scale * np.linalg.norm(pos[a] - pos[b])), float(costs[k]))
        for k, (a, b) in enumerate(edges)
    )
    return compute_paths(Topology(nodes, links, {}, seed))


def compute_paths(topology: Topology) -> Topology:
    """Fill in the delay-shortest DU->CU path for every DU.

    Ties: fewer hops, then the lexicographically smallest node sequence
    (DU first), then the smallest link-index sequence.
    """
    adj = topology.adjacency()
    cu = topology.cu
    links = topology.links
    paths = {}
    for du in topology.du_ids:
        # label = (delay, hops, node sequence, link sequence)
        heap = [(0.0, 0, (du,), ())]
        done = set()
        found = None
        while heap:
            d, h, seq, lseq = heapq.heappop(heap)
            u = seq[-1]
            if u in done:
                continue
            done.add(u)
            if u == cu:
                found = (d, seq, lseq)
                break
            for v, k in adj[u]:
                if v not in done:
                    heapq.heappush(heap, (d + links[k].delay, h + 1, seq + (v,), lseq + (k,)))
        if found is None:
            raise TopologyError(f"DU {du} has no path to the CU")
        d, seq, lseq = found
        cost = float(sum(links[k].unit_cost for k in lseq))
        delay = float(sum(links[k].delay for k in lseq))
        paths[du] = RoutePath(du, seq, lseq, delay, cost)
    return replace(topology, paths=paths)


def scale_delays_to(topology: Topology, max_path_delay: float) -> Topology:
    """Rescale every link delay so the largest DU->CU path delay equals ``max_path_delay``."""
    cur = max(p.total_delay for p in topology.paths.values())
    if cur <= 0:
        raise TopologyError("cannot rescale zero path delays")
    f = max_path_delay / cur
    links = tuple(replace(l, delay=l.delay * f) for l in topology.links)
    return compute_paths(replace(topology, links=links, paths={}))


def scale_capacities(topology: Topology, factor: float) -> Topology:
    links = tuple(replace(l, capacity=l.capacity * factor) for l in topology.links)
    return replace(topology, links=links)


def scaled_topology(n_du: int, seed: int = 0, reference_nodes: int = 100, **waxman_kw) -> tuple[Topology, float]:
    """A small Waxman graph stretched to the delay extremes of a full-size one.

    Path delays are rescaled so the longest DU path matches the longest path
    of the ``reference_nodes`` graph drawn with the same seed, and link
    capacities shrink by n_du / (reference_nodes - 1). Returns the topology
    and that capacity factor.
    """
    ref = generate_waxman(reference_nodes, seed=seed, **waxman_kw)
    ref_max = max(p.total_delay for p in ref.paths.values())
    factor = n_du / (reference_nodes - 1)
    topo = generate_waxman(n_du + 1, seed=seed, **waxman_kw)
    return scale_capacities(scale_delays_to(topo, ref_max), factor), factor


# -- serialization --------------------------------------------------------

def topology_to_dict(t: Topology) -> dict:
    return {
        "schema": SCHEMA,
        "version": SCHEMA_VERSION,
        "seed": t.seed,
        "nodes": [{"id": n.id, "kind": n.kind.value, "x": n.position[0], "y": n.position[1]} for n in t.nodes],
        "links": [{"u": l.u, "v": l.v, "capacity_mbps": l.capacity, "delay_us": l.delay,
                   "unit_cost": l.unit_cost} for l in t.links],
        "paths": [{"du": p.du_id, "nodes": list(p.nodes), "links": list(p.links),
                   "delay_us": p.total_delay, "routing_cost": p.total_routing_cost}
                  for _, p in sorted(t.paths.items())],
    }


def _field(obj, key, ctx, kind=float):
    if key not in obj:
        raise TopologyError(f"{ctx}: missing field {key!r}")
    try:
        return kind(obj[key])
    except (TypeError, ValueError) as e:
        raise TopologyError(f"{ctx}.{key}: {e}") from None


def topology_from_dict(d: dict) -> Topology:
    if d.get("schema") != SCHEMA:
        raise TopologyError(f"not a topology document (schema={d.get('schema')!r})")
    if d.get("version") != SCHEMA_VERSION:
        raise TopologyError(f"unsupported topology version {d.get('version')!r}")
    nodes = []
    for k, n in enumerate(d.get("nodes", [])):
        ctx = f"nodes[{k}]"
        try:
            kind = NodeKind(n.get("kind"))
        except ValueError:
            raise TopologyError(f"{ctx}.kind: unknown node kind {n.get('kind')!r}") from None
        x, y = _field(n, "x", ctx), _field(n, "y", ctx)
        if not (0 <= x <= 1 and 0 <= y <= 1):
            raise TopologyError(f"{ctx}: position outside the unit square")
        nodes.append(Node(_field(n, "id", ctx, int), kind, (x, y)))
    links = []
    for k, l in enumerate(d.get("links", [])):
        ctx = f"links[{k}]"
        cap = _field(l, "capacity_mbps", ctx)
        if not cap > 0:
            raise TopologyError(f"{ctx}.capacity_mbps: must be > 0, got {cap}")
        links.append(Link(_field(l, "u", ctx, int), _field(l, "v", ctx, int), cap,
                          _field(l, "delay_us", ctx), _field(l, "unit_cost", ctx)))
    paths = {}
    for k, p in enumerate(d.get("paths", [])):
        ctx = f"paths[{k}]"
        du = _field(p, "du", ctx, int)
        paths[du] = RoutePath(du, tuple(int(v) for v in p.get("nodes", [])),
                              tuple(int(v) for v in p.get("links", [])),
                              _field(p, "delay_us", ctx), _field(p, "routing_cost", ctx))
    seed = d.get("seed")
    t = Topology(tuple(nodes), tuple(links), paths, None if seed is None else int(seed))
    _validate_paths(t)
    return t


def _validate_paths(t: Topology):
    cu = t.cu
    for du, p in t.paths.items():
        ctx = f"paths[du={du}]"
        if not p.nodes or p.nodes[0] != du or p.nodes[-1] != cu or len(p.links) != len(p.nodes) - 1:
            raise TopologyError(f"{ctx}: path must run from the DU to the CU")
        for a, b, k in zip(p.nodes, p.nodes[1:], p.links):
            if not 0 <= k < len(t.links) or {t.links[k].u, t.links[k].v} != {a, b}:
                raise TopologyError(f"{ctx}: link {k} does not join nodes {a} and {b}")
    missing = set(t.du_ids) - set(t.paths)
    if t.paths and missing:
        raise TopologyError(f"no path stored for DUs {sorted(missing)}")


def save_topology(topology: Topology, destination):
    path = Path(destination)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(topology_to_dict(topology), indent=1) + "\n")


def load_topology(source) -> Topology:
    text = Path(source).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise TopologyError(f"{source}: line {e.lineno}, column {e.colno}: {e.msg}") from None
    try:
        return topology_from_dict(d)
    except TopologyError as e:
        raise TopologyError(f"{source}: {e}") from None
