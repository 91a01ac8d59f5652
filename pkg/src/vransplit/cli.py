"""Command-line pipeline: generate, train, infer, solve-exact, compare, gradcheck.

Every command reads one JSON experiment config; ``--seed`` and ``--out``
override the corresponding fields. Exit codes: 0 success, 2 config or input
error, 3 infeasible result or oracle failure, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .gradsuite import GRAPHS, gradient_suite
from .inference import GAP_COLUMNS, SearchConfig, dump_assignment, evaluate_suite, gap_stats, search
from .model import FAMILIES, Instance, InputError, Scenario, SystemParams, cost_report_csv, dran_assignment, evaluate
from .nn import NumericError
from .oracle import SizeError, Status, solve_bnb, solve_exhaustive
from .topology import TopologyError, generate_waxman, load_topology, save_topology, scaled_topology
from .trainer import Agent, TrainConfig, Trainer, write_manifest

log = logging.getLogger("vransplit")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 2, 3, 4
SWEEP_NAMES = ("lambda", "cost_scale")


class ConfigError(ValueError):
    pass


class Infeasible(RuntimeError):
    pass


# -- experiment config -----------------------------------------------------------

TOPOLOGY_KINDS = {
    "waxman": {"n_nodes", "alpha", "beta", "capacity_range", "delay_scale", "routing_cost_range"},
    "scaled": {"n_du", "reference_nodes", "alpha", "beta", "capacity_range", "delay_scale", "routing_cost_range"},
    "file": {"path"},
}
SCENARIO_KEYS = {"lambda", "vm_cost", "compute_cost", "du_capacity", "cu_capacity", "vm_cost_cu",
                 "compute_cost_cu", "penalty_weights", "overrides"}


@dataclass
class ExperimentConfig:
    """Resolved experiment description; ``seed`` feeds topology, training and search."""

    seed: int = 0
    out: str = "out"
    topology: dict = field(default_factory=lambda: {"kind": "waxman", "n_nodes": 100})
    scenario: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    search: dict = field(default_factory=dict)
    sweeps: dict = field(default_factory=dict)  # name -> "lo:hi:step" or explicit value list
    oracle: str = "bnb"
    gradcheck: dict = field(default_factory=dict)

    def __post_init__(self):
        kind = self.topology.get("kind", "waxman")
        if kind not in TOPOLOGY_KINDS:
            raise ConfigError(f"topology.kind must be one of {sorted(TOPOLOGY_KINDS)}, got {kind!r}")
        extra = set(self.topology) - TOPOLOGY_KINDS[kind] - {"kind"}
        if extra:
            raise ConfigError(f"topology ({kind}): unknown keys {sorted(extra)}")
        if kind == "file" and "path" not in self.topology:
            raise ConfigError("topology.kind=file needs a path")
        extra = set(self.scenario) - SCENARIO_KEYS
        if extra:
            raise ConfigError(f"scenario: unknown keys {sorted(extra)}")
        if self.oracle not in ("bnb", "exhaustive"):
            raise ConfigError(f"oracle must be 'bnb' or 'exhaustive', got {self.oracle!r}")
        for name in self.sweeps:
            if name not in SWEEP_NAMES:
                raise ConfigError(f"unknown sweep {name!r}; choose from {SWEEP_NAMES}")
        # fail early on bad sub-configs
        self.train_config()
        self.search_config()

    def train_config(self) -> TrainConfig:
        return _build(TrainConfig, {**self.train, "seed": self.seed}, "train")

    def search_config(self) -> SearchConfig:
        return _build(SearchConfig, {**self.search, "seed": self.seed}, "search")

    def to_dict(self):
        d = asdict(self)
        d["train"] = self.train_config().to_dict()
        d["search"] = self.search_config().to_dict()
        return d


def _build(cls, d, section):
    try:
        return cls.from_dict(d)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{section}: {e}") from None


def load_config(path=None, seed=None, out=None) -> ExperimentConfig:
    d = {}
    if path is not None:
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: line {e.lineno}: {e.msg}") from None
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: top level must be an object")
        topo = d.get("topology")
        if isinstance(topo, dict) and topo.get("kind") == "file":
            # relative topology paths resolve against the config's directory
            p = Path(topo.get("path", ""))
            topo["path"] = str(p if p.is_absolute() else path.parent / p)
    if seed is not None:
        d["seed"] = seed
    if out is not None:
        d["out"] = str(out)
    try:
        return ExperimentConfig(**d)
    except TypeError as e:
        raise ConfigError(f"config: {e}") from None


def build_topology(cfg: ExperimentConfig):
    """(topology, capacity factor); the factor is 1 unless the topology is a scaled one."""
    t = dict(cfg.topology)
    kind = t.pop("kind", "waxman")
    for k in ("capacity_range", "routing_cost_range"):
        if k in t:
            t[k] = tuple(t[k])
    if kind == "file":
        p = Path(t["path"])
        if not p.exists():
            raise ConfigError(f"topology file not found: {p}")
        return load_topology(p), 1.0
    if kind == "scaled":
        n_du = t.pop("n_du", 15)
        return scaled_topology(n_du, seed=cfg.seed, reference_nodes=t.pop("reference_nodes", 100), **t)
    return generate_waxman(seed=cfg.seed, **t), 1.0


def build_instance(cfg: ExperimentConfig, topo=None, factor=1.0) -> Instance:
    if topo is None:
        topo, factor = build_topology(cfg)
    s = cfg.scenario
    base = SystemParams()
    cu_cap = s.get("cu_capacity")
    mu = s.get("penalty_weights")
    if isinstance(mu, dict):
        unknown = set(mu) - set(FAMILIES)
        if unknown:
            raise ConfigError(f"scenario.penalty_weights: unknown families {sorted(unknown)}")
        mu = tuple(float(mu[f]) for f in FAMILIES)
    elif mu is not None:
        mu = tuple(float(x) for x in mu)
    system = SystemParams(cu_capacity=base.cu_capacity * factor if cu_cap is None else float(cu_cap),
                          vm_cost_cu=float(s.get("vm_cost_cu", base.vm_cost_cu)),
                          compute_cost_cu=float(s.get("compute_cost_cu", base.compute_cost_cu)),
                          penalty_weights=mu)
    sc = Scenario(lam=float(s.get("lambda", 150.0)), vm_cost=float(s.get("vm_cost", 1.0)),
                  compute_cost=float(s.get("compute_cost", 1.0)), du_capacity=float(s.get("du_capacity", 7.5)),
                  overrides={int(k): v for k, v in s.get("overrides", {}).items()}, system=system)
    return sc.build(topo)


def parse_sweep(text: str) -> tuple[str, np.ndarray]:
    """``name=lo:hi:step`` -> (name, points); the end point is included."""
    try:
        name, rng = text.split("=", 1)
        return name, sweep_points(rng)
    except ValueError:
        raise ConfigError(f"bad --sweep {text!r}; expected name=lo:hi:step") from None


def sweep_points(value) -> np.ndarray:
    if isinstance(value, str):
        lo, hi, step = (float(x) for x in value.split(":"))
        if step <= 0 or hi < lo:
            raise ValueError(value)
        return np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)
    return np.asarray(value, dtype=float)


def sweep_instance(inst: Instance, name: str, value: float) -> Instance:
    if name == "lambda":
        return inst.with_load(value)
    return inst.scaled(cost_scale=value)


# -- output helpers ----------------------------------------------------------------

def _ecdf_csv(values, column) -> str:
    v = np.sort(np.asarray(values, dtype=float))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([column, "ecdf"])
    for k, x in enumerate(v, 1):
        w.writerow([repr(float(x)), repr(k / len(v))])
    return buf.getvalue()


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_agent(path) -> Agent:
    if path is None:
        raise ConfigError("--checkpoint is required for this command")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"checkpoint not found: {p}")
    return Agent.load(p)


# -- commands --------------------------------------------------------------------

def cmd_generate(cfg: ExperimentConfig, args) -> int:
    topo, factor = build_topology(cfg)
    out = _out_dir(cfg)
    save_topology(topo, out / "topology.json")
    (out / "ecdf_link_capacity.csv").write_text(_ecdf_csv([l.capacity for l in topo.links], "capacity_mbps"))
    (out / "ecdf_path_latency.csv").write_text(
        _ecdf_csv([p.total_delay for _, p in sorted(topo.paths.items())], "delay_us"))
    delays = [p.total_delay for p in topo.paths.values()]
    print(f"nodes={len(topo.nodes)} links={len(topo.links)} cu={topo.cu} "
          f"max_capacity={max(l.capacity for l in topo.links):.2f} max_path_delay={max(delays):.2f}")
    return EXIT_OK


def cmd_train(cfg: ExperimentConfig, args) -> int:
    inst = build_instance(cfg)
    tcfg = cfg.train_config()
    out = _out_dir(cfg)
    ckdir = out / "checkpoints"
    ckdir.mkdir(exist_ok=True)
    agent = _load_agent(args.checkpoint) if args.checkpoint else None
    start = 0 if agent is None else agent.epoch
    j_dran = evaluate(dran_assignment(inst.n), inst).total
    write_manifest(out / "manifest_train.json", config=cfg.to_dict(), seed=cfg.seed,
                   mu=dict(zip(FAMILIES, inst.mu.tolist())), n_du=inst.n, J_dran=j_dran,
                   system=asdict(inst.params), resumed_from=args.checkpoint, start_epoch=start)
    t = Trainer(inst, tcfg, agent)
    t.train(curve_path=out / "curve.csv", checkpoint_dir=ckdir, progress_every=args.progress)
    t.agent.save(ckdir / "final.npz", {"train_config": tcfg.to_dict()})
    print(f"trained epochs {start}..{t.agent.epoch}; checkpoint {ckdir / 'final.npz'}")
    return EXIT_OK


def cmd_infer(cfg: ExperimentConfig, args) -> int:
    agent = _load_agent(args.checkpoint)
    inst = build_instance(cfg)
    res = search(agent.policy, inst, cfg.search_config(), agent.scale)
    out = _out_dir(cfg)
    (out / "assignment.json").write_text(dump_assignment(res, inst))
    (out / "cost_report.csv").write_text(cost_report_csv(res.report, inst))
    print(f"J={res.report.total:.6f} feasible={res.feasible} feasible_fraction={res.feasible_fraction:.4f}")
    if not res.feasible:
        raise Infeasible("search found no feasible assignment")
    return EXIT_OK


def cmd_solve_exact(cfg: ExperimentConfig, args) -> int:
    inst = build_instance(cfg)
    res = (solve_bnb if cfg.oracle == "bnb" else solve_exhaustive)(inst)
    out = _out_dir(cfg)
    (out / "oracle.json").write_text(res.to_json() + "\n")
    (out / "oracle.csv").write_text("instance_id,best_cost,status,nodes_explored,wall_time_s\n"
                                    + res.csv_record(f"seed{cfg.seed}") + "\n")
    print(res.csv_record(f"seed{cfg.seed}"))
    if res.status != Status.OPTIMAL:
        raise Infeasible("instance is infeasible")
    return EXIT_OK


PLOT_COLUMNS = ("sweep", "value", "gap_pct", "J_search", "J_dran", "J_cran_reference")


def cmd_compare(cfg: ExperimentConfig, args) -> int:
    agent = _load_agent(args.checkpoint)
    inst = build_instance(cfg)
    sweeps = {k: sweep_points(v) for k, v in cfg.sweeps.items()}
    for text in args.sweep or ():
        name, pts = parse_sweep(text)
        if name not in SWEEP_NAMES:
            raise ConfigError(f"unknown sweep {name!r}; choose from {SWEEP_NAMES}")
        sweeps[name] = pts
    if not sweeps:
        sweeps = {"lambda": sweep_points("10:150:10")}
    oracle = solve_bnb if cfg.oracle == "bnb" else solve_exhaustive
    scfg = cfg.search_config()

    keys, rows = [], []
    for name, pts in sweeps.items():
        cases = [(f"{name}={v!r}", sweep_instance(inst, name, float(v))) for v in pts]
        rows += evaluate_suite(agent.policy, cases, scfg, agent.scale, oracle)
        keys += [(name, float(v)) for v in pts]

    out = _out_dir(cfg)
    with open(out / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("sweep", "value") + GAP_COLUMNS)
        for (name, v), r in zip(keys, rows):
            w.writerow([name, repr(v)] + r.cells())
    with open(out / "plot_data.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLOT_COLUMNS)
        for (name, v), r in zip(keys, rows):
            w.writerow([name, repr(v), repr(r.gap_pct), repr(r.J_search), repr(r.J_dran), repr(r.J_cran_reference)])
    stats = gap_stats(rows)
    print(json.dumps(stats, sort_keys=True))
    if stats["count"] == 0:
        raise Infeasible("no sweep point has both an optimal oracle result and a feasible search result")
    return EXIT_OK


def cmd_gradcheck(cfg: ExperimentConfig, args) -> int:
    g = cfg.gradcheck
    tol = float(g.get("tol", 1e-4))
    graphs = g.get("graphs")
    if graphs is not None and set(graphs) - set(GRAPHS):
        raise ConfigError(f"gradcheck.graphs: unknown {sorted(set(graphs) - set(GRAPHS))}")
    entries = gradient_suite(int(g.get("coords_per_graph", 200)), seed=cfg.seed, graphs=graphs,
                             step=float(g.get("step", 1e-4)))
    out = _out_dir(cfg)
    with open(out / "gradcheck.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["graph", "n_coords", "max_rel_error", "worst_param", "passed"])
        for e in entries:
            w.writerow([e.name, e.n_coords, repr(e.max_rel_error), e.worst_param, int(e.passed(tol))])
            print(f"{e.name:10s} coords={e.n_coords:5d} max_rel_error={e.max_rel_error:.3e} "
                  f"{'ok' if e.passed(tol) else 'FAIL'}")
    if not all(e.passed(tol) for e in entries):
        raise NumericError(f"finite-difference check above tolerance {tol:g}")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "infer": cmd_infer, "solve-exact": cmd_solve_exact,
            "compare": cmd_compare, "gradcheck": cmd_gradcheck}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vransplit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="experiment config (JSON)")
        s.add_argument("--seed", type=int, help="overrides the config seed")
        s.add_argument("--out", help="output directory (overrides the config)")
        s.add_argument("--checkpoint", help="agent checkpoint (.npz)")
        s.add_argument("--sweep", action="append", metavar="NAME=LO:HI:STEP",
                       help="sweep for compare; NAME is lambda or cost_scale (repeatable)")
        s.add_argument("--progress", type=int, default=0, metavar="K", help="log every K epochs while training")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config, args.seed, args.out)
        return COMMANDS[args.command](cfg, args)
    except Infeasible as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, InputError, TopologyError, SizeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        where = f" ({e.filename})" if getattr(e, "filename", None) else ""
        print(f"error: {e.strerror or e}{where}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
