"""Per-base-station functional split placement with a learned sequence policy."""
from .inference import SearchConfig, evaluate_suite, search
from .model import Instance, Split, SystemParams, evaluate, scaled_instance
from .oracle import solve_bnb, solve_exhaustive
from .topology import generate_waxman, load_topology, save_topology
from .trainer import Agent, TrainConfig, Trainer, train

__version__ = "0.1.0"

__all__ = [
    "SearchConfig", "evaluate_suite", "search", "Instance", "Split", "SystemParams", "evaluate",
    "scaled_instance", "solve_bnb", "solve_exhaustive", "generate_waxman", "load_topology", "save_topology",
    "Agent", "TrainConfig", "Trainer", "train",
]
