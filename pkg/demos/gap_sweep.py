"""Optimality gap and D-RAN / C-RAN reference costs across a load sweep.

Run: python3 demos/gap_sweep.py [epochs]
"""
import sys

import numpy as np

from vransplit import SearchConfig, TrainConfig, Trainer, evaluate_suite, scaled_instance
from vransplit.inference import gap_stats

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 500
inst = scaled_instance(15, seed=0)
trainer = Trainer(inst, TrainConfig(epochs=epochs))
trainer.train()

cases = [(f"lambda={v:g}", inst.with_load(v)) for v in np.linspace(10, 150, 8)]
rows = evaluate_suite(trainer.agent.policy, cases, SearchConfig(sample_count=256), trainer.scale)
print(f"{'point':>14} {'J_search':>9} {'J_opt':>9} {'gap %':>7} {'J_dran':>9} {'J_cran*':>9}")
for r in rows:
    print(f"{r.instance_id:>14} {r.J_search:9.3f} {r.J_opt:9.3f} {r.gap_pct:7.2f} {r.J_dran:9.3f} "
          f"{r.J_cran_reference:9.3f}")
print("* C-RAN is reported unpenalized, for reference only")
print(gap_stats(rows))
