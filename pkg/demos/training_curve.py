"""Train on a 10-DU scaled instance and watch J, the penalty and the critic loss.

Run: python3 demos/training_curve.py [epochs]
"""
import sys

import numpy as np

from vransplit import SearchConfig, TrainConfig, Trainer, scaled_instance, search, solve_bnb
from vransplit.model import dran_assignment, evaluate

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
inst = scaled_instance(10, seed=0)
opt = solve_bnb(inst)
j_dran = evaluate(dran_assignment(inst.n), inst).total
print(f"10 DUs, lambda=150: optimum {opt.best_cost:.3f} {opt.best_assignment}, D-RAN {j_dran:.3f}")

trainer = Trainer(inst, TrainConfig(epochs=epochs))
recs = trainer.train()

# block averages smooth the per-batch noise of the randomized scaling
block = max(1, epochs // 10)
print(f"{'epochs':>13} {'mean J':>9} {'mean xi':>9} {'mean L':>9} {'critic':>10}")
for s in range(0, epochs, block):
    r = recs[s:s + block]
    m = {k: np.mean([getattr(x, k) for x in r]) for k in ("mean_J", "mean_xi", "mean_L", "critic_loss")}
    print(f"{s:6d}-{s + len(r) - 1:6d} {m['mean_J']:9.3f} {m['mean_xi']:9.3f} {m['mean_L']:9.3f} "
          f"{m['critic_loss']:10.4g}")

res = search(trainer.agent.policy, inst, SearchConfig(), trainer.scale)
gap = 100 * (res.report.total - opt.best_cost) / opt.best_cost
print(f"search: J={res.report.total:.3f} feasible={res.feasible} gap={gap:.2f}% assignment={res.best}")
