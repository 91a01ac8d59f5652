"""Solve the full-size 100-node instance exactly and compare with the two extremes.

Run: python3 demos/exact_r1.py [seed]
"""
import sys
from collections import Counter

from vransplit import Instance, evaluate, generate_waxman, solve_bnb
from vransplit.model import cran_assignment, dran_assignment

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
inst = Instance.uniform(generate_waxman(100, seed=seed))
res = solve_bnb(inst)
print(f"status {res.status.value}, {res.nodes_explored} nodes, {res.wall_time:.2f}s")
if res.best_assignment is not None:
    print(f"optimum J = {res.best_cost:.3f}; splits used: {sorted(Counter(res.best_assignment).items())}")
dran = evaluate(dran_assignment(inst.n), inst)
cran = evaluate(cran_assignment(inst.n), inst, reference_only=True)
print(f"D-RAN J = {dran.total:.3f} (feasible: {dran.feasible})")
print(f"C-RAN J = {cran.total:.3f} (reference only, feasible: {cran.feasible})")
