import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_instance, star_instance
from vransplit.model import RHO_CU, RHO_DU, Instance, SystemParams, evaluate
from vransplit.oracle import SizeError, Status, solve_bnb, solve_exhaustive
from vransplit.topology import generate_waxman


def test_forced_choice_single_du():
    # 5 ms path rules out S2/S3; a CU budget below S1's load rules out S1
    inst = star_instance([5000.0], params=SystemParams(cu_capacity=0.1))
    for solve in (solve_exhaustive, solve_bnb):
        r = solve(inst)
        assert r.status == Status.OPTIMAL and r.best_assignment == (0,)


def test_separable_when_coupling_slack():
    inst = star_instance([100.0, 150.0], lam=[120.0, 40.0], unit_cost=0.0, du_capacity=50.0,
                         compute_cost=1.0, vm_cost=1.0)
    p = inst.params
    expect = tuple(int(np.argmin([1.0 + lam * RHO_DU[o] + p.vm_cost_cu + lam * p.compute_cost_cu * RHO_CU[o]
                                  for o in range(4)])) for lam in (120.0, 40.0))
    for solve in (solve_exhaustive, solve_bnb):
        assert solve(inst).best_assignment == expect


def test_decoupled_when_delay_excludes_s2_s3():
    inst = star_instance([2500.0, 4000.0, 9000.0], lam=[150.0, 60.0, 10.0], unit_cost=3e-4)
    best = []
    for k in range(3):
        lam, zeta = inst.lam[k], inst.zeta[k]
        c = [1.0 + lam * RHO_DU[o] + 0.5 + lam * 0.017 * RHO_CU[o] + zeta * lam for o in (0, 1)]
        best.append(int(np.argmin(c)))
    r = solve_bnb(inst)
    assert r.best_assignment == tuple(best)
    assert r.best_cost == pytest.approx(evaluate(best, inst).total)


def test_ties_resolve_to_lexicographically_smallest():
    # zero load and zero routing cost: every option costs alpha_n + alpha_0
    inst = star_instance([10.0, 20.0, 30.0], lam=0.0, unit_cost=0.0)
    for solve in (solve_exhaustive, solve_bnb):
        assert solve(inst).best_assignment == (0, 0, 0)


def test_infeasible_instance_reported():
    # S0 needs 7.5 cores at 150 Mbps, S1 needs 6; H_n = 1 and a 5 ms path leave nothing
    inst = star_instance([5000.0, 100.0], du_capacity=1.0)
    for solve in (solve_exhaustive, solve_bnb):
        r = solve(inst)
        assert r.status == Status.INFEASIBLE and r.best_assignment is None


def test_bnb_matches_exhaustive_on_100_random_8du_instances():
    rng = np.random.default_rng(77)
    statuses = set()
    for _ in range(100):
        inst = random_instance(rng, 8)
        a, b = solve_exhaustive(inst), solve_bnb(inst)
        assert a.status == b.status
        statuses.add(a.status)
        if a.status == Status.OPTIMAL:
            assert b.best_cost == pytest.approx(a.best_cost, rel=1e-9)
            assert b.best_assignment == a.best_assignment
    assert statuses == {Status.OPTIMAL, Status.INFEASIBLE}


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 6), st.booleans())
def test_optimum_is_feasible_and_no_feasible_assignment_is_cheaper(seed, n, tight):
    inst = random_instance(np.random.default_rng(seed), n, tight)
    r = solve_bnb(inst)
    feasible_costs = [evaluate(a, inst).total for a in itertools.product(range(4), repeat=n)
                      if evaluate(a, inst).feasible]
    if r.status == Status.OPTIMAL:
        rep = evaluate(r.best_assignment, inst)
        assert rep.feasible and rep.total == r.best_cost
        assert r.best_cost <= min(feasible_costs) + 1e-9
    else:
        assert not feasible_costs


def test_deterministic_including_node_count():
    inst = random_instance(np.random.default_rng(9), 8)
    a, b = solve_bnb(inst), solve_bnb(inst)
    assert (a.best_assignment, a.best_cost, a.nodes_explored) == (b.best_assignment, b.best_cost, b.nodes_explored)


def test_size_limits():
    inst = star_instance([100.0] * 13)
    with pytest.raises(SizeError):
        solve_exhaustive(inst)
    with pytest.raises(SizeError):
        solve_bnb(inst, max_n=12)


def test_full_size_instance_terminates_with_feasible_optimum():
    inst = Instance.uniform(generate_waxman(100, seed=0))
    r = solve_bnb(inst)
    assert r.status == Status.OPTIMAL
    assert evaluate(r.best_assignment, inst).feasible


def test_result_records():
    r = solve_bnb(star_instance([100.0, 900.0]))
    d = r.to_dict()
    assert d["status"] == "Optimal" and len(d["best_assignment"]) == 2
    fields = r.csv_record("inst-1").split(",")
    assert fields[0] == "inst-1" and float(fields[1]) == r.best_cost and fields[2] == "Optimal"
    assert len(fields) == 5
