import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_instance, star_instance
from vransplit.model import (DELAY_BOUND_MS, FAMILIES, RHO_CU, RHO_DU, BsProfile, InputError, Scenario, Split,
                             SystemParams, cost_report_csv, cran_assignment, cu_cost, dran_assignment, du_cost,
                             evaluate, evaluate_batch, flow_of, load_scenario, routing_cost, save_scenario,
                             scaled_instance)
from vransplit.topology import RoutePath, generate_waxman


def routed(zeta, lam=150.0):
    return BsProfile(1, lam=lam, route=RoutePath(1, (1, 0), (0,), 10.0, zeta))


# -- per-term examples ---------------------------------------------------------

def test_flow_examples():
    assert flow_of(Split.S3, 150) == 2500
    assert flow_of(Split.S0, 0) == 0
    assert flow_of(Split.S2, 150) == pytest.approx(154.5)


def test_du_cost_examples():
    assert du_cost(BsProfile(1, lam=150, vm_cost=1, compute_cost=1), Split.S0) == pytest.approx(8.5)
    p = BsProfile(1, lam=77, vm_cost=1.3, compute_cost=2.1)
    assert du_cost(p, Split.S3) == 1.3
    for o in Split:
        assert du_cost(BsProfile(1, lam=0, vm_cost=0.7), o) == 0.7


def test_cu_cost_examples():
    params = SystemParams()
    assert cu_cost([Split.S3], [BsProfile(1, lam=150)], params) == pytest.approx(0.6275)
    profs = [BsProfile(k, lam=10.0 * k) for k in range(1, 5)]
    assert cu_cost([Split.S0] * 4, profs, params) == pytest.approx(4 * 0.5)
    zero = [BsProfile(k, lam=0.0) for k in range(3)]
    assert cu_cost([Split.S1, Split.S2, Split.S3], zero, params) == pytest.approx(3 * 0.5)
    with pytest.raises(InputError):
        cu_cost([Split.S0], profs, params)


def test_routing_cost_examples():
    assert routing_cost(routed(0.001), Split.S3) == pytest.approx(2.5)
    assert all(routing_cost(routed(0.0), o) == 0 for o in Split)
    assert routing_cost(routed(0.0005), Split.S0) == pytest.approx(0.075)


def test_split_table():
    np.testing.assert_array_equal(DELAY_BOUND_MS, [30, 30, 2, 0.25])
    assert RHO_DU[0] == 0.05 and RHO_CU[3] == 0.05


# -- evaluate ------------------------------------------------------------------

def test_dran_feasible_and_unpenalized():
    inst = star_instance([500.0, 2500.0, 29_000.0])
    r = evaluate(dran_assignment(3), inst)
    assert r.feasible and np.all(r.violations == 0)
    assert r.penalized == r.total and r.penalty == 0


def test_s3_at_300us_violates_delay_by_50us():
    inst = star_instance([300.0], capacity=1e4)
    r = evaluate([Split.S3], inst)
    assert r.raw_violations[FAMILIES.index("delay")] == pytest.approx(50.0)
    assert r.violations[FAMILIES.index("delay")] == pytest.approx(50.0 / 250.0)
    assert not r.feasible and r.penalized > r.total


def test_mismatched_du_count_rejected():
    inst = star_instance([100.0, 200.0])
    with pytest.raises(InputError):
        evaluate([0], inst)
    with pytest.raises(InputError):
        evaluate([0, 4], inst)


def test_assignment_helpers():
    assert dran_assignment(3) == (Split.S0,) * 3
    assert cran_assignment(2) == (Split.S3,) * 2


def test_cran_reference_mode_reports_j():
    inst = star_instance([900.0, 100.0], capacity=1e3)
    r = evaluate(cran_assignment(2), inst, reference_only=True)
    assert r.reference_only and r.penalized == r.total and r.penalty == 0
    assert not r.feasible  # violations are still reported


def test_default_mu_is_dran_cost():
    inst = random_instance(np.random.default_rng(3), 5)
    j = evaluate(dran_assignment(inst.n), inst).total
    np.testing.assert_allclose(inst.mu, [j] * 4)


def _spreadsheet(inst, assignment):
    """Term-by-term recomputation with plain floats."""
    p = inst.params
    j = 0.0
    for prof, o in zip(inst.profiles, assignment):
        v_n = prof.vm_cost + prof.compute_cost * prof.lam * [0.05, 0.04, 0.00325, 0.0][o]
        flow = [prof.lam, prof.lam, 1.02 * prof.lam + 1.5, 2500.0][o]
        zeta = sum(inst.topology.links[k].unit_cost for k in prof.route.links)
        j += v_n + zeta * flow
        j += p.vm_cost_cu + prof.lam * p.compute_cost_cu * [0.0, 0.001, 0.00175, 0.05][o]
    return j


def test_total_matches_independent_recomputation():
    rng = np.random.default_rng(11)
    for _ in range(20):
        inst = random_instance(rng, 6)
        a = rng.integers(0, 4, 6)
        r = evaluate(a, inst)
        assert r.total == pytest.approx(_spreadsheet(inst, a), rel=1e-12)
        assert r.total == pytest.approx(r.du_costs.sum() + r.routing_costs.sum() + r.cu_cost, rel=1e-12)


def _direct_feasible(inst, assignment):
    """Capacity, flow and delay constraints checked one by one."""
    p = inst.params
    cu_load = 0.0
    link_load = [0.0] * len(inst.topology.links)
    for prof, o in zip(inst.profiles, assignment):
        if prof.lam * [0.05, 0.04, 0.00325, 0.0][o] > prof.capacity:
            return False
        if prof.route.total_delay > [30_000.0, 30_000.0, 2_000.0, 250.0][o]:
            return False
        cu_load += prof.lam * [0.0, 0.001, 0.00175, 0.05][o]
        for k in prof.route.links:
            link_load[k] += [prof.lam, prof.lam, 1.02 * prof.lam + 1.5, 2500.0][o]
    if cu_load > p.cu_capacity:
        return False
    return all(load <= l.capacity for load, l in zip(link_load, inst.topology.links))


def test_feasibility_matches_direct_checker_on_10k_pairs():
    rng = np.random.default_rng(2024)
    agree = n_feasible = total = 0
    for _ in range(50):
        inst = random_instance(rng, int(rng.integers(2, 9)))
        a = rng.integers(0, 4, (200, inst.n))
        ev = evaluate_batch(inst, a)
        fast = ~(ev["C"] > 0).any(axis=1)
        slow = np.array([_direct_feasible(inst, row) for row in a])
        agree += int((fast == slow).sum())
        n_feasible += int(slow.sum())
        total += len(a)
    assert total >= 10_000 and agree == total
    assert 0.05 * total < n_feasible < 0.95 * total  # both outcomes exercised


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 7))
def test_l_at_least_j_and_equal_iff_feasible(seed, n):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, n)
    ev = evaluate_batch(inst, rng.integers(0, 4, (64, n)))
    feas = ~(ev["C"] > 0).any(axis=1)
    assert np.all(ev["L"] >= ev["J"])
    np.testing.assert_array_equal(ev["L"] == ev["J"], feas)
    np.testing.assert_allclose(ev["xi"], ev["C"] @ inst.mu)
    assert np.all(ev["C"] >= 0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 2449.5), st.floats(0, 5), st.floats(0, 5))
def test_centralization_tradeoff_monotone(lam, alpha, beta):
    # S2 carries 1.02 lam + 1.5, which passes the constant S3 flow above lam = 2449.5
    p = BsProfile(1, lam=lam, vm_cost=alpha, compute_cost=beta)
    du = [du_cost(p, o) for o in Split]
    fl = [flow_of(o, lam) for o in Split]
    assert all(a >= b for a, b in zip(du, du[1:]))
    assert all(a <= b + 1e-9 for a, b in zip(fl, fl[1:]))


def test_evaluate_is_pure():
    inst = random_instance(np.random.default_rng(5), 6)
    a = [1, 2, 0, 3, 2, 1]
    r1, r2 = evaluate(a, inst), evaluate(a, inst)
    assert r1.total == r2.total and r1.penalized == r2.penalized
    np.testing.assert_array_equal(r1.violations, r2.violations)


def test_batch_overrides_match_rescaled_instance():
    inst = random_instance(np.random.default_rng(8), 5)
    a = np.random.default_rng(0).integers(0, 4, (3, 5))
    ev = evaluate_batch(inst, a, lam=inst.lam * 0.4, zeta=inst.zeta * 0.7)
    ref = evaluate_batch(inst.scaled(0.4, 0.7), a)
    np.testing.assert_allclose(ev["L"], ref["L"], rtol=1e-12)


def test_cost_report_csv_has_row_per_du():
    inst = star_instance([100.0, 200.0, 300.0])
    text = cost_report_csv(evaluate([0, 1, 2], inst), inst)
    rows = text.strip().splitlines()
    assert rows[0].startswith("du_id,split")
    assert [r.split(",")[0] for r in rows[1:4]] == ["1", "2", "3"]
    assert any(r.startswith("J,") for r in rows)


# -- scenario files --------------------------------------------------------------

def test_scenario_roundtrip_and_overrides(tmp_path):
    topo = generate_waxman(6, seed=4)
    sc = Scenario(lam=80.0, overrides={topo.du_ids[0]: {"lambda": 20.0, "du_capacity": 3.0}},
                  system=SystemParams(cu_capacity=40.0, penalty_weights=(1.0, 2.0, 3.0, 4.0)))
    save_scenario(sc, tmp_path / "s.json")
    back = load_scenario(tmp_path / "s.json")
    inst = back.build(topo)
    assert inst.lam[0] == 20.0 and inst.du_capacity[0] == 3.0 and inst.lam[1] == 80.0
    np.testing.assert_array_equal(inst.mu, [1, 2, 3, 4])
    assert inst.params.cu_capacity == 40.0


def test_scenario_errors(tmp_path):
    topo = generate_waxman(4, seed=1)
    with pytest.raises(InputError, match="unknown field"):
        Scenario(overrides={topo.du_ids[0]: {"colour": 1}}).build(topo)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema": "vransplit.scenario", "penalty_weights": {"energy": 1.0}}))
    with pytest.raises(InputError, match="unknown penalty"):
        load_scenario(bad)
    bad.write_text('{"defaults": {\n"lambda": }')
    with pytest.raises(InputError, match="line 2"):
        load_scenario(bad)
    with pytest.raises(InputError):
        BsProfile(1, lam=-1.0)


def test_scaled_instance_matches_reference_extremes():
    ref = generate_waxman(100, seed=0)
    ref_max = max(p.total_delay for p in ref.paths.values())
    inst = scaled_instance(10, seed=0)
    assert inst.n == 10
    assert inst.path_delay.max() == pytest.approx(ref_max)
    assert inst.params.cu_capacity == pytest.approx(75.0 * 10 / 99)
    raw = generate_waxman(11, seed=0)
    np.testing.assert_allclose(inst.link_capacity, [l.capacity * 10 / 99 for l in raw.links])
