import numpy as np
import pytest

from orplan import oracle
from orplan.core import REJECT, Schedule, first_stage_cost
from orplan.ingest import ScenarioSet
from orplan.verify import random_schedule, random_tiny_instance

RHO_STAR = 26.0 / 1.5  # the idle rate, where the toy fixed-assignment value kinks


def test_inner_sup_at_zero_penalty(toy_instance, toy_scenarios):
    sched = Schedule({0: 0})
    # worst case sits at the idle extreme with d, e at their lower bounds
    val = oracle.inner_sup_bruteforce(toy_instance, toy_scenarios, 0, 0, sched, 0.0)
    assert val == pytest.approx(7280.0, abs=1e-9)


def test_inner_sup_at_moderate_penalty(toy_instance, toy_scenarios):
    sched = Schedule({0: 0})
    val = oracle.inner_sup_bruteforce(toy_instance, toy_scenarios, 0, 0, sched, 20.0)
    assert val == pytest.approx(5200.0, abs=1e-9)


def test_inner_sup_large_penalty_with_sample_at_corner(toy_instance):
    # samples on the upper corner: deviation penalties vanish only there
    scen = ScenarioSet(d=np.array([[240.0]]), e=np.array([[240.0]]))
    sched = Schedule({0: 0})
    from orplan.core import Scenario, recourse_cost

    want = recourse_cost(
        toy_instance, sched, Scenario(np.array([240.0]), np.array([240.0]))
    )
    got = oracle.inner_sup_bruteforce(toy_instance, scen, 0, 0, sched, 30.0)
    assert got == pytest.approx(want, abs=1e-9)


def test_inner_sup_rejects_negative_penalty(toy_instance, toy_scenarios):
    with pytest.raises(ValueError):
        oracle.inner_sup_bruteforce(
            toy_instance, toy_scenarios, 0, 0, Schedule({0: 0}), -1.0
        )


def test_fixed_assignment_value_examples(toy_instance, toy_scenarios):
    sched = Schedule({0: 0})
    val = oracle.wdro_fixed_y_value(toy_instance, toy_scenarios, 60.0, sched)
    assert val == pytest.approx(6240.0, abs=1e-9)
    # the minimizing penalty rate is exactly the idle rate
    grid = oracle.rho_grid(toy_instance, toy_scenarios, sched)
    assert np.any(np.isclose(grid, RHO_STAR))

    val0 = oracle.wdro_fixed_y_value(toy_instance, toy_scenarios, 0.0, sched)
    assert val0 == pytest.approx(5200.0, abs=1e-9)  # mean recourse at the sample

    robust = oracle.wdro_fixed_y_value(toy_instance, toy_scenarios, 1e6, sched)
    assert robust == pytest.approx(
        oracle.max_support_recourse(toy_instance, sched), abs=1e-9
    )
    assert robust == pytest.approx(7280.0, abs=1e-9)


def test_fixed_assignment_value_convex_and_monotone(toy_instance, toy_scenarios):
    sched = Schedule({0: 0})
    grid = oracle.rho_grid(toy_instance, toy_scenarios, sched)
    inner = np.array([
        oracle.inner_sup_bruteforce(toy_instance, toy_scenarios, 0, 0, sched, r)
        for r in grid
    ])
    for eps in (0.0, 5.0, 60.0, 500.0):
        g = eps * grid + inner
        slopes = np.diff(g) / np.diff(grid)
        assert np.all(np.diff(slopes) >= -1e-9)  # convex along the grid
    vals = [
        oracle.wdro_fixed_y_value(toy_instance, toy_scenarios, eps, sched)
        for eps in (0.0, 1.0, 10.0, 100.0, 1e5)
    ]
    assert all(a <= b + 1e-9 for a, b in zip(vals, vals[1:]))


def test_exhaustive_best_schedule_toy(toy_instance, toy_scenarios):
    sched, val = oracle.exhaustive_best_schedule(toy_instance, toy_scenarios, 0.0)
    assert sched.assignment == {0: 0}
    assert val == pytest.approx(5300.0, abs=1e-9)


def test_exhaustive_agrees_with_direct_saa_enumeration():
    rng = np.random.default_rng(123)
    for _ in range(10):
        inst, scen = random_tiny_instance(rng)
        s1, v1 = oracle.exhaustive_best_schedule(inst, scen, 0.0)
        s2, v2 = oracle.exhaustive_best_schedule_saa(inst, scen)
        assert v1 == pytest.approx(v2, abs=1e-8)
        assert s1.assignment == s2.assignment


def test_exhaustive_rejects_oversized_instances():
    rng = np.random.default_rng(5)
    inst, scen = random_tiny_instance(rng)
    import orplan.oracle as o

    old = o.EXHAUSTIVE_LIMIT
    o.EXHAUSTIVE_LIMIT = 1
    try:
        if inst.n_surgeries >= 1 and inst.compatible_blocks[0]:
            with pytest.raises(ValueError, match="exceed"):
                oracle.exhaustive_best_schedule(inst, scen, 0.0)
    finally:
        o.EXHAUSTIVE_LIMIT = old


def test_saa_objective_direct_examples(toy_instance, toy_scenarios):
    sched = Schedule({0: 0})
    assert oracle.saa_objective_direct(
        toy_instance, toy_scenarios, sched
    ) == pytest.approx(5300.0, abs=1e-12)
    # point mass exactly at capacity: first-stage cost only
    scen = ScenarioSet(d=np.array([[240.0]]), e=np.array([[240.0]]))
    assert oracle.saa_objective_direct(toy_instance, scen, sched) == pytest.approx(
        100.0
    )


def test_saa_objective_permutation_invariant(toy_instance):
    scen = ScenarioSet(
        d=np.array([[100.0], [200.0], [150.0]]),
        e=np.array([[10.0], [200.0], [60.0]]),
    )
    perm = ScenarioSet(d=scen.d[::-1].copy(), e=scen.e[::-1].copy())
    sched = Schedule({0: 0})
    assert oracle.saa_objective_direct(
        toy_instance, scen, sched
    ) == pytest.approx(oracle.saa_objective_direct(toy_instance, perm, sched))


def test_closed_blocks_contribute_nothing(toy_instance, toy_scenarios):
    sched = Schedule({0: REJECT}, frozenset())
    assert oracle.inner_sup_bruteforce(
        toy_instance, toy_scenarios, 0, 0, sched, 0.0
    ) == 0.0
    assert oracle.wdro_fixed_y_value(
        toy_instance, toy_scenarios, 3.0, sched
    ) == 0.0


def test_grid_minimum_matches_dense_reference():
    # the kink-aware grid must find a minimum no worse than a very fine grid,
    # and the fine-grid value can exceed it by at most (Lipschitz x step)
    rng = np.random.default_rng(77)
    for _ in range(20):
        inst, scen = random_tiny_instance(rng)
        sched = random_schedule(rng, inst)
        eps = float(rng.uniform(0.0, 50.0))
        exact = oracle.wdro_fixed_y_value(inst, scen, eps, sched)
        cap = oracle.rho_upper_bound(inst)
        fine = np.linspace(0.0, cap, 4001) if cap > 0 else np.array([0.0])
        approx = oracle.wdro_fixed_y_value(inst, scen, eps, sched, grid=fine)
        assert exact <= approx + 1e-9
        slope_bound = eps
        for n in range(scen.n):
            for b in range(inst.n_blocks):
                devs = sum(
                    inst.surgeries[i].type.d_hi - inst.surgeries[i].type.d_lo
                    for i, t in sched.assignment.items() if t == b
                )
                devs += inst.blocks[b].e_hi - inst.blocks[b].e_lo
                slope_bound += devs / scen.n
        step = cap / 4000 if cap > 0 else 0.0
        assert approx - exact <= slope_bound * step + 1e-9


def test_mdro_corner_value_bounds_mean_point():
    rng = np.random.default_rng(31)
    for _ in range(10):
        inst, scen = random_tiny_instance(rng)
        sched = random_schedule(rng, inst)
        mu_d = np.array([s.type.mean_duration for s in inst.surgeries])
        mu_e = np.array([b.e_mean for b in inst.blocks])
        val = oracle.mdro_inner_corner_value(inst, sched, mu_d, mu_e)
        from orplan.core import Scenario, recourse_cost

        mean_val = recourse_cost(inst, sched, Scenario(mu_d, mu_e))
        assert val >= mean_val - 1e-7
