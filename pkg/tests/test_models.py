import numpy as np
import pytest

from orplan import oracle
from orplan.core import REJECT, Schedule, first_stage_cost
from orplan.ingest import ScenarioSet
from orplan.milp import BINARY, SolveParams, solve, solve_reference_bnb
from orplan.models import (
    MomentInfo,
    WdroConfig,
    build_mdro,
    build_saa,
    build_wdro,
    build_wdsba,
    default_rho_upper,
    eta_cut_rows,
    extract_schedule,
    fix_schedule,
    mdro_active_rho_bounds,
    model_size,
    wdsba_cut_rows,
)
from orplan.verify import random_schedule, random_tiny_instance

TIGHT = SolveParams(rel_gap=1e-9)


def _with_open_costs(inst, cost):
    from dataclasses import replace

    blocks = tuple(replace(b, open_cost=cost) for b in inst.blocks)
    from orplan.core import Instance

    return Instance(inst.types, inst.surgeries, blocks)


# --- cut rows ---------------------------------------------------------------


def test_cut_row_structure(toy_instance, toy_scenarios):
    rows = eta_cut_rows(toy_instance, toy_scenarios, 0, 0)
    assert len(rows) == 10
    corners = [r for r in rows if r.kind == "corner"]
    samples = [r for r in rows if r.kind == "sample"]
    assert len(corners) == 8 and len(samples) == 2
    labels = {(r.d_corner, r.e_corner, r.beta > 0) for r in corners}
    assert len(labels) == 8
    for r in samples:
        assert r.rho_coef == 0.0
        assert all(c == 0.0 for c in r.pi_coef.values())


def test_sample_row_coefficients(toy_instance, toy_scenarios):
    rows = eta_cut_rows(toy_instance, toy_scenarios, 0, 0)
    r9 = rows[8]  # overtime-rate sample row
    assert r9.beta == 26.0
    assert r9.y_coef[0] == pytest.approx(3120.0)
    assert r9.const == pytest.approx(-10920.0)


def test_upper_corner_row_coefficients(toy_instance, toy_scenarios):
    r1 = eta_cut_rows(toy_instance, toy_scenarios, 0, 0)[0]
    assert (r1.d_corner, r1.e_corner) == ("hi", "hi")
    assert r1.y_coef[0] == pytest.approx(6240.0)
    assert r1.pi_coef[0] == pytest.approx(-120.0)
    assert r1.rho_coef == pytest.approx(-180.0)
    assert r1.const == pytest.approx(-6240.0)


def test_corner_rows_lose_coupling_when_sample_sits_on_corner(toy_instance):
    scen = ScenarioSet(d=np.array([[240.0]]), e=np.array([[240.0]]))
    r1 = eta_cut_rows(toy_instance, scen, 0, 0)[0]
    assert r1.pi_coef[0] == 0.0
    assert r1.rho_coef == 0.0


def test_cut_rows_match_bruteforce_on_randoms():
    rng = np.random.default_rng(2024)
    for _ in range(30):
        inst, scen = random_tiny_instance(rng)
        sched = random_schedule(rng, inst)
        rho = float(rng.uniform(0.0, 1.2 * oracle.rho_upper_bound(inst)))
        for n in range(scen.n):
            for b in range(inst.n_blocks):
                y_b = {
                    i: 1.0 if sched.assignment[i] == b else 0.0
                    for i in range(inst.n_surgeries)
                }
                got = max(
                    r.value(y_b, rho) for r in eta_cut_rows(inst, scen, n, b)
                )
                want = oracle.inner_sup_bruteforce(inst, scen, n, b, sched, rho)
                assert got == pytest.approx(want, abs=1e-9 * (1 + abs(want)))


def test_wdsba_rows_reduce_to_wdro_rows_when_open(toy_instance, toy_scenarios):
    plain = eta_cut_rows(toy_instance, toy_scenarios, 0, 0)
    scaled = wdsba_cut_rows(toy_instance, toy_scenarios, 0, 0)
    for p, s in zip(plain, scaled):
        y = {0: 1.0}
        for rho in (0.0, 5.0, 20.0):
            assert s.value(y, rho, x=1.0) == pytest.approx(p.value(y, rho))
            # a closed block's rows collapse to zero
            assert s.value({0: 0.0}, rho, x=0.0) == 0.0


# --- SAA ---------------------------------------------------------------------


def test_saa_toy_optimum(toy_instance, toy_scenarios):
    model = build_saa(toy_instance, toy_scenarios)
    sol = solve(model, TIGHT)
    assert sol.objective == pytest.approx(5300.0, abs=1e-6)
    sched = extract_schedule(model, sol)
    assert sched.assignment == {0: 0}


def test_saa_zero_recourse_at_exact_capacity(toy_instance):
    scen = ScenarioSet(d=np.array([[240.0]]), e=np.array([[240.0]]))
    sol = solve(build_saa(toy_instance, scen), TIGHT)
    assert sol.objective == pytest.approx(100.0, abs=1e-6)


def test_saa_duplicated_scenarios_leave_objective_unchanged(toy_instance):
    scen = ScenarioSet(d=np.array([[120.0]]), e=np.array([[60.0]]))
    twice = ScenarioSet(
        d=np.vstack([scen.d, scen.d]), e=np.vstack([scen.e, scen.e])
    )
    a = solve(build_saa(toy_instance, scen), TIGHT).objective
    b = solve(build_saa(toy_instance, twice), TIGHT).objective
    assert a == pytest.approx(b, abs=1e-6)


def test_saa_matches_exhaustive_on_randoms():
    rng = np.random.default_rng(99)
    for _ in range(15):
        inst, scen = random_tiny_instance(rng)
        sol = solve(build_saa(inst, scen), TIGHT)
        _, want = oracle.exhaustive_best_schedule_saa(inst, scen)
        assert sol.objective == pytest.approx(want, abs=1e-6 * (1 + abs(want)))


def test_saa_rejects_empty_scenarios(toy_instance):
    with pytest.raises(ValueError, match="empty"):
        build_saa(toy_instance, ScenarioSet(d=np.empty((0, 1)), e=np.empty((0, 1))))


# --- W-DRO -------------------------------------------------------------------


def test_wdro_toy_value_at_radius_sixty(toy_instance, toy_scenarios):
    model = build_wdro(toy_instance, WdroConfig(epsilon=60.0, scenarios=toy_scenarios))
    sol = solve(model, TIGHT)
    assert sol.objective == pytest.approx(6340.0, abs=1e-6)
    assert extract_schedule(model, sol).assignment == {0: 0}


def test_wdro_zero_radius_equals_saa(toy_instance, toy_scenarios):
    wdro = solve(
        build_wdro(toy_instance, WdroConfig(epsilon=0.0, scenarios=toy_scenarios)),
        TIGHT,
    )
    saa = solve(build_saa(toy_instance, toy_scenarios), TIGHT)
    assert wdro.objective == pytest.approx(saa.objective, abs=1e-6)


def test_wdro_robust_limit_matches_support_corners(toy_instance, toy_scenarios):
    model = build_wdro(
        toy_instance, WdroConfig(epsilon=1e5, scenarios=toy_scenarios)
    )
    sol = solve(model, TIGHT)
    best = min(
        first_stage_cost(toy_instance, s) + oracle.max_support_recourse(toy_instance, s)
        for s in (Schedule({0: 0}), Schedule({0: REJECT}))
    )
    assert sol.objective == pytest.approx(best, abs=1e-6)


def test_wdro_matches_exhaustive_oracle_on_randoms():
    rng = np.random.default_rng(17)
    for _ in range(15):
        inst, scen = random_tiny_instance(rng)
        eps = float(rng.choice([0.0, 0.3, 2.0, 30.0]))
        sol = solve(build_wdro(inst, WdroConfig(epsilon=eps, scenarios=scen)), TIGHT)
        _, want = oracle.exhaustive_best_schedule(inst, scen, eps)
        assert sol.objective == pytest.approx(want, abs=1e-6 * (1 + abs(want)))


def test_wdro_epsilon_monotone_and_dominates_saa():
    rng = np.random.default_rng(5150)
    for _ in range(5):
        inst, scen = random_tiny_instance(rng)
        saa_val = solve(build_saa(inst, scen), TIGHT).objective
        prev = None
        for eps in (0.0, 0.1, 1.0, 10.0, 100.0):
            val = solve(
                build_wdro(inst, WdroConfig(epsilon=eps, scenarios=scen)), TIGHT
            ).objective
            assert val >= saa_val - 1e-6 * (1 + abs(saa_val))
            if prev is not None:
                assert val >= prev - 1e-6 * (1 + abs(prev))
            prev = val


def test_wdro_rho_upper_doubling_is_safe(toy_instance, toy_scenarios):
    base = default_rho_upper(toy_instance)
    a = solve(
        build_wdro(toy_instance, WdroConfig(60.0, toy_scenarios)), TIGHT
    ).objective
    b = solve(
        build_wdro(toy_instance, WdroConfig(60.0, toy_scenarios, rho_upper=2 * base)),
        TIGHT,
    ).objective
    assert a == pytest.approx(b, abs=1e-6 * (1 + abs(a)))


def test_wdro_rejects_rho_upper_below_safe_bound(toy_instance, toy_scenarios):
    cfg = WdroConfig(1.0, toy_scenarios, rho_upper=1.0)
    with pytest.raises(ValueError, match="safe bound"):
        build_wdro(toy_instance, cfg)


def test_wdro_mccormick_products_exact_at_optimum():
    rng = np.random.default_rng(31337)
    for _ in range(8):
        inst, scen = random_tiny_instance(rng)
        model = build_wdro(inst, WdroConfig(epsilon=1.0, scenarios=scen))
        sol = solve(model, TIGHT)
        rho = sol.values[model.meta["rho_var"]]
        for key, pi_name in model.meta["pi"].items():
            y_val = sol.values[model.meta["y"][key]]
            assert abs(sol.values[pi_name] - rho * y_val) <= 1e-6


def test_wdro_model_sizes(toy_instance, toy_scenarios):
    rng = np.random.default_rng(8)
    for _ in range(5):
        inst, scen = random_tiny_instance(rng)
        model = build_wdro(inst, WdroConfig(epsilon=1.0, scenarios=scen))
        size = model_size(model)
        n_pairs = len(inst.compatible_pairs)
        assert size["binaries"] == n_pairs + inst.n_surgeries
        assert size["cut_rows"] == 10 * scen.n * inst.n_blocks
        n_eta = sum(1 for v in model.variables if v.name.startswith("eta_"))
        assert n_eta == scen.n * inst.n_blocks


def test_saa_has_fewer_variables_than_wdro_at_timing_sizes():
    # holds at the timing-study shapes, where compatible pairs outnumber
    # scenario-block cells
    from orplan import benchmark, evaluate

    ds = benchmark.synthetic_duration_dataset()
    inst = benchmark.benchmark_instance(60, benchmark.COST2, ds)
    scen = evaluate.in_sample_set(inst, ds, 5, seed=0, rep=0)
    saa = model_size(build_saa(inst, scen))
    wdro = model_size(build_wdro(inst, WdroConfig(epsilon=10.0, scenarios=scen)))
    assert saa["variables"] < wdro["variables"]


def test_fixed_schedule_dual_matches_oracle():
    rng = np.random.default_rng(777)
    for _ in range(10):
        inst, scen = random_tiny_instance(rng)
        sched = random_schedule(rng, inst)
        eps = float(rng.uniform(0.0, 40.0))
        model = fix_schedule(
            build_wdro(inst, WdroConfig(epsilon=eps, scenarios=scen)), sched
        )
        sol = solve(model, TIGHT)
        want = first_stage_cost(inst, sched) + oracle.wdro_fixed_y_value(
            inst, scen, eps, sched
        )
        assert sol.objective == pytest.approx(want, abs=1e-6 * (1 + abs(want)))


# --- M-DRO -------------------------------------------------------------------


def test_mdro_degenerate_support_is_deterministic():
    from orplan.core import Block, Instance, Scenario, Surgery, SurgeryType, recourse_cost

    t = SurgeryType("T", 120.0, 0.0, 120.0, 120.0, 1.0)
    s = Surgery(0, t, 100.0, 500.0)
    b = Block(0, "OR1", "Mon", t, 480.0, 26.0, 26.0 / 1.5, 60.0, 60.0, 60.0)
    inst = Instance((t,), (s,), (b,))
    sol = solve(build_mdro(inst, MomentInfo.from_instance(inst)), TIGHT)
    sched = Schedule({0: 0})
    want = first_stage_cost(inst, sched) + recourse_cost(
        inst, sched, Scenario(np.array([120.0]), np.array([60.0]))
    )
    reject_val = 500.0 + recourse_cost(
        inst, Schedule({0: REJECT}), Scenario(np.array([120.0]), np.array([60.0]))
    )
    assert sol.objective == pytest.approx(min(want, reject_val), abs=1e-6)


def test_mdro_matches_corner_distribution_oracle():
    rng = np.random.default_rng(1234)
    checked = 0
    for _ in range(20):
        if checked >= 8:
            break
        inst, _ = random_tiny_instance(rng, max_surgeries=3, max_blocks=2)
        if inst.n_surgeries + inst.n_blocks > 5:
            continue
        mom = MomentInfo.from_instance(inst)
        sol = solve(build_mdro(inst, mom), TIGHT)
        _, want = oracle.exhaustive_best_schedule_mdro(inst, mom.mu_d, mom.mu_e)
        assert sol.objective == pytest.approx(want, abs=1e-6 * (1 + abs(want)))
        checked += 1
    assert checked >= 8


def test_mdro_dominates_two_point_corner_mixtures():
    rng = np.random.default_rng(222)
    for _ in range(8):
        inst, _ = random_tiny_instance(rng)
        lam = float(rng.uniform(0.0, 1.0))
        mu_d = np.array([
            lam * s.type.d_lo + (1 - lam) * s.type.d_hi for s in inst.surgeries
        ])
        mu_e = np.array([lam * b.e_lo + (1 - lam) * b.e_hi for b in inst.blocks])
        mom = MomentInfo(mu_d=mu_d, mu_e=mu_e)
        model = build_mdro(inst, mom)
        sol = solve(model, TIGHT)
        sched = extract_schedule(model, sol)
        from orplan.core import Scenario, recourse_cost

        lo = Scenario(
            np.array([s.type.d_lo for s in inst.surgeries]),
            np.array([b.e_lo for b in inst.blocks]),
        )
        hi = Scenario(
            np.array([s.type.d_hi for s in inst.surgeries]),
            np.array([b.e_hi for b in inst.blocks]),
        )
        expected = first_stage_cost(inst, sched) + lam * recourse_cost(
            inst, sched, lo
        ) + (1 - lam) * recourse_cost(inst, sched, hi)
        assert sol.objective >= expected - 1e-6 * (1 + abs(expected))


def test_mdro_dominates_saa_at_mean_point():
    rng = np.random.default_rng(321)
    for _ in range(8):
        inst, _ = random_tiny_instance(rng)
        mom = MomentInfo.from_instance(inst)
        mdro = solve(build_mdro(inst, mom), TIGHT).objective
        scen = ScenarioSet(d=mom.mu_d[None, :], e=mom.mu_e[None, :])
        saa = solve(build_saa(inst, scen), TIGHT).objective
        assert mdro >= saa - 1e-6 * (1 + abs(saa))


def test_mdro_price_bounds_inactive_at_optimum():
    rng = np.random.default_rng(55)
    for _ in range(8):
        inst, _ = random_tiny_instance(rng)
        model = build_mdro(inst, MomentInfo.from_instance(inst))
        sol = solve(model, TIGHT)
        assert mdro_active_rho_bounds(model, sol) == []


def test_mdro_activeness_check_fires_on_tight_box(toy_instance):
    mom = MomentInfo.from_instance(toy_instance)
    # a box too small to contain the dual optimum forces clipped prices
    tight = MomentInfo(mu_d=mom.mu_d, mu_e=mom.mu_e, rho_lo=-1e-9, rho_hi=1e-9)
    model = build_mdro(toy_instance, tight)
    sol = solve(model, TIGHT)
    wide = solve(build_mdro(toy_instance, mom), TIGHT)
    if abs(sol.objective - wide.objective) > 1e-6 * (1 + abs(wide.objective)):
        assert mdro_active_rho_bounds(model, sol) != []


def test_mdro_rejects_means_outside_support(toy_instance):
    mom = MomentInfo(mu_d=np.array([500.0]), mu_e=np.array([120.0]))
    with pytest.raises(ValueError, match="outside support"):
        build_mdro(toy_instance, mom)


# --- W-DSBA ------------------------------------------------------------------


def test_wdsba_prohibitive_open_cost_closes_everything(
    toy_instance, toy_scenarios
):
    inst = _with_open_costs(toy_instance, 1e9)
    model = build_wdsba(inst, WdroConfig(epsilon=1.0, scenarios=toy_scenarios))
    sol = solve(model, TIGHT)
    sched = extract_schedule(model, sol)
    assert sched.open_blocks == frozenset()
    assert sched.assignment == {0: REJECT}
    assert sol.objective == pytest.approx(500.0, abs=1e-6)


def test_wdsba_free_open_cost_forced_open_equals_wdro(toy_instance, toy_scenarios):
    inst = _with_open_costs(toy_instance, 0.0)
    for eps in (0.0, 10.0, 60.0):
        wdro_val = solve(
            build_wdro(inst, WdroConfig(epsilon=eps, scenarios=toy_scenarios)), TIGHT
        ).objective
        model = build_wdsba(inst, WdroConfig(epsilon=eps, scenarios=toy_scenarios))
        forced = fix_schedule(
            model,
            Schedule({0: 0}, frozenset(range(inst.n_blocks))),
        )
        # only pin the open indicators; free the assignment again
        from orplan.milp import Variable

        for k, v in enumerate(forced.variables):
            if v.name.startswith(("y_", "yr_")):
                forced.variables[k] = Variable(v.name, 0.0, 1.0, BINARY)
        forced_val = solve(forced, TIGHT).objective
        assert forced_val == pytest.approx(wdro_val, abs=1e-6 * (1 + abs(wdro_val)))
        free_val = solve(model, TIGHT).objective
        assert free_val <= wdro_val + 1e-6 * (1 + abs(wdro_val))


def test_wdsba_matches_exhaustive_allocation_oracle():
    rng = np.random.default_rng(909)
    for _ in range(10):
        inst, scen = random_tiny_instance(rng, open_costs=True)
        eps = float(rng.choice([0.0, 1.0, 15.0]))
        sol = solve(build_wdsba(inst, WdroConfig(epsilon=eps, scenarios=scen)), TIGHT)
        _, want = oracle.exhaustive_best_allocation(inst, scen, eps)
        assert sol.objective == pytest.approx(want, abs=1e-6 * (1 + abs(want)))


def test_wdsba_requires_open_costs(toy_instance, toy_scenarios):
    with pytest.raises(ValueError, match="open_cost"):
        build_wdsba(toy_instance, WdroConfig(epsilon=1.0, scenarios=toy_scenarios))


def test_wdsba_tau_products_exact_at_optimum(toy_instance, toy_scenarios):
    inst = _with_open_costs(toy_instance, 50.0)
    model = build_wdsba(inst, WdroConfig(epsilon=5.0, scenarios=toy_scenarios))
    sol = solve(model, TIGHT)
    rho = sol.values[model.meta["rho_var"]]
    for key, tau in model.meta["tau"].items():
        x_val = sol.values[model.meta["x"][key]]
        assert abs(sol.values[tau] - rho * x_val) <= 1e-6
    for key, pi in model.meta["pi"].items():
        y_val = sol.values[model.meta["y"][key]]
        assert abs(sol.values[pi] - rho * y_val) <= 1e-6


# --- extraction --------------------------------------------------------------


def test_extract_schedule_rounding_and_errors(toy_instance, toy_scenarios):
    model = build_saa(toy_instance, toy_scenarios)
    sol = solve(model, TIGHT)
    sol.values[model.meta["y"]["0_0"]] = 1.0
    sol.values[model.meta["reject"]["0"]] = 0.0
    assert extract_schedule(model, sol).assignment == {0: 0}

    sol.values[model.meta["y"]["0_0"]] = 0.4999
    with pytest.raises(ValueError, match="not integral"):
        extract_schedule(model, sol)


def test_extract_schedule_reject(toy_instance, toy_scenarios):
    model = build_saa(toy_instance, toy_scenarios)
    sol = solve(model, TIGHT)
    sol.values[model.meta["y"]["0_0"]] = 0.0
    sol.values[model.meta["reject"]["0"]] = 1.0
    sol.objective = model.objective_value(sol.values)
    assert extract_schedule(model, sol).assignment == {0: REJECT}


def test_reference_bnb_agrees_on_tiny_wdro_models():
    rng = np.random.default_rng(246)
    checked = 0
    for _ in range(20):
        if checked >= 5:
            break
        inst, scen = random_tiny_instance(rng, max_surgeries=3, max_blocks=2)
        model = build_wdro(inst, WdroConfig(epsilon=2.0, scenarios=scen))
        if model_size(model)["binaries"] > 30:
            continue
        a = solve(model, TIGHT)
        b = solve_reference_bnb(model)
        assert a.objective == pytest.approx(b.objective, abs=1e-6 * (1 + abs(b.objective)))
        checked += 1
    assert checked >= 5
