import math
import os

import numpy as np
import pytest

from orplan.milp import (
    BINARY,
    BackendError,
    MilpModel,
    MilpSolution,
    SolveParams,
    constraint_violation,
    parse_lp,
    register_backend,
    solve,
    solve_reference_bnb,
    write_lp,
)


def _min_x_geq_3() -> MilpModel:
    m = MilpModel(name="xmin")
    m.add_variable("x", 0.0, math.inf)
    m.add_constraint("c0", [("x", 1.0)], ">=", 3.0)
    m.set_objective({"x": 1.0})
    return m


def _max_binary() -> MilpModel:
    m = MilpModel(name="ymax")
    m.add_variable("y", 0, 1, BINARY)
    m.set_objective({"y": -1.0})
    return m


def _knapsack() -> MilpModel:
    m = MilpModel(name="knap")
    m.add_variable("a", 0, 1, BINARY)
    m.add_variable("b", 0, 1, BINARY)
    m.add_constraint("cap", [("a", 1.0), ("b", 1.0)], "<=", 1.0)
    m.set_objective({"a": -3.0, "b": -2.0})
    return m


@pytest.mark.parametrize("solver", [solve, solve_reference_bnb])
def test_three_basic_models(solver):
    sol = solver(_min_x_geq_3())
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(3.0, abs=1e-9)

    sol = solver(_max_binary())
    assert sol.objective == pytest.approx(-1.0, abs=1e-9)
    assert sol.values["y"] == pytest.approx(1.0)

    sol = solver(_knapsack())
    assert sol.objective == pytest.approx(-3.0, abs=1e-9)
    assert sol.values["a"] == pytest.approx(1.0)
    assert sol.values["b"] == pytest.approx(0.0)


def _random_model(rng: np.random.Generator, n_bin: int = 10) -> MilpModel:
    m = MilpModel(name="rand")
    for k in range(n_bin):
        m.add_variable(f"z{k}", 0, 1, BINARY)
    n_cont = int(rng.integers(0, 3))
    for k in range(n_cont):
        m.add_variable(f"w{k}", 0.0, float(rng.uniform(1, 10)))
    names = [v.name for v in m.variables]
    for c in range(int(rng.integers(1, 6))):
        terms = [
            (name, float(rng.normal())) for name in names if rng.random() < 0.6
        ]
        if not terms:
            terms = [(names[0], 1.0)]
        sense = ("<=", ">=", "=")[int(rng.integers(3))]
        rhs = float(rng.normal()) * 2
        if sense == "=":
            # keep equalities satisfiable: bound by the term count
            rhs = float(rng.integers(0, 2))
            terms = [(name, 1.0) for name, _ in terms]
        m.add_constraint(f"c{c}", terms, sense, rhs)
    m.set_objective({name: float(rng.normal()) for name in names})
    return m


def test_reference_bnb_matches_backend_on_random_models():
    rng = np.random.default_rng(7)
    agree = 0
    for _ in range(25):
        m = _random_model(rng)
        ref = solve_reference_bnb(m)
        got = solve(m, SolveParams(rel_gap=1e-9))
        assert ref.status == got.status
        if ref.status == "optimal":
            assert ref.objective == pytest.approx(got.objective, abs=1e-6)
            agree += 1
    assert agree >= 10  # most random models should be feasible


def test_lp_relaxation_bounds_milp_optimum():
    from orplan.milp import _lp_relaxation, _to_arrays

    rng = np.random.default_rng(11)
    checked = 0
    for _ in range(80):
        if checked >= 20:
            break
        m = _random_model(rng, n_bin=6)
        sol = solve(m, SolveParams(rel_gap=1e-9))
        if sol.status != "optimal":
            continue
        c, integ, lb, ub, a, clo, chi = _to_arrays(m)
        status, bound, _ = _lp_relaxation(c, a, clo, chi, lb, ub)
        assert status == "optimal"
        assert bound <= sol.objective + 1e-6
        checked += 1
    assert checked >= 20


def test_reference_bnb_rejects_too_many_binaries():
    m = MilpModel()
    for k in range(31):
        m.add_variable(f"z{k}", 0, 1, BINARY)
    m.set_objective({"z0": 1.0})
    with pytest.raises(ValueError, match="binaries"):
        solve_reference_bnb(m)


def test_infeasible_and_unbounded_status():
    m = MilpModel()
    m.add_variable("x", 0.0, 1.0)
    m.add_constraint("c", [("x", 1.0)], ">=", 2.0)
    m.set_objective({"x": 1.0})
    assert solve(m).status == "infeasible"
    assert solve_reference_bnb(m).status == "infeasible"

    m2 = MilpModel()
    m2.add_variable("x", -math.inf, math.inf)
    m2.set_objective({"x": 1.0})
    assert solve(m2).status == "unbounded"


def test_validate_rejects_bad_models():
    m = MilpModel()
    m.add_variable("x", 0.0, 1.0)
    m.add_constraint("c", [("nope", 1.0)], "<=", 1.0)
    with pytest.raises(ValueError, match="unknown"):
        m.validate()
    m2 = MilpModel()
    m2.add_variable("x", 0.0, 1.0)
    m2.add_variable("x", 0.0, 1.0)
    with pytest.raises(ValueError, match="unique"):
        m2.validate()
    with pytest.raises(ValueError):
        m2.add_variable("b", 0.0, math.inf, BINARY)


def test_lp_round_trip_structural_equality():
    m = _knapsack()
    m.add_variable("w", -math.inf, 4.25)
    m.add_constraint("mix", [("a", -1.5), ("w", 2.0)], ">=", -0.75)
    m.set_objective({"a": -3.0, "b": -2.0, "w": 0.125}, constant=7.5)
    text = write_lp(m)
    back = parse_lp(text)
    assert back.same_model(m)
    assert write_lp(back) == text


def test_lp_round_trip_random_models():
    rng = np.random.default_rng(3)
    for _ in range(10):
        m = _random_model(rng, n_bin=5)
        assert parse_lp(write_lp(m)).same_model(m)


def test_optimal_solutions_are_rechecked():
    def bad_backend(model, params):
        values = {v.name: 0.0 for v in model.variables}
        return MilpSolution("optimal", 0.0, values, 0.0, 0.0)

    register_backend("bad", bad_backend)
    with pytest.raises(BackendError, match="violation"):
        solve(_min_x_geq_3(), backend="bad")


def test_unknown_backend_and_env_selection():
    with pytest.raises(BackendError, match="unavailable"):
        solve(_min_x_geq_3(), backend="nonexistent")
    os.environ["ORPLAN_SOLVER"] = "highs"
    try:
        assert solve(_min_x_geq_3()).status == "optimal"
    finally:
        del os.environ["ORPLAN_SOLVER"]


def test_constraint_violation_measures_worst_case():
    m = _min_x_geq_3()
    assert constraint_violation(m, {"x": 3.0}) == pytest.approx(0.0)
    assert constraint_violation(m, {"x": 2.0}) == pytest.approx(1.0)


def test_solve_params_validation():
    with pytest.raises(ValueError):
        SolveParams(time_limit=0.0)
