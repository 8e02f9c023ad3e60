"""Oracle verification suite: cross-checks the model builders against the
brute-force verifiers on randomly generated tiny instances.

Used by the ``verify`` CLI command and by the acceptance tests.  The cut-row
generator is injectable so a deliberately corrupted generator can be shown to
fail with a message naming the offending (sample, block) row.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from orplan import models, oracle
from orplan.core import (
    REJECT,
    Block,
    Instance,
    Schedule,
    Surgery,
    SurgeryType,
    first_stage_cost,
)
from orplan.ingest import ScenarioSet
from orplan.milp import SolveParams, solve
from orplan.models import WdroConfig, build_saa, build_wdro, eta_cut_rows

CUT_TOL = 1e-9
VALUE_TOL = 1e-6


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def _close(a: float, b: float, tol: float = VALUE_TOL) -> bool:
    return abs(a - b) <= tol * (1.0 + abs(b))


def random_tiny_instance(
    rng: np.random.Generator,
    max_surgeries: int = 4,
    max_blocks: int = 2,
    max_scenarios: int = 5,
    open_costs: bool = False,
) -> tuple[Instance, ScenarioSet]:
    """A random small instance plus in-support scenarios, for oracle checks."""
    n_types = int(rng.integers(1, 3))
    types = []
    fracs = rng.uniform(0.2, 1.0, n_types)
    fracs = fracs / fracs.sum()
    for k in range(n_types):
        d_lo = float(rng.uniform(20.0, 90.0))
        d_hi = d_lo + float(rng.uniform(20.0, 200.0))
        mean = float(rng.uniform(d_lo, d_hi))
        types.append(SurgeryType(
            name=f"T{k}", mean_duration=mean,
            sd_duration=float(rng.uniform(0.0, 40.0)),
            d_lo=d_lo, d_hi=d_hi, mix_fraction=float(fracs[k]),
        ))
    n_blocks = int(rng.integers(1, max_blocks + 1))
    blocks = []
    for b in range(n_blocks):
        t = types[int(rng.integers(n_types))]
        e_lo = float(rng.uniform(0.0, 30.0))
        e_hi = e_lo + float(rng.uniform(0.0, 150.0))
        blocks.append(Block(
            id=b, or_room=f"OR{b + 1}", day="Mon", specialty=t,
            length=float(rng.uniform(150.0, 600.0)),
            overtime_rate=float(rng.uniform(5.0, 30.0)),
            idle_rate=float(rng.choice([0.0, rng.uniform(2.0, 20.0)])),
            e_lo=e_lo, e_hi=e_hi,
            e_mean=float(rng.uniform(e_lo, e_hi)),
            open_cost=float(rng.uniform(50.0, 500.0)) if open_costs else None,
        ))
    n_surg = int(rng.integers(1, max_surgeries + 1))
    surgeries = []
    block_types = {b.specialty.name for b in blocks}
    for i in range(n_surg):
        # bias toward types that actually have blocks
        t = types[int(rng.integers(n_types))]
        if t.name not in block_types and rng.random() < 0.8:
            t = blocks[int(rng.integers(n_blocks))].specialty
        c = float(rng.uniform(50.0, 300.0))
        surgeries.append(Surgery(
            id=i, type=t, schedule_cost=c,
            reject_cost=c * float(rng.uniform(2.0, 6.0)),
        ))
    inst = Instance(tuple(types), tuple(surgeries), tuple(blocks))
    n_scen = int(rng.integers(1, max_scenarios + 1))
    d = np.empty((n_scen, n_surg))
    e = np.empty((n_scen, n_blocks))
    for i, s in enumerate(surgeries):
        d[:, i] = rng.uniform(s.type.d_lo, s.type.d_hi, n_scen)
    for b, blk in enumerate(blocks):
        e[:, b] = rng.uniform(blk.e_lo, blk.e_hi, n_scen)
    return inst, ScenarioSet(d=d, e=e, seed=-1, kind="uniform")


def random_schedule(rng: np.random.Generator, inst: Instance) -> Schedule:
    assignment = {}
    for s in inst.surgeries:
        choices = [REJECT] + list(inst.compatible_blocks[s.id])
        assignment[s.id] = int(choices[int(rng.integers(len(choices)))])
    return Schedule(assignment)


def check_cut_exactness(
    inst: Instance,
    scen: ScenarioSet,
    rng: np.random.Generator,
    trials: int = 5,
    cut_rows_fn: Callable = eta_cut_rows,
) -> CheckResult:
    """Max over the ten cut rows must equal the brute-force inner supremum."""
    rho_cap = oracle.rho_upper_bound(inst)
    for _ in range(trials):
        sched = random_schedule(rng, inst)
        rho = float(rng.uniform(0.0, rho_cap * 1.2)) if rho_cap > 0 else 0.0
        for n in range(scen.n):
            for b in range(inst.n_blocks):
                y_b = {
                    i: (1.0 if sched.assignment[i] == b else 0.0)
                    for i in range(inst.n_surgeries)
                }
                rows = cut_rows_fn(inst, scen, n, b)
                got = max(row.value(y_b, rho) for row in rows)
                want = oracle.inner_sup_bruteforce(inst, scen, n, b, sched, rho)
                if abs(got - want) > CUT_TOL * (1.0 + abs(want)):
                    return CheckResult(
                        "cut-exactness", False,
                        f"row max {got!r} != brute force {want!r} "
                        f"at sample {n}, block {b}",
                    )
    return CheckResult("cut-exactness", True)


def check_fixed_assignment_dual(
    inst: Instance,
    scen: ScenarioSet,
    rng: np.random.Generator,
    epsilon: float,
    params: SolveParams | None = None,
) -> CheckResult:
    """MILP with the assignment pinned must match the grid-minimized dual."""
    sched = random_schedule(rng, inst)
    model = models.fix_schedule(
        build_wdro(inst, WdroConfig(epsilon=epsilon, scenarios=scen)), sched
    )
    sol = solve(model, params or SolveParams(rel_gap=1e-9))
    if sol.status != "optimal":
        return CheckResult("fixed-assignment-dual", False, f"status {sol.status}")
    want = oracle.wdro_fixed_y_value(inst, scen, epsilon, sched)
    want += first_stage_cost(inst, sched)
    if not _close(sol.objective, want):
        return CheckResult(
            "fixed-assignment-dual", False,
            f"milp {sol.objective!r} != oracle {want!r}",
        )
    return CheckResult("fixed-assignment-dual", True)


def check_exhaustive_optimum(
    inst: Instance,
    scen: ScenarioSet,
    epsilon: float,
    params: SolveParams | None = None,
) -> CheckResult:
    """Full MILP optimum must match exhaustive assignment enumeration."""
    model = build_wdro(inst, WdroConfig(epsilon=epsilon, scenarios=scen))
    sol = solve(model, params or SolveParams(rel_gap=1e-9))
    if sol.status != "optimal":
        return CheckResult("exhaustive-optimum", False, f"status {sol.status}")
    _, want = oracle.exhaustive_best_schedule(inst, scen, epsilon)
    if not _close(sol.objective, want):
        return CheckResult(
            "exhaustive-optimum", False,
            f"milp {sol.objective!r} != exhaustive {want!r}",
        )
    return CheckResult("exhaustive-optimum", True)


def check_zero_radius_equivalence(
    inst: Instance, scen: ScenarioSet, params: SolveParams | None = None
) -> CheckResult:
    """At radius zero the Wasserstein model collapses to the SAA."""
    params = params or SolveParams(rel_gap=1e-9)
    wdro = solve(build_wdro(inst, WdroConfig(epsilon=0.0, scenarios=scen)), params)
    saa = solve(build_saa(inst, scen), params)
    if wdro.status != "optimal" or saa.status != "optimal":
        return CheckResult(
            "zero-radius-saa", False, f"{wdro.status}/{saa.status}"
        )
    if not _close(wdro.objective, saa.objective):
        return CheckResult(
            "zero-radius-saa", False,
            f"wdro {wdro.objective!r} != saa {saa.objective!r}",
        )
    return CheckResult("zero-radius-saa", True)


def run_verification(
    seed: int = 0,
    count: int = 10,
    checks: Sequence[str] = ("cuts", "dual", "exhaustive", "eps0"),
    instance: Instance | None = None,
    scenarios: ScenarioSet | None = None,
    cut_rows_fn: Callable = eta_cut_rows,
    params: SolveParams | None = None,
) -> list[CheckResult]:
    """Run the oracle suite on ``count`` random tiny instances (or one given).

    Returns one result per (instance, check); any failure carries a detail
    message naming the mismatch.
    """
    rng = np.random.default_rng(seed)
    results: list[CheckResult] = []
    for k in range(count):
        if instance is not None:
            inst, scen = instance, scenarios
            if scen is None:
                raise ValueError("scenarios required with an explicit instance")
        else:
            inst, scen = random_tiny_instance(rng)
        epsilon = float(rng.choice([0.0, 0.5, 5.0, 60.0]))
        if "cuts" in checks:
            results.append(check_cut_exactness(inst, scen, rng, cut_rows_fn=cut_rows_fn))
        if "dual" in checks:
            results.append(check_fixed_assignment_dual(inst, scen, rng, epsilon, params))
        if "exhaustive" in checks:
            results.append(check_exhaustive_optimum(inst, scen, epsilon, params))
        if "eps0" in checks:
            results.append(check_zero_radius_equivalence(inst, scen, params))
        if instance is not None:
            break
    return results
