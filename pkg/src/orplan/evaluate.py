"""Out-of-sample simulation, replication studies, sweeps, and comparisons.

Every study is a pure function of (instance, config, seed): per-cell seeds
are derived from the base seed with stable counter keys, cells may run in a
worker pool, and results are sorted before aggregation, so reruns (parallel
or not) reproduce results bit for bit.  Timing values are the only
nondeterministic outputs.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from orplan import benchmark
from orplan.core import REJECT, Instance, Schedule, first_stage_cost
from orplan.ingest import DurationDataset, SamplerSpec, ScenarioSet, sample_scenarios
from orplan.milp import MilpSolution, SolveParams, solve
from orplan.models import (
    MomentInfo,
    WdroConfig,
    build_mdro,
    build_saa,
    build_wdro,
    build_wdsba,
    extract_schedule,
)

QUANTILES = (0.20, 0.75, 0.80, 0.95)

#: Stream tags for counter-based seed derivation.
_STREAM_IN_SAMPLE = 1
_STREAM_EVAL = 2

MODEL_KINDS = ("saa", "wdro", "mdro", "wdsba")


def derive_seed(base: int, *keys: int) -> int:
    """Stable child seed from a base seed and integer counter keys."""
    ss = np.random.SeedSequence(entropy=[int(base), *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def nearest_rank(values: np.ndarray, q: float) -> float:
    """Nearest-rank quantile: the ceil(q*n)-th smallest value."""
    v = np.sort(np.asarray(values))
    idx = max(int(math.ceil(q * len(v))), 1) - 1
    return float(v[idx])


@dataclass(frozen=True)
class Metrics:
    """Out-of-sample cost/overtime/utilization distribution of a schedule."""

    mean_cost: float
    cost_quantiles: dict[float, float]
    overtime_hours_mean: float
    overtime_hours_quantiles: dict[float, float]
    utilization_pct_mean: float
    utilization_pct_quantiles: dict[float, float]
    scheduled_count: int
    rejected_count: int


def simulate_out_of_sample(
    inst: Instance, sched: Schedule, eval_set: ScenarioSet
) -> Metrics:
    """Evaluate a fixed schedule on fresh scenarios via closed-form recourse.

    Per scenario: total cost = first-stage cost + recourse cost; utilization
    over open blocks = (capacity - idle) / capacity * 100.  Re-optimizing the
    second stage is exact here because the recourse optimum has a closed form.
    """
    n_b = inst.n_blocks
    open_ids = (
        list(range(n_b)) if sched.open_blocks is None else sorted(sched.open_blocks)
    )
    assign = np.zeros((inst.n_surgeries, n_b))
    for i, b in sched.assignment.items():
        if b != REJECT:
            assign[i, b] = 1.0
    open_mask = np.zeros(n_b)
    open_mask[open_ids] = 1.0
    loads = eval_set.d @ assign + eval_set.e * open_mask  # (N', B)
    lengths = np.array([b.length for b in inst.blocks])
    co = np.array([b.overtime_rate for b in inst.blocks])
    cg = np.array([b.idle_rate for b in inst.blocks])
    over = np.maximum(loads - lengths, 0.0) * open_mask
    idle = np.maximum(lengths - loads, 0.0) * open_mask
    fs = first_stage_cost(inst, sched)
    costs = fs + over @ co + idle @ cg
    ot_hours = over.sum(axis=1) / 60.0
    cap = float((lengths * open_mask).sum())
    if cap > 0:
        util = (cap - idle.sum(axis=1)) / cap * 100.0
    else:
        util = np.zeros(eval_set.n)
    return Metrics(
        mean_cost=float(costs.mean()),
        cost_quantiles={q: nearest_rank(costs, q) for q in QUANTILES},
        overtime_hours_mean=float(ot_hours.mean()),
        overtime_hours_quantiles={q: nearest_rank(ot_hours, q) for q in QUANTILES},
        utilization_pct_mean=float(util.mean()),
        utilization_pct_quantiles={q: nearest_rank(util, q) for q in QUANTILES},
        scheduled_count=sched.scheduled_count(),
        rejected_count=sched.rejected_count(),
    )


def solve_model_kind(
    inst: Instance,
    kind: str,
    scen: ScenarioSet | None = None,
    epsilon: float = 0.0,
    params: SolveParams | None = None,
    moments: MomentInfo | None = None,
):
    """Build and solve one model kind; return (schedule, solution, model)."""
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    if kind == "saa":
        model = build_saa(inst, scen)
    elif kind == "wdro":
        model = build_wdro(inst, WdroConfig(epsilon=epsilon, scenarios=scen))
    elif kind == "wdsba":
        model = build_wdsba(inst, WdroConfig(epsilon=epsilon, scenarios=scen))
    else:
        model = build_mdro(inst, moments or MomentInfo.from_instance(inst))
    sol = solve(model, params)
    sched = None
    if sol.status == "optimal" or (sol.status == "limit" and sol.values):
        sched = extract_schedule(model, sol, require_optimal=False)
    return sched, sol, model


def objective_breakdown(model, sol: MilpSolution) -> dict[str, float]:
    """Split an optimal objective into first-stage and worst-case components."""
    meta = model.meta
    fs = sum(
        model.objective.get(name, 0.0) * sol.values[name]
        for name in meta["first_stage_vars"]
    )
    out = {"objective": sol.objective, "first_stage": fs}
    if "rho_var" in meta:
        rho = sol.values[meta["rho_var"]]
        out["rho"] = rho
        out["epsilon_rho"] = meta["epsilon"] * rho
        out["mean_eta"] = (
            sum(sol.values[v] for v in meta["eta_vars"]) / meta["n_scenarios"]
        )
        out["worst_case_recourse"] = sol.objective - fs
    else:
        out["second_stage"] = sol.objective - fs
    return out


def make_eval_set(
    inst: Instance,
    dataset: DurationDataset | None,
    n_prime: int,
    seed: int,
    kind: str = "empirical-resample",
    emergency_kind: str = "truncated-exponential",
) -> ScenarioSet:
    spec = SamplerSpec(
        kind=kind, emergency_kind=emergency_kind,
        seed=derive_seed(seed, _STREAM_EVAL), N=n_prime, dataset=dataset,
    )
    return sample_scenarios(inst, spec)


def in_sample_set(
    inst: Instance,
    dataset: DurationDataset | None,
    n: int,
    seed: int,
    rep: int,
    kind: str = "empirical-resample",
    emergency_kind: str = "truncated-exponential",
) -> ScenarioSet:
    spec = SamplerSpec(
        kind=kind, emergency_kind=emergency_kind,
        seed=derive_seed(seed, _STREAM_IN_SAMPLE, rep, n), N=n, dataset=dataset,
    )
    return sample_scenarios(inst, spec)


def _metrics_row(metrics: Metrics) -> dict:
    row = {
        "mean_cost": metrics.mean_cost,
        "mean_overtime_hours": metrics.overtime_hours_mean,
        "mean_utilization_pct": metrics.utilization_pct_mean,
        "scheduled": metrics.scheduled_count,
        "rejected": metrics.rejected_count,
    }
    for q in QUANTILES:
        row[f"cost_q{int(q * 100)}"] = metrics.cost_quantiles[q]
    return row


def _run_cell(task: tuple) -> dict:
    """One study cell: sample, solve, simulate.  Top level for pickling."""
    (inst, dataset, kind, eps, n, rep, seed, n_prime, params,
     in_kind, eval_kind, eval_set) = task
    row = {"model": kind, "epsilon": eps, "N": n, "rep": rep}
    try:
        scen = None
        if kind != "mdro":
            scen = in_sample_set(inst, dataset, n, seed, rep, in_kind)
        sched, sol, _ = solve_model_kind(
            inst, kind, scen=scen, epsilon=eps, params=params
        )
        row["status"] = sol.status
        row["solve_seconds"] = sol.runtime
        if sched is None:
            return row
        row["objective"] = sol.objective
        row["first_stage"] = first_stage_cost(inst, sched)
        if eval_set is None:
            eval_set = make_eval_set(inst, dataset, n_prime, seed, eval_kind)
        row.update(_metrics_row(simulate_out_of_sample(inst, sched, eval_set)))
    except Exception as exc:  # recorded per cell, never aborts the study
        row["status"] = f"error: {exc}"
    return row


def _run_cells(tasks: list[tuple], workers: int) -> list[dict]:
    if workers <= 1:
        return [_run_cell(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_cell, tasks))


def radius_sweep(
    inst: Instance,
    dataset: DurationDataset | None,
    eps_list: Sequence[float],
    n: int,
    reps: int,
    n_prime: int,
    seed: int,
    params: SolveParams | None = None,
    in_kind: str = "empirical-resample",
    eval_kind: str = "empirical-resample",
    workers: int = 1,
) -> list[dict]:
    """Out-of-sample cost of the Wasserstein model across radii.

    Replication ``rep`` uses the same in-sample draw for every radius, and
    all cells share one out-of-sample evaluation set; per-cell failures are
    recorded in the ``status`` column without aborting the sweep.
    """
    eval_set = make_eval_set(inst, dataset, n_prime, seed, eval_kind)
    tasks = [
        (inst, dataset, "wdro", float(eps), n, rep, seed, n_prime, params,
         in_kind, eval_kind, eval_set)
        for eps in eps_list
        for rep in range(reps)
    ]
    rows = _run_cells(tasks, workers)
    rows.sort(key=lambda r: (r["epsilon"], r["rep"]))
    return rows


def sweep_summary(rows: list[dict]) -> list[dict]:
    """Aggregate sweep rows into mean and 20/80 quantile bands per radius."""
    out = []
    for eps in sorted({r["epsilon"] for r in rows}):
        costs = np.array(
            [r["mean_cost"] for r in rows if r["epsilon"] == eps and "mean_cost" in r]
        )
        if len(costs) == 0:
            out.append({"epsilon": eps, "cells": 0})
            continue
        out.append({
            "epsilon": eps,
            "cells": len(costs),
            "mean_cost": float(costs.mean()),
            "q20": nearest_rank(costs, 0.20),
            "q80": nearest_rank(costs, 0.80),
        })
    return out


@dataclass(frozen=True)
class ReplicationStudy:
    """Configuration of one perfect-info / misspecification replication study."""

    models: tuple[str, ...] = ("saa", "wdro", "mdro")
    reps: int = 20
    n_list: tuple[int, ...] = (5, 10, 50, 100)
    n_prime: int = 10_000
    eps_list: tuple[float, ...] = (0.1, 10.0)
    seed: int = 0
    in_kind: str = "empirical-resample"
    eval_kind: str = "empirical-resample"

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise ValueError("need at least one replication")
        for kind in self.models:
            if kind not in MODEL_KINDS:
                raise ValueError(f"unknown model kind {kind!r}")
        if any(self.n_prime < n for n in self.n_list):
            raise ValueError("out-of-sample size must be at least the in-sample size")


def run_replication_study(
    inst: Instance,
    dataset: DurationDataset | None,
    study: ReplicationStudy,
    params: SolveParams | None = None,
    workers: int = 1,
) -> list[dict]:
    """Per-replication out-of-sample metrics for each (model, N, radius) cell.

    Scenario-free models are solved once and their metrics replicated across
    N columns, mirroring their independence from the sample.
    """
    eval_set = make_eval_set(
        inst, dataset, study.n_prime, study.seed, study.eval_kind
    )
    tasks = []
    for kind in study.models:
        if kind == "mdro":
            continue
        eps_values = study.eps_list if kind in ("wdro", "wdsba") else (0.0,)
        for eps in eps_values:
            for n in study.n_list:
                for rep in range(study.reps):
                    tasks.append(
                        (inst, dataset, kind, float(eps), n, rep, study.seed,
                         study.n_prime, params, study.in_kind, study.eval_kind,
                         eval_set)
                    )
    rows = _run_cells(tasks, workers)
    if "mdro" in study.models:
        sched, sol, _ = solve_model_kind(inst, "mdro", params=params)
        base = {
            "model": "mdro", "epsilon": 0.0, "status": sol.status,
            "solve_seconds": sol.runtime, "objective": sol.objective,
            "first_stage": first_stage_cost(inst, sched),
        }
        metrics = _metrics_row(simulate_out_of_sample(inst, sched, eval_set))
        for n in study.n_list:
            for rep in range(study.reps):
                rows.append({**base, "N": n, "rep": rep, **metrics})
    rows.sort(key=lambda r: (r["model"], r["epsilon"], r["N"], r["rep"]))
    return rows


def compare_policies(
    inst: Instance,
    dataset: DurationDataset | None,
    epsilon: float = 10.0,
    n: int = 10,
    reps: int = 5,
    n_prime: int = 10_000,
    seed: int = 0,
    rate_mults: Sequence[float] = (1.0, 2.0),
    cost_structures: dict[str, tuple[float, float]] | None = None,
    reserved_ors: tuple[str, ...] = benchmark.DEFAULT_RESERVED_ORS,
    params: SolveParams | None = None,
    workers: int = 1,
) -> list[dict]:
    """Flexible vs dedicated OR policies across cost structures and emergency
    rates, reporting metrics and the number of scheduled surgeries.

    The dedicated policy removes the reserved rooms' blocks from the elective
    pool and zeroes emergency load on the rest; the rate multiplier scales
    every block's mean emergency load.
    """
    cost_structures = cost_structures or {
        "cost1": benchmark.COST1, "cost2": benchmark.COST2
    }
    variants: list[tuple[str, str, float, Instance]] = []
    for cost_name, rates in sorted(cost_structures.items()):
        base = benchmark.with_cost_rates(inst, rates)
        for mult in rate_mults:
            flexible = benchmark.with_emergency_rate(base, mult)
            dedicated = benchmark.dedicated_variant(flexible, reserved_ors)
            variants.append((cost_name, "flexible", mult, flexible))
            variants.append((cost_name, "dedicated", mult, dedicated))
    rows: list[dict] = []
    for cost_name, policy, mult, variant in variants:
        cells = _run_cells(
            [
                (variant, dataset, "wdro", float(epsilon), n, rep, seed,
                 n_prime, params, "empirical-resample", "empirical-resample",
                 None)
                for rep in range(reps)
            ],
            workers,
        )
        for row in cells:
            row.update({"cost": cost_name, "policy": policy, "rate_mult": mult})
            rows.append(row)
    rows.sort(key=lambda r: (r["cost"], r["policy"], r["rate_mult"], r["rep"]))
    return rows


def timing_harness(
    sizes: Sequence[int],
    n_list: Sequence[int],
    cost_structures: dict[str, tuple[float, float]] | None = None,
    reps: int = 3,
    seed: int = 0,
    dataset: DurationDataset | None = None,
    params: SolveParams | None = None,
    models: Sequence[str] = ("wdro", "saa"),
    epsilon: float = 10.0,
) -> list[dict]:
    """Wall-clock solve times aggregated as min/avg/max per cell.

    Time-limit hits are counted as censored and excluded from the aggregates.
    """
    cost_structures = cost_structures or {
        "cost1": benchmark.COST1, "cost2": benchmark.COST2
    }
    dataset = dataset or benchmark.synthetic_duration_dataset()
    rows = []
    for cost_name, rates in sorted(cost_structures.items()):
        for size in sizes:
            inst = benchmark.benchmark_instance(size, rates, dataset)
            for n in n_list:
                for kind in models:
                    times = []
                    censored = 0
                    for rep in range(reps):
                        scen = in_sample_set(inst, dataset, n, seed, rep)
                        _, sol, _ = solve_model_kind(
                            inst, kind, scen=scen, epsilon=epsilon, params=params
                        )
                        if sol.status == "limit":
                            censored += 1
                        else:
                            times.append(sol.runtime)
                    row = {
                        "cost": cost_name, "model": kind, "I": size, "N": n,
                        "reps": reps, "censored": censored,
                    }
                    if times:
                        row.update({
                            "min_seconds": min(times),
                            "avg_seconds": sum(times) / len(times),
                            "max_seconds": max(times),
                        })
                    rows.append(row)
    return rows
